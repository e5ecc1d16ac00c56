#include "tscn/plotting.hpp"

#include <cstdio>
#include <sstream>

#include "tscn/consensus.hpp"
#include "tscn/errors.hpp"

namespace tscn {

VideoPlotData make_plot_data(const VideoSample& video, const AttentionTcam& rgb, const AttentionTcam& flow,
                             double beta, std::size_t upsample_factor, const std::vector<ActionProposal>& proposals,
                             const std::vector<double>* pseudo_gt) {
    VideoPlotData d;
    d.video_id = video.id;
    d.upsample_factor = upsample_factor;
    d.rgb = upsample_linear(rgb.attention, upsample_factor);
    d.flow = upsample_linear(flow.attention, upsample_factor);
    d.fused = fuse_attention(d.rgb, d.flow, beta);
    d.time.resize(d.fused.size());
    for (std::size_t j = 0; j < d.time.size(); ++j) {
        d.time[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(upsample_factor);
    }
    if (pseudo_gt) {
        if (pseudo_gt->size() != video.length) {
            throw ShapeError("make_plot_data: pseudo ground truth length does not match the video");
        }
        std::vector<double> up(d.time.size());
        for (std::size_t j = 0; j < up.size(); ++j) up[j] = (*pseudo_gt)[j / upsample_factor];
        d.pseudo_gt = std::move(up);
    }
    if (video.gt_segments) d.ground_truth = *video.gt_segments;
    for (const auto& p : proposals) {
        if (p.video_id == video.id) d.proposals.push_back(p);
    }
    return d;
}

std::string plot_csv(const VideoPlotData& d) {
    std::ostringstream os;
    os << "time,A_rgb,A_flow,A_fuse" << (d.pseudo_gt ? ",pseudo_gt" : "") << '\n';
    char buf[160];
    for (std::size_t j = 0; j < d.time.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g,%.9g", d.time[j], d.rgb[j], d.flow[j], d.fused[j]);
        os << buf;
        if (d.pseudo_gt) {
            std::snprintf(buf, sizeof buf, ",%.9g", (*d.pseudo_gt)[j]);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

namespace {

constexpr double kWidth = 900.0;
constexpr double kLeft = 90.0;
constexpr double kRowHeight = 60.0;
constexpr double kGap = 14.0;

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string plot_svg(const VideoPlotData& d, const std::vector<std::string>& class_names) {
    const double duration = d.time.empty() ? 1.0 : static_cast<double>(d.time.size()) / d.upsample_factor;
    const double plot_w = kWidth - kLeft - 20.0;
    auto x_of = [&](double t) { return kLeft + plot_w * t / duration; };

    struct Row {
        const char* name;
        const std::vector<double>* values;
        const char* color;
    };
    std::vector<Row> rows = {{"RGB", &d.rgb, "#d62728"}, {"Flow", &d.flow, "#1f77b4"}, {"Fusion", &d.fused, "#2ca02c"}};
    if (d.pseudo_gt) rows.push_back({"Pseudo GT", &*d.pseudo_gt, "#9467bd"});

    const double boxes_top = 30.0 + static_cast<double>(rows.size()) * (kRowHeight + kGap);
    const double height = boxes_top + 2.0 * (24.0 + kGap) + 20.0;

    std::ostringstream os;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "font-family=\"sans-serif\" font-size=\"12\">\n",
                  kWidth, height);
    os << buf;
    os << "<title>" << escape(d.video_id) << "</title>\n";
    os << "<text x=\"10\" y=\"18\" font-weight=\"bold\">" << escape(d.video_id) << "</text>\n";

    double top = 30.0;
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf,
                      "<g class=\"attention-row\" data-name=\"%s\">\n"
                      "<text x=\"10\" y=\"%.1f\">%s</text>\n"
                      "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#ccc\"/>\n",
                      row.name, top + kRowHeight / 2.0, row.name, kLeft, top, plot_w, kRowHeight);
        os << buf;
        os << "<polyline fill=\"none\" stroke=\"" << row.color << "\" stroke-width=\"1.2\" points=\"";
        const auto& v = *row.values;
        for (std::size_t j = 0; j < v.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", j ? " " : "", x_of(d.time[j]),
                          top + kRowHeight * (1.0 - v[j]));
            os << buf;
        }
        os << "\"/>\n";
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
                      kLeft, top + kRowHeight * 0.5, kLeft + plot_w, top + kRowHeight * 0.5);
        os << buf << "</g>\n";
        top += kRowHeight + kGap;
    }

    auto label_of = [&](std::size_t c) { return c < class_names.size() ? class_names[c] : std::to_string(c); };

    std::snprintf(buf, sizeof buf, "<text x=\"10\" y=\"%.1f\">GT</text>\n", boxes_top + 16.0);
    os << buf;
    for (const auto& s : d.ground_truth) {
        const double x0 = x_of(static_cast<double>(s.start - 1));
        const double x1 = x_of(static_cast<double>(s.end));
        std::snprintf(buf, sizeof buf,
                      "<rect class=\"gt\" x=\"%.2f\" y=\"%.1f\" width=\"%.2f\" height=\"24\" fill=\"#444\" "
                      "fill-opacity=\"0.6\"><title>%s</title></rect>\n",
                      x0, boxes_top, x1 - x0, escape(label_of(s.category)).c_str());
        os << buf;
    }
    const double prop_top = boxes_top + 24.0 + kGap;
    std::snprintf(buf, sizeof buf, "<text x=\"10\" y=\"%.1f\">Proposals</text>\n", prop_top + 16.0);
    os << buf;
    for (const auto& p : d.proposals) {
        const double x0 = x_of(p.start);
        const double x1 = x_of(p.end);
        std::snprintf(buf, sizeof buf,
                      "<rect class=\"proposal\" x=\"%.2f\" y=\"%.1f\" width=\"%.2f\" height=\"24\" fill=\"#ff7f0e\" "
                      "fill-opacity=\"0.5\" stroke=\"#ff7f0e\"><title>%s %.4f</title></rect>\n",
                      x0, prop_top, x1 - x0, escape(label_of(p.category)).c_str(), p.score);
        os << buf;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace tscn
