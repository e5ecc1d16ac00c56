#include "tscn/synthdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tscn/errors.hpp"
#include "tscn/random.hpp"

namespace tscn {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

bool Dataset::evaluable() const {
    return !videos.empty() &&
           std::all_of(videos.begin(), videos.end(), [](const VideoSample& v) { return v.gt_segments.has_value(); });
}

const VideoSample& Dataset::find(const std::string& id) const {
    for (const auto& v : videos) {
        if (v.id == id) {
            return v;
        }
    }
    throw DataError("no video with id '" + id + "'");
}

void GeneratorConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("GeneratorConfig: " + what); };
    if (num_classes < 2) fail("num_classes must be >= 2");
    if (feature_dim < 2) fail("feature_dim must be >= 2");
    if (num_train + num_test == 0) fail("no videos requested");
    if (length_min == 0 || length_min > length_max) fail("length range is empty");
    if (actions_min == 0 || actions_min > actions_max) fail("actions range is empty");
    if (action_length_min == 0 || action_length_min > action_length_max) fail("action length range is empty");
    if (classes_per_video_max == 0) fail("classes_per_video_max must be >= 1");
    if (length_min < 2 * action_length_max + 1) {
        fail("length_min must leave room for an action and a confounder (>= 2 * action_length_max + 1)");
    }
    for (double rate : {rgb_false_positive_rate, flow_miss_rate, rgb_scene_share, flow_miss_residual}) {
        if (!(rate >= 0.0 && rate <= 1.0)) fail("rates, rgb_scene_share and flow_miss_residual must lie in [0, 1]");
    }
    for (double v : {rgb_signal, flow_signal, rgb_noise, flow_noise}) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail("signal and noise levels must be finite and >= 0");
    }
}

std::vector<double> signal_direction(const GeneratorConfig& config, SignalKind kind, std::size_t category) {
    // Directions are drawn in a fixed order (kind-major) and orthonormalized
    // against all earlier ones while the feature dimension allows, so every
    // pattern carries exactly its nominal energy and categories do not overlap.
    const std::size_t wanted = static_cast<std::size_t>(kind) * config.num_classes + category;
    std::vector<std::vector<double>> basis;
    for (std::size_t i = 0; i <= wanted; ++i) {
        Rng rng(derive_seed(config.seed, 0xd1, i / config.num_classes, i % config.num_classes));
        std::vector<double> dir(config.feature_dim);
        for (auto& v : dir) v = rng.normal();
        if (basis.size() < config.feature_dim) {
            for (const auto& b : basis) {
                double dot = 0.0;
                for (std::size_t d = 0; d < dir.size(); ++d) dot += dir[d] * b[d];
                for (std::size_t d = 0; d < dir.size(); ++d) dir[d] -= dot * b[d];
            }
        }
        double norm = 0.0;
        for (double v : dir) norm += v * v;
        norm = std::sqrt(norm);
        for (auto& v : dir) v /= norm;
        basis.push_back(std::move(dir));
    }
    return basis.back();
}

std::vector<double> rgb_action_pattern(const GeneratorConfig& config, std::size_t category) {
    const auto actor = signal_direction(config, SignalKind::rgb_actor, category);
    const auto scene = signal_direction(config, SignalKind::rgb_scene, category);
    const double a = config.rgb_signal * std::sqrt(1.0 - config.rgb_scene_share);
    const double b = config.rgb_signal * std::sqrt(config.rgb_scene_share);
    std::vector<double> out(actor.size());
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = a * actor[d] + b * scene[d];
    return out;
}

std::vector<double> rgb_confounder_pattern(const GeneratorConfig& config, std::size_t category) {
    auto out = signal_direction(config, SignalKind::rgb_scene, category);
    for (auto& v : out) v *= config.rgb_signal;
    return out;
}

std::vector<double> flow_action_pattern(const GeneratorConfig& config, std::size_t category) {
    auto out = signal_direction(config, SignalKind::flow_motion, category);
    for (auto& v : out) v *= config.flow_signal;
    return out;
}

namespace {

struct Span {
    std::size_t start;  // 0-based inclusive
    std::size_t end;    // 0-based inclusive
};

bool overlaps_with_gap(const Span& a, const Span& b) {
    // One background snippet must separate planted stretches.
    return !(a.end + 1 < b.start || b.end + 1 < a.start);
}

// Picks a uniformly random free position for a stretch of `length`, or
// nothing when it does not fit.
std::optional<Span> place(Rng& rng, std::size_t total, std::size_t length, const std::vector<Span>& taken) {
    if (length > total) {
        return std::nullopt;
    }
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + length <= total; ++s) {
        const Span candidate{s, s + length - 1};
        if (std::none_of(taken.begin(), taken.end(), [&](const Span& t) { return overlaps_with_gap(candidate, t); })) {
            starts.push_back(s);
        }
    }
    if (starts.empty()) {
        return std::nullopt;
    }
    const auto s = starts[static_cast<std::size_t>(rng.below(starts.size()))];
    return Span{s, s + length - 1};
}

double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

struct Patterns {
    std::vector<std::vector<double>> rgb_action;
    std::vector<std::vector<double>> rgb_confounder;
    std::vector<std::vector<double>> flow_action;
    std::vector<std::vector<double>> flow_slow;
};

VideoSample generate_video(const GeneratorConfig& cfg, const std::string& id, Rng& rng, const Patterns& patterns) {
    VideoSample video;
    video.id = id;
    const std::size_t length = rng.between(cfg.length_min, cfg.length_max);
    video.length = length;

    const std::size_t num_actions = rng.between(cfg.actions_min, cfg.actions_max);
    const std::size_t num_cats = rng.between(1, std::min({cfg.classes_per_video_max, num_actions, cfg.num_classes}));
    std::vector<std::size_t> cats(cfg.num_classes);
    std::iota(cats.begin(), cats.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(cats));
    cats.resize(num_cats);

    std::vector<Span> taken;
    std::optional<Span> confounder;
    if (rng.bernoulli(cfg.rgb_false_positive_rate)) {
        const std::size_t len = rng.between(cfg.action_length_min, cfg.action_length_max);
        confounder = place(rng, length, len, taken);
        if (confounder) {
            taken.push_back(*confounder);
        }
    }

    std::vector<Segment> segments;
    std::vector<bool> missed;
    for (std::size_t a = 0; a < num_actions; ++a) {
        const std::size_t cat = a < num_cats ? cats[a] : cats[static_cast<std::size_t>(rng.below(num_cats))];
        std::size_t len = rng.between(cfg.action_length_min, cfg.action_length_max);
        std::optional<Span> spot;
        for (; len >= cfg.action_length_min && !spot; --len) {
            spot = place(rng, length, len, taken);
        }
        const bool miss = rng.bernoulli(cfg.flow_miss_rate);
        if (!spot) {
            continue;
        }
        taken.push_back(*spot);
        segments.push_back({spot->start + 1, spot->end + 1, cat});
        missed.push_back(miss);
    }
    if (segments.empty()) {
        // The confounder split the video too finely; drop it so one action fits.
        confounder.reset();
        taken.clear();
        const auto spot = place(rng, length, cfg.action_length_min, taken);
        taken.push_back(*spot);
        segments.push_back({spot->start + 1, spot->end + 1, cats[0]});
        missed.push_back(false);
    }
    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return segments[a].start < segments[b].start; });

    std::vector<Segment> sorted;
    PlantedEvents planted;
    for (auto i : order) {
        sorted.push_back(segments[i]);
        if (missed[i]) {
            planted.flow_missed.push_back(segments[i]);
        }
    }

    video.label.assign(cfg.num_classes, 0.0);
    for (const auto& s : sorted) {
        video.label[s.category] = 1.0;
    }
    const double present = std::accumulate(video.label.begin(), video.label.end(), 0.0);
    for (auto& v : video.label) {
        v /= present;
    }

    if (confounder) {
        // The confounding scene belongs to one of the video's own actions.
        const auto& donor = sorted[static_cast<std::size_t>(rng.below(sorted.size()))];
        planted.rgb_confounders.push_back({confounder->start + 1, confounder->end + 1, donor.category});
    }

    video.rgb = Matrix(length, cfg.feature_dim);
    video.flow = Matrix(length, cfg.feature_dim);
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
            video.rgb(t, d) = cfg.rgb_noise * rng.normal();
        }
        for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
            video.flow(t, d) = cfg.flow_noise * rng.normal();
        }
    }
    auto add_signal = [&](Matrix& m, const Segment& s, const std::vector<double>& pattern) {
        for (std::size_t t = s.start - 1; t < s.end; ++t) {
            for (std::size_t d = 0; d < m.cols(); ++d) {
                m(t, d) += pattern[d];
            }
        }
    };
    for (const auto& s : sorted) {
        add_signal(video.rgb, s, patterns.rgb_action[s.category]);
        const bool suppressed = std::find(planted.flow_missed.begin(), planted.flow_missed.end(), s) !=
                                planted.flow_missed.end();
        add_signal(video.flow, s, suppressed ? patterns.flow_slow[s.category] : patterns.flow_action[s.category]);
    }
    for (const auto& s : planted.rgb_confounders) {
        add_signal(video.rgb, s, patterns.rgb_confounder[s.category]);
    }
    for (auto& v : video.rgb.values()) v = to_float_precision(v);
    for (auto& v : video.flow.values()) v = to_float_precision(v);

    video.gt_segments = std::move(sorted);
    video.planted = std::move(planted);
    return video;
}

}  // namespace

SyntheticDataset generate(const GeneratorConfig& config) {
    config.validate();
    Patterns patterns;
    for (std::size_t c = 0; c < config.num_classes; ++c) {
        patterns.rgb_action.push_back(rgb_action_pattern(config, c));
        patterns.rgb_confounder.push_back(rgb_confounder_pattern(config, c));
        patterns.flow_action.push_back(flow_action_pattern(config, c));
        auto slow = patterns.flow_action.back();
        for (auto& v : slow) v *= config.flow_miss_residual;
        patterns.flow_slow.push_back(std::move(slow));
    }

    auto make_split = [&](std::size_t count, const char* prefix, std::uint64_t split_tag) {
        Dataset ds;
        ds.num_classes = config.num_classes;
        ds.feature_dim = config.feature_dim;
        for (std::size_t c = 0; c < config.num_classes; ++c) {
            ds.class_names.push_back("action_" + std::to_string(c));
        }
        for (std::size_t i = 0; i < count; ++i) {
            Rng rng(derive_seed(config.seed, split_tag, i));
            char id[32];
            std::snprintf(id, sizeof id, "%s_%04zu", prefix, i);
            ds.videos.push_back(generate_video(config, id, rng, patterns));
        }
        return ds;
    };
    return {make_split(config.num_train, "train", 1), make_split(config.num_test, "test", 2)};
}

void validate_video(const VideoSample& video, std::size_t num_classes, std::size_t feature_dim) {
    auto fail = [&](const std::string& what) { throw DataError("video '" + video.id + "': " + what); };
    if (video.length == 0) fail("T must be >= 1");
    if (video.label.size() != num_classes) {
        fail("label has " + std::to_string(video.label.size()) + " entries, expected " + std::to_string(num_classes));
    }
    double total = 0.0;
    for (double v : video.label) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail("label entries must be finite and nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("label must sum to 1");
    for (const Matrix* m : {&video.rgb, &video.flow}) {
        if (m->rows() != video.length || m->cols() != feature_dim) {
            fail("feature matrix is " + std::to_string(m->rows()) + "x" + std::to_string(m->cols()) + ", expected " +
                 std::to_string(video.length) + "x" + std::to_string(feature_dim));
        }
        if (!m->all_finite()) fail("features contain non-finite values");
    }
    if (video.gt_segments) {
        for (const auto& s : *video.gt_segments) {
            if (s.start < 1 || s.start > s.end || s.end > video.length) {
                fail("segment [" + std::to_string(s.start) + ", " + std::to_string(s.end) + "] outside 1.." +
                     std::to_string(video.length));
            }
            if (s.category >= num_classes) fail("segment category out of range");
            if (!(video.label[s.category] > 0.0)) fail("segment category has no label mass");
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

float byte_swapped(float f) {
    auto u = std::bit_cast<std::uint32_t>(f);
    u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
    return std::bit_cast<float>(u);
}

void write_features(const Matrix& m, const fs::path& path) {
    std::vector<float> buf(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        buf[i] = static_cast<float>(m.values()[i]);
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (auto& f : buf) {
            f = byte_swapped(f);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

Matrix read_features(const fs::path& path, std::size_t rows, std::size_t cols) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw DataError("missing feature file " + path.string());
    }
    const auto bytes = fs::file_size(path, ec);
    if (ec) {
        throw DataError("cannot stat " + path.string());
    }
    const std::size_t row_bytes = cols * sizeof(float);
    if (bytes % row_bytes != 0) {
        throw DataError("corrupt feature file " + path.string() + ": " + std::to_string(bytes) +
                        " bytes is not a whole number of " + std::to_string(cols) + "-wide float32 rows");
    }
    if (bytes / row_bytes != rows) {
        throw DataError("shape mismatch in " + path.string() + ": manifest declares T=" + std::to_string(rows) +
                        " but the file holds " + std::to_string(bytes / row_bytes) + " rows of D=" +
                        std::to_string(cols));
    }
    std::vector<float> buf(rows * cols);
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!in) {
        throw DataError("short read on " + path.string());
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (auto& f : buf) {
            f = byte_swapped(f);
        }
    }
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < buf.size(); ++i) {
        m.values()[i] = static_cast<double>(buf[i]);
    }
    return m;
}

json segments_to_json(const std::vector<Segment>& segs) {
    json arr = json::array();
    for (const auto& s : segs) {
        arr.push_back({s.start, s.end, s.category});
    }
    return arr;
}

std::vector<Segment> segments_from_json(const json& arr, const std::string& where) {
    if (!arr.is_array()) {
        throw DataError(where + ": expected an array of [start, end, category_index]");
    }
    std::vector<Segment> out;
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 3) {
            throw DataError(where + ": segment entries must be [start, end, category_index]");
        }
        out.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<std::size_t>()});
    }
    return out;
}

}  // namespace

void save(const Dataset& dataset, const fs::path& directory) {
    fs::create_directories(directory / "features");
    json manifest;
    manifest["C"] = dataset.num_classes;
    manifest["D"] = dataset.feature_dim;
    manifest["class_names"] = dataset.class_names;
    if (dataset.seconds_per_snippet) {
        manifest["seconds_per_snippet"] = *dataset.seconds_per_snippet;
    }
    json videos = json::array();
    for (const auto& v : dataset.videos) {
        const std::string rgb_file = "features/" + v.id + "_rgb.f32";
        const std::string flow_file = "features/" + v.id + "_flow.f32";
        write_features(v.rgb, directory / rgb_file);
        write_features(v.flow, directory / flow_file);
        json entry;
        entry["id"] = v.id;
        entry["T"] = v.length;
        entry["label"] = v.label;
        entry["rgb_file"] = rgb_file;
        entry["flow_file"] = flow_file;
        if (v.gt_segments) {
            entry["gt_segments"] = segments_to_json(*v.gt_segments);
        }
        if (v.planted) {
            entry["planted"] = {{"rgb_confounders", segments_to_json(v.planted->rgb_confounders)},
                                {"flow_missed", segments_to_json(v.planted->flow_missed)}};
        }
        videos.push_back(std::move(entry));
    }
    manifest["videos"] = std::move(videos);

    std::ofstream out(directory / "manifest.json", std::ios::trunc);
    if (!out) {
        throw DataError("cannot write manifest in " + directory.string());
    }
    out << manifest.dump(2) << '\n';
}

Dataset load(const fs::path& directory) {
    const auto manifest_path = directory / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw DataError("missing manifest " + manifest_path.string());
    }
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
    }

    Dataset ds;
    try {
        ds.num_classes = manifest.at("C").get<std::size_t>();
        ds.feature_dim = manifest.at("D").get<std::size_t>();
        ds.class_names = manifest.at("class_names").get<std::vector<std::string>>();
        if (manifest.contains("seconds_per_snippet")) {
            ds.seconds_per_snippet = manifest["seconds_per_snippet"].get<double>();
        }
        if (ds.class_names.size() != ds.num_classes) {
            throw DataError("manifest lists " + std::to_string(ds.class_names.size()) + " class names for C=" +
                            std::to_string(ds.num_classes));
        }
        for (const auto& e : manifest.at("videos")) {
            VideoSample v;
            v.id = e.at("id").get<std::string>();
            v.length = e.at("T").get<std::size_t>();
            v.label = e.at("label").get<std::vector<double>>();
            v.rgb = read_features(directory / e.at("rgb_file").get<std::string>(), v.length, ds.feature_dim);
            v.flow = read_features(directory / e.at("flow_file").get<std::string>(), v.length, ds.feature_dim);
            if (e.contains("gt_segments")) {
                v.gt_segments = segments_from_json(e["gt_segments"], "video '" + v.id + "' gt_segments");
            }
            if (e.contains("planted")) {
                const auto& p = e["planted"];
                v.planted = PlantedEvents{segments_from_json(p.at("rgb_confounders"), v.id),
                                          segments_from_json(p.at("flow_missed"), v.id)};
            }
            validate_video(v, ds.num_classes, ds.feature_dim);
            ds.videos.push_back(std::move(v));
        }
    } catch (const json::exception& e) {
        throw DataError("manifest " + manifest_path.string() + ": " + e.what());
    }
    return ds;
}

}  // namespace tscn
