// tscn: generate synthetic data, train the two-stream consensus model,
// localize, evaluate and plot.
//
// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tscn/tscn.hpp"

namespace fs = std::filesystem;
using namespace tscn;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::string> data;
    std::optional<std::string> run;
    std::optional<std::uint64_t> seed;

    RunConfig resolve() const {
        RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        for (const auto& o : overrides) apply_override(c, o);
        if (data) c.dataset = *data;
        if (run) c.output = *run;
        if (seed) c.seed = *seed;
        return c;
    }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("-c,--config", common.config_path, "YAML run configuration");
    cmd->add_option("--set", common.overrides, "Override a config field, e.g. --set refinement.iterations=0")
        ->take_all();
    cmd->add_option("--data", common.data, "Dataset root holding train/ and test/ (overrides config)");
    cmd->add_option("--run", common.run, "Run directory for checkpoints and outputs (overrides config)");
    cmd->add_option("--seed", common.seed, "Seed (overrides config)");
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path checkpoint_path(const fs::path& run, std::size_t iteration, Modality m) {
    return run / "checkpoints" / ("iter" + std::to_string(iteration) + "_" + to_string(m) + ".ckpt");
}

fs::path pseudo_gt_path(const fs::path& run, std::size_t iteration, const std::string& video) {
    return run / "pseudo_gt" / ("iter" + std::to_string(iteration)) / (video + ".csv");
}

std::string pseudo_gt_csv(const PseudoGroundTruth& g) {
    std::string s = "snippet,value\n";
    char buf[64];
    for (std::size_t t = 0; t < g.values.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", t + 1, g.values[t]);
        s += buf;
    }
    return s;
}

std::optional<std::vector<double>> read_pseudo_gt(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    std::istringstream in(read_text(path));
    std::string line;
    std::getline(in, line);
    std::vector<double> values;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError("malformed pseudo GT row in " + path.string());
        values.push_back(std::stod(line.substr(comma + 1)));
    }
    return values;
}

Dataset load_split(const RunConfig& c, const std::string& split) {
    if (split != "train" && split != "test") throw UsageError("--split must be train or test");
    return load(fs::path(c.dataset) / split);
}

// Latest iteration with both checkpoints present, unless one was requested.
std::size_t pick_iteration(const fs::path& run, std::optional<std::size_t> requested) {
    if (requested) {
        for (auto m : {Modality::rgb, Modality::flow}) {
            if (!fs::exists(checkpoint_path(run, *requested, m))) {
                throw DataError("missing checkpoint " + checkpoint_path(run, *requested, m).string());
            }
        }
        return *requested;
    }
    std::optional<std::size_t> last;
    for (std::size_t n = 0;; ++n) {
        if (!fs::exists(checkpoint_path(run, n, Modality::rgb)) || !fs::exists(checkpoint_path(run, n, Modality::flow))) {
            break;
        }
        last = n;
    }
    if (!last) throw DataError("no checkpoints under " + (run / "checkpoints").string());
    return *last;
}

struct Streams {
    StreamModel rgb;
    StreamModel flow;
};

Streams load_streams(const fs::path& run, std::size_t iteration, const Dataset& data) {
    Streams s{load_checkpoint(checkpoint_path(run, iteration, Modality::rgb)),
              load_checkpoint(checkpoint_path(run, iteration, Modality::flow))};
    if (s.rgb.modality != Modality::rgb || s.flow.modality != Modality::flow) {
        throw DataError("checkpoint modality does not match its file name");
    }
    check_compatible(s.rgb, data);
    check_compatible(s.flow, data);
    return s;
}

ProposalSource source_from_string(const std::string& s) {
    if (s == "fused") return ProposalSource::fused;
    if (s == "rgb") return ProposalSource::rgb;
    if (s == "flow") return ProposalSource::flow;
    throw UsageError("--source must be fused, rgb or flow");
}

std::vector<std::string> video_ids(const Dataset& d) {
    std::vector<std::string> ids;
    for (const auto& v : d.videos) ids.push_back(v.id);
    return ids;
}

// ---- gen-data ---------------------------------------------------------------

struct GenArgs {
    Common common;
    std::string out;
    std::optional<std::size_t> videos, test_videos, classes, dim;
};

int cmd_gen_data(const GenArgs& a) {
    RunConfig c = a.common.resolve();
    GeneratorConfig g = c.generator;
    g.seed = c.seed;
    if (a.videos) g.num_train = *a.videos;
    if (a.test_videos) g.num_test = *a.test_videos;
    if (a.classes) g.num_classes = *a.classes;
    if (a.dim) g.feature_dim = *a.dim;
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto data = generate(g);
    const fs::path out(a.out);
    save(data.train, out / "train");
    save(data.test, out / "test");

    auto stats = [](const char* name, const Dataset& d) {
        std::size_t snippets = 0, segments = 0, confounders = 0, missed = 0;
        for (const auto& v : d.videos) {
            snippets += v.length;
            segments += v.gt_segments ? v.gt_segments->size() : 0;
            if (v.planted) {
                confounders += v.planted->rgb_confounders.size();
                missed += v.planted->flow_missed.size();
            }
        }
        std::printf("%-5s videos=%zu snippets=%zu segments=%zu rgb_confounders=%zu flow_missed=%zu\n", name,
                    d.videos.size(), snippets, segments, confounders, missed);
    };
    std::printf("wrote %s (C=%zu, D=%zu, seed=%llu)\n", out.string().c_str(), g.num_classes, g.feature_dim,
                static_cast<unsigned long long>(g.seed));
    stats("train", data.train);
    stats("test", data.test);
    return kOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    Common common;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
    const RunConfig c = a.common.resolve();
    const Dataset train = load_split(c, "train");
    ModelConfig mc = c.model;
    mc.input_dim = train.feature_dim;
    mc.num_classes = train.num_classes;

    const fs::path run(c.output);
    fs::create_directories(run);
    write_text(run / "effective_config.yaml", to_yaml(c));

    EpochObserver observer;
    if (!a.quiet) {
        observer = [](const TrainingLogRow& r) {
            if (r.epoch == 1 || r.epoch % 10 == 0) {
                std::fprintf(stderr, "iter %zu epoch %3zu %-4s total %.6f\n", r.iteration, r.epoch,
                             to_string(r.stream).c_str(), r.mean_total_loss);
            }
        };
    }
    const auto result = run_refinement(train, mc, c.loss, c.refinement, c.optimizer, c.seed, observer);

    fs::create_directories(run / "checkpoints");
    for (const auto& it : result.iterations) {
        save_checkpoint(it.rgb, it.rgb_info, checkpoint_path(run, it.iteration, Modality::rgb));
        save_checkpoint(it.flow, it.flow_info, checkpoint_path(run, it.iteration, Modality::flow));
    }
    for (std::size_t n = 1; n < result.pseudo_gt.size(); ++n) {
        for (const auto& g : result.pseudo_gt[n]) write_text(pseudo_gt_path(run, n, g.video_id), pseudo_gt_csv(g));
    }
    write_text(run / "train_log.csv", result.log.to_csv());

    std::string stats = "iteration,mean_value,foreground_fraction,snippets\n";
    char buf[128];
    for (const auto& s : result.log.pseudo_gt) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%zu\n", s.iteration, s.mean_value, s.foreground_fraction,
                      s.snippets);
        stats += buf;
    }
    write_text(run / "pseudo_gt_stats.csv", stats);

    for (const auto& it : result.iterations) {
        std::printf("iteration %zu: rgb epoch %zu loss %.6f, flow epoch %zu loss %.6f\n", it.iteration,
                    it.rgb_info.epoch, it.rgb_info.epoch_mean_loss, it.flow_info.epoch, it.flow_info.epoch_mean_loss);
    }
    std::printf("wrote %zu checkpoints to %s\n", 2 * result.iterations.size(), (run / "checkpoints").string().c_str());
    return kOk;
}

// ---- localize / eval --------------------------------------------------------

struct LocalizeArgs {
    Common common;
    std::optional<std::size_t> iteration;
    std::string split = "test";
    std::string source = "fused";
    std::optional<std::string> out;
};

int cmd_localize(const LocalizeArgs& a) {
    const RunConfig c = a.common.resolve();
    const Dataset data = load_split(c, a.split);
    const fs::path run(c.output);
    const std::size_t n = pick_iteration(run, a.iteration);
    const Streams s = load_streams(run, n, data);
    const auto props = localize_dataset(s.rgb, s.flow, data, c.localization, source_from_string(a.source));
    const fs::path out = a.out ? fs::path(*a.out) : run / ("proposals_iter" + std::to_string(n) + ".json");
    write_text(out, proposals_to_json(props, data.class_names, video_ids(data)));
    std::printf("iteration %zu: %zu proposals over %zu videos -> %s\n", n, props.size(), data.videos.size(),
                out.string().c_str());
    return kOk;
}

struct EvalArgs {
    Common common;
    std::optional<std::size_t> iteration;
    std::optional<std::string> proposals;
    std::string split = "test";
    std::string source = "fused";
    std::optional<std::string> out;
};

int cmd_eval(const EvalArgs& a) {
    const RunConfig c = a.common.resolve();
    const Dataset data = load_split(c, a.split);
    if (!data.evaluable()) throw DataError("dataset split '" + a.split + "' has no ground truth");
    const fs::path run(c.output);

    std::vector<ActionProposal> props;
    std::string tag;
    if (a.proposals) {
        props = proposals_from_json(read_text(*a.proposals), data.class_names);
        tag = fs::path(*a.proposals).stem().string();
    } else {
        const std::size_t n = pick_iteration(run, a.iteration);
        const Streams s = load_streams(run, n, data);
        props = localize_dataset(s.rgb, s.flow, data, c.localization, source_from_string(a.source));
        tag = "iter" + std::to_string(n) + (a.source == "fused" ? "" : "_" + a.source);
    }
    const auto report = evaluate(props, ground_truth_of(data), data.num_classes, c.iou_thresholds);
    const fs::path out = a.out ? fs::path(*a.out) : run / ("report_" + tag);
    write_text(out / "report.json", report.to_json(data.class_names));
    const std::string table = report.to_table(data.class_names);
    write_text(out / "report.txt", table);
    std::fputs(table.c_str(), stdout);
    return kOk;
}

// ---- plot -------------------------------------------------------------------

struct PlotArgs {
    Common common;
    std::optional<std::size_t> iteration;
    std::string split = "test";
    std::vector<std::string> videos;
    std::optional<std::string> out;
};

int cmd_plot(const PlotArgs& a) {
    const RunConfig c = a.common.resolve();
    const Dataset data = load_split(c, a.split);
    const fs::path run(c.output);
    const std::size_t n = pick_iteration(run, a.iteration);
    const Streams s = load_streams(run, n, data);
    const fs::path out = a.out ? fs::path(*a.out) : run / ("plots_iter" + std::to_string(n));

    std::size_t written = 0;
    for (const auto& v : data.videos) {
        if (!a.videos.empty() && std::find(a.videos.begin(), a.videos.end(), v.id) == a.videos.end()) continue;
        const auto r = forward(s.rgb, v.rgb);
        const auto f = forward(s.flow, v.flow);
        const auto props = localize(v.id, r, f, c.localization);
        // Pseudo GT consumed by the next iteration, when this run dumped it.
        const auto pg = read_pseudo_gt(pseudo_gt_path(run, n + 1, v.id));
        const auto plot = make_plot_data(v, r, f, c.localization.beta, c.localization.upsample_factor, props,
                                         pg ? &*pg : nullptr);
        write_text(out / (v.id + ".csv"), plot_csv(plot));
        write_text(out / (v.id + ".svg"), plot_svg(plot, data.class_names));
        ++written;
    }
    if (written == 0) throw DataError("no matching videos to plot");
    std::printf("wrote %zu plots to %s\n", written, out.string().c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stream consensus network for weakly supervised temporal action localization"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic two-modality dataset (train/ and test/)");
    add_common(gen_cmd, gen.common);
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--videos", gen.videos, "Number of training videos");
    gen_cmd->add_option("--test-videos", gen.test_videos, "Number of test videos");
    gen_cmd->add_option("--classes", gen.classes, "Number of action classes");
    gen_cmd->add_option("--dim", gen.dim, "Feature dimension per modality");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train both streams with iterative pseudo-GT refinement");
    add_common(train_cmd, train.common);
    train_cmd->add_flag("-q,--quiet", train.quiet, "No per-epoch progress on stderr");

    LocalizeArgs loc;
    auto* loc_cmd = app.add_subcommand("localize", "Write action proposals for a dataset split");
    add_common(loc_cmd, loc.common);
    loc_cmd->add_option("--iteration", loc.iteration, "Refinement iteration to load (default: latest)");
    loc_cmd->add_option("--split", loc.split, "train or test")->capture_default_str();
    loc_cmd->add_option("--source", loc.source, "fused, rgb or flow")->capture_default_str();
    loc_cmd->add_option("--out", loc.out, "Proposals JSON path");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score proposals (or checkpoints) against ground truth");
    add_common(eval_cmd, ev.common);
    eval_cmd->add_option("--iteration", ev.iteration, "Refinement iteration to load (default: latest)");
    eval_cmd->add_option("--proposals", ev.proposals, "Evaluate this proposals JSON instead of checkpoints");
    eval_cmd->add_option("--split", ev.split, "train or test")->capture_default_str();
    eval_cmd->add_option("--source", ev.source, "fused, rgb or flow")->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Report directory");

    PlotArgs plot;
    auto* plot_cmd = app.add_subcommand("plot", "Emit per-video attention CSV and SVG plots");
    add_common(plot_cmd, plot.common);
    plot_cmd->add_option("--iteration", plot.iteration, "Refinement iteration to load (default: latest)");
    plot_cmd->add_option("--split", plot.split, "train or test")->capture_default_str();
    plot_cmd->add_option("--video", plot.videos, "Only these video ids");
    plot_cmd->add_option("--out", plot.out, "Plot directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen_data(gen);
        if (*train_cmd) return cmd_train(train);
        if (*loc_cmd) return cmd_localize(loc);
        if (*eval_cmd) return cmd_eval(ev);
        if (*plot_cmd) return cmd_plot(plot);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
