#include "tscn/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "tscn/errors.hpp"

namespace tscn {

namespace {

// Raised by decoders; the caller attaches field name and line.
struct BadValue : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string scalar_of(const YAML::Node& n, const char* expected) {
    if (!n.IsScalar()) throw BadValue(std::string("expected ") + expected);
    return n.Scalar();
}

double decode_double(const YAML::Node& n) {
    const std::string s = scalar_of(n, "a real number");
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw BadValue("expected a real number, got '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw BadValue("expected a real number, got '" + s + "'");
    }
}

std::uint64_t decode_unsigned(const YAML::Node& n) {
    const std::string s = scalar_of(n, "a nonnegative integer");
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw BadValue("expected a nonnegative integer, got '" + s + "'");
    }
    try {
        return std::stoull(s);
    } catch (const std::logic_error&) {
        throw BadValue("integer out of range: '" + s + "'");
    }
}

std::string fmt_double(double v) { return nlohmann::json(v).dump(); }
std::string fmt_string(const std::string& s) { return nlohmann::json(s).dump(); }

struct Field {
    std::string name;  // "section.key" or "key"
    std::function<void(RunConfig&, const YAML::Node&)> set;
    std::function<std::string(const RunConfig&)> show;
};

template <typename Get>
Field real_field(std::string name, Get get) {
    return {std::move(name), [get](RunConfig& c, const YAML::Node& n) { get(c) = decode_double(n); },
            [get](const RunConfig& c) { return fmt_double(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field count_field(std::string name, Get get) {
    return {std::move(name),
            [get](RunConfig& c, const YAML::Node& n) {
                get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(decode_unsigned(n));
            },
            [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field string_field(std::string name, Get get) {
    return {std::move(name), [get](RunConfig& c, const YAML::Node& n) { get(c) = scalar_of(n, "a string"); },
            [get](const RunConfig& c) { return fmt_string(get(const_cast<RunConfig&>(c))); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(string_field("dataset", [](RunConfig& c) -> auto& { return c.dataset; }));
        f.push_back(string_field("output", [](RunConfig& c) -> auto& { return c.output; }));
        f.push_back(count_field("seed", [](RunConfig& c) -> auto& { return c.seed; }));

        f.push_back(count_field("generator.num_train", [](RunConfig& c) -> auto& { return c.generator.num_train; }));
        f.push_back(count_field("generator.num_test", [](RunConfig& c) -> auto& { return c.generator.num_test; }));
        f.push_back(count_field("generator.length_min", [](RunConfig& c) -> auto& { return c.generator.length_min; }));
        f.push_back(count_field("generator.length_max", [](RunConfig& c) -> auto& { return c.generator.length_max; }));
        f.push_back(count_field("generator.num_classes", [](RunConfig& c) -> auto& { return c.generator.num_classes; }));
        f.push_back(count_field("generator.feature_dim", [](RunConfig& c) -> auto& { return c.generator.feature_dim; }));
        f.push_back(count_field("generator.actions_min", [](RunConfig& c) -> auto& { return c.generator.actions_min; }));
        f.push_back(count_field("generator.actions_max", [](RunConfig& c) -> auto& { return c.generator.actions_max; }));
        f.push_back(count_field("generator.classes_per_video_max",
                                [](RunConfig& c) -> auto& { return c.generator.classes_per_video_max; }));
        f.push_back(count_field("generator.action_length_min",
                                [](RunConfig& c) -> auto& { return c.generator.action_length_min; }));
        f.push_back(count_field("generator.action_length_max",
                                [](RunConfig& c) -> auto& { return c.generator.action_length_max; }));
        f.push_back(real_field("generator.rgb_signal", [](RunConfig& c) -> auto& { return c.generator.rgb_signal; }));
        f.push_back(real_field("generator.flow_signal", [](RunConfig& c) -> auto& { return c.generator.flow_signal; }));
        f.push_back(real_field("generator.rgb_noise", [](RunConfig& c) -> auto& { return c.generator.rgb_noise; }));
        f.push_back(real_field("generator.flow_noise", [](RunConfig& c) -> auto& { return c.generator.flow_noise; }));
        f.push_back(real_field("generator.rgb_false_positive_rate",
                               [](RunConfig& c) -> auto& { return c.generator.rgb_false_positive_rate; }));
        f.push_back(real_field("generator.flow_miss_rate",
                               [](RunConfig& c) -> auto& { return c.generator.flow_miss_rate; }));
        f.push_back(real_field("generator.flow_miss_residual",
                               [](RunConfig& c) -> auto& { return c.generator.flow_miss_residual; }));
        f.push_back(real_field("generator.rgb_scene_share",
                               [](RunConfig& c) -> auto& { return c.generator.rgb_scene_share; }));

        f.push_back(count_field("model.embed_dim", [](RunConfig& c) -> auto& { return c.model.embed_dim; }));
        f.push_back(count_field("model.conv_layers", [](RunConfig& c) -> auto& { return c.model.conv_layers; }));
        f.push_back(count_field("model.conv_kernel", [](RunConfig& c) -> auto& { return c.model.conv_kernel; }));

        f.push_back(real_field("loss.alpha", [](RunConfig& c) -> auto& { return c.loss.alpha; }));
        f.push_back(real_field("loss.gamma", [](RunConfig& c) -> auto& { return c.loss.gamma; }));
        f.push_back(count_field("loss.s", [](RunConfig& c) -> auto& { return c.loss.s; }));

        f.push_back(real_field("optimizer.learning_rate", [](RunConfig& c) -> auto& { return c.optimizer.learning_rate; }));
        f.push_back(real_field("optimizer.beta1", [](RunConfig& c) -> auto& { return c.optimizer.beta1; }));
        f.push_back(real_field("optimizer.beta2", [](RunConfig& c) -> auto& { return c.optimizer.beta2; }));
        f.push_back(real_field("optimizer.epsilon", [](RunConfig& c) -> auto& { return c.optimizer.epsilon; }));

        f.push_back(real_field("fusion.beta", [](RunConfig& c) -> auto& { return c.refinement.beta; }));

        f.push_back(real_field("refinement.theta", [](RunConfig& c) -> auto& { return c.refinement.theta; }));
        f.push_back({"refinement.kind",
                     [](RunConfig& c, const YAML::Node& n) {
                         try {
                             c.refinement.kind = pseudo_gt_kind_from_string(scalar_of(n, "soft or hard"));
                         } catch (const std::invalid_argument& e) {
                             throw BadValue(e.what());
                         }
                     },
                     [](const RunConfig& c) { return to_string(c.refinement.kind); }});
        f.push_back(count_field("refinement.iterations", [](RunConfig& c) -> auto& { return c.refinement.iterations; }));
        f.push_back(
            count_field("refinement.epochs_initial", [](RunConfig& c) -> auto& { return c.refinement.epochs_initial; }));
        f.push_back(
            count_field("refinement.epochs_refine", [](RunConfig& c) -> auto& { return c.refinement.epochs_refine; }));
        f.push_back({"refinement.smoothing_kernel",
                     [](RunConfig& c, const YAML::Node& n) {
                         if (n.IsNull() || (n.IsScalar() && (n.Scalar() == "null" || n.Scalar() == "~" ||
                                                             n.Scalar() == "off" || n.Scalar() == "0"))) {
                             c.refinement.smoothing_kernel.reset();
                         } else {
                             c.refinement.smoothing_kernel = static_cast<std::size_t>(decode_unsigned(n));
                         }
                     },
                     [](const RunConfig& c) {
                         return c.refinement.smoothing_kernel ? std::to_string(*c.refinement.smoothing_kernel)
                                                              : std::string("null");
                     }});

        f.push_back(count_field("localization.upsample_factor",
                                [](RunConfig& c) -> auto& { return c.localization.upsample_factor; }));
        f.push_back(real_field("localization.attention_threshold",
                               [](RunConfig& c) -> auto& { return c.localization.attention_threshold; }));
        f.push_back(count_field("localization.top_k", [](RunConfig& c) -> auto& { return c.localization.top_k; }));
        f.push_back(real_field("localization.class_score_floor",
                               [](RunConfig& c) -> auto& { return c.localization.class_score_floor; }));

        f.push_back({"evaluation.iou_thresholds",
                     [](RunConfig& c, const YAML::Node& n) {
                         if (!n.IsSequence()) throw BadValue("expected a list of reals");
                         std::vector<double> out;
                         for (const auto& e : n) out.push_back(decode_double(e));
                         c.iou_thresholds = std::move(out);
                     },
                     [](const RunConfig& c) {
                         std::string s = "[";
                         for (std::size_t i = 0; i < c.iou_thresholds.size(); ++i) {
                             if (i) s += ", ";
                             s += fmt_double(c.iou_thresholds[i]);
                         }
                         return s + "]";
                     }});
        return f;
    }();
    return table;
}

const Field* find_field(const std::string& name) {
    for (const auto& f : fields()) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

std::string where(const std::string& source, const YAML::Node& n) {
    return source + ":" + std::to_string(n.Mark().line + 1);
}

void set_field(RunConfig& config, const std::string& name, const YAML::Node& value, const std::string& loc) {
    const Field* f = find_field(name);
    if (!f) {
        throw ConfigError(loc + ": unknown field '" + name + "'");
    }
    try {
        f->set(config, value);
    } catch (const BadValue& e) {
        throw ConfigError(loc + ": field '" + name + "': " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    try {
        loss.validate();
        refinement.validate();
        localization.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(optimizer.learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate must be > 0");
    if (model.conv_kernel % 2 == 0) throw ConfigError("model.conv_kernel must be odd");
    if (model.embed_dim == 0) throw ConfigError("model.embed_dim must be >= 1");
    if (localization.beta != refinement.beta) throw ConfigError("localization beta differs from fusion.beta");
    for (double t : iou_thresholds) {
        if (!(t > 0.0 && t <= 1.0)) throw ConfigError("evaluation.iou_thresholds must lie in (0, 1]");
    }
}

RunConfig parse_run_config(const std::string& text, const std::string& source_name) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(source_name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    RunConfig config;
    if (root.IsNull()) {
        return config;
    }
    if (!root.IsMap()) {
        throw ConfigError(source_name + ":1: top level must be a mapping of fields and sections");
    }
    for (const auto& entry : root) {
        const std::string key = entry.first.Scalar();
        const YAML::Node& value = entry.second;
        const std::string loc = where(source_name, entry.first);
        if (value.IsMap()) {
            for (const auto& sub : value) {
                set_field(config, key + "." + sub.first.Scalar(), sub.second, where(source_name, sub.first));
            }
        } else {
            set_field(config, key, value, loc);
        }
    }
    config.localization.beta = config.refinement.beta;
    config.validate();
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + assignment + "' is not of the form field=value");
    }
    const std::string name = assignment.substr(0, eq);
    YAML::Node value;
    try {
        value = YAML::Load(assignment.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        throw ConfigError("override '" + assignment + "': " + e.msg);
    }
    set_field(config, name, value, "override");
    config.localization.beta = config.refinement.beta;
    config.validate();
}

std::string to_yaml(const RunConfig& config) {
    std::ostringstream os;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.name.find('.');
        if (dot == std::string::npos) {
            os << f.name << ": " << f.show(config) << '\n';
            continue;
        }
        const std::string sec = f.name.substr(0, dot);
        if (sec != section) {
            os << sec << ":\n";
            section = sec;
        }
        os << "  " << f.name.substr(dot + 1) << ": " << f.show(config) << '\n';
    }
    return os.str();
}

std::vector<std::string> run_config_fields() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.name);
    return out;
}

}  // namespace tscn
