#pragma once
//
// Run configuration: one YAML file covering every module's knobs. Defaults
// follow the published hyperparameters where they exist; the rest are
// documented next to each field in README.md.
//

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tscn/basemodel.hpp"
#include "tscn/consensus.hpp"
#include "tscn/localization.hpp"
#include "tscn/losses.hpp"
#include "tscn/synthdata.hpp"

namespace tscn {

struct RunConfig {
    std::string dataset = "data";    // directory holding train/ and test/ splits
    std::string output = "runs/default";
    std::uint64_t seed = 0;
    GeneratorConfig generator;
    ModelConfig model;               // input_dim / num_classes come from the dataset
    LossConfig loss;
    OptimizerConfig optimizer;
    RefinementConfig refinement;
    LocalizationConfig localization; // beta is kept equal to refinement.beta
    std::vector<double> iou_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    void validate() const;
};

// Parses YAML text. Unknown fields and bad values raise ConfigError naming
// the field and its 1-based line in `source_name`.
RunConfig parse_run_config(const std::string& text, const std::string& source_name = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

// Applies a dotted override such as "refinement.iterations=0".
void apply_override(RunConfig& config, const std::string& assignment);

// Fully resolved configuration; parse_run_config(to_yaml(c)) reproduces c.
std::string to_yaml(const RunConfig& config);

std::vector<std::string> run_config_fields();

}  // namespace tscn
