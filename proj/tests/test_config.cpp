#include <doctest.h>

#include <string>

#include "tscn/errors.hpp"
#include "tscn/run_config.hpp"

using namespace tscn;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_run_config(text, "run.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("defaults carry the published hyperparameters") {
    const RunConfig c;
    CHECK(c.loss.s == 8);
    CHECK(c.loss.alpha == 0.1);
    CHECK(c.loss.gamma == 2.0);
    CHECK(c.refinement.beta == 0.4);
    CHECK(c.refinement.theta == 0.5);
    CHECK(c.optimizer.learning_rate == 1e-4);
    CHECK(c.localization.upsample_factor == 8);
    CHECK(c.localization.attention_threshold == 0.5);
    CHECK(c.localization.top_k == 2);
    CHECK(c.localization.class_score_floor == 0.1);
    CHECK(c.refinement.iterations == 4);
    CHECK(c.refinement.epochs_initial == 80);
    CHECK(c.refinement.epochs_refine == 40);
    CHECK_FALSE(c.refinement.smoothing_kernel.has_value());
    CHECK(c.model.conv_layers == 2);
    CHECK(c.model.conv_kernel == 3);
}

TEST_CASE("empty text yields defaults and round trips") {
    const auto c = parse_run_config("");
    CHECK(to_yaml(c) == to_yaml(RunConfig{}));
    CHECK(to_yaml(parse_run_config(to_yaml(c))) == to_yaml(c));
}

TEST_CASE("every field survives a round trip") {
    const std::string text = R"(seed: 17
dataset: "some/where"
output: runs/x
generator:
  num_train: 12
  rgb_signal: 2.75
  flow_miss_residual: 0.25
loss:
  alpha: 0.3
  s: 4
optimizer:
  learning_rate: 0.001
fusion:
  beta: 0.55
refinement:
  theta: 0.55
  kind: soft
  iterations: 2
  smoothing_kernel: 5
localization:
  top_k: 3
evaluation:
  iou_thresholds: [0.3, 0.5]
)";
    const auto c = parse_run_config(text);
    CHECK(c.seed == 17);
    CHECK(c.dataset == "some/where");
    CHECK(c.generator.num_train == 12);
    CHECK(c.generator.rgb_signal == 2.75);
    CHECK(c.loss.s == 4);
    CHECK(c.refinement.kind == PseudoGtKind::soft);
    CHECK(c.refinement.smoothing_kernel == std::optional<std::size_t>{5});
    CHECK(c.refinement.beta == 0.55);
    CHECK(c.localization.beta == 0.55);
    CHECK(c.iou_thresholds == std::vector<double>{0.3, 0.5});
    const auto again = parse_run_config(to_yaml(c));
    CHECK(to_yaml(again) == to_yaml(c));
    CHECK(again.optimizer.learning_rate == 0.001);
}

TEST_CASE("real values round trip exactly") {
    RunConfig c;
    c.loss.alpha = 0.1 + 0.2;
    c.optimizer.epsilon = 1.0 / 3.0;
    const auto back = parse_run_config(to_yaml(c));
    CHECK(back.loss.alpha == c.loss.alpha);
    CHECK(back.optimizer.epsilon == c.optimizer.epsilon);
}

TEST_CASE("errors name the field and the line") {
    const auto unknown = error_of("seed: 1\nloss:\n  alpah: 0.2\n");
    CHECK(unknown.find("run.yaml:3") != std::string::npos);
    CHECK(unknown.find("loss.alpah") != std::string::npos);

    const auto bad_type = error_of("refinement:\n  iterations: many\n");
    CHECK(bad_type.find("run.yaml:2") != std::string::npos);
    CHECK(bad_type.find("refinement.iterations") != std::string::npos);

    const auto bad_kind = error_of("refinement:\n  kind: fuzzy\n");
    CHECK(bad_kind.find("refinement.kind") != std::string::npos);

    const auto syntax = error_of("loss: [1, 2\n");
    CHECK(syntax.find("run.yaml:") != std::string::npos);

    CHECK_FALSE(error_of("refinement:\n  theta: 1.5\n").empty());
    CHECK_FALSE(error_of("loss:\n  s: 0\n").empty());
    CHECK_FALSE(error_of("optimizer:\n  learning_rate: 0\n").empty());
    CHECK_FALSE(error_of("- 1\n- 2\n").empty());
    CHECK_FALSE(error_of("seed: -3\n").empty());
}

TEST_CASE("overrides use dotted names") {
    RunConfig c;
    apply_override(c, "refinement.iterations=0");
    CHECK(c.refinement.iterations == 0);
    apply_override(c, "fusion.beta=0.7");
    CHECK(c.localization.beta == 0.7);
    apply_override(c, "refinement.smoothing_kernel=off");
    CHECK_FALSE(c.refinement.smoothing_kernel.has_value());
    CHECK_THROWS_AS(apply_override(c, "refinement.iterations"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "nope=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "loss.alpha=abc"), ConfigError);
}

TEST_CASE("field list matches the emitted yaml") {
    const auto yaml = to_yaml(RunConfig{});
    for (const auto& name : run_config_fields()) {
        const auto leaf = name.substr(name.find('.') == std::string::npos ? 0 : name.find('.') + 1);
        CHECK(yaml.find(leaf + ":") != std::string::npos);
    }
}

TEST_CASE("missing config file") {
    CHECK_THROWS_AS(load_run_config("/nonexistent/run.yaml"), ConfigError);
}
