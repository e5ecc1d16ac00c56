#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "tscn/errors.hpp"
#include "tscn/synthdata.hpp"

using namespace tscn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("tscn_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

GeneratorConfig small_config(std::uint64_t seed = 0) {
    GeneratorConfig g;
    g.num_train = 8;
    g.num_test = 4;
    g.seed = seed;
    return g;
}

double norm(const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

// Squared projection of one snippet onto a unit direction.
double projected_energy(const Matrix& m, std::size_t t, const std::vector<double>& unit) {
    double dot = 0.0;
    for (std::size_t d = 0; d < m.cols(); ++d) dot += m(t, d) * unit[d];
    return dot * dot;
}

double squared_norm(const Matrix& m, std::size_t t) {
    double s = 0.0;
    for (std::size_t d = 0; d < m.cols(); ++d) s += m(t, d) * m(t, d);
    return s;
}

std::vector<double> unit(std::vector<double> v) {
    const double n = norm(v);
    for (auto& x : v) x /= n;
    return v;
}

bool inside(const std::vector<Segment>& segs, std::size_t t1) {
    for (const auto& s : segs)
        if (t1 >= s.start && t1 <= s.end) return true;
    return false;
}

struct Mean {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    double value() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
    const auto a = generate(small_config(3));
    const auto b = generate(small_config(3));
    const auto c = generate(small_config(4));
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK_FALSE(a.train == c.train);
}

TEST_CASE("generated videos satisfy label and segment invariants") {
    const auto data = generate(small_config(5));
    REQUIRE(data.train.videos.size() == 8);
    REQUIRE(data.test.videos.size() == 4);
    for (const auto* ds : {&data.train, &data.test}) {
        CHECK(ds->evaluable());
        for (const auto& v : ds->videos) {
            CHECK_NOTHROW(validate_video(v, ds->num_classes, ds->feature_dim));
            CHECK(v.length >= 40);
            CHECK(v.length <= 80);
            CHECK(std::abs(std::accumulate(v.label.begin(), v.label.end(), 0.0) - 1.0) <= 1e-9);
            for (std::size_t c = 0; c < ds->num_classes; ++c) {
                bool planted = false;
                for (const auto& s : *v.gt_segments) planted |= s.category == c;
                CHECK(planted == (v.label[c] > 0.0));
            }
            // Planted segments and the confounder never overlap.
            std::vector<int> owner(v.length + 1, 0);
            for (const auto& s : *v.gt_segments)
                for (std::size_t t = s.start; t <= s.end; ++t) ++owner[t];
            for (const auto& s : v.planted->rgb_confounders)
                for (std::size_t t = s.start; t <= s.end; ++t) ++owner[t];
            for (int o : owner) CHECK(o <= 1);
        }
    }
}

TEST_CASE("single action with zero rates appears in both modalities") {
    auto g = small_config(6);
    g.actions_min = g.actions_max = 1;
    g.rgb_false_positive_rate = 0.0;
    g.flow_miss_rate = 0.0;
    const auto data = generate(g);
    for (const auto& v : data.train.videos) {
        REQUIRE(v.gt_segments->size() == 1);
        CHECK(v.planted->rgb_confounders.empty());
        CHECK(v.planted->flow_missed.empty());
        const auto& s = v.gt_segments->front();
        const auto ru = unit(rgb_action_pattern(g, s.category));
        const auto fu = unit(flow_action_pattern(g, s.category));
        Mean rin, fin;
        for (std::size_t t = s.start; t <= s.end; ++t) {
            rin.add(projected_energy(v.rgb, t - 1, ru));
            fin.add(projected_energy(v.flow, t - 1, fu));
        }
        CHECK(rin.value() > 1.0);
        CHECK(fin.value() > 1.0);
    }
}

TEST_CASE("planted directions are orthonormal") {
    const GeneratorConfig g;
    std::vector<std::vector<double>> dirs;
    for (auto kind : {SignalKind::rgb_actor, SignalKind::flow_motion, SignalKind::rgb_scene})
        for (std::size_t c = 0; c < g.num_classes; ++c) dirs.push_back(signal_direction(g, kind, c));
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        CHECK(norm(dirs[i]) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t j = 0; j < i; ++j) {
            const double dot = std::inner_product(dirs[i].begin(), dirs[i].end(), dirs[j].begin(), 0.0);
            CHECK(std::abs(dot) < 1e-12);
        }
    }
    CHECK(norm(rgb_action_pattern(g, 2)) == doctest::Approx(g.rgb_signal));
    CHECK(norm(rgb_confounder_pattern(g, 2)) == doctest::Approx(g.rgb_signal));
    CHECK(norm(flow_action_pattern(g, 2)) == doctest::Approx(g.flow_signal));
}

TEST_CASE("action snippets carry more per-category energy than background") {
    auto g = small_config(7);
    g.num_train = 120;
    g.num_test = 0;
    const auto data = generate(g);
    std::vector<Mean> rgb_action(g.num_classes), rgb_bg(g.num_classes), flow_action(g.num_classes),
        flow_bg(g.num_classes);
    std::vector<std::vector<double>> ru, fu;
    for (std::size_t c = 0; c < g.num_classes; ++c) {
        ru.push_back(unit(rgb_action_pattern(g, c)));
        fu.push_back(unit(flow_action_pattern(g, c)));
    }
    for (const auto& v : data.train.videos) {
        for (const auto& s : *v.gt_segments) {
            const bool missed =
                std::find(v.planted->flow_missed.begin(), v.planted->flow_missed.end(), s) != v.planted->flow_missed.end();
            for (std::size_t t = s.start; t <= s.end; ++t) {
                rgb_action[s.category].add(projected_energy(v.rgb, t - 1, ru[s.category]));
                if (!missed) flow_action[s.category].add(projected_energy(v.flow, t - 1, fu[s.category]));
            }
        }
        for (std::size_t t = 1; t <= v.length; ++t) {
            if (inside(*v.gt_segments, t) || inside(v.planted->rgb_confounders, t)) continue;
            for (std::size_t c = 0; c < g.num_classes; ++c) {
                rgb_bg[c].add(projected_energy(v.rgb, t - 1, ru[c]));
                flow_bg[c].add(projected_energy(v.flow, t - 1, fu[c]));
            }
        }
    }
    for (std::size_t c = 0; c < g.num_classes; ++c) {
        CAPTURE(c);
        REQUIRE(rgb_action[c].n > 0);
        REQUIRE(flow_action[c].n > 0);
        CHECK(rgb_action[c].value() > rgb_bg[c].value());
        CHECK(flow_action[c].value() > flow_bg[c].value());
    }
}

TEST_CASE("confounders match action RGB energy and background flow energy") {
    auto g = small_config(8);
    g.num_train = 100;
    g.num_test = 0;
    g.rgb_false_positive_rate = 1.0;
    g.flow_miss_rate = 0.0;
    const auto data = generate(g);
    Mean rgb_conf, rgb_act, flow_conf, flow_bg;
    for (const auto& v : data.train.videos) {
        CHECK(v.planted->rgb_confounders.size() >= 1);
        for (const auto& s : v.planted->rgb_confounders) {
            for (std::size_t t = s.start; t <= s.end; ++t) {
                rgb_conf.add(squared_norm(v.rgb, t - 1));
                flow_conf.add(squared_norm(v.flow, t - 1));
            }
        }
        for (std::size_t t = 1; t <= v.length; ++t) {
            if (inside(*v.gt_segments, t)) {
                rgb_act.add(squared_norm(v.rgb, t - 1));
            } else if (!inside(v.planted->rgb_confounders, t)) {
                flow_bg.add(squared_norm(v.flow, t - 1));
            }
        }
    }
    // Expected squared norms: D * noise^2 + signal^2 = 44.25 for RGB inside
    // both kinds of event, D * noise^2 = 32 for flow outside actions.
    CHECK(rgb_conf.value() == doctest::Approx(rgb_act.value()).epsilon(0.05));
    CHECK(flow_conf.value() == doctest::Approx(flow_bg.value()).epsilon(0.05));
    CHECK(rgb_conf.value() > flow_conf.value() + 0.5 * g.rgb_signal * g.rgb_signal);
}

TEST_CASE("flow-missed actions keep only the residual flow signal") {
    auto g = small_config(9);
    g.num_train = 60;
    g.num_test = 0;
    g.flow_miss_rate = 0.5;
    const auto data = generate(g);
    Mean missed, kept;
    for (const auto& v : data.train.videos) {
        for (const auto& s : *v.gt_segments) {
            const auto u = unit(flow_action_pattern(g, s.category));
            const bool m =
                std::find(v.planted->flow_missed.begin(), v.planted->flow_missed.end(), s) != v.planted->flow_missed.end();
            for (std::size_t t = s.start; t <= s.end; ++t) (m ? missed : kept).add(projected_energy(v.flow, t - 1, u));
        }
    }
    REQUIRE(missed.n > 0);
    CHECK(missed.value() < kept.value());
}

TEST_CASE("generator config validation") {
    auto bad = [](auto mutate) {
        GeneratorConfig g;
        mutate(g);
        return g;
    };
    CHECK_NOTHROW(GeneratorConfig{}.validate());
    CHECK_THROWS_AS(generate(bad([](auto& g) { g.num_classes = 1; })), std::invalid_argument);
    CHECK_THROWS_AS(generate(bad([](auto& g) { g.feature_dim = 1; })), std::invalid_argument);
    CHECK_THROWS_AS(generate(bad([](auto& g) { g.rgb_false_positive_rate = 1.5; })), std::invalid_argument);
    CHECK_THROWS_AS(generate(bad([](auto& g) { g.flow_miss_rate = -0.1; })), std::invalid_argument);
    CHECK_THROWS_AS(generate(bad([](auto& g) { g.length_min = 90; })), std::invalid_argument);
    CHECK_THROWS_AS(generate(bad([](auto& g) { g.actions_min = 0; })), std::invalid_argument);
    CHECK_THROWS_AS(generate(bad([](auto& g) { g.rgb_noise = -1.0; })), std::invalid_argument);
}

TEST_CASE("save and load round trip is lossless") {
    const auto dir = scratch_dir("dataset_rt");
    auto data = generate(small_config(10)).train;
    data.seconds_per_snippet = 0.5;
    save(data, dir);
    const auto back = load(dir);
    CHECK(back == data);
}

TEST_CASE("loader rejects shape mismatches and corrupt files") {
    const auto dir = scratch_dir("dataset_bad");
    const auto data = generate(small_config(11)).train;
    save(data, dir);

    std::ifstream in(dir / "manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    const fs::path rgb = dir / manifest["videos"][0]["rgb_file"].get<std::string>();

    SUBCASE("one row short") {
        fs::resize_file(rgb, fs::file_size(rgb) - data.feature_dim * 4);
        CHECK_THROWS_AS(load(dir), DataError);
    }
    SUBCASE("partial row") {
        fs::resize_file(rgb, fs::file_size(rgb) - 3);
        CHECK_THROWS_AS(load(dir), DataError);
    }
    SUBCASE("missing feature file") {
        fs::remove(rgb);
        CHECK_THROWS_AS(load(dir), DataError);
    }
    SUBCASE("missing manifest") {
        fs::remove(dir / "manifest.json");
        CHECK_THROWS_AS(load(dir), DataError);
    }
    SUBCASE("malformed manifest") {
        std::ofstream(dir / "manifest.json") << "{ not json";
        CHECK_THROWS_AS(load(dir), DataError);
    }
    SUBCASE("segment outside the video") {
        auto m = manifest;
        m["videos"][0]["gt_segments"] = {{1, 1000, 0}};
        std::ofstream(dir / "manifest.json") << m.dump();
        CHECK_THROWS_AS(load(dir), DataError);
    }
}

TEST_CASE("datasets without ground truth load but are not evaluable") {
    const auto dir = scratch_dir("dataset_nogt");
    auto data = generate(small_config(12)).test;
    for (auto& v : data.videos) {
        v.gt_segments.reset();
        v.planted.reset();
    }
    save(data, dir);
    const auto back = load(dir);
    CHECK_FALSE(back.evaluable());
    for (const auto& v : back.videos) CHECK_FALSE(v.gt_segments.has_value());
    CHECK_THROWS_AS(back.find("no_such_video"), DataError);
}
