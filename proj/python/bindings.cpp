#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "tscn/tscn.hpp"

namespace py = pybind11;
using namespace tscn;

namespace {

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Two-stream consensus network for weakly supervised temporal action localization";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::enum_<Modality>(m, "Modality").value("rgb", Modality::rgb).value("flow", Modality::flow);
    py::enum_<PseudoGtKind>(m, "PseudoGtKind").value("soft", PseudoGtKind::soft).value("hard", PseudoGtKind::hard);
    py::enum_<ProposalSource>(m, "ProposalSource")
        .value("fused", ProposalSource::fused)
        .value("rgb", ProposalSource::rgb)
        .value("flow", ProposalSource::flow);

    // Data ------------------------------------------------------------------
    py::class_<Segment>(m, "Segment")
        .def(py::init<>())
        .def_readwrite("start", &Segment::start)
        .def_readwrite("end", &Segment::end)
        .def_readwrite("category", &Segment::category)
        .def("__repr__", [](const Segment& s) {
            return "Segment(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ", " +
                   std::to_string(s.category) + ")";
        });

    py::class_<VideoSample>(m, "VideoSample")
        .def_readonly("id", &VideoSample::id)
        .def_readonly("length", &VideoSample::length)
        .def_readonly("label", &VideoSample::label)
        .def_readonly("gt_segments", &VideoSample::gt_segments)
        .def_property_readonly("rgb", [](const VideoSample& v) { return to_array(v.rgb); })
        .def_property_readonly("flow", [](const VideoSample& v) { return to_array(v.flow); });

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("num_classes", &Dataset::num_classes)
        .def_readonly("feature_dim", &Dataset::feature_dim)
        .def_readonly("class_names", &Dataset::class_names)
        .def_readonly("videos", &Dataset::videos)
        .def("evaluable", &Dataset::evaluable)
        .def("__len__", [](const Dataset& d) { return d.videos.size(); });

    py::class_<GeneratorConfig>(m, "GeneratorConfig")
        .def(py::init<>())
        .def_readwrite("num_train", &GeneratorConfig::num_train)
        .def_readwrite("num_test", &GeneratorConfig::num_test)
        .def_readwrite("length_min", &GeneratorConfig::length_min)
        .def_readwrite("length_max", &GeneratorConfig::length_max)
        .def_readwrite("num_classes", &GeneratorConfig::num_classes)
        .def_readwrite("feature_dim", &GeneratorConfig::feature_dim)
        .def_readwrite("rgb_signal", &GeneratorConfig::rgb_signal)
        .def_readwrite("flow_signal", &GeneratorConfig::flow_signal)
        .def_readwrite("rgb_false_positive_rate", &GeneratorConfig::rgb_false_positive_rate)
        .def_readwrite("flow_miss_rate", &GeneratorConfig::flow_miss_rate)
        .def_readwrite("seed", &GeneratorConfig::seed);

    m.def("generate", [](const GeneratorConfig& c) {
        auto d = generate(c);
        return py::make_tuple(std::move(d.train), std::move(d.test));
    }, py::arg("config") = GeneratorConfig{}, "Generate (train, test) synthetic datasets.");
    m.def("save_dataset", &save, py::arg("dataset"), py::arg("directory"));
    m.def("load_dataset", &load, py::arg("directory"));

    // Losses ----------------------------------------------------------------
    py::class_<LossConfig>(m, "LossConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &LossConfig::alpha)
        .def_readwrite("gamma", &LossConfig::gamma)
        .def_readwrite("s", &LossConfig::s);

    m.def("classification_loss", [](const std::vector<double>& y, const std::vector<double>& p) {
        const auto r = classification_loss(y, p);
        return py::make_tuple(r.value, r.grad);
    }, py::arg("label"), py::arg("prediction"), "Cross entropy; returns (value, grad).");
    m.def("attention_norm_loss", [](const std::vector<double>& a, std::size_t s) {
        const auto r = attention_norm_loss(a, s);
        return py::make_tuple(r.value, r.grad);
    }, py::arg("attention"), py::arg("s") = 8, "Attention normalization; returns (value, grad).");
    m.def("pseudo_gt_loss", [](const std::vector<double>& a, const std::vector<double>& g) {
        const auto r = pseudo_gt_loss(a, g);
        return py::make_tuple(r.value, r.grad);
    }, py::arg("attention"), py::arg("pseudo_gt"), "Mean squared error; returns (value, grad).");

    // Model -----------------------------------------------------------------
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("input_dim", &ModelConfig::input_dim)
        .def_readwrite("embed_dim", &ModelConfig::embed_dim)
        .def_readwrite("num_classes", &ModelConfig::num_classes);

    py::class_<StreamModel>(m, "StreamModel")
        .def_readonly("config", &StreamModel::config)
        .def_readonly("modality", &StreamModel::modality)
        .def_property_readonly("parameter_count", [](const StreamModel& s) { return s.params.parameter_count(); });

    m.def("init_stream_model", &init_stream_model, py::arg("config"), py::arg("modality"), py::arg("seed") = 0);
    m.def("forward", [](const StreamModel& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        const auto out = forward(model, to_matrix(x));
        py::dict d;
        d["attention"] = out.attention;
        d["tcam"] = to_array(out.tcam);
        d["video_prediction"] = out.video_prediction;
        return d;
    }, py::arg("model"), py::arg("features"), "Run one stream; returns attention, tcam and video_prediction.");

    py::class_<CheckpointInfo>(m, "CheckpointInfo")
        .def(py::init<>())
        .def_readwrite("seed", &CheckpointInfo::seed)
        .def_readwrite("iteration", &CheckpointInfo::iteration)
        .def_readwrite("epoch", &CheckpointInfo::epoch)
        .def_readwrite("epoch_mean_loss", &CheckpointInfo::epoch_mean_loss);
    m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("info"), py::arg("path"));
    m.def("load_checkpoint", [](const std::filesystem::path& p) {
        CheckpointInfo info;
        auto model = load_checkpoint(p, &info);
        return py::make_tuple(std::move(model), info);
    }, py::arg("path"));

    // Consensus -------------------------------------------------------------
    py::class_<RefinementConfig>(m, "RefinementConfig")
        .def(py::init<>())
        .def_readwrite("beta", &RefinementConfig::beta)
        .def_readwrite("theta", &RefinementConfig::theta)
        .def_readwrite("kind", &RefinementConfig::kind)
        .def_readwrite("iterations", &RefinementConfig::iterations)
        .def_readwrite("epochs_initial", &RefinementConfig::epochs_initial)
        .def_readwrite("epochs_refine", &RefinementConfig::epochs_refine)
        .def_readwrite("smoothing_kernel", &RefinementConfig::smoothing_kernel);

    py::class_<OptimizerConfig>(m, "OptimizerConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &OptimizerConfig::learning_rate)
        .def_readwrite("beta1", &OptimizerConfig::beta1)
        .def_readwrite("beta2", &OptimizerConfig::beta2)
        .def_readwrite("epsilon", &OptimizerConfig::epsilon);

    m.def("fuse_attention", [](const std::vector<double>& r, const std::vector<double>& f, double beta) {
        return fuse_attention(r, f, beta);
    }, py::arg("rgb"), py::arg("flow"), py::arg("beta") = 0.4);
    m.def("make_pseudo_gt", [](const std::vector<double>& fused, PseudoGtKind kind, double theta) {
        return make_pseudo_gt(fused, kind, theta).values;
    }, py::arg("fused"), py::arg("kind") = PseudoGtKind::hard, py::arg("theta") = 0.5);

    py::class_<IterationCheckpoints>(m, "IterationCheckpoints")
        .def_readonly("iteration", &IterationCheckpoints::iteration)
        .def_readonly("rgb", &IterationCheckpoints::rgb)
        .def_readonly("flow", &IterationCheckpoints::flow)
        .def_readonly("rgb_info", &IterationCheckpoints::rgb_info)
        .def_readonly("flow_info", &IterationCheckpoints::flow_info);

    py::class_<RefinementResult>(m, "RefinementResult")
        .def_readonly("iterations", &RefinementResult::iterations)
        .def_property_readonly("pseudo_gt", [](const RefinementResult& r) {
            std::vector<std::vector<std::vector<double>>> out;
            for (const auto& it : r.pseudo_gt) {
                auto& row = out.emplace_back();
                for (const auto& g : it) row.push_back(g.values);
            }
            return out;
        })
        .def("log_csv", [](const RefinementResult& r) { return r.log.to_csv(); });

    m.def("run_refinement",
          [](const Dataset& train, const ModelConfig& mc, const LossConfig& lc, const RefinementConfig& rc,
             const OptimizerConfig& oc, std::uint64_t seed) {
              py::gil_scoped_release release;
              return run_refinement(train, mc, lc, rc, oc, seed);
          },
          py::arg("train"), py::arg("model_config"), py::arg("loss_config") = LossConfig{},
          py::arg("refinement") = RefinementConfig{}, py::arg("optimizer") = OptimizerConfig{}, py::arg("seed") = 0);

    // Localization and evaluation -------------------------------------------
    py::class_<LocalizationConfig>(m, "LocalizationConfig")
        .def(py::init<>())
        .def_readwrite("upsample_factor", &LocalizationConfig::upsample_factor)
        .def_readwrite("attention_threshold", &LocalizationConfig::attention_threshold)
        .def_readwrite("top_k", &LocalizationConfig::top_k)
        .def_readwrite("class_score_floor", &LocalizationConfig::class_score_floor)
        .def_readwrite("beta", &LocalizationConfig::beta);

    py::class_<ActionProposal>(m, "ActionProposal")
        .def(py::init([](std::string vid, double s, double e, std::size_t c, double score) {
                 return ActionProposal{std::move(vid), s, e, c, score};
             }),
             py::arg("video_id"), py::arg("start"), py::arg("end"), py::arg("category"), py::arg("score"))
        .def_readwrite("video_id", &ActionProposal::video_id)
        .def_readwrite("start", &ActionProposal::start)
        .def_readwrite("end", &ActionProposal::end)
        .def_readwrite("category", &ActionProposal::category)
        .def_readwrite("score", &ActionProposal::score);

    py::class_<GroundTruthSegment>(m, "GroundTruthSegment")
        .def(py::init([](std::string vid, double s, double e, std::size_t c) {
                 return GroundTruthSegment{std::move(vid), s, e, c};
             }),
             py::arg("video_id"), py::arg("start"), py::arg("end"), py::arg("category"))
        .def_readwrite("video_id", &GroundTruthSegment::video_id)
        .def_readwrite("start", &GroundTruthSegment::start)
        .def_readwrite("end", &GroundTruthSegment::end)
        .def_readwrite("category", &GroundTruthSegment::category);

    m.def("upsample_linear", [](const std::vector<double>& x, std::size_t f) { return upsample_linear(x, f); },
          py::arg("sequence"), py::arg("factor") = 8);
    m.def("extract_segments", [](const std::vector<double>& a, double th) { return extract_segments(a, th); },
          py::arg("attention"), py::arg("threshold") = 0.5);
    m.def("oic_score", [](std::size_t s, std::size_t e, const std::vector<double>& w) { return oic_score(s, e, w); },
          py::arg("start"), py::arg("end"), py::arg("weights"));
    m.def("localize_dataset", &localize_dataset, py::arg("rgb"), py::arg("flow"), py::arg("dataset"),
          py::arg("config") = LocalizationConfig{}, py::arg("source") = ProposalSource::fused);
    m.def("ground_truth_of", &ground_truth_of, py::arg("dataset"));
    m.def("iou", [](double a0, double a1, double b0, double b1) { return iou({a0, a1}, {b0, b1}); });

    py::class_<EvalReport>(m, "EvalReport")
        .def("map_at", &EvalReport::map_at)
        .def_readonly("average_map", &EvalReport::average_map)
        .def_readonly("precision", &EvalReport::precision)
        .def_readonly("recall", &EvalReport::recall)
        .def_readonly("f_measure", &EvalReport::f_measure)
        .def_readonly("notes", &EvalReport::notes)
        .def("to_json", &EvalReport::to_json, py::arg("class_names"));

    m.def("evaluate",
          [](const std::vector<ActionProposal>& p, const std::vector<GroundTruthSegment>& g, std::size_t c,
             const std::vector<double>& th) { return evaluate(p, g, c, th); },
          py::arg("proposals"), py::arg("ground_truth"), py::arg("num_classes"),
          py::arg("thresholds") = std::vector<double>{0.5});
    m.def("evaluate_models",
          [](const StreamModel& rgb, const StreamModel& flow, const Dataset& d, const LocalizationConfig& lc,
             const std::vector<double>& th, ProposalSource src) { return evaluate_models(rgb, flow, d, lc, th, src); },
          py::arg("rgb"), py::arg("flow"), py::arg("dataset"), py::arg("config") = LocalizationConfig{},
          py::arg("thresholds") = thumos_thresholds(), py::arg("source") = ProposalSource::fused);
    m.def("thumos_thresholds", &thumos_thresholds);
}
