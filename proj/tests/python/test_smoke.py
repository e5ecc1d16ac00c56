import math

import numpy as np
import pytest

import tscn


def small_data(seed=3):
    g = tscn.GeneratorConfig()
    g.num_train = 6
    g.num_test = 3
    g.num_classes = 3
    g.feature_dim = 8
    g.seed = seed
    return tscn.generate(g)


def model_config(ds):
    mc = tscn.ModelConfig()
    mc.input_dim = ds.feature_dim
    mc.embed_dim = ds.feature_dim
    mc.num_classes = ds.num_classes
    return mc


def test_loss_examples():
    value, grad = tscn.classification_loss([1, 0], [0.25, 0.75])
    assert abs(value - 1.386294361119891) <= 1e-9
    assert len(grad) == 2
    value, grad = tscn.attention_norm_loss([0.9, 0.8, 0.1, 0.2], 8)
    assert abs(value + 0.8) <= 1e-9
    assert grad == [-1.0, 0.0, 1.0, 0.0]
    value, _ = tscn.pseudo_gt_loss([0.2, 0.9, 0.4], [0, 1, 1])
    assert abs(value - 0.41 / 3) <= 1e-9


def test_shape_errors_map_to_value_error():
    with pytest.raises(ValueError):
        tscn.classification_loss([1, 0], [1, 0, 0])


def test_generate_and_forward():
    train, test = small_data()
    assert len(train) == 6 and len(test) == 3
    video = train.videos[0]
    assert video.rgb.shape == (video.length, 8)
    model = tscn.init_stream_model(model_config(train), tscn.Modality.rgb, 1)
    out = tscn.forward(model, video.rgb)
    assert len(out["attention"]) == video.length
    assert out["tcam"].shape == (video.length, 3)
    assert math.isclose(sum(out["video_prediction"]), 1.0, rel_tol=1e-12)
    assert np.allclose(out["tcam"].sum(axis=1), 1.0)


def test_pseudo_gt_and_fusion():
    assert tscn.make_pseudo_gt([0.5, 0.51, 0.2], tscn.PseudoGtKind.hard, 0.5) == [0.0, 1.0, 0.0]
    assert tscn.make_pseudo_gt([0.5, 0.51], tscn.PseudoGtKind.soft, 0.5) == [0.5, 0.51]
    assert tscn.fuse_attention([1.0, 0.0], [0.0, 1.0], 0.4) == pytest.approx([0.4, 0.6])


def test_localization_helpers():
    assert tscn.extract_segments([0.2, 0.7, 0.8, 0.3, 0.9], 0.5) == [(2, 3), (5, 5)]
    box = [0.0] * 16
    for i in range(4, 8):
        box[i] = 1.0
    assert tscn.oic_score(5, 8, box) == pytest.approx(1.0)
    assert tscn.upsample_linear([1.0, 1.0], 8) == [1.0] * 16


def test_evaluation_fixture():
    gt = [
        tscn.GroundTruthSegment("v1", 0, 10, 0),
        tscn.GroundTruthSegment("v1", 20, 30, 1),
        tscn.GroundTruthSegment("v2", 5, 15, 0),
        tscn.GroundTruthSegment("v3", 0, 8, 1),
    ]
    props = [
        tscn.ActionProposal("v1", 1, 10, 0, 0.9),
        tscn.ActionProposal("v2", 30, 40, 0, 0.8),
        tscn.ActionProposal("v2", 6, 15, 0, 0.7),
        tscn.ActionProposal("v3", 0, 8, 1, 0.6),
        tscn.ActionProposal("v1", 0, 5, 1, 0.5),
    ]
    rep = tscn.evaluate(props, gt, 2, [0.5])
    assert rep.map_at(0.5) == pytest.approx(2 / 3)
    assert rep.precision == pytest.approx(0.6)
    assert rep.recall == pytest.approx(0.75)


def test_short_training_run_is_deterministic(tmp_path):
    train, test = small_data()
    rc = tscn.RefinementConfig()
    rc.iterations = 1
    rc.epochs_initial = 2
    rc.epochs_refine = 1
    runs = [tscn.run_refinement(train, model_config(train), refinement=rc, seed=5) for _ in range(2)]
    assert runs[0].log_csv() == runs[1].log_csv()
    assert len(runs[0].iterations) == 2
    assert len(runs[0].pseudo_gt[1]) == len(train)

    last = runs[0].iterations[-1]
    rep = tscn.evaluate_models(last.rgb, last.flow, test)
    assert 0.0 <= rep.map_at(0.5) <= 1.0

    path = tmp_path / "rgb.ckpt"
    tscn.save_checkpoint(last.rgb, last.rgb_info, path)
    model, info = tscn.load_checkpoint(path)
    assert info.epoch == last.rgb_info.epoch
    video = test.videos[0]
    assert tscn.forward(model, video.rgb)["attention"] == tscn.forward(last.rgb, video.rgb)["attention"]


def test_dataset_round_trip(tmp_path):
    train, _ = small_data()
    tscn.save_dataset(train, tmp_path / "train")
    again = tscn.load_dataset(tmp_path / "train")
    assert len(again) == len(train)
    assert np.array_equal(again.videos[0].rgb, train.videos[0].rgb)
