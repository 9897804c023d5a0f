import numpy as np
import pytest

from tsvmorph.architectures import ArchitectureId, build
from tsvmorph.engine import Model, SGD
from tsvmorph.errors import EmptyClass, OverlappingSplits, TsvMorphError, UnlabeledRecord
from tsvmorph.manifest import CropRecord, MorphologyLabel
from tsvmorph.surface import GrayImage
from tsvmorph.training import (
    History,
    Metrics,
    SweepCell,
    SweepReport,
    TrainConfig,
    evaluate,
    one_hot,
    records_to_arrays,
    sweep,
    sweep_cells,
    synthetic_dataset,
    train,
)

LABELS = list(MorphologyLabel)


def record(label, seed=0, split="train", source_id=""):
    rng = np.random.default_rng(seed)
    img = GrayImage.from_array(rng.integers(0, 256, (54, 54), dtype=np.uint8))
    return CropRecord(image=img, label=label, split=split,
                      source_id=source_id or f"{split}_{label.value}_{seed}")


def balanced(n_per_class, split, seed0=0):
    return [record(l, seed=seed0 + 10_000 * l.index + i, split=split)
            for l in LABELS for i in range(n_per_class)]


class _StubModel:
    """Deterministic fake predictor for metric tests."""

    def __init__(self, predict_fn):
        self.predict_fn = predict_fn

    def forward(self, x, train=False, rng=None):
        n = len(x)
        probs = np.zeros((n, 3), dtype=np.float32)
        for i in range(n):
            probs[i, self.predict_fn(x[i])] = 1.0
        return probs


def test_config_validation():
    with pytest.raises(TsvMorphError):
        TrainConfig(epochs=0).validate()
    with pytest.raises(TsvMorphError):
        TrainConfig(dropout=1.0).validate()
    with pytest.raises(TsvMorphError):
        TrainConfig(aug_type=6).validate()
    TrainConfig().validate()


def test_evaluate_perfect_predictor():
    recs = balanced(67, "test")
    _x, y = records_to_arrays(recs)
    # evaluate() walks records in order, so an iterator replays the true labels
    order = iter(y.tolist())
    model = _StubModel(lambda img, it=order: next(it))
    metrics = evaluate(model, recs)
    assert metrics.total_accuracy == 1.0
    assert np.array_equal(np.diag(metrics.confusion), [67, 67, 67])


def test_evaluate_constant_predictor():
    recs = balanced(67, "test")
    model = _StubModel(lambda img: 0)
    metrics = evaluate(model, recs)
    assert metrics.total_accuracy == pytest.approx(1 / 3)
    assert metrics.per_class_accuracy == (1.0, 0.0, 0.0)


def test_metrics_hand_arithmetic():
    confusion = np.array([[60, 4, 3], [5, 58, 4], [2, 6, 59]])
    m = Metrics.from_confusion(confusion, epoch=1)
    assert m.per_class_accuracy == (60 / 67, 58 / 67, 59 / 67)
    assert m.total_accuracy == pytest.approx(177 / 201)
    assert round(m.per_class_accuracy[0], 3) == 0.896
    assert round(m.per_class_accuracy[1], 3) == 0.866
    assert round(m.per_class_accuracy[2], 3) == 0.881
    assert round(m.total_accuracy, 3) == 0.881


def test_total_accuracy_is_label_weighted_mean_of_per_class():
    confusion = np.array([[20, 3, 1], [2, 31, 5], [4, 0, 14]])
    m = Metrics.from_confusion(confusion, epoch=1)
    counts = confusion.sum(axis=1)
    weighted = sum(a * c for a, c in zip(m.per_class_accuracy, counts)) / counts.sum()
    assert m.total_accuracy == pytest.approx(weighted)


def test_evaluate_rejects_unlabeled():
    rng = np.random.default_rng(0)
    rec = CropRecord(image=GrayImage.from_array(
        rng.integers(0, 256, (54, 54), dtype=np.uint8)))
    with pytest.raises(UnlabeledRecord):
        evaluate(_StubModel(lambda img: 0), [rec])


def test_overlapping_splits_rejected():
    train_recs = balanced(2, "train")
    test_recs = [record(LABELS[0], seed=1, split="test",
                        source_id=train_recs[0].source_id)]
    cfg = TrainConfig(arch=ArchitectureId.LENET5, epochs=1, batch_size=3)
    with pytest.raises(OverlappingSplits):
        train(cfg, train_recs, test_recs)


def test_empty_class_rejected():
    train_recs = [record(LABELS[0], seed=i) for i in range(4)]
    test_recs = balanced(1, "test")
    cfg = TrainConfig(arch=ArchitectureId.LENET5, epochs=1, batch_size=3)
    with pytest.raises(EmptyClass):
        train(cfg, train_recs, test_recs)


def test_imbalance_warning():
    train_recs = balanced(10, "train") + [record(LABELS[0], seed=900 + i)
                                          for i in range(5)]
    test_recs = balanced(1, "test")
    cfg = TrainConfig(arch=ArchitectureId.LENET5, epochs=1, batch_size=8)
    with pytest.warns(UserWarning, match="imbalance"):
        train(cfg, train_recs, test_recs)


def test_overfit_three_sample_toy_set():
    # memorization sanity: training loss < 0.01 within 500 epochs
    recs = [record(l, seed=l.index) for l in LABELS]
    x, y = records_to_arrays(recs)
    onehot = one_hot(y)
    model = Model.from_layer_specs(build(ArchitectureId.LENET5).layers, seed=0)
    opt = SGD(lr=0.003, momentum=0.9)
    rng = np.random.default_rng(0)
    loss = np.inf
    for _ in range(500):
        loss, _ = model.loss_and_grads(x, onehot, train=True, rng=rng)
        opt.step(model)
        if loss < 0.01:
            break
    assert loss < 0.01


def test_training_is_deterministic_bit_identical():
    train_recs = balanced(4, "train")
    test_recs = balanced(2, "test", seed0=500)
    cfg = TrainConfig(arch=ArchitectureId.LENET5, epochs=3, batch_size=4,
                      strict_determinism=True, seed=11)
    histories = []
    for _ in range(2):
        _, hist = train(cfg, train_recs, test_recs)
        histories.append(hist)
    a, b = histories
    assert len(a.epochs) == len(b.epochs)
    for ma, mb in zip(a.epochs, b.epochs):
        assert np.array_equal(ma.confusion, mb.confusion)
        assert ma.total_accuracy == mb.total_accuracy
        assert ma.per_class_accuracy == mb.per_class_accuracy


def test_train_checkpoints_best_epoch(tmp_path):
    train_recs = balanced(4, "train")
    test_recs = balanced(2, "test", seed0=500)
    cfg = TrainConfig(arch=ArchitectureId.LENET5, epochs=2, batch_size=4, seed=3)
    path = tmp_path / "best.tsvm"
    _, hist = train(cfg, train_recs, test_recs, checkpoint_path=path)
    from tsvmorph.training import load_model
    model, header = load_model(path)
    assert header["arch"] == "lenet5"
    assert header["epoch"] == hist.best_epoch
    metrics = evaluate(model, test_recs)
    assert metrics.total_accuracy == pytest.approx(
        max(m.total_accuracy for m in hist.epochs))


def test_history_max_and_best_epoch():
    hist = History(epochs=[
        Metrics.from_confusion(np.diag([1, 1, 0]) + np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0]]), 1),
        Metrics.from_confusion(np.diag([1, 1, 1]), 2),
        Metrics.from_confusion(np.diag([1, 1, 0]) + np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0]]), 3),
    ])
    assert hist.max_total_accuracy == 1.0
    assert hist.best_epoch == 2


def stub_train_fn(calls):
    def fake(cfg, train_recs, test_recs):
        calls.append((cfg.arch, cfg.aug_type, cfg.dropout))
        conf = np.diag([1, 1, 1])
        return None, History(epochs=[Metrics.from_confusion(conf, 1)])
    return fake


def test_sweep_counting_rule_114_runs():
    archs = list(ArchitectureId)
    augs = list(range(6))
    drops = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    plan = sweep_cells(archs, augs, drops)
    assert len(plan) == 3 * 6 * 6 + 1 * 6  # 114; dropout axis skipped for LeNet-5
    lenet_cells = [c for c in plan if c[0] is ArchitectureId.LENET5]
    assert len(lenet_cells) == 6
    assert all(c[2] is None for c in lenet_cells)


def test_sweep_runs_and_reports(tmp_path):
    calls = []
    base = TrainConfig(epochs=1)
    report = sweep([ArchitectureId.LENET5, ArchitectureId.ALEXNET], [0, 1],
                   [0.0, 0.5], base, [], [], train_fn=stub_train_fn(calls))
    # lenet: 2 aug x no dropout axis; alexnet: 2 aug x 2 dropout
    assert len(report.cells) == 2 + 4
    lenet_rows = [c for c in report.cells if c.arch is ArchitectureId.LENET5]
    assert all(c.dropout is None for c in lenet_rows)
    best = report.best_per_arch()
    for arch, cell in best.items():
        assert cell.max_accuracy == max(
            c.max_accuracy for c in report.cells if c.arch is arch)


def test_sweep_report_roundtrips_json_and_csv():
    report = SweepReport(cells=[
        SweepCell(ArchitectureId.LENET5, 4, None, 0.816, 120),
        SweepCell(ArchitectureId.VGG_INSPIRED_ALEXNET, 4, 0.2, 0.861, 77),
        SweepCell(ArchitectureId.ALEXNET, 2, 0.4, 0.851, 60),
    ])
    assert SweepReport.from_json(report.to_json()) == report
    assert SweepReport.from_csv(report.to_csv()) == report
    assert "NA" in report.to_csv().splitlines()[1]


def test_synthetic_dataset_balanced_and_disjoint():
    train_recs, test_recs = synthetic_dataset(5, 2, seed=1)
    assert len(train_recs) == 15 and len(test_recs) == 6
    from collections import Counter
    assert Counter(r.label for r in train_recs) == {l: 5 for l in LABELS}
    assert Counter(r.label for r in test_recs) == {l: 2 for l in LABELS}
    assert not ({r.source_id for r in train_recs} & {r.source_id for r in test_recs})
    assert all(r.split == "train" for r in train_recs)
    assert all(r.split == "test" for r in test_recs)
