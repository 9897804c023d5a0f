"""Training, evaluation, and the augmentation x dropout sweep.

Augmentation applies to the train split only; the test split is never
augmented, and provenance ids guarantee no augmented copy of a test image can
leak into training. The per-run statistic is the maximum test accuracy over
epochs, with the best-epoch model checkpointed.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .architectures import ArchitectureId, build
from .augment import AUGMENTATION_TYPES, augment_records
from .engine import Model, SGD, save_checkpoint, load_checkpoint
from .errors import EmptyClass, OverlappingSplits, TsvMorphError
from .manifest import LABELS, NUM_CLASSES, CropRecord, require_labeled
from .synth import GenParams, generate_via

IMBALANCE_WARN = 0.10


@dataclass(frozen=True)
class TrainConfig:
    arch: ArchitectureId = ArchitectureId.VGG_INSPIRED_ALEXNET
    epochs: int = 200
    aug_type: int = 0
    dropout: float = 0.0
    # 0.01 with momentum 0.9 reliably kills the relu nets in the first steps
    # (softmax saturates, gradients vanish); 0.003 trains all four stably
    lr: float = 0.003
    momentum: float = 0.9
    batch_size: int = 32
    lr_halve_every: int = 50
    seed: int = 0
    strict_determinism: bool = False
    # stop once test accuracy reaches this value; None trains the full budget
    early_stop_accuracy: float | None = None

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise TsvMorphError("epochs must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise TsvMorphError("dropout must lie in [0, 1)")
        if self.aug_type not in AUGMENTATION_TYPES:
            raise TsvMorphError(f"aug_type must be 0..5, got {self.aug_type}")
        if self.batch_size < 2:
            raise TsvMorphError("batch_size must be at least 2 (batch norm)")
        return self


@dataclass
class Metrics:
    confusion: np.ndarray  # 3x3, [true][pred]
    per_class_accuracy: tuple[float, float, float]
    total_accuracy: float
    epoch: int

    @classmethod
    def from_confusion(cls, confusion: np.ndarray, epoch: int) -> "Metrics":
        confusion = np.asarray(confusion, dtype=np.int64)
        row_sums = confusion.sum(axis=1)
        per_class = tuple(
            confusion[c, c] / row_sums[c] if row_sums[c] else 0.0
            for c in range(NUM_CLASSES)
        )
        total = float(np.trace(confusion) / confusion.sum()) if confusion.sum() else 0.0
        return cls(confusion=confusion, per_class_accuracy=per_class,
                   total_accuracy=total, epoch=epoch)


@dataclass
class History:
    epochs: list[Metrics] = field(default_factory=list)

    @property
    def max_total_accuracy(self) -> float:
        return max((m.total_accuracy for m in self.epochs), default=0.0)

    @property
    def best_epoch(self) -> int:
        if not self.epochs:
            return 0
        return max(self.epochs, key=lambda m: m.total_accuracy).epoch

    def to_jsonable(self):
        return [
            {"epoch": m.epoch, "total_accuracy": m.total_accuracy,
             "per_class_accuracy": list(m.per_class_accuracy),
             "confusion": m.confusion.tolist()}
            for m in self.epochs
        ]


def records_to_arrays(records: list[CropRecord]):
    x = np.stack([r.image.pixels for r in records]).astype(np.float32) / 255.0
    x = x[:, None, :, :]
    y = np.array([r.label.index for r in records], dtype=np.int64)
    return x, y


def one_hot(y: np.ndarray) -> np.ndarray:
    out = np.zeros((len(y), NUM_CLASSES), dtype=np.float32)
    out[np.arange(len(y)), y] = 1.0
    return out


def _check_splits(train_records, test_records):
    require_labeled(train_records)
    require_labeled(test_records)
    train_ids = {r.source_id for r in train_records if r.source_id}
    test_ids = {r.source_id for r in test_records if r.source_id}
    shared = train_ids & test_ids
    if shared:
        raise OverlappingSplits(f"source ids in both splits: {sorted(shared)[:5]}")
    counts = {label: 0 for label in LABELS}
    for r in train_records:
        counts[r.label] += 1
    for label, n in counts.items():
        if n == 0:
            raise EmptyClass(f"class {label.value} missing from train split")
    lo, hi = min(counts.values()), max(counts.values())
    if hi and (hi - lo) / hi > IMBALANCE_WARN:
        warnings.warn(f"train class imbalance exceeds {IMBALANCE_WARN:.0%}: "
                      f"{ {l.value: n for l, n in counts.items()} }")


def evaluate(model: Model, records: list[CropRecord], epoch: int = 0,
             batch_size: int = 64) -> Metrics:
    """Confusion matrix and accuracies of argmax predictions, eval mode."""
    require_labeled(records)
    x, y = records_to_arrays(records)
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for i in range(0, len(x), batch_size):
        probs = model.forward(x[i:i + batch_size], train=False)
        preds = probs.argmax(axis=1)
        for t, pr in zip(y[i:i + batch_size], preds):
            confusion[t, pr] += 1
    return Metrics.from_confusion(confusion, epoch)


def train(config: TrainConfig, train_records: list[CropRecord],
          test_records: list[CropRecord], checkpoint_path=None):
    """Train one model; returns (model at final state, per-epoch History).

    The checkpoint, when requested, stores the best-epoch parameters.
    """
    config.validate()
    _check_splits(train_records, test_records)

    augmented = augment_records(train_records, config.aug_type)
    test_ids = {r.source_id for r in test_records if r.source_id}
    leaked = [r.source_id for r in augmented if r.source_id in test_ids]
    if leaked:
        raise OverlappingSplits(f"augmented train images derive from test sources: {leaked[:5]}")

    x_train, y_train = records_to_arrays(augmented)
    arch = build(config.arch)
    model = Model.from_layer_specs(arch.layers, dropout=config.dropout, seed=config.seed)
    opt = SGD(lr=config.lr, momentum=config.momentum)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 1)))
    dropout_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 2)))

    history = History()
    best_acc = -1.0
    best_state = None
    best_epoch = 0
    n = len(x_train)
    for epoch in range(1, config.epochs + 1):
        opt.lr = config.lr * (0.5 ** ((epoch - 1) // config.lr_halve_every))
        order = shuffle_rng.permutation(n)
        for i in range(0, n, config.batch_size):
            idx = order[i:i + config.batch_size]
            if len(idx) < 2:
                continue  # batch norm cannot train on singleton tails
            xb = x_train[idx]
            yb = one_hot(y_train[idx])
            model.loss_and_grads(xb, yb, train=True, rng=dropout_rng)
            opt.step(model)
        metrics = evaluate(model, test_records, epoch=epoch)
        history.epochs.append(metrics)
        if metrics.total_accuracy > best_acc:
            best_acc = metrics.total_accuracy
            best_epoch = epoch
            best_state = {k: v.copy() for k, v in model.state_dict().items()}
        if (config.early_stop_accuracy is not None
                and metrics.total_accuracy >= config.early_stop_accuracy):
            break

    if checkpoint_path is not None and best_state is not None:
        save_checkpoint(checkpoint_path, config.arch.value, best_epoch,
                        {"max_total_accuracy": best_acc}, best_state)
    return model, history


def load_model(checkpoint_path) -> tuple[Model, dict]:
    """Rebuild the architecture named in a checkpoint and load its weights."""
    header, arrays = load_checkpoint(checkpoint_path)
    arch = build(ArchitectureId(header["arch"]))
    model = Model.from_layer_specs(arch.layers)
    model.load_state_dict(arrays)
    return model, header


@dataclass(frozen=True)
class SweepCell:
    arch: ArchitectureId
    aug_type: int
    dropout: float | None  # None when the architecture has no dropout
    max_accuracy: float
    best_epoch: int


@dataclass
class SweepReport:
    cells: list[SweepCell]

    def best_per_arch(self) -> dict[ArchitectureId, SweepCell]:
        best = {}
        for cell in self.cells:
            cur = best.get(cell.arch)
            if cur is None or cell.max_accuracy > cur.max_accuracy:
                best[cell.arch] = cell
        return best

    def to_json(self) -> str:
        return json.dumps([
            {"arch": c.arch.value, "aug_type": c.aug_type, "dropout": c.dropout,
             "max_accuracy": c.max_accuracy, "best_epoch": c.best_epoch}
            for c in self.cells
        ], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SweepReport":
        return cls([
            SweepCell(arch=ArchitectureId(row["arch"]), aug_type=int(row["aug_type"]),
                      dropout=row["dropout"], max_accuracy=float(row["max_accuracy"]),
                      best_epoch=int(row["best_epoch"]))
            for row in json.loads(text)
        ])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["arch", "aug_type", "dropout", "max_accuracy", "best_epoch"])
        for c in self.cells:
            writer.writerow([c.arch.value, c.aug_type,
                             "NA" if c.dropout is None else repr(c.dropout),
                             repr(c.max_accuracy), c.best_epoch])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepReport":
        rows = list(csv.reader(io.StringIO(text)))
        cells = []
        for row in rows[1:]:
            if not row:
                continue
            arch, aug, drop, acc, best = row
            cells.append(SweepCell(arch=ArchitectureId(arch), aug_type=int(aug),
                                   dropout=None if drop == "NA" else float(drop),
                                   max_accuracy=float(acc), best_epoch=int(best)))
        return cls(cells)


def sweep_cells(archs, aug_types, dropouts):
    """The (arch, aug, dropout) grid; dropout-free architectures skip that axis."""
    plan = []
    for arch in archs:
        arch = ArchitectureId(arch) if isinstance(arch, str) else arch
        drops = [None] if not build(arch).has_dropout else list(dropouts)
        for aug in aug_types:
            for d in drops:
                plan.append((arch, aug, d))
    return plan


def sweep(archs, aug_types, dropouts, base_config: TrainConfig,
          train_records, test_records, train_fn=None, workers: int = 1) -> SweepReport:
    """Train every grid combination and report max accuracy per cell.

    Cells are independent; with workers > 1 they run on a thread pool (the
    heavy matmuls release the GIL). Report order is the grid order either way.
    """
    run = train_fn or train

    def one(cell):
        arch, aug, drop = cell
        cfg = replace(base_config, arch=arch, aug_type=aug,
                      dropout=0.0 if drop is None else drop)
        _, history = run(cfg, train_records, test_records)
        return SweepCell(arch=arch, aug_type=aug, dropout=drop,
                         max_accuracy=history.max_total_accuracy,
                         best_epoch=history.best_epoch)

    plan = sweep_cells(archs, aug_types, dropouts)
    if workers <= 1:
        return SweepReport([one(cell) for cell in plan])
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return SweepReport(list(pool.map(one, plan)))


def synthetic_dataset(train_per_class: int, test_per_class: int,
                      params: GenParams | None = None, seed: int = 0):
    """Balanced labeled crop records straight from the generator.

    Tiles are frame-sized (54x54) so each rendered via is already a crop.
    """
    from .surface import render_grayscale

    params = params or GenParams()
    train, test = [], []
    for label in LABELS:
        for i in range(train_per_class + test_per_class):
            via_seed = np.random.SeedSequence((seed, label.index, i)).generate_state(1)[0]
            hm = generate_via(label, replace(params, seed=int(via_seed)))
            img = render_grayscale(hm)
            rec = CropRecord(image=img, label=label,
                             split="train" if i < train_per_class else "test",
                             source_id=f"syn_{label.value}_{seed}_{i}")
            (train if i < train_per_class else test).append(rec)
    return train, test
