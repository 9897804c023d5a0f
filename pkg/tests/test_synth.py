import numpy as np
import pytest

from tsvmorph.errors import InvalidParams, LabelCountMismatch
from tsvmorph.manifest import MorphologyLabel
from tsvmorph.synth import (
    GenParams,
    classify_by_statistics,
    generate_mosaic,
    generate_via,
    rim_statistics,
    _grid,
)

LABELS = list(MorphologyLabel)


def test_param_validation():
    with pytest.raises(InvalidParams):
        GenParams(via_radius=30).validate()  # >= frame/2
    with pytest.raises(InvalidParams):
        GenParams(amplitude=0).validate()
    with pytest.raises(InvalidParams):
        GenParams(bump_count_range=(0, 5)).validate()
    with pytest.raises(InvalidParams):
        GenParams(bump_count_range=(2, 13)).validate()
    GenParams().validate()


def test_determinism():
    p = GenParams(seed=9)
    for label in LABELS:
        a = generate_via(label, p)
        b = generate_via(label, p)
        assert np.array_equal(a.samples, b.samples)


def test_labels_differ_for_same_seed():
    p = GenParams(seed=4)
    ring = generate_via(MorphologyLabel.EDGE_RING, p)
    bulge = generate_via(MorphologyLabel.EDGE_BULGE, p)
    assert not np.array_equal(ring.samples, bulge.samples)


def test_samples_within_range():
    for seed in range(10):
        p = GenParams(seed=seed, background_level=50.0)
        for label in LABELS:
            h = generate_via(label, p).samples
            assert np.isfinite(h).all()
            assert h.min() >= p.background_level - 1e-3
            assert h.max() <= p.background_level + 4 * p.amplitude + 1e-3


def test_ring_rim_mean_dominates_interior():
    # rim annulus mean height at least 3x the interior mean, seed 1
    p = GenParams(seed=1)
    hm = generate_via(MorphologyLabel.EDGE_RING, p)
    r, _theta = _grid(p.frame)
    rim = np.abs(r - (p.via_radius - 2.0)) <= p.ring_sigma
    interior = r <= p.via_radius / 2.0
    h = hm.samples.astype(float)
    assert h[rim].mean() >= 3.0 * h[interior].mean()


def test_granular_rim_and_interior_rms_comparable():
    p = GenParams(seed=1)
    hm = generate_via(MorphologyLabel.GRANULAR, p)
    r, _theta = _grid(p.frame)
    rim = np.abs(r - (p.via_radius - 2.0)) <= 2 * p.ring_sigma
    interior = r <= p.via_radius / 2.0
    h = hm.samples.astype(float)
    ratio = h[rim].std() / h[interior].std()
    assert 0.5 <= ratio <= 2.0


def test_ring_coverage_at_least_85_percent():
    for seed in range(20):
        p = GenParams(seed=seed)
        hm = generate_via(MorphologyLabel.EDGE_RING, p)
        _ratio, coverage = rim_statistics(hm, p)
        assert coverage >= 0.85


def test_class_separability_across_seeds():
    # the rim statistic must separate classes for >= 95% of seeds
    total = correct = 0
    for seed in range(40):
        p = GenParams(seed=seed)
        for label in LABELS:
            pred = classify_by_statistics(generate_via(label, p), p)
            total += 1
            correct += pred is label
    assert correct / total >= 0.95


def test_mosaic_single_cell():
    p = GenParams(seed=2)
    mosaic = generate_mosaic(1, 1, [MorphologyLabel.GRANULAR], p, gap=6)
    assert len(mosaic.boxes) == 1
    r, c, x0, y0, x1, y1, label = mosaic.boxes[0]
    assert (r, c) == (0, 0)
    assert label is MorphologyLabel.GRANULAR
    # the box sits inside the single via frame
    assert 6 <= x0 < x1 <= 6 + p.frame
    assert 6 <= y0 < y1 <= 6 + p.frame


def test_mosaic_boxes_disjoint_and_in_bounds():
    p = GenParams(seed=3)
    labels = [LABELS[i % 3] for i in range(6)]
    mosaic = generate_mosaic(2, 3, labels, p, gap=6)
    assert len(mosaic.boxes) == 6
    hm = mosaic.heightmap
    boxes = [b[2:6] for b in mosaic.boxes]
    for x0, y0, x1, y1 in boxes:
        assert 0 <= x0 < x1 <= hm.width
        assert 0 <= y0 < y1 <= hm.height
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            ax0, ay0, ax1, ay1 = boxes[i]
            bx0, by0, bx1, by1 = boxes[j]
            overlap = max(0, min(ax1, bx1) - max(ax0, bx0)) * \
                max(0, min(ay1, by1) - max(ay0, by0))
            assert overlap == 0


def test_mosaic_label_count_mismatch():
    with pytest.raises(LabelCountMismatch):
        generate_mosaic(2, 2, [MorphologyLabel.GRANULAR], GenParams(), gap=6)


def test_mosaic_gap_too_small():
    with pytest.raises(InvalidParams):
        generate_mosaic(1, 1, [MorphologyLabel.GRANULAR], GenParams(), gap=1)
