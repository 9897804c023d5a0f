from collections import Counter

import numpy as np
import pytest

from tsvmorph.augment import (
    AUGMENTATION_TYPES,
    MULTIPLIERS,
    Transform,
    apply,
    augment_records,
)
from tsvmorph.errors import UnlabeledRecord, WrongSize
from tsvmorph.manifest import CropRecord, MorphologyLabel
from tsvmorph.surface import GrayImage

LABELS = list(MorphologyLabel)


def random_image(seed=0):
    rng = np.random.default_rng(seed)
    return GrayImage.from_array(rng.integers(0, 256, (54, 54), dtype=np.uint8))


def labeled(n, seed=0):
    return [CropRecord(image=random_image(seed + i), label=LABELS[i % 3],
                       source_id=f"s{i}") for i in range(n)]


def test_multiplier_table():
    assert MULTIPLIERS == {0: 1, 1: 3, 2: 4, 3: 6, 4: 8, 5: 10}


def test_only_rotations_and_flips_exist():
    kinds = {t.value for t in Transform}
    assert kinds == {"identity", "rot45", "rot90", "rot135", "rot180", "rot225",
                     "rot270", "rot315", "flip_h", "flip_v"}


def test_flips_apply_to_originals_only():
    # types 3 and 5 must list flips beside the rotations, not composed
    for t in (1, 3, 5):
        transforms = AUGMENTATION_TYPES[t].transforms
        assert Transform.FLIP_H in transforms and Transform.FLIP_V in transforms
    assert AUGMENTATION_TYPES[3].multiplier == 6
    assert AUGMENTATION_TYPES[5].multiplier == 10


def test_apply_requires_54x54():
    small = GrayImage.from_array(np.zeros((10, 10), dtype=np.uint8))
    with pytest.raises(WrongSize):
        apply(Transform.ROT90, small)


def test_rot90_four_times_is_identity():
    img = random_image(1)
    out = img
    for _ in range(4):
        out = apply(Transform.ROT90, out)
    assert np.array_equal(out.pixels, img.pixels)


def test_flips_are_involutions():
    img = random_image(2)
    assert np.array_equal(apply(Transform.FLIP_H, apply(Transform.FLIP_H, img)).pixels,
                          img.pixels)
    assert np.array_equal(apply(Transform.FLIP_V, apply(Transform.FLIP_V, img)).pixels,
                          img.pixels)


def test_rot180_equals_both_flips():
    for seed in range(10):
        img = random_image(seed)
        a = apply(Transform.ROT180, img)
        b = apply(Transform.FLIP_H, apply(Transform.FLIP_V, img))
        assert np.array_equal(a.pixels, b.pixels)


def test_lossless_subgroup_preserves_histogram():
    img = random_image(3)
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    for t in (Transform.ROT90, Transform.ROT180, Transform.ROT270,
              Transform.FLIP_H, Transform.FLIP_V):
        out = apply(t, img)
        assert np.array_equal(np.bincount(out.pixels.ravel(), minlength=256), hist)


def test_rot45_shape_and_fill():
    img = GrayImage.from_array(np.full((54, 54), 37, dtype=np.uint8))
    out = apply(Transform.ROT45, img)
    assert out.pixels.shape == (54, 54)
    assert (out.pixels == 37).all()  # constant image: content and fill agree


def test_rot45_fill_is_border_median():
    px = np.zeros((54, 54), dtype=np.uint8)
    px[:] = 200  # bright interior
    px[0, :] = px[-1, :] = px[:, 0] = px[:, -1] = 9  # dark border ring
    out = apply(Transform.ROT45, GrayImage.from_array(px))
    assert out.pixels[0, 0] == 9  # corners rotate out of the source frame


def test_augment_sizes_from_1004_records():
    records = labeled(1004)
    assert len(augment_records(records, 3)) == 6024
    assert len(augment_records(records, 5)) == 10040


def test_type0_is_identity():
    records = labeled(7)
    out = augment_records(records, 0)
    assert len(out) == 7
    for a, b in zip(records, out):
        assert np.array_equal(a.image.pixels, b.image.pixels)
        assert b.transform == "identity"


def test_labels_preserved_as_scaled_multiset():
    records = labeled(30)
    base = Counter(r.label for r in records)
    for t, mult in MULTIPLIERS.items():
        out = augment_records(records, t)
        assert len(out) == mult * 30
        assert Counter(r.label for r in out) == {k: v * mult for k, v in base.items()}


def test_output_order_source_then_transform():
    records = labeled(2)
    out = augment_records(records, 2)
    assert [(r.source_id, r.transform) for r in out] == [
        ("s0", "identity"), ("s0", "rot90"), ("s0", "rot180"), ("s0", "rot270"),
        ("s1", "identity"), ("s1", "rot90"), ("s1", "rot180"), ("s1", "rot270"),
    ]


def test_unlabeled_records_rejected():
    rec = CropRecord(image=random_image(9))
    with pytest.raises(UnlabeledRecord):
        augment_records([rec], 1)
