import numpy as np
import pytest

from mriextract import FEATURE_DIM, extract, extract_batch, load_backbone
from mriextract.backbone import ExtractorError
from mriextract.preprocess import preprocess

from _paths import SLICES


def test_feature_length(backbone):
    vec = extract(backbone, preprocess(SLICES / "n0.png"))
    assert vec.shape == (FEATURE_DIM,)
    assert vec.dtype == np.float32
    assert np.all(np.isfinite(vec))


def test_repeat_extraction_identical(backbone):
    img = preprocess(SLICES / "n0.png")
    assert np.array_equal(extract(backbone, img), extract(backbone, img))


def test_distinct_inputs_distinct_vectors(backbone):
    a = extract(backbone, preprocess(SLICES / "n0.png"))
    b = extract(backbone, preprocess(SLICES / "n1.png"))
    assert not np.array_equal(a, b)


def test_batch_matches_single(backbone):
    imgs = np.stack([preprocess(SLICES / "n0.png"), preprocess(SLICES / "n1.png")])
    batch = extract_batch(backbone, imgs)
    assert batch.shape == (2, FEATURE_DIM)
    assert np.allclose(batch[0], extract(backbone, imgs[0]), atol=1e-5)


def test_dim_mismatch_detected(backbone):
    with pytest.raises(ExtractorError, match="expected 1234"):
        extract(backbone, preprocess(SLICES / "n0.png"), expected_dim=1234)


def test_bad_input_shape(backbone):
    with pytest.raises(ExtractorError, match="expected"):
        extract_batch(backbone, np.zeros((2, 224, 224), dtype=np.float32))


def test_seeded_weights_reproducible():
    a = load_backbone("seeded", seed=7)
    b = load_backbone("seeded", seed=7)
    img = preprocess(SLICES / "z0.png")
    assert np.array_equal(extract(a, img), extract(b, img))


def test_unknown_weights_mode():
    with pytest.raises(ExtractorError, match="weights mode"):
        load_backbone("mystery")
