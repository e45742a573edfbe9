"""Value types, validation, deterministic RNG, and sampling schemes."""

import numpy as np
import pytest

from echoform.core import (
    AZIMUTH,
    RANGE,
    NumericError,
    Rng,
    SamplingScheme,
    SarSystemParams,
    ShapeError,
    adjoint_sampling,
    apply_sampling,
    as_image,
    full_sampling,
    make_sampling,
)

from conftest import complex_noise


# ---------------------------------------------------------------- as_image

def test_as_image_converts_to_complex128():
    out = as_image(np.ones((2, 3)), "a")
    assert out.dtype == np.complex128
    assert out.shape == (2, 3)


def test_as_image_rejects_wrong_rank():
    with pytest.raises(ShapeError):
        as_image(np.ones(4), "a")
    with pytest.raises(ShapeError):
        as_image(np.ones((2, 2, 2)), "a")


def test_as_image_rejects_non_finite():
    bad = np.ones((2, 2), dtype=complex)
    bad[0, 0] = np.nan
    with pytest.raises(NumericError):
        as_image(bad, "a")


# -------------------------------------------------------------------- Rng

def test_rng_same_seed_same_stream():
    a = Rng(7).generator().standard_normal(16)
    b = Rng(7).generator().standard_normal(16)
    assert np.array_equal(a, b)


def test_rng_split_is_keyed():
    r = Rng(3)
    a = r.split("alpha").generator().standard_normal(8)
    a2 = r.split("alpha").generator().standard_normal(8)
    b = r.split("beta").generator().standard_normal(8)
    assert np.array_equal(a, a2)
    assert not np.array_equal(a, b)


def test_rng_split_mixed_keys():
    r = Rng(3)
    a = r.split("scene", 0).generator().standard_normal(4)
    b = r.split("scene", 1).generator().standard_normal(4)
    assert not np.array_equal(a, b)


# ------------------------------------------------------- SarSystemParams

def test_params_canonical_values():
    p = SarSystemParams.spaceborne_c_band(64, 64)
    assert p.bandwidth == 60e6
    assert p.pulse_width == 45e-6
    assert p.prf == 1420.0
    assert p.carrier_freq == 5.4e9
    assert p.slant_range_ref == 850e3
    assert p.velocity == 7500.0


def test_params_default_sample_rate_is_oversampled():
    p = SarSystemParams.spaceborne_c_band(8, 8)
    assert p.range_sample_rate == pytest.approx(1.1 * p.bandwidth)


def test_params_chirp_rate():
    p = SarSystemParams.spaceborne_c_band(8, 8)
    assert p.chirp_rate == pytest.approx(p.bandwidth / p.pulse_width)


def test_params_reject_nonpositive():
    with pytest.raises(ValueError):
        SarSystemParams.spaceborne_c_band(8, 8, bandwidth=0.0)
    with pytest.raises(ValueError):
        SarSystemParams.spaceborne_c_band(8, 8, velocity=-1.0)


def test_params_reject_undersampled_range():
    with pytest.raises(ValueError):
        SarSystemParams.spaceborne_c_band(8, 8, range_sample_rate=30e6)


def test_params_reject_prf_too_high_for_velocity():
    # the azimuth migration factor must stay real over (-prf/2, prf/2]
    with pytest.raises(ValueError):
        SarSystemParams.spaceborne_c_band(8, 8, prf=1e9)


def test_params_reject_empty_grid():
    with pytest.raises(ValueError):
        SarSystemParams.spaceborne_c_band(0, 8)


# ---------------------------------------------------------- make_sampling

def test_make_sampling_half_of_512():
    s = make_sampling(AZIMUTH, 512, 0.5, Rng(7))
    assert s.kept_size == 256
    assert len(set(s.kept_indices.tolist())) == 256
    assert np.all(np.diff(s.kept_indices) > 0)
    assert s.kept_indices[0] >= 0 and s.kept_indices[-1] < 512


def test_make_sampling_full_rate_is_identity():
    s = make_sampling(AZIMUTH, 8, 1.0, Rng(123))
    assert np.array_equal(s.kept_indices, np.arange(8))
    assert s.is_identity


def test_make_sampling_deterministic():
    a = make_sampling(AZIMUTH, 64, 0.75, Rng(1))
    b = make_sampling(AZIMUTH, 64, 0.75, Rng(1))
    assert np.array_equal(a.kept_indices, b.kept_indices)


def test_make_sampling_rate_validation():
    with pytest.raises(ValueError):
        make_sampling(AZIMUTH, 8, 0.0, Rng(0))
    with pytest.raises(ValueError):
        make_sampling(AZIMUTH, 8, 1.5, Rng(0))
    with pytest.raises(ValueError):
        make_sampling(AZIMUTH, 0, 0.5, Rng(0))


def test_make_sampling_count_is_ceiling():
    s = make_sampling(RANGE, 10, 0.75, Rng(0))
    assert s.kept_size == 8          # ceil(7.5)
    s = make_sampling(RANGE, 10, 0.1, Rng(0))
    assert s.kept_size == 1          # exactly 1, no float drift


def test_scheme_rejects_bad_indices():
    with pytest.raises(ValueError):
        SamplingScheme(AZIMUTH, 4, np.array([2, 1]), 0.5, 0)
    with pytest.raises(ValueError):
        SamplingScheme(AZIMUTH, 4, np.array([1, 4]), 0.5, 0)
    with pytest.raises(ValueError):
        SamplingScheme(AZIMUTH, 4, np.array([1, 1]), 0.5, 0)


# ------------------------------------------- apply / adjoint sampling

def test_apply_identity_scheme_unchanged():
    a = complex_noise((4, 6), 0)
    s = full_sampling(AZIMUTH, 6)
    assert np.array_equal(apply_sampling(s, a), a)


def test_apply_selects_named_columns():
    a = complex_noise((3, 4), 1)
    s = SamplingScheme(AZIMUTH, 4, np.array([0, 2]), 0.5, 0)
    out = apply_sampling(s, a)
    assert out.shape == (3, 2)
    assert np.array_equal(out[:, 0], a[:, 0])
    assert np.array_equal(out[:, 1], a[:, 2])


def test_apply_selects_rows_on_range_axis():
    a = complex_noise((4, 3), 2)
    s = SamplingScheme(RANGE, 4, np.array([1, 3]), 0.5, 0)
    out = apply_sampling(s, a)
    assert np.array_equal(out, a[[1, 3], :])


def test_apply_shape_mismatch():
    s = SamplingScheme(AZIMUTH, 4, np.array([0, 2]), 0.5, 0)
    with pytest.raises(ShapeError):
        apply_sampling(s, complex_noise((3, 5), 0))


def test_select_after_zero_fill_is_identity():
    s = make_sampling(AZIMUTH, 8, 0.5, Rng(4))
    b = complex_noise((8, s.kept_size), 3)
    assert np.array_equal(apply_sampling(s, adjoint_sampling(s, b)), b)


def test_adjoint_zero_fill_zeros_elsewhere():
    s = SamplingScheme(AZIMUTH, 4, np.array([1, 3]), 0.5, 0)
    b = complex_noise((2, 2), 5)
    out = adjoint_sampling(s, b)
    assert out.shape == (2, 4)
    assert np.all(out[:, [0, 2]] == 0)
    assert np.array_equal(out[:, [1, 3]], b)


def test_adjoint_of_zero_is_zero():
    s = make_sampling(RANGE, 6, 0.5, Rng(9))
    out = adjoint_sampling(s, np.zeros((s.kept_size, 4), dtype=complex))
    assert out.shape == (6, 4)
    assert np.all(out == 0)


def test_adjoint_rate_one_identity():
    s = full_sampling(RANGE, 5)
    b = complex_noise((5, 3), 6)
    assert np.array_equal(adjoint_sampling(s, b), b)


@pytest.mark.parametrize("axis,shape_a,seed", [
    (AZIMUTH, (8, 8), 0),
    (RANGE, (8, 8), 1),
    (AZIMUTH, (64, 64), 2),
])
def test_sampling_adjoint_dot_product(axis, shape_a, seed):
    full = shape_a[1] if axis == AZIMUTH else shape_a[0]
    s = make_sampling(axis, full, 0.5, Rng(seed))
    a = complex_noise(shape_a, 10 + seed)
    b_shape = list(shape_a)
    b_shape[1 if axis == AZIMUTH else 0] = s.kept_size
    b = complex_noise(tuple(b_shape), 20 + seed)
    lhs = np.vdot(b, apply_sampling(s, a))
    rhs = np.vdot(adjoint_sampling(s, b), a)
    assert abs(lhs - rhs) <= 1e-12 * (np.linalg.norm(a) * np.linalg.norm(b))
