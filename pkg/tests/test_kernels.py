"""Compiled kernels against the NumPy fallback and finite differences."""

import subprocess
import sys

import numpy as np
import pytest

from echoform import kernels
from echoform.kernels import conv_numpy

SHAPES = [
    # (batch, c_in, h, w, c_out, k, stride, pad)
    (2, 3, 8, 8, 4, 3, 1, 1),
    (1, 1, 5, 7, 2, 3, 1, 0),
    (2, 2, 9, 9, 3, 3, 2, 1),
    (1, 4, 6, 6, 4, 1, 1, 0),
    (3, 2, 10, 6, 1, 5, 2, 2),
]


def _case(batch, c_in, h, w, c_out, k, stride, pad, seed):
    gen = np.random.default_rng(seed)
    x = gen.standard_normal((batch, c_in, h, w))
    wt = gen.standard_normal((c_out, c_in, k, k))
    out = conv_numpy.conv2d_forward(x, wt, stride, pad)
    gout = gen.standard_normal(out.shape)
    return x, wt, gout, out


requires_ext = pytest.mark.skipif(
    kernels.BACKEND != "cython", reason="compiled extension not importable"
)


@requires_ext
@pytest.mark.parametrize("shape", SHAPES)
def test_forward_parity(shape):
    x, wt, _, ref = _case(*shape, seed=1)
    got = kernels.conv2d_forward(x, wt, shape[6], shape[7])
    assert got.shape == ref.shape
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


@requires_ext
@pytest.mark.parametrize("shape", SHAPES)
def test_grad_weight_parity(shape):
    x, wt, gout, _ = _case(*shape, seed=2)
    ref = conv_numpy.conv2d_grad_weight(x, gout, wt.shape[2], wt.shape[3],
                                        shape[6], shape[7])
    got = kernels.conv2d_grad_weight(x, gout, wt.shape[2], wt.shape[3],
                                     shape[6], shape[7])
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


@requires_ext
@pytest.mark.parametrize("shape", SHAPES)
def test_grad_input_parity(shape):
    x, wt, gout, _ = _case(*shape, seed=3)
    ref = conv_numpy.conv2d_grad_input(wt, gout, x.shape[2], x.shape[3],
                                       shape[6], shape[7])
    got = kernels.conv2d_grad_input(wt, gout, x.shape[2], x.shape[3],
                                    shape[6], shape[7])
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("backend", [kernels, conv_numpy])
@pytest.mark.parametrize("shape", SHAPES[:3])
def test_grad_weight_matches_finite_differences(backend, shape):
    x, wt, gout, _ = _case(*shape, seed=4)
    grad = backend.conv2d_grad_weight(x, gout, wt.shape[2], wt.shape[3],
                                      shape[6], shape[7])
    step = 1e-6
    gen = np.random.default_rng(5)
    for _ in range(6):
        idx = tuple(gen.integers(0, s) for s in wt.shape)
        wp = wt.copy()
        wp[idx] += step
        wm = wt.copy()
        wm[idx] -= step
        fd = (np.sum(backend.conv2d_forward(x, wp, shape[6], shape[7]) * gout)
              - np.sum(backend.conv2d_forward(x, wm, shape[6], shape[7]) * gout)) / (2 * step)
        assert grad[idx] == pytest.approx(fd, rel=1e-5, abs=1e-7)


@pytest.mark.parametrize("backend", [kernels, conv_numpy])
@pytest.mark.parametrize("shape", SHAPES[:3])
def test_grad_input_matches_finite_differences(backend, shape):
    x, wt, gout, _ = _case(*shape, seed=6)
    grad = backend.conv2d_grad_input(wt, gout, x.shape[2], x.shape[3],
                                     shape[6], shape[7])
    assert grad.shape == x.shape
    step = 1e-6
    gen = np.random.default_rng(7)
    for _ in range(6):
        idx = tuple(gen.integers(0, s) for s in x.shape)
        xp = x.copy()
        xp[idx] += step
        xm = x.copy()
        xm[idx] -= step
        fd = (np.sum(backend.conv2d_forward(xp, wt, shape[6], shape[7]) * gout)
              - np.sum(backend.conv2d_forward(xm, wt, shape[6], shape[7]) * gout)) / (2 * step)
        assert grad[idx] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_grad_input_rejects_oversized_pad():
    wt = np.ones((1, 1, 3, 3))
    gout = np.ones((1, 1, 4, 4))
    with pytest.raises(ValueError):
        conv_numpy.conv2d_grad_input(wt, gout, 4, 4, stride=1, pad=3)


def test_env_switch_forces_fallback():
    code = (
        "import os; os.environ['ECHOFORM_NO_EXT'] = '1'; "
        "from echoform import kernels; print(kernels.BACKEND)"
    )
    out = subprocess.run([sys.executable, "-c", code],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_default_backend_reported():
    assert kernels.BACKEND in ("cython", "numpy")
    assert kernels.conv2d_forward is not None
