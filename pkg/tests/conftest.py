"""Shared fixtures: small radar setups and deterministic random arrays."""

import numpy as np
import pytest

from echoform.core import Rng, SarSystemParams
from echoform.csa import OperatorContext, build_phase_plan
from echoform.simdata import make_context


def complex_noise(shape, seed):
    gen = Rng(seed).generator()
    return gen.standard_normal(shape) + 1j * gen.standard_normal(shape)


@pytest.fixture(scope="session")
def params16():
    return SarSystemParams.spaceborne_c_band(16, 16)


@pytest.fixture(scope="session")
def params64():
    return SarSystemParams.spaceborne_c_band(64, 64)


@pytest.fixture(scope="session")
def plan64(params64):
    return build_phase_plan(params64)


@pytest.fixture(scope="session")
def ctx64_full(plan64):
    return OperatorContext.full(plan64)


@pytest.fixture(scope="session")
def ctx64_half(params64):
    # full range sampling, half azimuth sampling
    return make_context(params64, 1.0, 0.5, Rng(5))


@pytest.fixture(scope="session")
def ctx8_half():
    params = SarSystemParams.spaceborne_c_band(8, 8)
    return make_context(params, 1.0, 0.5, Rng(2))
