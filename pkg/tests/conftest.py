"""Shared fixtures: the standard lattice, the standard small state and constants."""

import pytest

from bolax.config import LatticeSpec
from bolax.field_core import Field, make_field
from bolax.spectral_energy import GeometricConstants, geometric_constants


@pytest.fixture
def spec32() -> LatticeSpec:
    return LatticeSpec(n_max=32, rho=0.5, s=1.0)


@pytest.fixture
def spec16() -> LatticeSpec:
    return LatticeSpec(n_max=16, rho=0.5, s=1.0)


def cosine(amplitude: float, spec: LatticeSpec) -> Field:
    """2a cos x on the given lattice."""
    return make_field([(1, amplitude)], spec, symmetrize=True)


@pytest.fixture
def standard_state(spec32: LatticeSpec) -> Field:
    return cosine(0.05, spec32)


@pytest.fixture
def two_cos(spec32: LatticeSpec) -> Field:
    """u = 2 cos x."""
    return cosine(1.0, spec32)


@pytest.fixture(scope="session")
def consts() -> GeometricConstants:
    return geometric_constants()
