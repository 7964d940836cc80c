"""
field_core.py - Truncated Fourier fields on the torus

Periodic functions are stored by their Fourier coefficients on the lattice
{-N, ..., N}; Hardy-space states live on {1, ..., N}. This module provides
the analytic Sobolev norms, frequency projections, the Hilbert transform,
exact products and the classical BO invariants.

Inner products use the normalized measure dx / 2pi, so Plancherel carries no
factor of 2pi; P and H_BO follow the same normalization.
"""

import json
import math
from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel

from bolax.config import LatticeSpec
from bolax.errors import ExponentCapError, LatticeError, SeriesError
from bolax.log import get_logger
from bolax.series import bracketed_sum

logger = get_logger(__name__)

# 2 * rho * n must stay below this for e^{...} to be safe in double precision
EXPONENT_CAP = 600.0

Sign = Literal["plus", "minus", "zero"]

__all__ = [
    "EXPONENT_CAP",
    "ClassicInvariants",
    "DerivativeBound",
    "Field",
    "FrequencySplit",
    "LatticeSpec",
    "PositiveField",
    "algebra_constant",
    "analytic_norm",
    "classic_invariants",
    "derivative",
    "derivative_sup_bound",
    "field_from_snapshot",
    "field_to_snapshot",
    "frequency_split",
    "grid_values",
    "hilbert",
    "inner_l2",
    "make_field",
    "multiply",
    "project",
    "random_analytic_field",
]


# =============================================================================
# Field types
# =============================================================================


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Field:
    """
    Coefficients on {-N, ..., N}; ``coeffs[n + N]`` holds the mode n.

    ``real_valued`` asserts exact Hermitian symmetry and ``zero_mean`` asserts
    an exactly vanishing zero mode; both are checked on construction.
    """

    coeffs: np.ndarray
    real_valued: bool = False
    zero_mean: bool = False

    def __post_init__(self) -> None:
        arr = _frozen(self.coeffs)
        if arr.ndim != 1 or arr.size % 2 == 0:
            raise LatticeError(f"field needs an odd-length 1-D array, got shape {arr.shape}")
        object.__setattr__(self, "coeffs", arr)
        if self.zero_mean and arr[arr.size // 2] != 0:
            raise LatticeError("zero_mean field has a nonzero zero mode")
        if self.real_valued and not np.array_equal(arr, np.conj(arr[::-1])):
            raise LatticeError("real_valued field is not Hermitian symmetric")

    @classmethod
    def zeros(cls, n_max: int, real_valued: bool = True, zero_mean: bool = True) -> "Field":
        return cls(np.zeros(2 * n_max + 1), real_valued=real_valued, zero_mean=zero_mean)

    @property
    def n_max(self) -> int:
        return self.coeffs.size // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.n_max:
            raise LatticeError(f"mode {n} outside lattice of radius {self.n_max}")
        return complex(self.coeffs[n + self.n_max])

    # -- arithmetic ----------------------------------------------------------

    def _check_same(self, other: "Field") -> None:
        if not isinstance(other, Field):
            raise TypeError(f"expected Field, got {type(other).__name__}")
        if other.n_max != self.n_max:
            raise LatticeError(f"lattice mismatch: {self.n_max} vs {other.n_max}")

    def __add__(self, other: "Field") -> "Field":
        self._check_same(other)
        return Field(
            self.coeffs + other.coeffs,
            real_valued=self.real_valued and other.real_valued,
            zero_mean=self.zero_mean and other.zero_mean,
        )

    def __sub__(self, other: "Field") -> "Field":
        self._check_same(other)
        return Field(
            self.coeffs - other.coeffs,
            real_valued=self.real_valued and other.real_valued,
            zero_mean=self.zero_mean and other.zero_mean,
        )

    def __neg__(self) -> "Field":
        return Field(-self.coeffs, real_valued=self.real_valued, zero_mean=self.zero_mean)

    def __mul__(self, scalar: complex) -> "Field":
        if isinstance(scalar, Field):
            raise TypeError("use multiply() for products of fields")
        real_scalar = complex(scalar).imag == 0
        return Field(
            self.coeffs * (scalar.real if real_scalar else scalar),
            real_valued=self.real_valued and real_scalar,
            zero_mean=self.zero_mean,
        )

    __rmul__ = __mul__

    def conjugate(self) -> "Field":
        """Coefficients of the complex-conjugate function: n -> conj(c(-n))."""
        return Field(
            np.conj(self.coeffs[::-1]), real_valued=self.real_valued, zero_mean=self.zero_mean
        )

    def real_part(self) -> "Field":
        """Average with the conjugate; the result is exactly Hermitian."""
        mid = self.n_max
        out = 0.5 * (self.coeffs + np.conj(self.coeffs[::-1]))
        zero_mean = self.zero_mean or out[mid] == 0
        if zero_mean:
            out[mid] = 0.0
        return Field(out, real_valued=True, zero_mean=bool(zero_mean))

    def symmetry_drift(self) -> float:
        """Largest violation of c(-n) = conj(c(n))."""
        return float(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1]))))

    def resized(self, n_max: int) -> "Field":
        """Zero-pad or truncate to another lattice radius."""
        out = np.zeros(2 * n_max + 1, dtype=np.complex128)
        keep = min(n_max, self.n_max)
        out[n_max - keep : n_max + keep + 1] = self.coeffs[
            self.n_max - keep : self.n_max + keep + 1
        ]
        return Field(out, real_valued=self.real_valued, zero_mean=self.zero_mean)


@dataclass(frozen=True, eq=False)
class PositiveField:
    """Hardy-space state on {1, ..., N}; ``coeffs[n - 1]`` holds the mode n."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen(self.coeffs)
        if arr.ndim != 1 or arr.size < 1:
            raise LatticeError(f"positive field needs a non-empty 1-D array, got {arr.shape}")
        object.__setattr__(self, "coeffs", arr)

    @property
    def n_max(self) -> int:
        return self.coeffs.size

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.n_max + 1)

    def __getitem__(self, n: int) -> complex:
        if not 1 <= n <= self.n_max:
            raise LatticeError(f"mode {n} outside positive lattice 1..{self.n_max}")
        return complex(self.coeffs[n - 1])

    def __add__(self, other: "PositiveField") -> "PositiveField":
        if other.n_max != self.n_max:
            raise LatticeError(f"lattice mismatch: {self.n_max} vs {other.n_max}")
        return PositiveField(self.coeffs + other.coeffs)

    def __sub__(self, other: "PositiveField") -> "PositiveField":
        if other.n_max != self.n_max:
            raise LatticeError(f"lattice mismatch: {self.n_max} vs {other.n_max}")
        return PositiveField(self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "PositiveField":
        return PositiveField(self.coeffs * scalar)

    __rmul__ = __mul__

    def to_field(self, n_max: int | None = None) -> Field:
        """Embed into the full lattice (default radius: this state's N)."""
        radius = self.n_max if n_max is None else n_max
        if radius < self.n_max:
            raise LatticeError(f"cannot embed modes 1..{self.n_max} into radius {radius}")
        out = np.zeros(2 * radius + 1, dtype=np.complex128)
        out[radius + 1 : radius + 1 + self.n_max] = self.coeffs
        return Field(out, zero_mean=True)


AnyField = Union[Field, PositiveField]


@dataclass(frozen=True)
class ClassicInvariants:
    momentum: float
    energy: float


# =============================================================================
# Construction
# =============================================================================


def make_field(
    modes: Iterable[tuple[int, complex]], spec: LatticeSpec, symmetrize: bool = False
) -> Field:
    """
    Build a field from (n, value) pairs; unlisted modes are zero.

    With ``symmetrize`` only n > 0 may be given and the negative modes are
    filled with conjugates, producing a real zero-mean field.
    """
    n_max = spec.n_max
    out = np.zeros(2 * n_max + 1, dtype=np.complex128)
    seen: set[int] = set()
    for n, value in modes:
        if abs(n) > n_max:
            raise LatticeError(f"mode {n} outside lattice of radius {n_max}")
        if n in seen:
            raise LatticeError(f"duplicate mode {n}")
        if symmetrize and n <= 0:
            raise LatticeError(f"symmetrize accepts only n > 0, got {n}")
        seen.add(n)
        out[n + n_max] = value
        if symmetrize:
            out[n_max - n] = np.conj(complex(value))

    if symmetrize:
        return Field(out, real_valued=True, zero_mean=True)
    return Field(out, zero_mean=bool(out[n_max] == 0))


def random_analytic_field(
    seed: int, spec: LatticeSpec, amplitude: float, decay_margin: float
) -> Field:
    """
    Deterministic real zero-mean field under the envelope
    amplitude * e^{-(rho + margin)|n|} / <n>^2.
    """
    if amplitude <= 0 or decay_margin <= 0:
        raise ValueError("amplitude and decay_margin must be positive")
    rng = np.random.default_rng(seed)
    n = np.arange(1, spec.n_max + 1, dtype=np.float64)
    envelope = amplitude * np.exp(-(spec.rho + decay_margin) * n) / (1.0 + n**2)
    radius = rng.uniform(0.0, 1.0, size=n.size)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n.size)
    values = envelope * radius * np.exp(1j * phase)
    return make_field(zip(range(1, spec.n_max + 1), values), spec, symmetrize=True)


# =============================================================================
# Norms and projections
# =============================================================================


def _weights(modes: np.ndarray, rho: float, s: float) -> np.ndarray:
    top = float(np.max(np.abs(modes))) if modes.size else 0.0
    if 2.0 * rho * top > EXPONENT_CAP:
        raise ExponentCapError(
            f"2*rho*n_max = {2.0 * rho * top:.1f} exceeds the exponent cap {EXPONENT_CAP:.0f}"
        )
    n = np.abs(modes).astype(np.float64)
    return (1.0 + n**2) ** s * np.exp(2.0 * rho * n)


def analytic_norm(f: AnyField, rho: float, s: float = 1.0) -> float:
    """H^{rho,s} norm; the zero mode never contributes."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    modes = f.modes
    mask = modes != 0
    weights = _weights(modes[mask], rho, s)
    return float(np.sqrt(np.sum(weights * np.abs(f.coeffs[mask]) ** 2)))


def project(f: Field, sign: Sign) -> AnyField:
    """C_+ (as a PositiveField), C_- or the zero-mode projection P_0."""
    n_max = f.n_max
    if sign == "plus":
        return PositiveField(f.coeffs[n_max + 1 :])
    out = np.zeros_like(f.coeffs)
    if sign == "minus":
        out[:n_max] = f.coeffs[:n_max]
        return Field(out, zero_mean=True)
    if sign == "zero":
        out[n_max] = f.coeffs[n_max]
        return Field(out, real_valued=f.real_valued, zero_mean=bool(out[n_max] == 0))
    raise ValueError(f"unknown projection {sign!r}")


def hilbert(f: Field) -> Field:
    """Multiplier -i sgn(n); the zero mode maps to 0."""
    multiplier = -1j * np.sign(f.modes)
    return Field(multiplier * f.coeffs, real_valued=f.real_valued, zero_mean=True)


def derivative(f: Field) -> Field:
    """Multiplier i n."""
    return Field(1j * f.modes * f.coeffs, real_valued=f.real_valued, zero_mean=True)


def _mirror_hermitian(full: np.ndarray) -> np.ndarray:
    """Rebuild negative modes from positive ones so the array is exactly Hermitian."""
    mid = full.size // 2
    out = full.copy()
    out[mid] = out[mid].real
    out[:mid] = np.conj(out[mid + 1 :][::-1])
    return out


def multiply(f: Field, g: Field, truncate: bool = True) -> Field:
    """
    Exact convolution on {-2N, ..., 2N}.

    With ``truncate`` the result is projected back to {-N, ..., N}; otherwise
    the doubled-lattice field is returned. The zero mode is kept.
    """
    f._check_same(g)
    full = np.convolve(f.coeffs, g.coeffs)
    real = f.real_valued and g.real_valued
    if real:
        full = _mirror_hermitian(full)
    if truncate:
        n_max = f.n_max
        full = full[n_max : 3 * n_max + 1]
    return Field(full, real_valued=real)


def inner_l2(f: AnyField, g: AnyField) -> complex:
    """<f, g> = sum_n f(n) conj(g(n)) for the normalized measure."""
    if type(f) is not type(g):
        raise LatticeError("inner product needs two fields of the same kind")
    if f.n_max != g.n_max:
        raise LatticeError(f"lattice mismatch: {f.n_max} vs {g.n_max}")
    return complex(np.vdot(g.coeffs, f.coeffs))


def grid_values(f: Field, points: int) -> np.ndarray:
    """Evaluate f at x_j = 2 pi j / points by direct summation."""
    x = 2.0 * np.pi * np.arange(points) / points
    return np.exp(1j * np.outer(x, f.modes)) @ f.coeffs


# =============================================================================
# Invariants and constants
# =============================================================================


def classic_invariants(u: Field) -> ClassicInvariants:
    """Momentum P and energy H_BO with the normalized measure."""
    if not (u.real_valued and u.zero_mean):
        raise LatticeError("classic invariants need a real_valued, zero_mean field")
    c = u.coeffs
    n = np.abs(u.modes)
    momentum = 0.5 * float(np.sum(np.abs(c) ** 2))
    dispersive = 0.5 * float(np.sum(n * np.abs(c) ** 2))
    # sum over n + m + k = 0 of u(n) u(m) u(k) = sum_k (u*u)(-k) u(k)
    square = np.convolve(c, c)[u.n_max : 3 * u.n_max + 1]
    cubic = complex(np.sum(square[::-1] * c)).real
    return ClassicInvariants(momentum=momentum, energy=dispersive + cubic / 6.0)


@lru_cache(maxsize=None)
def algebra_constant(s: float, tol: float = 1e-12) -> float:
    """C_s = 2^{s+1} (sum_k <k>^{-2s})^{1/2}, the Banach-algebra constant."""
    if s <= 0.5:
        raise SeriesError(f"sum of <k>^(-2s) diverges for s = {s} <= 1/2")
    half = bracketed_sum(lambda k: (1.0 + k * k) ** (-s), tol=tol)
    total = 1.0 + 2.0 * half.value
    if s == 1.0:
        closed = math.pi / math.tanh(math.pi)
        logger.debug("algebra constant s=1: series %.15g vs closed form %.15g", total, closed)
        if abs(total - closed) > tol + 2.0 * half.tail_bound:
            raise SeriesError(
                f"algebra constant series {total:.15g} disagrees with pi coth pi = {closed:.15g}"
            )
    return 2.0 ** (s + 1.0) * math.sqrt(total)


@dataclass(frozen=True)
class DerivativeBound:
    sup_derivative: float
    coefficient_sum: float
    c_rho: float
    bound: float


def derivative_sup_bound(u: Field, rho: float, points: int | None = None) -> DerivativeBound:
    """
    Chain ||u_x||_inf <= sum |n||u(n)| <= C_rho ||u||_{rho,1} with
    C_rho = (sum_{n != 0} n^2 <n>^{-2} e^{-2 rho |n|})^{1/2}.
    """
    if rho <= 0:
        raise SeriesError("C_rho needs rho > 0")
    n_terms = int(math.ceil(45.0 / rho)) + 1
    n = np.arange(1, n_terms + 1, dtype=np.float64)
    c_rho = math.sqrt(2.0 * float(np.sum(n**2 / (1.0 + n**2) * np.exp(-2.0 * rho * n))))
    grid = grid_values(derivative(u), points or 4 * u.n_max)
    coefficient_sum = float(np.sum(np.abs(u.modes) * np.abs(u.coeffs)))
    return DerivativeBound(
        sup_derivative=float(np.max(np.abs(grid))),
        coefficient_sum=coefficient_sum,
        c_rho=c_rho,
        bound=c_rho * analytic_norm(u, rho, 1.0),
    )


@dataclass(frozen=True)
class FrequencySplit:
    low: float
    high: float
    low_bound: float
    high_bound: float

    @property
    def total(self) -> float:
        return self.low + self.high


def frequency_split(w: Field, rho: float, eps: float, cutoff: int) -> FrequencySplit:
    """Split ||w||^2_{rho-eps,1} at |n| = cutoff and bound each part."""
    if not 0 < eps <= rho:
        raise ValueError("need 0 < eps <= rho")
    modes = w.modes
    n = np.abs(modes).astype(np.float64)
    density = (1.0 + n**2) * np.abs(w.coeffs) ** 2 * np.exp(2.0 * (rho - eps) * n)
    low_mask = (modes != 0) & (n <= cutoff)
    l2_squared = float(np.sum(np.abs(w.coeffs[modes != 0]) ** 2))
    return FrequencySplit(
        low=float(np.sum(density[low_mask])),
        high=float(np.sum(density[n > cutoff])),
        low_bound=(1.0 + cutoff**2) * math.exp(2.0 * (rho - eps) * cutoff) * l2_squared,
        high_bound=math.exp(-2.0 * eps * cutoff) * analytic_norm(w, rho, 1.0) ** 2,
    )


# =============================================================================
# Snapshot JSON
# =============================================================================


class CoefficientEntry(BaseModel):
    n: int
    re: float
    im: float


class FieldSnapshot(BaseModel):
    n_max: int
    rho: float
    s: float
    real_valued: bool
    zero_mean: bool
    coeffs: list[CoefficientEntry] = []


def field_to_snapshot(f: Field, spec: LatticeSpec) -> str:
    """Serialize nonzero coefficients; floats use shortest round-trip repr."""
    if spec.n_max != f.n_max:
        raise LatticeError(f"lattice mismatch: spec {spec.n_max} vs field {f.n_max}")
    entries = [
        CoefficientEntry(n=int(n), re=float(c.real), im=float(c.imag))
        for n, c in zip(f.modes, f.coeffs)
        if c != 0
    ]
    snapshot = FieldSnapshot(
        n_max=f.n_max,
        rho=spec.rho,
        s=spec.s,
        real_valued=f.real_valued,
        zero_mean=f.zero_mean,
        coeffs=entries,
    )
    return json.dumps(snapshot.model_dump())


def field_from_snapshot(text: str) -> tuple[Field, LatticeSpec]:
    snapshot = FieldSnapshot.model_validate_json(text)
    spec = LatticeSpec(n_max=snapshot.n_max, rho=snapshot.rho, s=snapshot.s)
    out = np.zeros(2 * snapshot.n_max + 1, dtype=np.complex128)
    seen: set[int] = set()
    for entry in snapshot.coeffs:
        if abs(entry.n) > snapshot.n_max:
            raise LatticeError(f"snapshot mode {entry.n} outside radius {snapshot.n_max}")
        if entry.n in seen:
            raise LatticeError(f"duplicate snapshot mode {entry.n}")
        seen.add(entry.n)
        out[entry.n + snapshot.n_max] = complex(entry.re, entry.im)
    field_value = Field(out, real_valued=snapshot.real_valued, zero_mean=snapshot.zero_mean)
    return field_value, spec
