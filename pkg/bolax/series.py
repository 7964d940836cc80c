"""Lattice series with an integral bracket on the tail."""

import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from bolax.errors import SeriesError
from bolax.log import get_logger

logger = get_logger(__name__)

Term = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SeriesValue:
    """A summed series with a rigorous bound on the tail error."""

    value: float
    tail_bound: float
    terms: int


def bracketed_sum(
    term: Term,
    start: int = 1,
    tol: float = 1e-12,
    terms: int | None = None,
    max_terms: int = 1 << 24,
) -> SeriesValue:
    """
    Sum a positive, decreasing term from ``start`` to infinity.

    The first K terms are added explicitly. The remainder lies between
    the integrals over [K+1, inf) and [K, inf); the midpoint is used and
    half the bracket width is reported as the bound. Without an explicit
    ``terms`` count, K doubles until that bound drops below ``tol``.
    """
    if terms is None:
        count = 1024
        while float(term(np.float64(count))) / 2 >= tol and count < max_terms:
            count *= 2
    else:
        count = terms
    if count < start:
        raise ValueError("term count must reach the start index")

    k = np.arange(count, start - 1, -1, dtype=np.float64)  # smallest terms first
    partial = float(np.sum(term(k)))

    # tail over [K+1, inf) as an integral over t = 1/x on (0, 1/(K+1)]
    def inverted(t: float) -> float:
        return float(term(np.float64(1.0 / t))) / (t * t)

    lower = _integrate(inverted, 0.0, 1.0 / (count + 1), tol)
    width = _integrate(lambda x: float(term(np.float64(x))), count, count + 1, tol)
    if not (lower >= 0.0 and width >= 0.0):
        raise SeriesError(f"series terms are not positive past k = {count}")
    bound = 0.5 * width

    if terms is None and bound >= tol:
        logger.warning(
            "series tail bound %.3e above tolerance %.1e after %d terms", bound, tol, count
        )
    return SeriesValue(value=partial + lower + bound, tail_bound=bound, terms=count)


def _integrate(integrand: Callable[[float], float], a: float, b: float, tol: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, error = quad(integrand, a, b, epsabs=tol * 1e-3, epsrel=1e-12, limit=400)
        except IntegrationWarning as exc:
            raise SeriesError(f"tail quadrature on [{a:.6g}, {b:.6g}] did not converge") from exc
    if error > tol:
        raise SeriesError(f"tail quadrature error {error:.3e} above tolerance {tol:.1e}")
    return value
