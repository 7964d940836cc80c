import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bolax import field_core
from bolax.config import LatticeSpec
from bolax.errors import ExponentCapError, LatticeError, SeriesError
from bolax.field_core import (
    Field,
    PositiveField,
    algebra_constant,
    analytic_norm,
    classic_invariants,
    derivative,
    derivative_sup_bound,
    field_from_snapshot,
    field_to_snapshot,
    frequency_split,
    grid_values,
    hilbert,
    inner_l2,
    make_field,
    multiply,
    project,
    random_analytic_field,
)
from bolax.series import SeriesValue
from tests.conftest import cosine

SPEC = LatticeSpec(n_max=16, rho=0.5)
seeds = st.integers(min_value=0, max_value=2**31 - 1)
amplitudes = st.floats(min_value=0.01, max_value=1.0)


class TestMakeField:
    def test_symmetrized_cosine(self, spec32):
        u = make_field([(1, 1 + 0j)], spec32, symmetrize=True)
        assert u[1] == 1 and u[-1] == 1
        assert u.real_valued and u.zero_mean

    def test_empty_is_zero(self, spec32):
        u = make_field([], spec32)
        assert not np.any(u.coeffs)

    def test_sine_conjugate(self, spec32):
        u = make_field([(1, 0.5j)], spec32, symmetrize=True)
        assert u[-1] == -0.5j

    def test_out_of_range(self, spec32):
        with pytest.raises(LatticeError, match="outside"):
            make_field([(33, 1.0)], spec32)

    def test_duplicate(self, spec32):
        with pytest.raises(LatticeError, match="duplicate"):
            make_field([(2, 1.0), (2, 0.5)], spec32)

    def test_symmetrize_rejects_nonpositive(self, spec32):
        with pytest.raises(LatticeError):
            make_field([(0, 1.0)], spec32, symmetrize=True)

    def test_flags_are_checked(self):
        with pytest.raises(LatticeError, match="Hermitian"):
            Field(np.array([0, 0, 1j]), real_valued=True)
        with pytest.raises(LatticeError, match="zero mode"):
            Field(np.array([0, 1, 0]), zero_mean=True)


class TestNorms:
    def test_cosine_norm(self, two_cos):
        assert analytic_norm(two_cos, 0.5, 1.0) == pytest.approx(math.sqrt(4 * math.e))
        assert analytic_norm(two_cos, 0.5, 1.0) == pytest.approx(3.2974, abs=1e-4)

    def test_plain_l2(self, two_cos):
        assert analytic_norm(two_cos, 0.0, 0.0) == pytest.approx(math.sqrt(2))

    def test_zero(self, spec32):
        assert analytic_norm(Field.zeros(32), 0.7, 2.0) == 0.0

    def test_zero_mode_excluded(self):
        f = Field(np.array([0, 5.0, 0]))
        assert analytic_norm(f, 0.5) == 0.0

    def test_exponent_cap(self):
        f = Field.zeros(400)
        with pytest.raises(ExponentCapError):
            analytic_norm(f, 1.0)

    def test_positive_field_norm(self, two_cos):
        plus = project(two_cos, "plus")
        assert analytic_norm(plus, 0.5, 1.0) ** 2 == pytest.approx(2 * math.e)


class TestProjections:
    def test_plus_of_cosine(self, two_cos):
        plus = project(two_cos, "plus")
        assert isinstance(plus, PositiveField)
        assert plus[1] == 1 and not np.any(plus.coeffs[1:])

    def test_zero_mode(self, two_cos):
        assert not np.any(project(two_cos, "zero").coeffs)
        f = Field(np.array([0, 3.0, 0]))
        assert project(f, "zero")[0] == 3.0

    @given(seeds, amplitudes)
    @settings(max_examples=25, deadline=None)
    def test_projections_sum_to_identity(self, seed, amp):
        f = random_analytic_field(seed, SPEC, amp, 0.5)
        rebuilt = project(f, "plus").to_field() + project(f, "minus") + project(f, "zero")
        assert np.array_equal(rebuilt.coeffs, f.coeffs)

    @given(seeds, amplitudes)
    @settings(max_examples=25, deadline=None)
    def test_hilbert_squared_is_minus_identity(self, seed, amp):
        f = random_analytic_field(seed, SPEC, amp, 0.5)
        np.testing.assert_allclose(hilbert(hilbert(f)).coeffs, -f.coeffs, atol=1e-17)


class TestMultipliers:
    def test_hilbert_of_cosine(self, two_cos):
        h = hilbert(two_cos)
        assert h[1] == -1j and h[-1] == 1j

    def test_derivative_of_cosine(self, two_cos):
        d = derivative(two_cos)
        assert d[1] == 1j
        assert d.zero_mean and d.real_valued

    def test_zero_maps_to_zero(self):
        z = Field.zeros(8)
        assert not np.any(hilbert(z).coeffs)
        assert not np.any(derivative(z).coeffs)

    @given(seeds, amplitudes, st.sampled_from([0.05, 0.1, 0.2]))
    @settings(max_examples=30, deadline=None)
    def test_cauchy_estimate(self, seed, amp, eps):
        f = random_analytic_field(seed, SPEC, amp, 0.5)
        lhs = analytic_norm(derivative(f), SPEC.rho - eps, 1.0)
        assert lhs <= analytic_norm(f, SPEC.rho, 1.0) / (eps * math.e)


class TestMultiply:
    def test_single_mode_square(self, spec32):
        f = make_field([(1, 1.0)], spec32)
        product = multiply(f, f)
        assert product[2] == 1
        assert np.count_nonzero(product.coeffs) == 1

    def test_cosine_square(self, two_cos):
        square = multiply(two_cos, two_cos)
        assert square[0] == 2 and square[2] == 1 and square[-2] == 1
        assert square.real_valued and not square.zero_mean

    def test_lattice_mismatch(self):
        with pytest.raises(LatticeError):
            multiply(Field.zeros(4), Field.zeros(5))

    def test_untruncated_product_lives_on_doubled_lattice(self):
        f = make_field([(4, 1.0)], LatticeSpec(n_max=4), symmetrize=True)
        full = multiply(f, f, truncate=False)
        assert full.n_max == 8
        assert full[8] == 1 and full[0] == 2

    @given(seeds, seeds, st.sampled_from([1.0, 2.0]))
    @settings(max_examples=30, deadline=None)
    def test_algebra_bound(self, seed_f, seed_g, s):
        f = random_analytic_field(seed_f, SPEC, 0.7, 0.5)
        g = random_analytic_field(seed_g, SPEC, 0.3, 0.5)
        lhs = analytic_norm(multiply(f, g, truncate=False), SPEC.rho, s)
        bound = algebra_constant(s) * analytic_norm(f, SPEC.rho, s) * analytic_norm(g, SPEC.rho, s)
        assert lhs <= bound

    def test_product_of_real_fields_is_exactly_hermitian(self):
        f = random_analytic_field(3, SPEC, 0.4, 0.5)
        g = random_analytic_field(4, SPEC, 0.4, 0.5)
        assert multiply(f, g).symmetry_drift() == 0.0


class TestInnerProduct:
    def test_cosine(self, two_cos):
        assert inner_l2(two_cos, two_cos) == pytest.approx(2)

    def test_with_zero(self, two_cos):
        assert inner_l2(two_cos, Field.zeros(32)) == 0

    def test_orthogonal_modes(self, spec32):
        e1 = make_field([(1, 1.0)], spec32)
        e2 = make_field([(2, 1.0)], spec32)
        assert inner_l2(e1, e2) == 0

    def test_kinds_must_match(self, two_cos):
        with pytest.raises(LatticeError):
            inner_l2(two_cos, project(two_cos, "plus"))

    @given(seeds, amplitudes)
    @settings(max_examples=20, deadline=None)
    def test_plancherel(self, seed, amp):
        u = random_analytic_field(seed, SPEC, amp, 0.5)
        quadrature = np.mean(np.abs(grid_values(u, 4 * SPEC.n_max)) ** 2)
        assert quadrature == pytest.approx(inner_l2(u, u).real, rel=1e-10)


class TestClassicInvariants:
    def test_cosine(self, two_cos):
        invariants = classic_invariants(two_cos)
        assert invariants.momentum == pytest.approx(1.0)
        assert invariants.energy == pytest.approx(1.0)

    def test_zero(self):
        invariants = classic_invariants(Field.zeros(8))
        assert (invariants.momentum, invariants.energy) == (0.0, 0.0)

    def test_cubic_term_against_quadrature(self, spec32):
        u = make_field([(1, 1.0), (2, 1.0)], spec32, symmetrize=True)
        x = 2 * np.pi * np.arange(256) / 256
        values = 2 * np.cos(x) + 2 * np.cos(2 * x)
        cubic = np.mean(values**3) / 6.0
        assert classic_invariants(u).energy == pytest.approx(0.5 * (2 + 4) + cubic)

    def test_requires_flags(self):
        with pytest.raises(LatticeError):
            classic_invariants(Field(np.array([0, 1.0, 0])))


class TestAlgebraConstant:
    def test_s1_closed_form(self):
        closed = 4 * math.sqrt(math.pi / math.tanh(math.pi))
        assert algebra_constant(1.0) == pytest.approx(closed, abs=1e-10)
        assert closed == pytest.approx(7.1031, abs=1e-3)

    def test_partial_sum_agrees(self):
        k = np.arange(1, 10_001, dtype=float)
        partial = 4 * math.sqrt(1 + 2 * np.sum(1 / (1 + k**2)))
        assert 0 < algebra_constant(1.0) - partial < 1e-3

    def test_large_s_limit(self):
        s = 30.0
        assert algebra_constant(s) == pytest.approx(2 ** (s + 1), rel=1e-6)

    def test_divergent(self):
        with pytest.raises(SeriesError):
            algebra_constant(0.5)

    def test_closed_form_mismatch_raises(self, monkeypatch):
        def short(term, tol=1e-12, **kwargs):
            return SeriesValue(value=1.076674047 - 1e-6, tail_bound=1e-13, terms=1024)

        monkeypatch.setattr(field_core, "bracketed_sum", short)
        with pytest.raises(SeriesError, match="disagrees"):
            algebra_constant(1.0, tol=1e-11)


class TestRandomFields:
    def test_deterministic(self):
        a = random_analytic_field(7, SPEC, 0.2, 0.5)
        b = random_analytic_field(7, SPEC, 0.2, 0.5)
        assert np.array_equal(a.coeffs, b.coeffs)

    @given(seeds, amplitudes)
    @settings(max_examples=30, deadline=None)
    def test_envelope(self, seed, amp):
        u = random_analytic_field(seed, SPEC, amp, 0.5)
        assert u.real_valued and u.zero_mean
        n = np.arange(1, SPEC.n_max + 1)
        envelope = amp * np.exp(-(SPEC.rho + 0.5) * n) / (1 + n**2)
        assert np.all(np.abs(project(u, "plus").coeffs) <= envelope * (1 + 1e-12))
        k_all = np.arange(-SPEC.n_max, SPEC.n_max + 1)
        k_all = k_all[k_all != 0]
        constant = math.sqrt(np.sum(np.exp(-2 * 0.5 * np.abs(k_all)) / (1 + k_all**2)))
        assert analytic_norm(u, SPEC.rho, 1.0) <= amp * constant * (1 + 1e-12)


class TestSupplements:
    def test_derivative_sup_bound_chain(self):
        u = random_analytic_field(11, SPEC, 0.5, 0.5)
        report = derivative_sup_bound(u, SPEC.rho)
        assert report.sup_derivative <= report.coefficient_sum * (1 + 1e-12)
        assert report.coefficient_sum <= report.bound

    def test_frequency_split_bounds(self):
        w = random_analytic_field(5, SPEC, 0.5, 0.5)
        split = frequency_split(w, SPEC.rho, 0.1, 4)
        assert split.low <= split.low_bound
        assert split.high <= split.high_bound
        assert split.total == pytest.approx(analytic_norm(w, SPEC.rho - 0.1, 1.0) ** 2)

    def test_arithmetic_keeps_flags(self, two_cos):
        combo = 2.0 * two_cos - two_cos * 0.5
        assert combo.real_valued and combo.zero_mean
        assert (two_cos * 1j).real_valued is False

    def test_snapshot_round_trip_is_bit_exact(self, spec32):
        u = random_analytic_field(9, spec32, 0.3, 0.5)
        restored, spec = field_from_snapshot(field_to_snapshot(u, spec32))
        assert spec == spec32
        assert np.array_equal(restored.coeffs, u.coeffs)
        assert restored.real_valued and restored.zero_mean

    def test_snapshot_omits_zero_modes(self, two_cos, spec32):
        text = field_to_snapshot(two_cos, spec32)
        assert text.count('"n"') == 2

    def test_resized_pads_with_zeros(self):
        u = cosine(0.1, LatticeSpec(n_max=4))
        padded = u.resized(8)
        assert padded.n_max == 8 and padded[1] == 0.1 and padded[8] == 0
