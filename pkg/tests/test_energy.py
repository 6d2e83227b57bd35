import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_jko import (
    ConfigurationError,
    DomainError,
    EnergySpec,
    GridMeasure,
    InternalEnergy,
    apply_heat,
    entropy,
    eval_F,
    f_prime,
    first_variation,
    g_of,
    make_grid,
    uniform,
)

from conftest import random_positive_measure

ALL_KINDS = [
    InternalEnergy.zero(),
    InternalEnergy.boltzmann_entropy(),
    InternalEnergy.power_law(2.0),
    InternalEnergy.power_law(0.5),
]


class TestInternalEnergy:
    def test_enumeration_guards(self):
        with pytest.raises(ConfigurationError):
            InternalEnergy("cubic")
        with pytest.raises(ConfigurationError):
            InternalEnergy.power_law(1.0)
        with pytest.raises(ConfigurationError):
            InternalEnergy.power_law(-2.0)

    def test_domain_bounds(self):
        for internal in ALL_KINDS:
            assert internal.d_minus < 1.0 < internal.d_plus

    def test_f_prime_values(self):
        assert f_prime(InternalEnergy.boltzmann_entropy(), 1.0) == pytest.approx(1.0)
        assert f_prime(InternalEnergy.power_law(2.0), 3.0) == pytest.approx(6.0)
        assert f_prime(InternalEnergy.zero(), 0.7) == 0.0

    def test_f_prime_blows_up_at_zero(self):
        assert f_prime(InternalEnergy.boltzmann_entropy(), 1e-12) < -20.0

    def test_f_prime_domain_error(self):
        for internal in ALL_KINDS:
            with pytest.raises(DomainError):
                f_prime(internal, 0.0)
            with pytest.raises(DomainError):
                f_prime(internal, -1.0)

    def test_g_values(self):
        ent = InternalEnergy.boltzmann_entropy()
        for s in (0.5, 1.0, 2.0):
            assert g_of(ent, s) == pytest.approx(s)
        assert g_of(InternalEnergy.power_law(2.0), 3.0) == pytest.approx(9.0)

    def test_g_at_one_is_fprime_minus_f(self):
        for internal in ALL_KINDS:
            expected = f_prime(internal, 1.0) - float(internal.f(1.0))
            assert g_of(internal, 1.0) == pytest.approx(expected, abs=1e-13)

    @settings(max_examples=100, deadline=None)
    @given(s=st.floats(1e-3, 50.0), kind=st.integers(0, 3))
    def test_g_identity(self, s, kind):
        internal = ALL_KINDS[kind]
        lhs = g_of(internal, s)
        rhs = s * f_prime(internal, s) - float(internal.f(s))
        assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-13)

    def test_convexity_sampled(self):
        ss = np.linspace(0.05, 5.0, 200)
        for internal in ALL_KINDS:
            assert np.all(internal.f_double_prime(ss) >= 0.0)

    def test_g_prime_is_s_fpp(self):
        ss = np.linspace(0.1, 4.0, 50)
        for internal in ALL_KINDS:
            assert np.allclose(internal.g_prime(ss), ss * internal.f_double_prime(ss))


class TestEnergySpec:
    def test_w_symmetry_enforced(self, grid64):
        W = np.sin(2 * np.pi * grid64.axis_nodes)  # odd: W(-x) = -W(x)
        with pytest.raises(ConfigurationError):
            EnergySpec(grid=grid64, V=np.zeros(64), W=W, internal=InternalEnergy.zero())

    def test_even_w_accepted(self, grid64):
        W = np.cos(2 * np.pi * grid64.axis_nodes)
        spec = EnergySpec(grid=grid64, V=np.zeros(64), W=W, internal=InternalEnergy.zero())
        assert spec.has_interaction

    def test_2d_even_w(self):
        g = make_grid(2, 8)
        coords = g.coords()
        W = np.cos(2 * np.pi * coords[0]) + np.cos(2 * np.pi * coords[1])
        EnergySpec(grid=g, V=np.zeros(g.N), W=W, internal=InternalEnergy.zero())


class TestEvalF:
    def test_uniform_entropy_zero(self, grid64):
        spec = EnergySpec.free(grid64, InternalEnergy.boltzmann_entropy())
        assert eval_F(spec, uniform(grid64)) == pytest.approx(0.0, abs=1e-15)

    def test_zero_energy_anything(self, grid64):
        rng = np.random.default_rng(0)
        spec = EnergySpec.free(grid64)
        assert eval_F(spec, random_positive_measure(grid64, rng)) == 0.0

    def test_two_valued_hand_sum(self):
        g = make_grid(1, 8)
        rho = np.array([2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0])
        m = GridMeasure.from_values(g, rho)
        spec = EnergySpec.free(g, InternalEnergy.boltzmann_entropy())
        assert eval_F(spec, m) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_jensen_lower_bound(self, grid64):
        rng = np.random.default_rng(10)
        x = grid64.axis_nodes
        V = 0.7 * np.cos(2 * np.pi * x)
        W = 0.3 * np.cos(4 * np.pi * x)
        for internal in ALL_KINDS:
            spec = EnergySpec(grid=grid64, V=V, W=W, internal=internal)
            bound = float(internal.f(1.0)) - np.abs(V).max() - np.abs(W).max()
            for _ in range(5):
                rho = random_positive_measure(grid64, rng)
                assert eval_F(spec, rho) >= bound - 1e-12


class TestFirstVariation:
    def test_zero_case(self, grid64):
        spec = EnergySpec.free(grid64)
        assert np.abs(first_variation(spec, uniform(grid64))).max() == 0.0

    def test_uniform_boltzmann_is_one(self, grid64):
        spec = EnergySpec.free(grid64, InternalEnergy.boltzmann_entropy())
        out = first_variation(spec, uniform(grid64))
        assert np.abs(out - 1.0).max() < 1e-14

    def test_domain_error_names_node(self, grid64):
        spec = EnergySpec.free(grid64, InternalEnergy.boltzmann_entropy())
        rho = np.ones(64)
        rho[13] = 0.0
        measure = GridMeasure(grid=grid64, rho=rho)  # bypass normalization
        with pytest.raises(DomainError, match="node 13"):
            first_variation(spec, measure)

    @pytest.mark.parametrize("kind", range(4))
    def test_finite_difference_richardson(self, grid64, kind):
        internal = ALL_KINDS[kind]
        rng = np.random.default_rng(kind)
        x = grid64.axis_nodes
        spec = EnergySpec(
            grid=grid64,
            V=0.5 * np.cos(2 * np.pi * x),
            W=0.2 * np.cos(2 * np.pi * x),
            internal=internal,
        )
        rho = random_positive_measure(grid64, rng, low=0.5)
        eta = rng.standard_normal(64)
        eta -= eta.mean()
        fv = first_variation(spec, rho)
        exact = float((fv * eta).mean())

        def fd(h):
            plus = GridMeasure(grid=grid64, rho=rho.rho + h * eta)
            minus = GridMeasure(grid=grid64, rho=rho.rho - h * eta)
            return (eval_F(spec, plus) - eval_F(spec, minus)) / (2 * h)

        errs = [abs(fd(h) - exact) for h in (1e-3, 1e-4)]
        if errs[0] < 1e-11:
            # F is quadratic for these kinds (f''' = 0): central differences
            # are exact and only round-off remains
            assert errs[1] < 1e-11
        else:
            slope = math.log10(errs[0] / errs[1])
            assert 1.8 <= slope <= 2.2


class TestEntropy:
    def test_uniform_is_exactly_zero(self, grid64):
        assert entropy(uniform(grid64)) == 0.0

    def test_two_valued(self):
        g = make_grid(1, 8)
        rho = np.array([2.0, 0.0] * 4)
        assert entropy(GridMeasure.from_values(g, rho)) == pytest.approx(math.log(2.0))

    def test_nonnegative(self, grid64):
        rng = np.random.default_rng(11)
        for _ in range(20):
            assert entropy(random_positive_measure(grid64, rng)) >= -1e-12

    def test_decays_under_heat_flow(self, grid256):
        rng = np.random.default_rng(12)
        rho = random_positive_measure(grid256, rng)
        h_before = entropy(rho)
        for t in (1e-3, 0.01, 0.1):
            smoothed = GridMeasure.from_values(
                grid256.__class__(grid256.d, grid256.n), apply_heat(grid256, t, rho.rho)
            )
            assert entropy(smoothed) <= h_before + 1e-12
