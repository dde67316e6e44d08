import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonfilter import cascade, cavity
from photonfilter.cascade import FILTER_BS_PHASE
from photonfilter.fock import DOWN, UP


def l2(a, b, dt):
    return math.sqrt(np.sum(np.abs(a - b) ** 2) * dt)


def gaussian_mode(T, width):
    return cavity.sampled_mode(T, lambda t: np.exp(-(t**2) / (2 * width**2)))


class TestParams:
    def test_C_from_g_and_Gamma(self):
        p = cavity.CavityParams(2.0, g=3.0, Gamma=0.5)
        assert p.C == pytest.approx(2 * 9 / (2.0 * 0.5))

    def test_inconsistent_C(self):
        with pytest.raises(ValueError):
            cavity.CavityParams(1.0, C=1.0, g=3.0, Gamma=0.5)

    @pytest.mark.parametrize("kw", [dict(kappa=0.0, C=1.0), dict(kappa=1.0), dict(kappa=1.0, C=-1.0), dict(kappa=1.0, C=1.0, T=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            cavity.CavityParams(**kw)

    def test_rates(self):
        p = cavity.CavityParams(2.0, C=3.0)
        assert p.rate(DOWN) == 1.0
        assert p.rate(UP) == 7.0
        assert cavity.CavityParams(2.0, C=math.inf).rate(UP) == math.inf


class TestModes:
    def test_optimal_frequency_grid_scan(self):
        kT = 2.0
        x = cavity.optimal_frequency(1.0, kT)
        xs = np.linspace(1e-9, math.pi - 1e-9, 400001)
        h = 2 * xs / kT * np.tan(xs / 2) - 1
        i = np.flatnonzero(np.diff(np.sign(h)))[0]
        # refine the bracketing grid cell by linear interpolation
        root = xs[i] - h[i] * (xs[i + 1] - xs[i]) / (h[i + 1] - h[i])
        assert x == pytest.approx(root, abs=1e-9)
        assert abs(2 * x / kT * math.tan(x / 2) - 1) < 1e-10

    @pytest.mark.parametrize("kT", [1e3, 1e5])
    def test_frequency_tends_to_pi(self, kT):
        x = cavity.optimal_frequency(1.0, kT)
        assert 0 < x < math.pi
        # x = pi - 4 pi / kT + O(kT^-2)
        assert math.pi - x == pytest.approx(4 * math.pi / kT, rel=10 / kT)

    def test_frequency_bad_input(self):
        with pytest.raises(ValueError):
            cavity.optimal_frequency(1.0, 0.0)

    @pytest.mark.parametrize(
        "mode",
        [cavity.optimal_mode(1.0, 50.0), cavity.constant_mode(50.0), gaussian_mode(50.0, 8.0)],
        ids=["optimal", "constant", "gaussian"],
    )
    def test_normalized(self, mode):
        assert mode.norm2() == pytest.approx(1.0, abs=1e-9)

    def test_sampled_from_points(self):
        t = np.linspace(-5, 5, 201)
        mode = cavity.sampled_mode(10.0, t=t, values=np.cos(math.pi * t / 10))
        assert mode.norm2() == pytest.approx(1.0, abs=1e-9)
        assert mode(6.0) == 0.0

    def test_sampled_needs_data(self):
        with pytest.raises(ValueError):
            cavity.sampled_mode(10.0)


class TestTimeDomain:
    def test_down_steady_state(self):
        kappa = 4.0
        f = cavity.constant_mode(100.0)
        p = cavity.CavityParams(kappa, C=math.inf, T=100.0)
        alpha = 0.7 + 0.2j
        gam = cavity.cavity_amplitude(f, p, DOWN, [0.0, 10.0], alpha)
        np.testing.assert_allclose(gam, 2 * alpha * f.A / math.sqrt(kappa), rtol=1e-12)

    def test_up_empty_at_infinite_C(self):
        f = cavity.constant_mode(100.0)
        p = cavity.CavityParams(1.0, C=math.inf, T=100.0)
        assert np.all(cavity.cavity_amplitude(f, p, UP, np.linspace(-50, 50, 5)) == 0)

    def test_down_reflects_with_sign(self):
        # narrowband: the correction is the delay term 4 f' / kappa
        f = gaussian_mode(4.0, 0.4)
        p = cavity.CavityParams(1000.0, C=math.inf, T=4.0)
        t = np.linspace(-1, 1, 41)
        np.testing.assert_allclose(cavity.output_mode(f, p, DOWN)(t), -f(t), atol=1e-2 * f.A)

    def test_up_scaled(self):
        C = 20.0
        f = gaussian_mode(4.0, 0.4)
        p = cavity.CavityParams(1000.0, C=C, T=4.0)
        t = np.linspace(-100, 100, 41)
        np.testing.assert_allclose(cavity.output_mode(f, p, UP)(t), (1 - 2 / (1 + 2 * C)) * f(t), atol=1e-5 * f.A)

    @pytest.mark.parametrize("atom", [UP, DOWN])
    def test_discrete_recursion_first_order(self, atom):
        f = cavity.optimal_mode(1.0, 20.0)
        p = cavity.CavityParams(1.0, C=5.0, T=20.0)
        errs = []
        for tau in (4e-3, 2e-3, 1e-3):
            t, gam, out = cavity.cavity_amplitude_discrete(f, p, atom, tau)
            errs.append(
                (np.max(np.abs(gam - cavity.cavity_amplitude(f, p, atom, t))), np.max(np.abs(out - cavity.output_mode(f, p, atom)(t))))
            )
        errs = np.array(errs)
        np.testing.assert_allclose(errs[:-1] / errs[1:], 2.0, atol=0.05)

    def test_discrete_tau_too_large(self):
        with pytest.raises(ValueError):
            cavity.cavity_amplitude_discrete(cavity.constant_mode(10.0), cavity.CavityParams(1.0, C=1.0, T=10.0), DOWN, 1.5)


class TestTransfer:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 100.0), st.floats(0.0, 1e4))
    def test_down_all_pass(self, kappa, C):
        w = np.linspace(-50, 50, 201)
        p = cavity.CavityParams(kappa, C=C)
        np.testing.assert_allclose(np.abs(cavity.transfer_K(w, p, DOWN)), 1.0, atol=1e-14)

    def test_scalars(self):
        assert cavity.scalar_K(cavity.CavityParams(1.0, C=3.0), DOWN) == -1
        assert cavity.scalar_K(cavity.CavityParams(1.0, C=3.0), UP) == pytest.approx(5 / 7)
        assert cavity.scalar_K(cavity.CavityParams(1.0, C=1e9), UP) == pytest.approx(1.0, abs=1e-9)
        assert cavity.scalar_K(cavity.CavityParams(1.0, C=math.inf), UP) == 1

    def test_bad_atom(self):
        with pytest.raises(ValueError):
            cavity.transfer_K(0.0, cavity.CavityParams(1.0, C=1.0), 2)

    @pytest.mark.parametrize("atom", [UP, DOWN])
    @pytest.mark.parametrize("C", [1.0, 50.0])
    def test_spectral_matches_time_domain(self, atom, C):
        f = gaussian_mode(20.0, 1.5)
        p = cavity.CavityParams(1.0, C=C, T=20.0)
        dt = 0.01
        t, spec = cavity.output_mode_spectral(f, p, atom, dt, 200.0)
        assert l2(spec, cavity.output_mode(f, p, atom)(t), dt) <= 1e-6

    def test_spectral_hard_edges_first_order(self):
        # a mode with a jump at the pulse edges only converges linearly on a grid
        f = cavity.optimal_mode(1.0, 20.0)
        p = cavity.CavityParams(1.0, C=5.0, T=20.0)
        errs = []
        for dt in (0.02, 0.01):
            t, spec = cavity.output_mode_spectral(f, p, DOWN, dt, 200.0)
            errs.append(l2(spec, cavity.output_mode(f, p, DOWN)(t), dt))
        assert errs[0] / errs[1] == pytest.approx(2.0, abs=0.05)


class TestEnergyAndDeviation:
    @pytest.mark.parametrize("C", [1.0, 10.0, 100.0])
    @pytest.mark.parametrize("mode", [cavity.optimal_mode(1.0, 200.0), cavity.constant_mode(200.0)], ids=["optimal", "constant"])
    def test_energy_accounting(self, C, mode):
        p = cavity.CavityParams(1.0, C=C, T=200.0)
        down = 1 - cavity.output_mode(mode, p, DOWN).norm2()
        up = 1 - cavity.output_mode(mode, p, UP).norm2()
        assert abs(down) < 1e-12
        assert up >= 0
        if C >= 10:
            # 1 - |K_up|^2 for a long pulse, close to 2/C once C >> 1
            assert up == pytest.approx(8 * C / (1 + 2 * C) ** 2, rel=1e-3)

    def test_up_loss_about_two_over_C(self):
        C = 1e3
        p = cavity.CavityParams(1.0, C=C, T=200.0)
        up = 1 - cavity.output_mode(cavity.constant_mode(200.0), p, UP).norm2()
        assert up == pytest.approx(2 / C, rel=2e-3)

    @pytest.mark.parametrize("kT", [5.0, 50.0, 500.0])
    def test_down_closed_forms(self, kT):
        p = cavity.CavityParams(1.0, C=100.0, T=kT)
        assert cavity.overlap_deviation(cavity.optimal_mode(1.0, kT), p, DOWN) == pytest.approx(cavity.e_down_optimal(1.0, kT), abs=1e-8)
        assert cavity.overlap_deviation(cavity.constant_mode(kT), p, DOWN) == pytest.approx(cavity.e_down_constant(1.0, kT), abs=1e-8)

    @pytest.mark.parametrize("C", [100.0, 300.0, 1e3])
    @pytest.mark.parametrize(
        "mode", [cavity.optimal_mode(1.0, 300.0), cavity.constant_mode(300.0), gaussian_mode(300.0, 60.0)], ids=["optimal", "constant", "gaussian"]
    )
    def test_up_shape_independent(self, C, mode):
        p = cavity.CavityParams(1.0, C=C, T=300.0)
        assert cavity.overlap_deviation(mode, p, UP) == pytest.approx(cavity.e_up_ideal(C), abs=1e-6)

    @pytest.mark.parametrize("C", [3.0, 30.0])
    def test_up_edge_shortfall_shrinks(self, C):
        # hard pulse edges cost a transient of relative order 1/((1+2C)^2 kT)
        err = abs(cavity.overlap_deviation(cavity.constant_mode(300.0), cavity.CavityParams(1.0, C=C, T=300.0), UP) - cavity.e_up_ideal(C))
        assert err < 10 / ((1 + 2 * C) ** 2 * 300.0)

    def test_up_zero_at_infinite_C(self):
        p = cavity.CavityParams(1.0, C=math.inf, T=300.0)
        assert cavity.overlap_deviation(cavity.constant_mode(300.0), p, UP) == 0.0

    @staticmethod
    def _shift(base, k, eps, kT, params):
        # even perturbation orthogonal to the base mode, applied with both signs
        h = lambda t: np.cos(k * math.pi * t / kT)  # noqa: E731
        proj = cavity._integrate_panels(lambda t: h(t) * base(t), -kT / 2, kT / 2, 64)
        E0 = cavity.overlap_deviation(base, params, DOWN)
        d = [cavity.overlap_deviation(cavity.sampled_mode(kT, lambda t: base(t) + s * eps * (h(t) - proj * base(t))), params, DOWN) - E0 for s in (1, -1)]
        return (d[0] - d[1]) / 2, (d[0] + d[1]) / 2

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("eps", [1e-2, 1e-3])
    def test_optimal_mode_stationary(self, k, eps):
        kT = 50.0
        p = cavity.CavityParams(1.0, C=math.inf, T=kT)
        first, second = self._shift(cavity.optimal_mode(1.0, kT), k, eps, kT, p)
        assert abs(first) < 1e-12
        assert second > 0

    @pytest.mark.parametrize("k", [1, 2])
    def test_constant_mode_not_stationary(self, k):
        kT, eps = 50.0, 1e-3
        p = cavity.CavityParams(1.0, C=math.inf, T=kT)
        first, _ = self._shift(cavity.constant_mode(kT), k, eps, kT, p)
        assert abs(first) > 0.1 * eps


class TestDecoherence:
    p = cavity.CavityParams(1.0, C=3.0)

    def test_down_down_is_one(self):
        assert cavity.decoherence_factor(1.2, 0.7j, self.p, DOWN, DOWN) == 1

    @settings(max_examples=25, deadline=None)
    @given(st.complex_numbers(max_magnitude=3.0))
    def test_same_field_up_up_is_one(self, a):
        assert cavity.decoherence_factor(a, a, self.p, UP, UP) == pytest.approx(1.0, abs=1e-12)

    def test_one_sided(self):
        s = cavity.scattering_strength(3.0)
        assert cavity.decoherence_factor(1.2, 0.7, self.p, UP, DOWN) == pytest.approx(math.exp(-s * 1.44))

    def test_scattering_strength_limits(self):
        assert cavity.scattering_strength(math.inf) == 0.0
        assert cavity.scattering_strength(0.5) == pytest.approx(0.5)

    @pytest.mark.parametrize("i, p", [(UP, UP), (UP, DOWN), (DOWN, UP)])
    @pytest.mark.parametrize("C", [0.5, 5.0])
    def test_narrowband_matches_spectral(self, i, p, C):
        # narrow Gaussian spectrum with all weight well inside kappa
        params = cavity.CavityParams(1.0, C=C)
        an, am = 0.9 + 0.3j, 0.4 - 0.8j
        width = 1e-4

        def spec(a):
            return lambda w: a * math.exp(-(w**2) / (4 * width**2)) / (2 * math.pi * width**2) ** 0.25

        got = cavity.decoherence_factor_spectral(spec(an), spec(am), params, i, p, 40 * width)
        ref = complex(cavity.decoherence_factor(an, am, params, i, p))
        # Lorentzian curvature over the pulse bandwidth is ~ (width/kappa)^2
        assert abs(got - ref) < 1e-8

    def test_spectral_ideal(self):
        assert cavity.decoherence_factor_spectral(None, None, cavity.CavityParams(1.0, C=math.inf), UP, UP, 1.0) == 1


def fock_vector(c, cutoff):
    v = np.zeros((cutoff + 1) ** 2, dtype=complex)
    for n in range(min(c.shape[0], cutoff + 1)):
        for m in range(min(c.shape[1], cutoff + 1)):
            v[n * (cutoff + 1) + m] = c[n, m]
    return v


class TestMixtureUnit:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_ideal_limit_matches_cascade(self, alpha):
        cutoff = 32
        rho = cavity.unit_transform_nonideal(cavity.CoherentDyadMixture.coherent(alpha), cavity.CavityParams(1.0, C=math.inf))
        out = cascade.unit_transform(cascade.coherent_pair(alpha), FILTER_BS_PHASE)
        assert rho.trace() == pytest.approx(cascade.norm2(out), abs=1e-6)
        v = fock_vector(out, cutoff)
        assert np.max(np.abs(rho.fock_matrix(cutoff) - np.outer(v, v.conj()))) <= 1e-6

    @pytest.mark.parametrize("C", [0.5, 10.0, 1e4])
    def test_trace_non_increasing(self, C):
        params = cavity.CavityParams(1.0, C=C)
        rho = cavity.CoherentDyadMixture.coherent(1.3)
        tr = rho.trace()
        for phi in (math.pi / 8, math.pi / 16, None):
            rho = cavity.unit_transform_nonideal(rho, params, phi)
            assert rho.trace() <= tr + 1e-12
            tr = rho.trace()

    def test_iterated_hermitian_psd(self):
        rho = cavity.run_filter_nonideal(1.0, 2, cavity.CavityParams(1.0, C=5.0))
        assert rho.is_hermitian()
        M = rho.fock_matrix(12)
        np.testing.assert_allclose(M, M.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh((M + M.conj().T) / 2).min() > -1e-12

    def test_merge_combines_duplicates(self):
        kets = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-14], [0.5, 0.5]], dtype=complex)
        merged = cavity.CoherentDyadMixture(kets, np.ones((3, 3))).merged()
        assert len(merged.kets) == 2
        assert merged.c[0, 0] == 4

    def test_short_pulse_refused(self):
        rho = cavity.CoherentDyadMixture.coherent(1.0)
        with pytest.raises(ValueError, match="below"):
            cavity.unit_transform_nonideal(rho, cavity.CavityParams(1.0, C=10.0, T=50.0))


class TestFidelityVsC:
    @pytest.mark.parametrize("alpha_sq", [2.0, 4.0])
    @pytest.mark.parametrize("N", [0, 1, 2])
    def test_large_C_matches_ideal(self, alpha_sq, N):
        pt = cavity.fidelity_vs_C(alpha_sq, N, [1e6])[0]
        assert pt.fidelity == pytest.approx(cavity.ideal_fidelity(alpha_sq, N), abs=1e-3)

    def test_vacuum_limit(self):
        for pt in cavity.fidelity_vs_C(1e-6, 2, [1.0, 10.0, 1e3]):
            assert pt.fidelity == pytest.approx(1.0, abs=1e-8)

    def test_improves_with_C(self):
        F = [pt.fidelity for pt in cavity.fidelity_vs_C(2.0, 1, [10.0, 100.0, 1e4])]
        assert F[0] < F[1] < F[2]

    def test_zero_trace(self):
        rho = cavity.CoherentDyadMixture(np.zeros((1, 2), dtype=complex), np.zeros((1, 1)))
        with pytest.raises(ZeroDivisionError):
            cavity.mixture_fidelity(rho, 1.0)


class TestAdiabatic:
    def test_zero_flux(self):
        assert cavity.adiabatic_check(0.0, cavity.CavityParams(1.0, C=10.0, g=1.0)) == 0.0

    def test_warns_at_threshold(self):
        p = cavity.CavityParams(1.0, C=10.0, g=1.0)
        with pytest.warns(cavity.AdiabaticityWarning):
            assert cavity.adiabatic_check(0.1, p) == pytest.approx(0.1)

    def test_quiet_below_threshold(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            cavity.adiabatic_check(0.05, cavity.CavityParams(1.0, C=10.0, g=1.0))

    def test_negative_flux(self):
        with pytest.raises(ValueError):
            cavity.adiabatic_check(-1.0, cavity.CavityParams(1.0, C=10.0, g=1.0))

    @pytest.mark.parametrize("C", [1e2, 1e4, 1e6])
    def test_exact_and_approximate_agree(self, C):
        Gamma = 0.01
        p = cavity.CavityParams(1.0, C=C, Gamma=Gamma)
        approx = cavity.adiabatic_check(0.01, p, warn=False)
        exact = cavity.adiabatic_ratio_exact(0.01, p)
        assert exact == pytest.approx(approx * (2 * C / (1 + 2 * C)) ** 2, rel=1e-12)
        assert exact == pytest.approx(approx, rel=1.0 / C)
