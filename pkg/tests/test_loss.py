import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonfilter import cascade, loss
from photonfilter.loss import SparseDensity


def dyad(n, m, w=1.0):
    return SparseDensity.from_dyads({((n,), (m,)): w})


def random_mixed(rng, modes=2, photons=3, rank=3):
    occs = [o for o in np.ndindex(*(photons + 1,) * modes) if sum(o) <= photons]
    dyads = {}
    for _ in range(rank):
        v = rng.normal(size=len(occs)) + 1j * rng.normal(size=len(occs))
        v /= np.linalg.norm(v) * math.sqrt(rank)
        for i, a in enumerate(occs):
            for j, b in enumerate(occs):
                dyads[(a, b)] = dyads.get((a, b), 0) + v[i] * np.conj(v[j])
    return SparseDensity.from_dyads(dyads)


def entries(rho):
    return rho.coalesce().to_dict()


class TestChannel:
    def test_zero_loss_identity(self):
        rho = random_mixed(np.random.default_rng(0))
        out = loss.loss_channel(rho, 1, 0.0)
        a, b = entries(rho), entries(out)
        assert set(a) == set(b)
        assert all(abs(a[k] - b[k]) < 1e-15 for k in a)

    def test_full_loss_vacuum(self):
        rho = random_mixed(np.random.default_rng(1))
        out = loss.loss_channel(rho, 0, 1.0)
        assert np.all(out.kets[:, 0] == 0) and np.all(out.bras[:, 0] == 0)
        assert out.trace() == pytest.approx(rho.trace(), abs=1e-12)

    @pytest.mark.parametrize("R", [0.0, 0.1, 0.5, 0.9])
    def test_single_photon(self, R):
        out = entries(loss.loss_channel(dyad(1, 1), 0, R))
        assert out[((1,), (1,))] == pytest.approx(1 - R, abs=1e-15)
        assert out.get(((0,), (0,)), 0.0) == pytest.approx(R, abs=1e-15)

    @pytest.mark.parametrize("n, m", [(n, m) for n in range(9) for m in range(9)])
    def test_beam_splitter_oracle(self, n, m):
        R = 0.23
        kraus = entries(loss.loss_channel(dyad(n, m), 0, R))
        ref = loss.beam_splitter_loss_dyad(n, m, R)
        keys = {(k[0][0], k[1][0]) for k in kraus} | set(ref)
        for key in keys:
            got = kraus.get(((key[0],), (key[1],)), 0.0)
            assert abs(got - ref.get(key, 0.0)) <= 1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
    def test_trace_preserved(self, seed, R):
        rho = random_mixed(np.random.default_rng(seed))
        out = loss.loss_channel(rho, 0, R)
        assert out.trace() == pytest.approx(rho.trace(), rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_composition(self, seed, R1, R2):
        rho = random_mixed(np.random.default_rng(seed), photons=4, rank=1)
        two = entries(loss.loss_channel(loss.loss_channel(rho, 1, R1), 1, R2))
        one = entries(loss.loss_channel(rho, 1, 1 - (1 - R1) * (1 - R2)))
        for k in set(two) | set(one):
            assert abs(two.get(k, 0) - one.get(k, 0)) <= 1e-12

    @pytest.mark.parametrize("R", [-0.1, 1.5])
    def test_bad_reflectivity(self, R):
        with pytest.raises(ValueError):
            loss.loss_channel(dyad(1, 1), 0, R)

    def test_hermitian_psd_small(self):
        rho = random_mixed(np.random.default_rng(4), photons=3)
        out = loss.loss_channel(loss.loss_channel(rho, 0, 0.3), 1, 0.6)
        assert out.is_hermitian()
        dense = out.to_dense(3)
        assert np.linalg.eigvalsh(dense).min() > -1e-12


class TestSparseDensity:
    def test_pure_purity(self):
        rho = SparseDensity.from_pure({(0, 0): 0.6, (1, 1): 0.8})
        assert rho.trace() == pytest.approx(1.0)
        assert rho.purity() == pytest.approx(1.0)

    def test_mixture_purity(self):
        rho = SparseDensity.from_dyads({((0,), (0,)): 0.5, ((1,), (1,)): 0.5})
        assert rho.purity() == pytest.approx(0.5)

    def test_coalesce_merges(self):
        rho = SparseDensity(np.array([[1], [1]]), np.array([[0], [0]]), np.array([0.25, 0.5]))
        assert entries(rho) == {((1,), (0,)): 0.75}

    def test_empty(self):
        rho = SparseDensity(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))
        assert len(rho) == 0 and rho.trace() == 0.0

    def test_expectation(self):
        rho = SparseDensity.from_pure({(2, 2): 1.0})
        assert rho.expectation({(2, 2): 1.0}) == pytest.approx(1.0)
        assert rho.expectation({(1, 1): 1.0}) == 0


class TestTwoMode:
    R_GRID = np.linspace(0.0, 0.3, 11)

    @pytest.mark.parametrize("alpha_sq", [2.0, 4.0])
    def test_zero_loss(self, alpha_sq):
        r = loss.purify_two_mode(alpha_sq, 0.0)
        assert (r.fidelity, r.probability, r.purity) == pytest.approx((1.0, 1.0, 1.0), abs=1e-12)

    @pytest.mark.parametrize("alpha_sq", [2.0, 4.0])
    def test_pure_for_all_R(self, alpha_sq):
        for R in self.R_GRID[1:]:
            assert loss.purify_two_mode(alpha_sq, R).purity == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("alpha_sq", [2.0, 4.0])
    def test_monotone(self, alpha_sq):
        res = [loss.purify_two_mode(alpha_sq, R) for R in self.R_GRID]
        F = [r.fidelity for r in res]
        assert all(b <= a + 1e-12 for a, b in zip(F, F[1:]))
        assert F[1] > 0.99

    def test_finite_second_projection(self):
        exact = loss.purify_two_mode(2.0, 0.1)
        finite = loss.purify_two_mode(2.0, 0.1, N=6)
        assert finite.fidelity == pytest.approx(exact.fidelity, abs=1e-10)
        assert finite.probability == pytest.approx(exact.probability, abs=1e-10)

    def test_symmetric_schedule_leaks_after_loss(self):
        # single loss branches are not mode symmetric, so the pi/4 shortcut falls short
        exact = loss.purify_two_mode(2.0, 0.1)
        short = loss.purify_two_mode(2.0, 0.1, N=8, schedule="halving-pi/4")
        assert short.fidelity < exact.fidelity - 1e-3

    def test_finite_first_projection(self):
        # with no loss the exact second projection strips exactly the first filter's residue
        r = loss.purify_two_mode(2.0, 0.0, first=2)
        ideal = cascade.fidelity_F(cascade.coherent_pair(math.sqrt(2.0)), 2)
        assert r.fidelity == pytest.approx(ideal, abs=1e-12)


class TestFourMode:
    @pytest.mark.parametrize("reproject", ["pairs", "all"])
    def test_zero_loss(self, reproject):
        r = loss.purify_four_mode(2.0, 0.0, reproject=reproject)
        assert (r.fidelity, r.probability, r.purity) == pytest.approx((1.0, 1.0, 1.0), abs=1e-12)

    @pytest.mark.parametrize("alpha_sq", [2.0, 4.0])
    def test_monotone(self, alpha_sq):
        Rs = np.linspace(0.0, 0.3, 7)
        res = [loss.purify_four_mode(alpha_sq, R) for R in Rs]
        F = [r.fidelity for r in res]
        P = [r.purity for r in res]
        assert all(b <= a + 1e-12 for a, b in zip(F, F[1:]))
        assert all(b <= a + 1e-12 for a, b in zip(P, P[1:]))

    @pytest.mark.parametrize("alpha_sq", [2.0, 4.0])
    def test_flat_at_small_loss(self, alpha_sq):
        # the deficit starts at second order in R
        Rs = np.geomspace(1e-3, 4e-3, 3)
        deficits = [1 - loss.purify_four_mode(alpha_sq, R).fidelity for R in Rs]
        assert loss.loglog_slope(Rs, deficits) == pytest.approx(2.0, abs=0.1)
        assert deficits[0] < 1e-4

    def test_coefficients_normalized(self):
        c = loss.twin_coefficients_four_mode(3.0)
        assert np.sum(np.abs(c) ** 2) == pytest.approx(1.0)

    @pytest.mark.parametrize("reproject, slope", [("all", 4.0), ("pairs", 2.0)])
    def test_undetected_slope(self, reproject, slope):
        Rs = np.geomspace(1e-4, 1e-3, 5)
        vals = [loss.undetected_loss_probability(2.0, R, 4, reproject) for R in Rs]
        assert loss.loglog_slope(Rs, vals) == pytest.approx(slope, abs=0.3)

    def test_bad_reproject(self):
        with pytest.raises(ValueError):
            loss.purify_four_mode(2.0, 0.1, reproject="some")


class TestDetection:
    def twin(self):
        return cascade.twin_state([0.5, 0.5, 0.5, 0.5])

    @pytest.mark.parametrize("mode", [0, 1])
    def test_single_loss_always_caught(self, mode):
        assert loss.single_loss_detection(self.twin(), mode) == 0.0

    def test_two_photon_loss_can_pass(self):
        assert loss.single_loss_detection(self.twin(), [0, 1]) > 0.0

    def test_vacuum_vacuous(self):
        assert loss.single_loss_detection(cascade.twin_state([1.0]), 0) == 0.0

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            loss.single_loss_detection(self.twin(), 2)
