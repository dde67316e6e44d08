"""Acceptance criteria as runnable checks, shared by the test suite and ``photonfilter verify``."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cascade, cavity, counter, fock, loss
from .fock import DOWN, UP


@dataclass(frozen=True)
class Criterion:
    id: str
    module: str
    title: str
    budget: float
    check: Callable[[], tuple[bool, str]]


@dataclass
class Outcome:
    criterion: Criterion
    passed: bool
    detail: str
    elapsed: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        c = self.criterion
        return f"[{tag}] {c.id} {c.title} ({self.elapsed:.2f}s / {c.budget:g}s): {self.detail}"


def _close(x: float, ref: float, tol: float) -> bool:
    return abs(x - ref) <= tol


def c1_filter_fidelities():
    c = cascade.coherent_pair(2.0)
    targets = [(0, 0.573, 5e-4), (1, 0.962, 5e-4), (2, 0.999998, 1e-6)]
    vals = [cascade.fidelity_F(c, N, "halving-pi/4") for N, _, _ in targets]
    ok = all(_close(v, ref, tol) for v, (_, ref, tol) in zip(vals, targets))
    return ok, "F = " + ", ".join(f"{v:.7f}" for v in vals)


def c2_large_alpha():
    c = cascade.coherent_pair(math.sqrt(10.0))
    F = cascade.fidelity_F(c, 2, "halving-pi/4")
    reps = 1.0 / cascade.success_prob_limit(c)
    reps_closed = 1.0 / cascade.success_prob_limit_coherent(10.0)
    ok = _close(F, 0.9961, 2e-4) and 10.5 <= reps <= 11.5 and abs(reps - reps_closed) < 1e-9
    return ok, f"F={F:.6f}, 1/P_inf={reps:.4f}"


Q_TABLE = [
    (3, 2, 0.9375),
    (4, 2, 1.0),
    (5, 2, 0.9375),
    (5, 4, 0.9961),
    (20, 4, 0.9449),
    (20, 6, 0.9966),
    (100, 7, 0.9633),
    (100, 9, 0.9995),
    (1000, 10, 0.9995),
]


def c3_counting_q():
    worst = 0.0
    for n0, N, ref in Q_TABLE:
        q = counter.q_confidence(counter.CountSchedule.divisibility(n0, N))
        worst = max(worst, abs(q - ref))
    return worst <= 1e-4, f"max |q - ref| = {worst:.2e}"


def c4_planner():
    p10 = counter.plan_tests(10, 0.99)
    factors_ok = set(p10.factors()) == {3, 4, 5, 7, 8, 9}
    ok10 = factors_ok and p10.units <= 24 and p10.aggregate >= 0.99
    bases = counter.log_base_check(1000)
    base = next(b for b in ("10", "e", "2") if bases[b]["holds"])
    log_b = {"10": math.log10, "e": math.log, "2": math.log2}[base]
    p1000 = counter.plan_tests(1000, 0.99)
    bound = 2 * 1000 * log_b(1000)
    ok1000 = p1000.units < bound and p1000.aggregate >= 0.99
    return ok10 and ok1000, (
        f"n_max=10: factors {p10.factors()}, {p10.units} units, aggregate {p10.aggregate:.4f}; "
        f"n_max=1000: {p1000.units} units < {bound:.0f} (log base {base})"
    )


def _tv(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def c5a_closed_vs_sequential():
    worst = 0.0
    rng = np.random.default_rng(11)
    inputs = []
    for n in range(5):
        for m in range(5):
            if n + m <= 8:
                inputs.append(_fock_pair(n, m))
    for _ in range(3):
        c = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
        c[np.add.outer(np.arange(9), np.arange(9)) > 8] = 0
        inputs.append(c / math.sqrt(cascade.norm2(c)))
    for c in inputs:
        for N in range(4):
            sched = cascade.make_schedule("halving-pi/4", N)
            res = cascade.project_S(c, N, sched)
            prob, st = cascade.sequential_filter(cascade.to_joint_state(c), sched.angles)
            seq = cascade.from_joint_state(st) if not st.impossible else np.zeros_like(c)
            closed = res.output
            # distributions over accept/reject and over Fock outcomes
            d_closed = {"reject": 1 - res.success_probability}
            d_seq = {"reject": 1 - prob}
            for (i, j), v in np.ndenumerate(closed):
                d_closed[(i, j)] = abs(v) ** 2
            for (i, j), v in np.ndenumerate(seq):
                d_seq[(i, j)] = abs(v) ** 2 * prob / max(cascade.norm2(seq), 1e-300) if prob > 0 else 0.0
            worst = max(worst, _tv(d_closed, d_seq))
    return worst <= 1e-10, f"max TV = {worst:.2e} over {len(inputs)} inputs, N <= 3"


def _fock_pair(n: int, m: int) -> np.ndarray:
    c = np.zeros((n + m + 1, n + m + 1), dtype=complex)
    c[n, m] = 1.0
    return c


def c5b_record_law():
    worst = 0.0
    for n in range(7):
        for N in range(4):
            for n0 in (3, 5):
                sched = counter.CountSchedule.divisibility(n0, N)
                exact = {r: v[0] for r, v in counter.chain_outcome_distribution(n, sched.angles).items()}
                law = {r: counter.record_probability(r, n, sched) for r in itertools.product((1, -1), repeat=N + 1)}
                worst = max(worst, _tv(exact, law))
    return worst <= 1e-10, f"max TV = {worst:.2e} for n <= 6, N <= 3"


def c5c_qnd_block():
    worst_p, worst_f = 0.0, 0.0
    for n in range(4):
        for q in range(4):
            for phi in (math.pi / 8, 0.37, math.pi / 5):
                sim = counter.qnd_block_simulation(n, q, phi)
                ana = counter.qnd_block(n, q, phi)
                worst_p = max(worst_p, abs(sim[(1, 1)][0] - ana.p_plus), abs(sim[(-1, -1)][0] - ana.p_minus))
                worst_p = max(worst_p, sim[(1, -1)][0], sim[(-1, 1)][0])
                ref = fock.fock_state((n, q))
                for key in ((1, 1), (-1, -1)):
                    prob, post = sim[key]
                    if prob > 1e-12:
                        worst_f = max(worst_f, 1 - abs(fock.overlap(ref, post)) ** 2)
    ok = worst_p <= 1e-10 and worst_f <= 1e-12
    return ok, f"max prob error {worst_p:.2e}, max fidelity deficit {worst_f:.2e}"


def c5d_loss_channel():
    worst = 0.0
    for R in (0.0, 0.13, 0.5, 0.91, 1.0):
        for n in range(9):
            for m in range(9):
                rho = loss.SparseDensity(np.array([[n]]), np.array([[m]]), np.array([1.0]))
                got = {(k[0], b[0]): w for (k, b), w in loss.loss_channel(rho, 0, R).to_dict().items()}
                ref = loss.beam_splitter_loss_dyad(n, m, R)
                for key in set(got) | set(ref):
                    worst = max(worst, abs(got.get(key, 0.0) - ref.get(key, 0.0)))
    return worst <= 1e-12, f"max entry error {worst:.2e} for n, m <= 8"


def c6_purification():
    Rs = [0.01 * k for k in range(1, 31)]
    purity_dev = max(abs(loss.purify_two_mode(a2, R).purity - 1) for a2 in (2.0, 4.0) for R in Rs)
    c = cascade.exact_projection(cascade.coherent_pair(2.0))
    single = max(loss.single_loss_detection(c, 0), loss.single_loss_detection(c, 1))
    small = [loss.purify_two_mode(a2, 1e-6) for a2 in (2.0, 4.0)]
    small += [loss.purify_four_mode(a2, 1e-6) for a2 in (2.0, 4.0)]
    limit_dev = max(max(abs(r.fidelity - 1), abs(r.probability - 1), abs(r.purity - 1)) for r in small)
    grid = [1e-3, 2e-3, 5e-3, 1e-2]
    slopes = [loss.loglog_slope(grid, [loss.undetected_loss_probability(a2, R, 4, "all") for R in grid]) for a2 in (2.0, 4.0)]
    ok = purity_dev <= 1e-10 and single == 0.0 and limit_dev < 1e-4 and all(abs(s - 4) <= 0.3 for s in slopes)
    return ok, (
        f"purity dev {purity_dev:.1e}, single-loss pass {single}, R->0 dev {limit_dev:.1e}, "
        f"four-mode slopes {', '.join(f'{s:.3f}' for s in slopes)}"
    )


def c7a_e_up():
    C = 1e3
    worst = 0.0
    for kT in (10.0, 30.0, 100.0, 300.0):
        params = cavity.CavityParams(1.0, C=C, T=kT)
        for f in (cavity.optimal_mode(1.0, kT), cavity.constant_mode(kT)):
            worst = max(worst, abs(cavity.overlap_deviation(f, params, UP) - cavity.e_up_ideal(C)))
    return worst <= 1e-6, f"max |E_up - 2/(1+2C)| = {worst:.2e} (C=1e3, both mode shapes)"


def c7b_e_down_optimal():
    worst = 0.0
    for kT in (2.0, 10.0, 30.0, 100.0, 300.0):
        params = cavity.CavityParams(1.0, C=1e3, T=kT)
        num = cavity.overlap_deviation(cavity.optimal_mode(1.0, kT), params, DOWN)
        worst = max(worst, abs(num - cavity.e_down_optimal(1.0, kT)))
    return worst <= 1e-8, f"max |E_down - 2cos^2(w0 T/2)| = {worst:.2e}"


def c7c_e_down_asymptote():
    kT = 300.0
    num = cavity.overlap_deviation(cavity.optimal_mode(1.0, kT), cavity.CavityParams(1.0, C=1e3, T=kT), DOWN)
    asym = 8 * math.pi**2 / kT**2
    rel = abs(num - asym) / asym
    return rel <= 0.02, f"E_down={num:.6e} vs 8pi^2/(kT)^2={asym:.6e}, relative gap {rel:.2%} at kT=300"


def c7d_e_down_constant():
    worst = 0.0
    for kT in (2.0, 10.0, 30.0, 100.0, 300.0):
        params = cavity.CavityParams(1.0, C=1e3, T=kT)
        num = cavity.overlap_deviation(cavity.constant_mode(kT), params, DOWN)
        worst = max(worst, abs(num - cavity.e_down_constant(1.0, kT)))
    return worst <= 1e-8, f"max |E_down - 4(1-exp(-kT/2))/kT| = {worst:.2e}"


def c8_fidelity_vs_C():
    worst_inf, worst_rel = 0.0, 0.0
    for a2 in (2.0, 4.0):
        for N in (0, 1, 2):
            ideal = cavity.ideal_fidelity(a2, N)
            hi, mid = cavity.fidelity_vs_C(a2, N, [1e6, 1e3])
            worst_inf = max(worst_inf, abs(hi.fidelity - ideal))
            worst_rel = max(worst_rel, abs(mid.fidelity - ideal) / ideal)
    ok = worst_inf <= 1e-3 and worst_rel < 0.01
    return ok, f"C=1e6 max |F - F_ideal| = {worst_inf:.2e}; C=1e3 max relative deviation {worst_rel:.2%}"


CRITERIA: list[Criterion] = [
    Criterion("1", "filter-cascade", "filter fidelities at |alpha|^2=4", 1.0, c1_filter_fidelities),
    Criterion("2", "filter-cascade", "fidelity and repetitions at |alpha|^2=10", 5.0, c2_large_alpha),
    Criterion("3", "photon-counter", "counting confidences", 1.0, c3_counting_q),
    Criterion("4", "photon-counter", "test planner", 5.0, c4_planner),
    Criterion("5a", "filter-cascade", "closed form vs sequential simulation", 15.0, c5a_closed_vs_sequential),
    Criterion("5b", "photon-counter", "record law vs chain simulation", 15.0, c5b_record_law),
    Criterion("5c", "photon-counter", "QND block vs joint simulation", 15.0, c5c_qnd_block),
    Criterion("5d", "loss-model", "Kraus loss vs beam splitter and trace", 15.0, c5d_loss_channel),
    Criterion("6", "loss-model", "purification properties", 120.0, c6_purification),
    Criterion("7a", "cavity-nonideal", "E_up independent of mode shape", 2.5, c7a_e_up),
    Criterion("7b", "cavity-nonideal", "optimal-mode E_down closed form", 2.5, c7b_e_down_optimal),
    Criterion("7c", "cavity-nonideal", "optimal-mode E_down asymptote at kT=300", 2.5, c7c_e_down_asymptote),
    Criterion("7d", "cavity-nonideal", "constant-mode E_down closed form", 2.5, c7d_e_down_constant),
    Criterion("8", "cavity-nonideal", "fidelity vs cooperativity", 120.0, c8_fidelity_vs_C),
]

MODULE_ALIASES = {
    "fock": "filter-cascade",
    "fock-core": "filter-cascade",
    "filter": "filter-cascade",
    "cascade": "filter-cascade",
    "filter-cascade": "filter-cascade",
    "counter": "photon-counter",
    "photon-counter": "photon-counter",
    "loss": "loss-model",
    "loss-model": "loss-model",
    "cavity": "cavity-nonideal",
    "cavity-nonideal": "cavity-nonideal",
}


def select(only: str | None = None) -> list[Criterion]:
    if only is None:
        return list(CRITERIA)
    if only not in MODULE_ALIASES:
        raise ValueError(f"unknown module {only!r}; choose from {', '.join(sorted(MODULE_ALIASES))}")
    mod = MODULE_ALIASES[only]
    return [c for c in CRITERIA if c.module == mod]


def evaluate(c: Criterion) -> Outcome:
    t0 = time.perf_counter()
    try:
        ok, detail = c.check()
    except Exception as exc:  # a crash is a failure, reported with its message
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t0
    if ok and elapsed > c.budget:
        ok, detail = False, detail + f"; over runtime budget ({elapsed:.2f}s > {c.budget:g}s)"
    return Outcome(c, ok, detail, elapsed)


def run(only: str | None = None, echo: Callable[[str], None] | None = print) -> list[Outcome]:
    out = []
    for c in select(only):
        o = evaluate(c)
        if echo is not None:
            echo(o.line())
        out.append(o)
    return out
