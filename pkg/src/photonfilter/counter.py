r"""
Photon-number resolving measurement with the cavity array.

An ``n``-photon input run through ``N + 1`` units produces a record of pair
outcomes. After the first (uniformly random) outcome, step ``i`` repeats the
previous outcome with probability :math:`\cos^2(\phi_i n)`. Choosing
:math:`\phi_i=2^{i-1}\pi/n_0` makes an all-same record certain exactly when
:math:`n_0\mid n`, which turns the array into a divisibility test.

Records use ``+1``/``-1`` for :math:`|B_\pm\rangle`; the sign of the atom in the
mode-``b`` cavity is the record symbol, and the product of both atom signs is
the parity of the total photon number.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import fock
from .fock import JointState


class InconsistentVerdictsError(ValueError):
    """No photon number is compatible with the verdicts (loss or a failed test)."""


@dataclass(frozen=True)
class CountSchedule:
    angles: tuple[float, ...]
    n0: int | None = None

    @classmethod
    def divisibility(cls, n0: int, N: int) -> "CountSchedule":
        r""":math:`\phi_i=2^{i-1}\pi/n_0` for ``i = 1..N``."""
        if n0 < 1:
            raise ValueError("n0 must be positive")
        return cls(tuple(2.0 ** (i - 1) * math.pi / n0 for i in range(1, N + 1)), n0)

    @classmethod
    def fixed(cls, phi: float, N: int) -> "CountSchedule":
        return cls((float(phi),) * N)

    @property
    def N(self) -> int:
        return len(self.angles)

    @property
    def units(self) -> int:
        return self.N + 1


def _cos2_steps(n: int, sched: CountSchedule) -> np.ndarray:
    if sched.n0 is not None:
        # reduce 2^(i-1) n mod n0 in integers so large i stays exact
        k = np.array([(pow(2, i, sched.n0) * n) % sched.n0 for i in range(sched.N)], dtype=float)
        return np.cos(math.pi * k / sched.n0) ** 2
    return np.cos(np.asarray(sched.angles) * n) ** 2


def p_same(n: int, sched: CountSchedule) -> float:
    r"""Probability that all ``N`` comparisons come out "same", :math:`\prod_i\cos^2(\phi_i n)`."""
    if n < 0:
        raise ValueError("photon number must be non-negative")
    if sched.n0 is not None and n % sched.n0 == 0:
        return 1.0
    return float(np.prod(_cos2_steps(n, sched)))


def q_confidence(sched: CountSchedule) -> float:
    """Worst-case probability of flagging a non-multiple of ``n0``.

    ``p_same`` has period ``n0`` in ``n``, so the maximum over all non-multiples
    is the maximum over residues ``1..n0-1``.
    """
    if sched.n0 is None or sched.n0 < 2:
        raise ValueError("q is defined for divisibility schedules with n0 >= 2")
    return 1.0 - float(_p_same_residues(sched, np.arange(1, sched.n0)).max())


def _p_same_residues(sched: CountSchedule, n: np.ndarray) -> np.ndarray:
    n0 = sched.n0
    out = np.ones(len(n))
    for i in range(sched.N):
        k = (pow(2, i, n0) * n) % n0
        out *= np.cos(math.pi * k / n0) ** 2
    return out


def q_conditional(n0: int, N: int) -> float:
    """Confidence of the ``n0 = p**k`` test given that ``p**(k-1)`` divides ``n``.

    For primes this is :func:`q_confidence`. For ``n0 = 4`` the condition is
    the photon-number parity, which every pair outcome reveals.
    """
    p, k = _prime_power(n0)
    step = p ** (k - 1)
    sched = CountSchedule.divisibility(n0, N)
    return 1.0 - max(p_same(j * step, sched) for j in range(1, p))


# -- records ---------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementRecord:
    outcomes: tuple[int, ...]

    @property
    def n_same(self) -> int:
        o = self.outcomes
        return sum(1 for a, b in zip(o, o[1:]) if a == b)

    @property
    def n_different(self) -> int:
        return max(len(self.outcomes) - 1, 0) - self.n_same

    @property
    def f(self) -> float:
        tot = self.n_same + self.n_different
        return self.n_same / tot if tot else 1.0

    def all_same(self) -> bool:
        return self.n_different == 0

    def __str__(self) -> str:
        return "".join("+" if o > 0 else "-" for o in self.outcomes)

    @classmethod
    def parse(cls, text: str) -> "MeasurementRecord":
        table = {"+": 1, "-": -1, "−": -1}
        return cls(tuple(table[ch] for ch in text.strip()))


def _p_first_plus(n: int) -> float:
    # vacuum always reads B+; any n >= 1 splits evenly
    return 1.0 if n == 0 else 0.5


def simulate_record(n: int, sched: CountSchedule, seed: int | np.random.Generator) -> MeasurementRecord:
    """Sample one record for an ``n``-photon input: first outcome uniform, then Markov flips."""
    rng = np.random.default_rng(seed)
    first = 1 if rng.random() < _p_first_plus(n) else -1
    flips = rng.random(sched.N) < 1.0 - _cos2_steps(n, sched)
    signs = np.where(flips, -1, 1)
    out = first * np.concatenate([[1], np.cumprod(signs)])
    return MeasurementRecord(tuple(int(x) for x in out))


def simulate_records(n: int, sched: CountSchedule, count: int, seed: int) -> np.ndarray:
    """``count`` records as a ``(count, N + 1)`` array of signs from one generator."""
    rng = np.random.default_rng(seed)
    first = np.where(rng.random(count) < _p_first_plus(n), 1, -1)
    flips = rng.random((count, sched.N)) < 1.0 - _cos2_steps(n, sched)[None, :]
    signs = np.where(flips, -1, 1)
    return first[:, None] * np.concatenate([np.ones((count, 1), dtype=int), np.cumprod(signs, axis=1)], axis=1)


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent child seeds for parallel batches (``SeedSequence.spawn``)."""
    return np.random.SeedSequence(seed).spawn(count)


def estimate_n(record: MeasurementRecord, phi: float) -> float:
    r""":math:`\arccos(\sqrt f)/\phi`; only unambiguous for :math:`n\le\pi/(2\phi)`.

    The flip rate depends on ``n phi`` modulo ``pi`` and is symmetric about
    ``pi/2``, so larger photon numbers alias into ``[0, pi/(2 phi)]``.
    """
    if len(record.outcomes) < 2:
        raise ValueError("record needs at least two outcomes")
    return math.acos(math.sqrt(record.f)) / phi


def record_probability(record: Sequence[int], n: int, sched: CountSchedule) -> float:
    """Analytic probability of a full record under the Markov law."""
    c2 = _cos2_steps(n, sched)
    if not record:
        return 1.0
    prob = _p_first_plus(n) if record[0] > 0 else 1.0 - _p_first_plus(n)
    for i, (a, b) in enumerate(zip(record, record[1:])):
        prob *= c2[i] if a == b else 1.0 - c2[i]
    return float(prob)


# -- test planning --------------------------------------------------------------


def _prime_power(n: int) -> tuple[int, int]:
    p = next(d for d in range(2, n + 1) if n % d == 0)
    k, m = 0, n
    while m % p == 0:
        m //= p
        k += 1
    if m != 1:
        raise ValueError(f"{n} is not a prime power")
    return p, k


def prime_powers(n_max: int) -> list[int]:
    out = []
    for n in range(2, n_max + 1):
        try:
            _prime_power(n)
        except ValueError:
            continue
        out.append(n)
    return out


def planned_factors(n_max: int) -> list[int]:
    """Prime powers up to ``n_max`` that need a test; 2 itself comes from the parity."""
    return [t for t in prime_powers(n_max) if t != 2]


@dataclass
class PlannedTest:
    n0: int
    N: int
    q: float
    q_unconditional: float

    @property
    def units(self) -> int:
        return self.N + 1


@dataclass
class TestPlan:
    __test__ = False  # not a pytest class

    n_max: int
    target: float
    tests: list[PlannedTest] = field(default_factory=list)

    @property
    def aggregate(self) -> float:
        return float(np.prod([t.q for t in self.tests])) if self.tests else 1.0

    @property
    def units(self) -> int:
        """Units of a single chained array: one reference unit plus one per factor."""
        return 1 + sum(t.N for t in self.tests)

    @property
    def separate_units(self) -> int:
        return sum(t.units for t in self.tests)

    def factors(self) -> list[int]:
        return [t.n0 for t in self.tests]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_max": self.n_max,
                "target": self.target,
                "tests": [{"n0": t.n0, "N": t.N, "q": t.q, "q_unconditional": t.q_unconditional} for t in self.tests],
                "aggregate": self.aggregate,
                "units": self.units,
                "separate_units": self.separate_units,
            },
            indent=2,
        )


class _QTable:
    """Conditional confidences ``q(N)`` for one test, extended on demand."""

    def __init__(self, n0: int):
        self.n0 = n0
        p, k = _prime_power(n0)
        step = p ** (k - 1)
        self.residues = np.array([j * step for j in range(1, p)])
        self._cum = np.ones_like(self.residues, dtype=float)
        self._q = [0.0]

    def __call__(self, N: int) -> float:
        while len(self._q) <= N:
            i = len(self._q) - 1
            k = (pow(2, i, self.n0) * self.residues) % self.n0
            self._cum = self._cum * np.cos(math.pi * k / self.n0) ** 2
            self._q.append(float(1.0 - self._cum.max()))
        return self._q[N]


def plan_tests(n_max: int, target: float = 0.99, max_factors: int = 200) -> TestPlan:
    """Choose one divisibility test per prime power with the fewest factors.

    Per-test confidences are conditional (the test for ``p**k`` only has to
    separate multiples of ``p**(k-1)``), and the plan requires the product of
    per-test confidences to reach ``target``. Allocation is greedy on the
    log-confidence gained per added factor, followed by a pruning pass.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    factors = planned_factors(n_max)
    tables = {t: _QTable(t) for t in factors}
    alloc = {t: 1 for t in factors}
    log_target = math.log(target)

    def logq(t: int, N: int) -> float:
        q = tables[t](N)
        return math.log(q) if q > 0 else -math.inf

    def best_step(t: int):
        cur = logq(t, alloc[t])
        if cur == 0.0:
            return None
        best = None
        for k in (1, 2, 3):
            if alloc[t] + k > max_factors:
                break
            rate = math.inf if cur == -math.inf else (logq(t, alloc[t] + k) - cur) / k
            if best is None or rate > best[0]:
                best = (rate, k)
        return best

    # max-heap of the best step per test; only the test just extended goes stale
    heap = []
    for t in factors:
        step = best_step(t)
        if step is not None:
            heap.append((-step[0], t, step[1]))
    heapq.heapify(heap)
    total = sum(logq(t, alloc[t]) for t in factors)
    while total < log_target:
        if not heap:
            raise RuntimeError("target confidence not reachable")
        _, t, k = heapq.heappop(heap)
        total += logq(t, alloc[t] + k) - logq(t, alloc[t])
        alloc[t] += k
        step = best_step(t)
        if step is not None:
            heapq.heappush(heap, (-step[0], t, step[1]))
    for t in sorted(factors, key=lambda t: -alloc[t]):
        while alloc[t] > 1:
            trial = total - logq(t, alloc[t]) + logq(t, alloc[t] - 1)
            if trial < log_target:
                break
            total = trial
            alloc[t] -= 1
    plan = TestPlan(n_max, target)
    for t in factors:
        N = alloc[t]
        plan.tests.append(PlannedTest(t, N, tables[t](N), q_confidence(CountSchedule.divisibility(t, N))))
    return plan


def identification_probability(plan: TestPlan, n: int) -> float:
    """Exact probability that every test relevant to ``n`` returns the right verdict (parity known)."""
    prob = 1.0
    for t in plan.tests:
        p, k = _prime_power(t.n0)
        if n % (p ** (k - 1)) or n % t.n0 == 0:
            continue
        prob *= 1.0 - p_same(n, CountSchedule.divisibility(t.n0, t.N))
    return prob


def exact_confidence(plan: TestPlan) -> float:
    return min(identification_probability(plan, n) for n in range(plan.n_max + 1))


def log_base_check(n_max: int, bases: Iterable[float] = (2.0, math.e, 10.0)) -> dict[str, dict]:
    r"""Check :math:`q\ge1-1/n_\mathrm{max}` for every prime power with :math:`N=\lceil2\log_b n_\mathrm{max}\rceil`."""
    out = {}
    factors = planned_factors(n_max)
    for b in bases:
        N = math.ceil(2 * math.log(n_max) / math.log(b))
        worst = min(q_confidence(CountSchedule.divisibility(t, N)) for t in factors)
        name = "e" if b == math.e else f"{b:g}"
        out[name] = {"N": N, "min_q": worst, "holds": worst >= 1 - 1 / n_max}
    return out


def infer_n(verdicts: Mapping[int, bool], n_max: int, parity: int | None = None) -> set[int]:
    """Photon numbers in ``[0, n_max]`` compatible with divisibility verdicts.

    The verdict for ``p**k`` (``k >= 2``) is only binding when ``p**(k-1)``
    divides ``n`` and that predecessor was itself observed (a verdict for it,
    or, for ``4``, the parity). With ``parity`` (0 even, 1 odd) the candidates
    are also restricted to that parity.

    Raises:
        InconsistentVerdictsError: if no candidate survives.
    """
    observed = set(verdicts)
    if parity is not None:
        observed.add(2)
    out = set()
    for n in range(n_max + 1):
        if parity is not None and n % 2 != parity:
            continue
        ok = True
        for t, v in verdicts.items():
            p, k = _prime_power(t)
            pred = p ** (k - 1)
            if k >= 2 and pred in observed and n % pred:
                continue
            if (n % t == 0) != bool(v):
                ok = False
                break
        if ok:
            out.add(n)
    if not out:
        raise InconsistentVerdictsError(f"no photon number in [0, {n_max}] matches {dict(verdicts)}")
    return out


# -- fock-core simulation of the destructive array -------------------------------------


def _unit_with_atoms(state: JointState) -> JointState:
    st = fock.apply_beam_splitter(state, 0, 1)
    st = fock.add_atoms(st, fock.plus_atom())
    st = fock.add_atoms(st, fock.plus_atom())
    k = st.num_atoms
    st = fock.apply_cavity_gate(st, 0, k - 2)
    st = fock.apply_cavity_gate(st, 1, k - 1)
    return fock.apply_beam_splitter(st, 0, 1, -math.pi / 4)


def chain_outcome_distribution(n: int, angles: Sequence[float], q: int = 0) -> dict[tuple[int, ...], tuple[float, JointState]]:
    """Exact distribution of b-atom records for ``|n>|q>`` through ``len(angles) + 1`` units.

    Each entry maps a record to its probability and the normalized photonic state
    left after the last unit (atoms measured and removed).
    """
    start = fock.fock_state((n, q))
    branches = [((), 1.0, start)]
    for u in range(len(angles) + 1):
        nxt = []
        for rec, prob, st in branches:
            if u:
                st = fock.apply_phase_pair(st, 0, 1, angles[u - 1])
            st = _unit_with_atoms(st)
            for sb in (1, -1):
                pb, sb_state = fock.measure_atom(st, 1, sb)
                if sb_state.impossible:
                    continue
                for sa in (1, -1):
                    pa, post = fock.measure_atom(sb_state, 0, sa)
                    if post.impossible:
                        continue
                    nxt.append((rec + (sb,), prob * pb * pa, post.normalized()))
        branches = nxt
    out: dict[tuple[int, ...], tuple[float, JointState]] = {}
    for rec, prob, st in branches:
        if rec in out:
            # distinct a-atom outcomes share a record; keep the combined weight
            p0, s0 = out[rec]
            out[rec] = (p0 + prob, s0)
        else:
            out[rec] = (prob, st)
    return out


# -- QND block ---------------------------------------------------------------------


@dataclass
class QNDOutcome:
    p_plus: float
    p_minus: float
    photonic: tuple[int, int]


def qnd_block(n: int, q: int, phi: float) -> QNDOutcome:
    r"""Analytic block statistics: :math:`\phi_+\phi_+` with :math:`\cos^2(\phi(n-q))`, photons unchanged."""
    if n < 0 or q < 0:
        raise ValueError("photon numbers must be non-negative")
    c2 = math.cos(phi * (n - q)) ** 2
    return QNDOutcome(c2, 1.0 - c2, (n, q))


def _entangled_register() -> dict[tuple[int, ...], complex]:
    # atoms: 0 = C1 (mode a), 1 = C2 (mode b), 2 = C3 (mode a), 3 = C4 (mode b)
    reg = {}
    for (b0, b2), v in fock.bell_phi(+1).items():
        for (b1, b3), w in fock.bell_phi(+1).items():
            reg[(b0, b1, b2, b3)] = v * w
    return reg


def qnd_block_circuit(
    state: JointState,
    phi: float,
    loss_inside: int | None = None,
    parity_cavity: bool = False,
) -> JointState:
    """Run one QND block on a two-mode photonic state, leaving its atoms in the register.

    The four block atoms (pre-entangled in phi+ pairs C1-C3 and C2-C4) are appended
    after any existing atoms; with ``parity_cavity`` a fifth atom in ``|+>``
    interacts with mode ``a`` after the last beam splitter. ``loss_inside``
    removes one photon from that mode between the two cavity pairs.
    """
    base = state.num_atoms
    st = fock.add_atoms(state, _entangled_register())
    st = fock.apply_beam_splitter(st, 0, 1)
    st = fock.apply_cavity_gate(st, 0, base + 0)
    st = fock.apply_cavity_gate(st, 1, base + 1)
    st = fock.apply_beam_splitter(st, 0, 1, -math.pi / 4)
    st = fock.apply_phase_pair(st, 0, 1, phi)
    if loss_inside is not None:
        st = fock.annihilate(st, loss_inside).normalized()
    st = fock.apply_beam_splitter(st, 0, 1)
    st = fock.apply_cavity_gate(st, 0, base + 2)
    st = fock.apply_cavity_gate(st, 1, base + 3)
    st = fock.apply_beam_splitter(st, 0, 1, -math.pi / 4)
    if parity_cavity:
        st = fock.add_atoms(st, fock.plus_atom())
        st = fock.apply_cavity_gate(st, 0, st.num_atoms - 1)
    return st


def qnd_block_simulation(n: int, q: int, phi: float) -> dict[tuple[int, int], tuple[float, JointState]]:
    """Bell-pair outcome distribution of one block from the joint photon-atom simulation.

    Keys are ``(s_a, s_b)`` with ``+1`` for phi+ and ``-1`` for phi-, on the
    C1-C3 and C2-C4 pairs. Values are probabilities and the normalized photonic
    post-states.
    """
    st = qnd_block_circuit(fock.fock_state((n, q)), phi)
    out = {}
    for sa in (1, -1):
        for sb in (1, -1):
            target = {}
            for (b0, b2), v in fock.bell_phi(sa).items():
                for (b1, b3), w in fock.bell_phi(sb).items():
                    target[(b0, b1, b2, b3)] = v * w
            prob, post = fock.project_atoms(st, (0, 1, 2, 3), target)
            out[(sa, sb)] = (prob, post.normalized())
    return out


# -- chains with loss -----------------------------------------------------------------


@dataclass(frozen=True)
class LossSite:
    """One photon removed from ``mode`` after unit/block ``unit`` (``where="after"``),
    or between the two cavity pairs of QND block ``unit`` (``where="inside"``)."""

    unit: int
    mode: int = 0
    where: str = "after"


@dataclass
class ChainResult:
    record: MeasurementRecord
    parities: list[int]
    flags: list[tuple[int, str]]
    outcomes: list[tuple[int, ...]]
    photonic: JointState


def _sample_signs(state: JointState, atoms: Sequence[int], rng: np.random.Generator) -> tuple[list[int], JointState]:
    """Measure atoms in the +/- basis (highest index first), sampling outcomes."""
    signs = {}
    st = state
    for at in sorted(atoms, reverse=True):
        p_plus, post_plus = fock.measure_atom(st, at, "+")
        if rng.random() < p_plus:
            signs[at], st = 1, post_plus
        else:
            _, st = fock.measure_atom(st, at, "-")
            signs[at] = -1
        st = st.normalized()
    return [signs[a] for a in atoms], st


def simulate_chain_with_loss(
    n: int,
    schedule: CountSchedule,
    loss_sites: Sequence[LossSite] = (),
    mode: str = "destructive",
    seed: int | np.random.Generator = 0,
    parity_cavity: bool = False,
    q: int = 0,
) -> ChainResult:
    """Sample one pass of ``|n>|q>`` through a destructive array or a QND chain.

    Destructive mode runs ``N + 1`` units and flags a change of the total
    parity between consecutive pair outcomes. QND mode runs one block per
    angle and flags phi+phi- / phi-phi+ outcomes; with ``parity_cavity`` it also
    flags a change of the end-of-block parity reading.
    """
    rng = np.random.default_rng(seed)
    sites = {}
    for s in loss_sites:
        sites.setdefault((s.unit, s.where), []).append(s.mode)
    st = fock.fock_state((n, q))
    flags: list[tuple[int, str]] = []
    parities: list[int] = []
    outcomes: list[tuple[int, ...]] = []
    symbols: list[int] = []

    def lose(st: JointState, modes: list[int]) -> JointState:
        for m in modes:
            st = fock.annihilate(st, m)
            if st.norm2() == 0:
                raise ValueError("no photon left to lose")
            st = st.normalized()
        return st

    if mode == "destructive":
        for u in range(schedule.N + 1):
            if u:
                st = fock.apply_phase_pair(st, 0, 1, schedule.angles[u - 1])
            st = _unit_with_atoms(st)
            (sa, sb), st = _sample_signs(st, (0, 1), rng)
            outcomes.append((sa, sb))
            symbols.append(sb)
            parities.append(sa * sb)
            if len(parities) > 1 and parities[-1] != parities[-2]:
                flags.append((u, "parity"))
            st = lose(st, sites.get((u, "after"), []))
        record = MeasurementRecord(tuple(symbols))
    elif mode == "qnd":
        cur = 1
        symbols.append(cur)
        for u, phi in enumerate(schedule.angles):
            inside = sites.get((u, "inside"), [])
            if len(inside) > 1:
                raise ValueError("at most one inside loss per block")
            st = qnd_block_circuit(st, phi, inside[0] if inside else None, parity_cavity)
            atoms = list(range(st.num_atoms))
            signs, st = _sample_signs(st, atoms, rng)
            outcomes.append(tuple(signs))
            pair_a = signs[0] * signs[2]
            pair_b = signs[1] * signs[3]
            if pair_a != pair_b:
                flags.append((u, "invalid"))
            elif pair_a < 0:
                cur = -cur
            symbols.append(cur)
            if parity_cavity:
                parities.append(signs[4])
                if len(parities) > 1 and parities[-1] != parities[-2]:
                    flags.append((u, "parity"))
            st = lose(st, sites.get((u, "after"), []))
        record = MeasurementRecord(tuple(symbols))
    else:
        raise ValueError("mode must be 'destructive' or 'qnd'")
    return ChainResult(record, parities, flags, outcomes, st)


def invalid_outcome_probability(n: int, phi: float, loss_mode: int = 0, q: int = 0) -> float:
    """Exact probability of a phi+phi- / phi-phi+ outcome when one photon is lost inside the block."""
    st = qnd_block_circuit(fock.fock_state((n, q)), phi, loss_inside=loss_mode)
    total = 0.0
    for sa, sb in ((1, -1), (-1, 1)):
        target = {}
        for (b0, b2), v in fock.bell_phi(sa).items():
            for (b1, b3), w in fock.bell_phi(sb).items():
                target[(b0, b1, b2, b3)] = v * w
        prob, _ = fock.project_atoms(st, (0, 1, 2, 3), target)
        total += prob
    return total
