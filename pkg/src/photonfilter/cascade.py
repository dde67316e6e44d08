r"""
Conditional projection of two-mode states onto :math:`S=\mathrm{span}\{|n\rangle|n\rangle\}`.

Two-mode states are handled as amplitude matrices ``c[n, m]`` truncated by
total photon number (entries with ``n + m > cutoff`` are zero). A conditional
unit is beam splitter, even parity on both modes, inverse beam splitter; the
``N + 1`` unit cascade with ``N`` interleaved phase pairs collapses to

.. math:: \hat O_N = U^\dagger P U \prod_{i=1}^N \cos[\phi_i(\hat n_a-\hat n_b)].

Unit beam splitters default to the symmetric 50:50 convention
(``bs_phase = pi/2``), under which the unit alone removes the
``n - m = 2 (mod 4)`` part of a mode-symmetric input; ``bs_phase=0`` selects the
real splitter of :func:`photonfilter.fock.apply_beam_splitter`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import i0e

from . import fock
from .fock import JointState

FILTER_BS_PHASE = math.pi / 2

SCHEDULE_KINDS = ("halving-pi/2", "halving-pi/4", "fixed", "custom")


@dataclass(frozen=True)
class PhaseSchedule:
    angles: tuple[float, ...]
    kind: str = "custom"

    def __len__(self) -> int:
        return len(self.angles)

    def truncated(self, n: int) -> "PhaseSchedule":
        if n > len(self.angles):
            raise ValueError(f"schedule has {len(self.angles)} angles, {n} requested")
        return PhaseSchedule(self.angles[:n], self.kind)


def make_schedule(kind: str, N: int, phi: float | None = None, angles: Sequence[float] | None = None) -> PhaseSchedule:
    r"""Build the ``N`` inter-unit phases.

    ``halving-pi/2``: :math:`\phi_j=2^{-j}\pi/2`; ``halving-pi/4``:
    :math:`\phi_j=2^{-j}\pi/4` (for mode-symmetric inputs); ``fixed``: ``N``
    copies of ``phi``; ``custom``: the given ``angles``.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    if kind == "halving-pi/2":
        ang = tuple(2.0 ** -j * math.pi / 2 for j in range(1, N + 1))
    elif kind == "halving-pi/4":
        ang = tuple(2.0 ** -j * math.pi / 4 for j in range(1, N + 1))
    elif kind == "fixed":
        if phi is None:
            raise ValueError("fixed schedule needs phi")
        ang = (float(phi),) * N
    elif kind == "custom":
        if angles is None or len(angles) < N:
            raise ValueError("custom schedule needs at least N angles")
        ang = tuple(float(a) for a in angles[:N])
    else:
        raise ValueError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    return PhaseSchedule(ang, kind)


@dataclass
class FilterResult:
    output: np.ndarray
    success_probability: float
    fidelity: float


# -- two-mode amplitude matrices ---------------------------------------------


def coherent_pair(alpha: complex, beta: complex | None = None, cutoff: int | None = None, eps: float = 1e-12) -> np.ndarray:
    """Amplitude matrix of ``|alpha>|beta>`` truncated at total photon number."""
    beta = alpha if beta is None else beta
    mean = abs(alpha) ** 2 + abs(beta) ** 2
    if cutoff is None:
        cutoff = fock.required_cutoff(mean, eps)
    tail = fock.poisson_tail(mean, cutoff)
    if tail >= eps:
        raise fock.CutoffTooSmallError(fock.required_cutoff(mean, eps), cutoff, tail)
    ca = fock.coherent_amplitudes(fock.CoherentSpec(alpha, 1.0), cutoff)
    cb = fock.coherent_amplitudes(fock.CoherentSpec(beta, 1.0), cutoff)
    return _truncate(np.outer(ca, cb))


def twin_state(coefficients: Sequence[complex], cutoff: int | None = None) -> np.ndarray:
    r"""Amplitude matrix of :math:`\sum_n c_n|n\rangle|n\rangle`."""
    cn = np.asarray(coefficients, dtype=complex)
    cutoff = 2 * (len(cn) - 1) if cutoff is None else cutoff
    c = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    for n, v in enumerate(cn):
        if 2 * n <= cutoff:
            c[n, n] = v
    return c


def _truncate(c: np.ndarray) -> np.ndarray:
    d = c.shape[0]
    n = np.arange(d)
    out = np.where(n[:, None] + n[None, :] <= d - 1, c, 0.0)
    return out.astype(complex)


def _shell(c: np.ndarray, s: int) -> np.ndarray:
    x = np.arange(s + 1)
    return c[x, s - x]


def _set_shell(c: np.ndarray, s: int, v: np.ndarray) -> None:
    x = np.arange(s + 1)
    c[x, s - x] = v


def pad_shells(c: np.ndarray) -> np.ndarray:
    """Grow the array so that every nonzero ``c[n, m]`` lies on a represented shell ``n + m < d``."""
    c = np.asarray(c)
    n, m = np.nonzero(c)
    need = int((n + m).max()) + 1 if len(n) else 1
    if need <= c.shape[0] and c.shape[0] == c.shape[1]:
        return c
    d = max(need, *c.shape)
    out = np.zeros((d, d), dtype=complex)
    out[: c.shape[0], : c.shape[1]] = c
    return out


def to_joint_state(c: np.ndarray) -> JointState:
    c = pad_shells(c)
    d = c.shape[0]
    amps = {((n, m), ()): complex(c[n, m]) for n in range(d) for m in range(d - n) if c[n, m] != 0}
    return JointState(2, 0, d - 1, amps)


def from_joint_state(state: JointState) -> np.ndarray:
    if state.num_modes != 2:
        raise fock.ShapeMismatchError("need a two-mode state")
    c = np.zeros((state.cutoff + 1, state.cutoff + 1), dtype=complex)
    for (n, m), v in state.photonic().items():
        c[n, m] += v
    return c


def norm2(c: np.ndarray) -> float:
    return float(np.sum(np.abs(c) ** 2))


# -- the conditional unit ---------------------------------------------------------


@lru_cache(maxsize=None)
def unit_shell(s: int, bs_phase: float = FILTER_BS_PHASE) -> np.ndarray:
    """``U^dag P U`` restricted to the ``s``-photon shell."""
    u = fock.beam_splitter_shell(s, math.pi / 4, bs_phase)
    x = np.arange(s + 1)
    even = ((x % 2 == 0) & ((s - x) % 2 == 0)).astype(float)
    mat = u.conj().T @ (even[:, None] * u)
    mat.setflags(write=False)
    return mat


def cosine_factors(s: int, angles: Sequence[float], d: int = 0) -> np.ndarray:
    x = np.arange(s + 1)
    diff = 2 * x - s - d
    out = np.ones(s + 1)
    for phi in angles:
        out = out * np.cos(phi * diff)
    return out


def filter_shell(s: int, angles: Sequence[float], d: int = 0, bs_phase: float = FILTER_BS_PHASE) -> np.ndarray:
    """Shell block of the closed-form cascade operator."""
    cos = cosine_factors(s, angles, d)
    if d != 0:
        return np.diag(cos).astype(complex)
    return unit_shell(s, bs_phase) * cos[None, :]


def unit_transform(c: np.ndarray, bs_phase: float = FILTER_BS_PHASE) -> np.ndarray:
    """One conditional unit, unnormalized."""
    out = np.zeros_like(c, dtype=complex)
    for s in range(c.shape[0]):
        _set_shell(out, s, unit_shell(s, bs_phase) @ _shell(c, s))
    return out


def apply_cascade(c: np.ndarray, angles: Sequence[float], d: int = 0, bs_phase: float = FILTER_BS_PHASE) -> np.ndarray:
    c = pad_shells(c)
    out = np.zeros_like(c, dtype=complex)
    for s in range(c.shape[0]):
        v = _shell(c, s)
        if np.any(v):
            _set_shell(out, s, filter_shell(s, tuple(angles), d, bs_phase) @ v)
    return out


def exact_projection(c: np.ndarray, d: int = 0) -> np.ndarray:
    """Keep only the ``n - m = d`` diagonal."""
    out = np.zeros_like(c, dtype=complex)
    k = np.arange(c.shape[0])
    n, m = k[:, None], k[None, :]
    mask = n - m == d
    out[mask] = c[mask]
    return out


def project_S(
    c: np.ndarray,
    N: int,
    schedule: PhaseSchedule | str = "halving-pi/4",
    d: int = 0,
    bs_phase: float = FILTER_BS_PHASE,
) -> FilterResult:
    """Closed-form output of ``N + 1`` units with ``N`` phase layers.

    ``d != 0`` targets the ``n - m = d`` diagonal through the shifted cosine
    product only (no parity unit), as a generator for difference-conditioned
    states.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    sched = make_schedule(schedule, N) if isinstance(schedule, str) else schedule.truncated(N)
    out = apply_cascade(c, sched.angles, d, bs_phase)
    p = norm2(out)
    ref = norm2(exact_projection(c, d))
    fid = ref / p if p > 0 else 0.0
    return FilterResult(out, p, fid)


def fidelity_F(c: np.ndarray, N: int, schedule: PhaseSchedule | str = "halving-pi/4", bs_phase: float = FILTER_BS_PHASE) -> float:
    r""":math:`F_N=\langle\psi_\infty|\psi_\infty\rangle/\langle\psi_N|\psi_N\rangle`."""
    res = project_S(c, N, schedule, bs_phase=bs_phase)
    if res.success_probability <= 0:
        raise ZeroDivisionError("filter output has zero norm")
    return res.fidelity


def fidelity_overlap(c: np.ndarray, N: int, schedule: PhaseSchedule | str = "halving-pi/4", bs_phase: float = FILTER_BS_PHASE) -> float:
    """Normalized overlap between the ``N``-cascade output and the exact projection."""
    res = project_S(c, N, schedule, bs_phase=bs_phase)
    ref = exact_projection(c)
    ov = np.vdot(res.output, ref)
    return float(abs(ov) ** 2 / (res.success_probability * norm2(ref)))


def success_prob_limit(c: np.ndarray) -> float:
    r"""Weight of the input in :math:`S`, :math:`\sum_n|c_{nn}|^2`."""
    return float(np.sum(np.abs(np.diagonal(c)) ** 2))


def success_prob_limit_coherent(alpha_sq: float) -> float:
    r"""Closed form :math:`e^{-2|\alpha|^2}I_0(2|\alpha|^2)` for ``|alpha>|alpha>``."""
    return float(i0e(2 * alpha_sq))


# -- atom-level pipeline ------------------------------------------------------


def unit_pipeline(state: JointState, a: int = 0, b: int = 1, bs_phase: float = FILTER_BS_PHASE) -> tuple[float, JointState]:
    """One conditional unit built from cavity gates and atomic measurements.

    Returns the probability of both atoms reading ``+`` and the conditioned state.
    """
    st = fock.apply_beam_splitter(state, a, b, math.pi / 4, bs_phase)
    st = fock.add_atoms(st, fock.plus_atom())
    st = fock.add_atoms(st, fock.plus_atom())
    k = st.num_atoms
    st = fock.apply_cavity_gate(st, a, k - 2)
    st = fock.apply_cavity_gate(st, b, k - 1)
    st = fock.apply_beam_splitter(st, a, b, -math.pi / 4, bs_phase)
    p1, st = fock.measure_atom(st, k - 1, "+")
    if st.impossible:
        return 0.0, st
    p2, st = fock.measure_atom(st, k - 2, "+")
    return p1 * p2, st


def sequential_filter(
    state: JointState, angles: Sequence[float], a: int = 0, b: int = 1, bs_phase: float = FILTER_BS_PHASE
) -> tuple[float, JointState]:
    """``len(angles) + 1`` units with phase pairs in between, simulated gate by gate."""
    prob, st = unit_pipeline(state, a, b, bs_phase)
    for phi in angles:
        if st.impossible:
            break
        st = fock.apply_phase_pair(st, a, b, phi)
        p, st = unit_pipeline(st, a, b, bs_phase)
        prob *= p
    return prob, st


# -- many modes ---------------------------------------------------------------------


def project_pair(
    state: JointState, a: int, b: int, N: int | None = None, schedule: PhaseSchedule | str = "halving-pi/2",
    bs_phase: float = FILTER_BS_PHASE,
) -> JointState:
    """Project modes ``a``, ``b`` of a multimode state onto ``S``; ``N=None`` is the exact projector."""
    if N is None:
        return state._with({k: v for k, v in state.amplitudes.items() if k[0][a] == k[0][b]})
    sched = make_schedule(schedule, N) if isinstance(schedule, str) else schedule.truncated(N)
    return fock.apply_pair_shell_operator(state, a, b, lambda s: filter_shell(s, sched.angles, 0, bs_phase))


@dataclass
class MultimodeResult:
    output: JointState
    success_probability: float
    rounds: int
    converged: bool


def project_S_multimode(
    state: JointState,
    rounds: int = 100,
    N: int | None = None,
    schedule: PhaseSchedule | str = "halving-pi/2",
    tol: float = 1e-10,
    bs_phase: float = FILTER_BS_PHASE,
) -> MultimodeResult:
    """Alternate projections of pairs (0,1),(2,3),... and (1,2),(3,4),... onto ``S``.

    Stops once a full round changes the state by less than ``tol`` or after ``rounds``.
    """
    m = state.num_modes
    if m < 2:
        raise ValueError("need at least two modes")
    odd = [(i, i + 1) for i in range(0, m - 1, 2)]
    even = [(i, i + 1) for i in range(1, m - 1, 2)]
    p_in = state.norm2()
    cur = state
    done = 0
    converged = False
    for r in range(rounds):
        nxt = cur
        for a, b in odd + even:
            nxt = project_pair(nxt, a, b, N, schedule, bs_phase)
        done = r + 1
        delta = fock.distance(nxt, cur)
        cur = nxt
        # two modes: a single pass is the whole cascade
        if delta < tol or not even:
            converged = True
            break
    return MultimodeResult(cur, cur.norm2() / p_in if p_in else 0.0, done, converged)


# -- CSV layout --------------------------------------------------------------------


def to_csv(c: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "m", "re", "im"])
    d = c.shape[0]
    for n in range(d):
        for m in range(d):
            v = c[n, m]
            if v != 0:
                w.writerow([n, m, repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def from_csv(text: str, cutoff: int | None = None) -> np.ndarray:
    rows = [r for r in csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#"))]
    top = max((int(r["n"]) + int(r["m"]) for r in rows), default=0)
    cutoff = top if cutoff is None else cutoff
    c = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    for r in rows:
        c[int(r["n"]), int(r["m"])] = complex(float(r["re"]), float(r["im"]))
    return c
