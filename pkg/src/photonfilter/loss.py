r"""
Fractional photon loss and re-projection onto the twin subspace.

Loss on a mode is a beam splitter of reflectivity ``R`` against a vacuum
mode that is traced out. On Fock dyads this is

.. math:: |n\rangle\langle m| \mapsto \sum_k \sqrt{\binom nk\binom mk}
          (1-R)^{(n+m)/2-k} R^k |n-k\rangle\langle m-k| .

Mixed states are stored as a list of dyads (ket occupations, bra
occupations, weight). After a projection the support is the correlated
diagonal plus loss offsets, so dense multimode matrices are never built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from . import cascade, fock
from .cascade import FILTER_BS_PHASE, PhaseSchedule


@dataclass
class SparseDensity:
    """Density operator as COO dyads ``weights[i] |kets[i]><bras[i]|``."""

    kets: np.ndarray
    bras: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=complex).ravel()
        self.kets = np.asarray(self.kets, dtype=np.int64)
        self.bras = np.asarray(self.bras, dtype=np.int64)
        if self.kets.ndim != 2:
            self.kets = self.kets.reshape(len(self.weights), -1)
        if self.bras.ndim != 2:
            self.bras = self.bras.reshape(len(self.weights), -1)

    @property
    def num_modes(self) -> int:
        return self.kets.shape[1]

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def from_pure(cls, amplitudes: Mapping[tuple[int, ...], complex]) -> "SparseDensity":
        occ = list(amplitudes)
        amp = np.array([amplitudes[o] for o in occ], dtype=complex)
        K = len(occ)
        occ_arr = np.array(occ, dtype=np.int64).reshape(K, -1)
        i, j = np.meshgrid(np.arange(K), np.arange(K), indexing="ij")
        i, j = i.ravel(), j.ravel()
        return cls(occ_arr[i], occ_arr[j], amp[i] * np.conj(amp[j]))

    @classmethod
    def from_dyads(cls, dyads: Mapping[tuple[tuple[int, ...], tuple[int, ...]], complex]) -> "SparseDensity":
        keys = list(dyads)
        return cls(
            np.array([k for k, _ in keys], dtype=np.int64),
            np.array([b for _, b in keys], dtype=np.int64),
            np.array([dyads[k] for k in keys], dtype=complex),
        )

    def to_dict(self) -> dict[tuple[tuple[int, ...], tuple[int, ...]], complex]:
        return {
            (tuple(int(x) for x in k), tuple(int(x) for x in b)): complex(w)
            for k, b, w in zip(self.kets, self.bras, self.weights)
        }

    def coalesce(self, drop: float = 0.0) -> "SparseDensity":
        """Merge repeated dyads and drop weights with ``|w| <= drop``."""
        if len(self) == 0:
            return self
        radix = int(max(self.kets.max(), self.bras.max())) + 1
        both = np.concatenate([self.kets, self.bras], axis=1)
        if radix ** both.shape[1] < 2**62:
            codes = both @ (radix ** np.arange(both.shape[1], dtype=np.int64))
            uniq, first, inv = np.unique(codes, return_index=True, return_inverse=True)
        else:
            _, first, inv = np.unique(both, axis=0, return_index=True, return_inverse=True)
        inv = inv.ravel()
        w = np.bincount(inv, self.weights.real) + 1j * np.bincount(inv, self.weights.imag)
        keep = np.abs(w) > drop
        return SparseDensity(self.kets[first][keep], self.bras[first][keep], w[keep])

    def trace(self) -> float:
        diag = np.all(self.kets == self.bras, axis=1)
        return float(self.weights[diag].sum().real)

    def purity(self) -> float:
        """``Tr(rho^2) / Tr(rho)^2``; assumes coalesced dyads."""
        tr = self.trace()
        return float(np.sum(np.abs(self.weights) ** 2) / tr**2)

    def expectation(self, amplitudes: Mapping[tuple[int, ...], complex]) -> complex:
        """``<psi|rho|psi>`` for a pure state given by occupation amplitudes."""
        ket_amp = np.array([amplitudes.get(tuple(int(x) for x in k), 0.0) for k in self.kets], dtype=complex)
        bra_amp = np.array([amplitudes.get(tuple(int(x) for x in b), 0.0) for b in self.bras], dtype=complex)
        return complex(np.sum(np.conj(ket_amp) * self.weights * bra_amp))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        d = self.to_dict()
        scale = max(np.abs(self.weights).max(initial=0.0), 1e-300)
        return all(abs(w - np.conj(d.get((b, k), 0.0))) <= tol * scale for (k, b), w in d.items())

    def to_dense(self, cutoff: int) -> np.ndarray:
        """Dense matrix on the per-mode cutoff ``0..cutoff`` (small instances only)."""
        dim = cutoff + 1
        M = self.num_modes
        rho = np.zeros((dim**M, dim**M), dtype=complex)
        place = dim ** np.arange(M - 1, -1, -1)
        if np.any(self.kets > cutoff) or np.any(self.bras > cutoff):
            raise ValueError("support exceeds the requested cutoff")
        np.add.at(rho, (self.kets @ place, self.bras @ place), self.weights)
        return rho

    def scaled(self, factor: float) -> "SparseDensity":
        return SparseDensity(self.kets.copy(), self.bras.copy(), self.weights * factor)


def _check_R(R: float) -> None:
    if not 0.0 <= R <= 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1], got {R}")


def loss_channel(rho: SparseDensity, mode: int, R: float, keep: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None) -> SparseDensity:
    """Apply loss of reflectivity ``R`` to one mode.

    Args:
        rho: input dyads.
        mode: lossy mode index.
        R: fraction of the intensity lost.
        keep: optional filter on the output ``(kets, bras)``; dyads it rejects
            are discarded before coalescing (used to fuse a later projection).
    """
    _check_R(R)
    if not 0 <= mode < rho.num_modes:
        raise ValueError("mode out of range")
    n = rho.kets[:, mode]
    m = rho.bras[:, mode]
    kmax = np.minimum(n, m)
    reps = kmax + 1
    idx = np.repeat(np.arange(len(rho)), reps)
    k = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
    nn, mm = n[idx], m[idx]
    log_binom = 0.5 * (gammaln(nn + 1) - gammaln(k + 1) - gammaln(nn - k + 1) + gammaln(mm + 1) - gammaln(k + 1) - gammaln(mm - k + 1))
    factor = np.exp(log_binom) * np.power(1.0 - R, (nn + mm) / 2.0 - k) * np.power(R, k)
    kets = rho.kets[idx].copy()
    bras = rho.bras[idx].copy()
    kets[:, mode] -= k
    bras[:, mode] -= k
    w = rho.weights[idx] * factor
    nz = w != 0
    if keep is not None:
        nz &= keep(kets, bras)
    return SparseDensity(kets[nz], bras[nz], w[nz]).coalesce()


def beam_splitter_loss_dyad(n: int, m: int, R: float) -> dict[tuple[int, int], complex]:
    """Single-mode loss of ``|n><m|`` via an explicit vacuum ancilla and a partial trace."""
    _check_R(R)
    theta = math.acos(math.sqrt(1.0 - R))
    ket = fock.apply_beam_splitter(fock.fock_state((n, 0)), 0, 1, theta)
    bra = fock.apply_beam_splitter(fock.fock_state((m, 0)), 0, 1, theta)
    out: dict[tuple[int, int], complex] = {}
    for (ok, _), vk in ket.amplitudes.items():
        for (ob, _), vb in bra.amplitudes.items():
            if ok[1] != ob[1]:
                continue
            key = (ok[0], ob[0])
            out[key] = out.get(key, 0.0) + vk * np.conj(vb)
    return out


def project_equal(rho: SparseDensity, modes: Sequence[int]) -> SparseDensity:
    """Exact projector onto equal photon numbers in ``modes`` (applied on both sides)."""
    mask = _equal_mask(rho.kets, rho.bras, modes)
    return SparseDensity(rho.kets[mask], rho.bras[mask], rho.weights[mask])


def _equal_mask(kets: np.ndarray, bras: np.ndarray, modes: Sequence[int]) -> np.ndarray:
    modes = list(modes)
    k0, b0 = kets[:, modes[0]][:, None], bras[:, modes[0]][:, None]
    return np.all(kets[:, modes] == k0, axis=1) & np.all(bras[:, modes] == b0, axis=1)


def apply_pair_operator(
    rho: SparseDensity,
    a: int,
    b: int,
    shell_op: Callable[[int], np.ndarray],
    drop: float = 1e-30,
) -> SparseDensity:
    """``O rho O^dagger`` for an operator that acts blockwise on photon-number shells of modes ``a, b``.

    ``shell_op(s)[x_out, x_in]`` is the block in the basis ``|x, s-x>``.
    """

    def one_side(occ: np.ndarray, other: np.ndarray, w: np.ndarray, conj: bool):
        s_all = occ[:, a] + occ[:, b]
        new_occ, new_other, new_w = [], [], []
        for s in np.unique(s_all):
            rows = np.nonzero(s_all == s)[0]
            M = shell_op(int(s))
            if conj:
                M = M.conj()
            col = M[:, occ[rows, a]]  # (s+1, len(rows))
            xo, r = np.nonzero(np.abs(col) > 0)
            o = occ[rows[r]].copy()
            o[:, a] = xo
            o[:, b] = s - xo
            new_occ.append(o)
            new_other.append(other[rows[r]])
            new_w.append(w[rows[r]] * col[xo, r])
        if not new_occ:
            return occ[:0], other[:0], w[:0]
        return np.concatenate(new_occ), np.concatenate(new_other), np.concatenate(new_w)

    k, br, w = one_side(rho.kets, rho.bras, rho.weights, False)
    tmp = SparseDensity(k, br, w).coalesce(drop)
    br, k, w = one_side(tmp.bras, tmp.kets, tmp.weights, True)
    return SparseDensity(k, br, w).coalesce(drop)


def second_projection(
    rho: SparseDensity,
    a: int,
    b: int,
    N: int | None = None,
    schedule: PhaseSchedule | str = "halving-pi/2",
    bs_phase: float = FILTER_BS_PHASE,
) -> SparseDensity:
    """Postselected filter on modes ``a, b``: exact projector for ``N=None``, else ``O_N``.

    The default schedule is the general one: loss branches are not mode
    symmetric, so the halving-pi/4 shortcut would let ``n - m = 2 (mod 4)`` through.
    """
    if N is None:
        return project_equal(rho, (a, b))
    sched = cascade.make_schedule(schedule, N) if isinstance(schedule, str) else schedule.truncated(N)
    return apply_pair_operator(rho, a, b, lambda s: cascade.filter_shell(s, sched.angles, 0, bs_phase))


@dataclass
class PurificationResult:
    fidelity: float
    probability: float
    purity: float
    state: SparseDensity


def _first_projection_two_mode(alpha_sq: float, first: int | None, schedule, bs_phase: float) -> dict[tuple[int, int], complex]:
    c = cascade.coherent_pair(math.sqrt(alpha_sq))
    if first is None:
        out = cascade.exact_projection(c)
    else:
        out = cascade.project_S(c, first, schedule, bs_phase=bs_phase).output
    out = out / math.sqrt(cascade.norm2(out))
    n, m = np.nonzero(np.abs(out) > 1e-300)
    return {(int(i), int(j)): complex(out[i, j]) for i, j in zip(n, m)}


def _finish(rho: SparseDensity, ref: Mapping[tuple[int, ...], complex]) -> PurificationResult:
    p = rho.trace()
    if p <= 0:
        raise ZeroDivisionError("second projection has zero success probability")
    fid = rho.expectation(ref).real / p
    return PurificationResult(float(fid), float(p), rho.purity(), rho)


def purify_two_mode(
    alpha_sq: float,
    R: float,
    N: int | None = None,
    schedule: PhaseSchedule | str = "halving-pi/2",
    first: int | None = None,
    bs_phase: float = FILTER_BS_PHASE,
    first_schedule: PhaseSchedule | str = "halving-pi/4",
) -> PurificationResult:
    """Project ``|alpha>|alpha>`` onto S, lose ``R`` on both modes, project again.

    Args:
        alpha_sq: mean photon number per mode.
        R: loss reflectivity on each mode.
        N: factors of the second projection; ``None`` means the exact projector.
        schedule: phase schedule of the second projection for finite ``N``.
        first: factors of the first projection; ``None`` means exact.
        first_schedule: schedule of a finite first projection (the input is mode symmetric).

    Returns:
        Normalized fidelity with the pre-loss state, success probability of the
        second projection and purity of the normalized output.
    """
    _check_R(R)
    ref = _first_projection_two_mode(alpha_sq, first, first_schedule, bs_phase)
    rho = SparseDensity.from_pure(ref)
    keep = (lambda k, b: (k[:, 0] == k[:, 1]) & (b[:, 0] == b[:, 1])) if N is None else None
    rho = loss_channel(rho, 0, R)
    rho = loss_channel(rho, 1, R, keep=keep)
    rho = second_projection(rho, 0, 1, N, schedule, bs_phase)
    return _finish(rho, ref)


def twin_coefficients_four_mode(alpha_sq: float, eps: float = 1e-14) -> np.ndarray:
    r"""Normalized :math:`c_n\propto\alpha^{4n}/(n!)^2`, the exact four-mode projection of :math:`|\alpha\rangle^{\otimes4}`."""
    if alpha_sq == 0:
        return np.array([1.0])
    n = np.arange(0, 10 * int(alpha_sq + 10))
    logw = 2 * n * math.log(alpha_sq) - 2 * gammaln(n + 1)  # log amplitude
    prob = np.exp(2 * (logw - logw.max()))
    prob /= prob.sum()
    cut = int(np.nonzero(prob > eps * 1e-3)[0].max()) + 1
    amp = np.sqrt(prob[:cut])
    return amp / np.linalg.norm(amp)


def purify_four_mode(
    alpha_sq: float,
    R: float,
    N: int | None = None,
    schedule: PhaseSchedule | str = "halving-pi/2",
    reproject: str = "pairs",
    bs_phase: float = FILTER_BS_PHASE,
) -> PurificationResult:
    """Four-mode version: input ``sum c_n |n,n,n,n>``, loss on every mode, re-projection.

    ``reproject="pairs"`` filters modes (0, 1) and (2, 3) separately, as two
    distant parties would; ``"all"`` also requires equal numbers across the
    pairs (exact projector only).
    """
    _check_R(R)
    if reproject not in ("pairs", "all"):
        raise ValueError("reproject must be 'pairs' or 'all'")
    if reproject == "all" and N is not None:
        raise ValueError("full four-mode re-projection is only available as the exact projector")
    c = twin_coefficients_four_mode(alpha_sq)
    ref = {(n, n, n, n): complex(v) for n, v in enumerate(c)}
    rho = SparseDensity.from_pure(ref)
    for pair in ((0, 1), (2, 3)):
        a, b = pair
        keep = (lambda k, br, a=a, b=b: (k[:, a] == k[:, b]) & (br[:, a] == br[:, b])) if N is None else None
        rho = loss_channel(rho, a, R)
        rho = loss_channel(rho, b, R, keep=keep)
        rho = second_projection(rho, a, b, N, schedule, bs_phase)
    if reproject == "all":
        rho = project_equal(rho, (0, 1, 2, 3))
    return _finish(rho, ref)


def _loss_pattern_prob(n: np.ndarray, k: int, R: float) -> np.ndarray:
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(np.maximum(n - k, 0) + 1)
    out = np.exp(logc) * np.power(1.0 - R, n - k) * R**k
    return np.where(n >= k, out, 0.0)


def undetected_loss_probability(alpha_sq: float, R: float, modes: int = 4, reproject: str = "all") -> float:
    """Probability that photons were lost and the exact re-projection still passes.

    Computed from the Kraus loss patterns directly (no cancellation against the
    loss-free branch). ``modes`` is 2 or 4; for 4 modes ``reproject`` selects
    pairwise or full re-projection.
    """
    _check_R(R)
    if modes == 2:
        c = cascade.exact_projection(cascade.coherent_pair(math.sqrt(alpha_sq))).diagonal()
        c = c / np.linalg.norm(c)
        reproject = "all"
    elif modes == 4:
        c = twin_coefficients_four_mode(alpha_sq)
    else:
        raise ValueError("modes must be 2 or 4")
    w = np.abs(c) ** 2
    n = np.arange(len(c))
    kk = np.arange(len(c))
    P = np.array([_loss_pattern_prob(n, int(k), R) for k in kk])  # P[k, n]
    if reproject == "all":
        per = (P**modes)[1:].sum(axis=0)
    elif reproject == "pairs":
        pair = (P**2).sum(axis=0)
        none = P[0] ** 2
        per = pair**2 - none**2
    else:
        raise ValueError("reproject must be 'pairs' or 'all'")
    return float(np.dot(w, per))


def loglog_slope(Rs: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``log(values)`` against ``log(R)``."""
    x = np.log(np.asarray(Rs, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def single_loss_detection(c: np.ndarray, mode: int | Sequence[int] = 0) -> float:
    """Pass probability of the exact second projection after removing photons.

    Args:
        c: twin-subspace input as an ``(n, m)`` coefficient array.
        mode: mode (0 = a, 1 = b) or sequence of modes, one photon removed per entry.

    Returns:
        Conditional pass probability; ``0.0`` if the annihilation leaves nothing.
    """
    modes = [mode] if isinstance(mode, (int, np.integer)) else list(mode)
    out = np.asarray(c, dtype=complex)
    for md in modes:
        k = np.arange(out.shape[0])
        nxt = np.zeros_like(out)
        if md == 0:
            nxt[:-1, :] = out[1:, :] * np.sqrt(k[1:])[:, None]
        elif md == 1:
            nxt[:, :-1] = out[:, 1:] * np.sqrt(k[1:])[None, :]
        else:
            raise ValueError("mode must be 0 or 1")
        out = nxt
    total = float(np.sum(np.abs(out) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.abs(np.diagonal(out)) ** 2) / total)
