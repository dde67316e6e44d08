r"""
Sparse truncated Fock-space engine.

States live on a register of ``M`` photonic modes, truncated by *total* photon
number, tensored with ``K`` two-level atoms. Every passive element used here
(beam splitters, phase pairs) conserves the total photon number, so all ideal
operations are exact on the truncated space.

Atomic basis conventions: bit ``0`` is :math:`|{\uparrow}\rangle`, bit ``1`` is
:math:`|{\downarrow}\rangle`, and :math:`|\pm\rangle=(|{\uparrow}\rangle\pm|{\downarrow}\rangle)/\sqrt2`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

UP, DOWN = 0, 1

#: Probabilities below this are treated as analytic zeros by :func:`measure_atom`.
ZERO_PROBABILITY = 1e-15

#: Amplitudes with modulus at or below this are dropped from sparse maps.
DROP_TOL = 1e-300

Key = tuple[tuple[int, ...], tuple[int, ...]]


class CutoffTooSmallError(ValueError):
    """The Poisson tail beyond the requested cutoff exceeds the tolerance."""

    def __init__(self, required: int, cutoff: int, tail: float):
        self.required = required
        self.cutoff = cutoff
        self.tail = tail
        super().__init__(
            f"tail mass {tail:.3e} beyond N_tot={cutoff} is too large; "
            f"use N_tot >= {required}"
        )


class ShapeMismatchError(ValueError):
    pass


@dataclass
class JointState:
    """Sparse amplitudes over (occupation tuple, atom bits) keys.

    The state is not required to be normalized; after conditioning the norm
    deficit is the rejected probability.
    """

    num_modes: int
    num_atoms: int
    cutoff: int
    amplitudes: dict[Key, complex] = field(default_factory=dict)
    impossible: bool = False

    def copy(self) -> "JointState":
        return JointState(self.num_modes, self.num_atoms, self.cutoff, dict(self.amplitudes), self.impossible)

    def norm2(self) -> float:
        return float(sum(abs(v) ** 2 for v in self.amplitudes.values()))

    def normalized(self) -> "JointState":
        n2 = self.norm2()
        if n2 == 0.0:
            return self.copy()
        s = 1.0 / math.sqrt(n2)
        return self._with({k: v * s for k, v in self.amplitudes.items()})

    def scaled(self, factor: complex) -> "JointState":
        return self._with({k: v * factor for k, v in self.amplitudes.items()})

    def amplitude(self, occupation: Iterable[int], atoms: Iterable[int] = ()) -> complex:
        return self.amplitudes.get((tuple(occupation), tuple(atoms)), 0.0)

    def photon_shells(self) -> set[int]:
        return {sum(occ) for (occ, _), v in self.amplitudes.items() if v != 0}

    def photonic(self) -> dict[tuple[int, ...], complex]:
        """Photonic amplitudes of a state with no atoms left in the register."""
        if self.num_atoms:
            raise ShapeMismatchError("state still carries atoms")
        return {occ: v for (occ, _), v in self.amplitudes.items()}

    def _with(self, amps: dict[Key, complex]) -> "JointState":
        return JointState(self.num_modes, self.num_atoms, self.cutoff, amps, self.impossible)

    # debug dump -----------------------------------------------------------

    def to_json(self) -> str:
        rows = [
            {
                "occupation": list(occ),
                "atoms": "".join(str(b) for b in bits),
                "re": float(np.real(v)),
                "im": float(np.imag(v)),
            }
            for (occ, bits), v in sorted(self.amplitudes.items())
        ]
        return json.dumps(
            {"num_modes": self.num_modes, "num_atoms": self.num_atoms, "cutoff": self.cutoff, "amplitudes": rows}
        )

    @classmethod
    def from_json(cls, text: str) -> "JointState":
        data = json.loads(text)
        rows = data["amplitudes"] if isinstance(data, dict) else data
        amps: dict[Key, complex] = {}
        for row in rows:
            key = (tuple(int(x) for x in row["occupation"]), tuple(int(c) for c in row["atoms"]))
            amps[key] = complex(row["re"], row["im"])
        if isinstance(data, dict):
            return cls(data["num_modes"], data["num_atoms"], data["cutoff"], amps)
        some = next(iter(amps), ((), ()))
        cutoff = max((sum(o) for o, _ in amps), default=0)
        return cls(len(some[0]), len(some[1]), cutoff, amps)


@dataclass(frozen=True)
class CoherentSpec:
    alpha: complex
    eps: float = 1e-12


# -- state construction ----------------------------------------------------


def poisson_tail(mean: float, cutoff: int) -> float:
    """Probability mass of a Poisson(mean) variable above ``cutoff``."""
    if mean == 0:
        return 0.0
    return float(poisson.sf(cutoff, mean))


def required_cutoff(mean: float, eps: float = 1e-12) -> int:
    """Smallest total-photon cutoff whose Poisson tail is below ``eps``."""
    n = int(mean)
    while poisson_tail(mean, n) >= eps:
        n += 1
    return n


def coherent_amplitudes(spec: CoherentSpec, cutoff: int) -> np.ndarray:
    r"""Fock amplitudes :math:`e^{-|\alpha|^2/2}\alpha^n/\sqrt{n!}` for ``n <= cutoff``.

    The list is not renormalized; the truncation deficit stays in the state.

    Raises:
        ValueError: if ``spec.eps`` is not positive.
        CutoffTooSmallError: if the tail mass beyond ``cutoff`` is ``>= eps``.
    """
    if spec.eps <= 0:
        raise ValueError("eps must be positive")
    mean = abs(spec.alpha) ** 2
    tail = poisson_tail(mean, cutoff)
    if tail >= spec.eps:
        raise CutoffTooSmallError(required_cutoff(mean, spec.eps), cutoff, tail)
    n = np.arange(cutoff + 1)
    out = np.zeros(cutoff + 1, dtype=complex)
    if spec.alpha == 0:
        out[0] = 1.0
        return out
    # log-space to stay finite at large n
    log_mod = -mean / 2 + n * math.log(abs(spec.alpha)) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    out[:] = np.exp(log_mod) * np.exp(1j * np.angle(spec.alpha) * n)
    return out


def vacuum(num_modes: int, cutoff: int, num_atoms: int = 0) -> JointState:
    return fock_state([0] * num_modes, cutoff, atoms=[UP] * num_atoms)


def fock_state(occupation: Iterable[int], cutoff: int | None = None, atoms: Iterable[int] = ()) -> JointState:
    occ = tuple(int(n) for n in occupation)
    bits = tuple(int(b) for b in atoms)
    cutoff = sum(occ) if cutoff is None else cutoff
    if sum(occ) > cutoff:
        raise ValueError("occupation exceeds cutoff")
    return JointState(len(occ), len(bits), cutoff, {(occ, bits): 1.0 + 0j})


def from_photonic(amps: Mapping[tuple[int, ...], complex], cutoff: int | None = None) -> JointState:
    amps = {tuple(k): complex(v) for k, v in amps.items() if v != 0}
    if not amps:
        raise ValueError("empty state")
    m = len(next(iter(amps)))
    top = max(sum(k) for k in amps)
    cutoff = top if cutoff is None else cutoff
    if top > cutoff:
        raise ValueError("occupation exceeds cutoff")
    return JointState(m, 0, cutoff, {(k, ()): v for k, v in amps.items()})


def coherent_product(alphas: Iterable[complex], cutoff: int | None = None, eps: float = 1e-12) -> JointState:
    r"""Product :math:`|\alpha_1\rangle\cdots|\alpha_M\rangle` truncated at total photon number.

    The total photon number is Poisson with mean :math:`\sum|\alpha_i|^2`, and the
    cutoff is checked against that tail (chosen from it when ``cutoff`` is None).
    """
    alphas = [complex(a) for a in alphas]
    mean = sum(abs(a) ** 2 for a in alphas)
    if cutoff is None:
        cutoff = required_cutoff(mean, eps)
    tail = poisson_tail(mean, cutoff)
    if tail >= eps:
        raise CutoffTooSmallError(required_cutoff(mean, eps), cutoff, tail)
    singles = [coherent_amplitudes(CoherentSpec(a, 1.0), cutoff) for a in alphas]
    amps: dict[Key, complex] = {}
    for occ in _occupations(len(alphas), cutoff):
        v = 1.0 + 0j
        for amp, n in zip(singles, occ):
            v *= amp[n]
        if abs(v) > DROP_TOL:
            amps[(occ, ())] = v
    return JointState(len(alphas), 0, cutoff, amps)


def _occupations(num_modes: int, cutoff: int):
    if num_modes == 0:
        yield ()
        return
    for n in range(cutoff + 1):
        for rest in _occupations(num_modes - 1, cutoff - n):
            yield (n,) + rest


def add_atoms(state: JointState, register: Mapping[tuple[int, ...], complex]) -> JointState:
    """Tensor a (possibly entangled) atomic register onto the end of the atom list."""
    register = {tuple(k): complex(v) for k, v in register.items()}
    k = len(next(iter(register)))
    amps = {}
    for (occ, bits), v in state.amplitudes.items():
        for rbits, r in register.items():
            if r != 0:
                amps[(occ, bits + rbits)] = v * r
    return JointState(state.num_modes, state.num_atoms + k, state.cutoff, amps, state.impossible)


def plus_atom() -> dict[tuple[int, ...], complex]:
    s = 1 / math.sqrt(2)
    return {(UP,): s, (DOWN,): s}


def bell_phi(sign: int = +1) -> dict[tuple[int, ...], complex]:
    r""":math:`|\phi_\pm\rangle=(|{\uparrow\uparrow}\rangle\pm|{\downarrow\downarrow}\rangle)/\sqrt2`."""
    s = 1 / math.sqrt(2)
    return {(UP, UP): s, (DOWN, DOWN): sign * s}


# -- passive optics ----------------------------------------------------------


@lru_cache(maxsize=None)
def beam_splitter_shell(total: int, theta: float = math.pi / 4, phase: float = 0.0) -> np.ndarray:
    r"""Matrix of :math:`\exp[\theta(e^{i\chi}\hat a^\dagger\hat b-e^{-i\chi}\hat a\hat b^\dagger)]` on one shell.

    Basis ordering: index ``x`` is :math:`|x, s-x\rangle` for total ``s``. The
    generator is tridiagonal in this basis; its exponential is exact per shell.
    """
    s = total
    gen = np.zeros((s + 1, s + 1), dtype=complex)
    for x in range(s):
        v = math.sqrt((x + 1) * (s - x))
        gen[x + 1, x] += v * np.exp(1j * phase)
        gen[x, x + 1] -= v * np.exp(-1j * phase)
    mat = expm(theta * gen)
    mat.setflags(write=False)
    return mat


def apply_pair_shell_operator(
    state: JointState, a: int, b: int, shell_matrix: Callable[[int], np.ndarray]
) -> JointState:
    """Apply an operator that is block diagonal in the total photon number of modes ``a``, ``b``.

    ``shell_matrix(s)`` returns the ``(s+1, s+1)`` block in the ``|x, s-x>`` basis.
    """
    _check_modes(state, a, b)
    out: dict[Key, complex] = {}
    for (occ, bits), v in state.amplitudes.items():
        na, nb = occ[a], occ[b]
        s = na + nb
        col = shell_matrix(s)[:, na]
        for y in np.flatnonzero(col):
            new = list(occ)
            new[a], new[b] = int(y), s - int(y)
            key = (tuple(new), bits)
            out[key] = out.get(key, 0.0) + col[y] * v
    return state._with(_prune(out))


def apply_beam_splitter(
    state: JointState, a: int, b: int, theta: float = math.pi / 4, phase: float = 0.0
) -> JointState:
    r"""Beam splitter between modes ``a`` and ``b``.

    The default is :math:`U=\exp[\frac{\pi}{4}(\hat a^\dagger\hat b-\hat a\hat b^\dagger)]`,
    which maps :math:`\hat a^\dagger|0\rangle\to(\hat a^\dagger-\hat b^\dagger)|0\rangle/\sqrt2`.
    ``theta=-pi/4`` gives the inverse. ``phase`` rotates the coupling,
    ``phase=pi/2`` being the symmetric 50:50 splitter.
    """
    if a == b:
        raise ValueError("beam splitter needs two distinct modes")
    return apply_pair_shell_operator(state, a, b, lambda s: beam_splitter_shell(s, theta, phase))


def apply_phase_pair(state: JointState, a: int, b: int, phi: float) -> JointState:
    r"""Apply :math:`\exp[i\phi(\hat a^\dagger\hat a-\hat b^\dagger\hat b)]`."""
    _check_modes(state, a, b)
    return state._with({k: v * np.exp(1j * phi * (k[0][a] - k[0][b])) for k, v in state.amplitudes.items()})


def apply_cavity_gate(state: JointState, mode: int, atom: int) -> JointState:
    """Ideal atom-controlled phase: the down branch picks up ``(-1)**n``, the up branch is untouched."""
    _check_atom(state, atom)
    out = {}
    for (occ, bits), v in state.amplitudes.items():
        if bits[atom] == DOWN and occ[mode] % 2:
            v = -v
        out[(occ, bits)] = v
    return state._with(out)


def annihilate(state: JointState, mode: int) -> JointState:
    r"""Apply :math:`\hat a` to one mode (unnormalized)."""
    out = {}
    for (occ, bits), v in state.amplitudes.items():
        n = occ[mode]
        if n:
            new = list(occ)
            new[mode] = n - 1
            out[(tuple(new), bits)] = v * math.sqrt(n)
    return state._with(out)


# -- measurement ------------------------------------------------------------


def project_atoms(
    state: JointState, atoms: tuple[int, ...], target: Mapping[tuple[int, ...], complex]
) -> tuple[float, JointState]:
    """Project the listed atoms onto ``target`` and drop them from the register.

    Returns the outcome probability relative to the current norm and the
    unnormalized post-measurement state. An outcome with probability below
    :data:`ZERO_PROBABILITY` returns an empty state flagged ``impossible``.
    """
    for at in atoms:
        _check_atom(state, at)
    keep = [i for i in range(state.num_atoms) if i not in atoms]
    out: dict[Key, complex] = {}
    for (occ, bits), v in state.amplitudes.items():
        sub = tuple(bits[i] for i in atoms)
        t = target.get(sub, 0.0)
        if t == 0:
            continue
        key = (occ, tuple(bits[i] for i in keep))
        out[key] = out.get(key, 0.0) + np.conj(t) * v
    post = JointState(state.num_modes, len(keep), state.cutoff, _prune(out))
    before = state.norm2()
    prob = post.norm2() / before if before > 0 else 0.0
    if prob < ZERO_PROBABILITY:
        return 0.0, JointState(state.num_modes, len(keep), state.cutoff, {}, impossible=True)
    return prob, post


def measure_atom(state: JointState, atom: int, outcome: str | int) -> tuple[float, JointState]:
    r"""Measure one atom in the :math:`|\pm\rangle` basis.

    Args:
        outcome: ``"+"``/``+1`` or ``"-"``/``-1``.

    Returns:
        ``(probability, post_state)`` with the atom removed from the register.
    """
    sign = _sign(outcome)
    s = 1 / math.sqrt(2)
    return project_atoms(state, (atom,), {(UP,): s, (DOWN,): sign * s})


def parity_project(state: JointState, mode: int, parity: str) -> JointState:
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    want = 0 if parity == "even" else 1
    return state._with({k: v for k, v in state.amplitudes.items() if k[0][mode] % 2 == want})


def overlap(s1: JointState, s2: JointState) -> complex:
    r""":math:`\langle s_1|s_2\rangle`."""
    if (s1.num_modes, s1.num_atoms) != (s2.num_modes, s2.num_atoms):
        raise ShapeMismatchError("register shapes differ")
    small, big = (s1, s2) if len(s1.amplitudes) <= len(s2.amplitudes) else (s2, s1)
    acc = 0j
    for k, v in small.amplitudes.items():
        w = big.amplitudes.get(k)
        if w is not None:
            acc += np.conj(v) * w if small is s1 else np.conj(w) * v
    return complex(acc)


def distance(s1: JointState, s2: JointState) -> float:
    keys = set(s1.amplitudes) | set(s2.amplitudes)
    return math.sqrt(sum(abs(s1.amplitudes.get(k, 0) - s2.amplitudes.get(k, 0)) ** 2 for k in keys))


# -- helpers ---------------------------------------------------------------


def _sign(outcome) -> int:
    if outcome in ("+", 1, +1):
        return 1
    if outcome in ("-", "−", -1):
        return -1
    raise ValueError(f"unknown outcome {outcome!r}")


def _prune(amps: dict[Key, complex]) -> dict[Key, complex]:
    return {k: complex(v) for k, v in amps.items() if abs(v) > DROP_TOL}


def _check_modes(state: JointState, a: int, b: int) -> None:
    for m in (a, b):
        if not 0 <= m < state.num_modes:
            raise IndexError(f"mode {m} out of range")


def _check_atom(state: JointState, atom: int) -> None:
    if not 0 <= atom < state.num_atoms:
        raise IndexError(f"atom {atom} out of range")
