r"""
Finite cooperativity and finite pulse length.

A cavity holding an atom in state ``j`` acts on a coherent input
:math:`\alpha_\mathrm{in}(t)=\alpha f_\mathrm{in}(t)` as a low-pass filter with
rate :math:`\lambda_j=(1+2C\delta_{j\uparrow})\kappa/2`:

.. math:: \gamma_j(t)=\sqrt\kappa\int_{-\infty}^t e^{-\lambda_j(t-t')}\alpha_\mathrm{in}(t')dt',
          \qquad f_\mathrm{out}=f_\mathrm{in}-\kappa\,(e^{-\lambda_j\cdot}*f_\mathrm{in}).

In frequency space the reflection is :math:`K_j(\omega)`. For long pulses
(:math:`\kappa T\gg1`) ``K_j`` is a scalar and a two-mode mixture of coherent
dyads stays closed under one filter unit; that is what
:func:`unit_transform_nonideal` iterates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter
from scipy.special import iv

from . import cascade, fock
from .cascade import FILTER_BS_PHASE, PhaseSchedule
from .fock import DOWN, UP

KAPPA_T_MIN = 100.0
ADIABATIC_THRESHOLD = 0.1
MERGE_TOL = 1e-12


class AdiabaticityWarning(UserWarning):
    """Input flux too high for the adiabatic elimination of the excited state."""


@dataclass(frozen=True)
class CavityParams:
    """Cavity decay ``kappa``, cooperativity ``C`` and pulse length ``T``.

    ``C`` may be omitted when ``g`` and ``Gamma`` are given (``C = 2 g^2 / (kappa Gamma)``).
    ``C = inf`` is the ideal atom.
    """

    kappa: float
    C: float | None = None
    Gamma: float | None = None
    g: float | None = None
    T: float = math.inf

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.g is not None and self.Gamma is not None:
            c = 2 * self.g**2 / (self.kappa * self.Gamma)
            if self.C is None:
                object.__setattr__(self, "C", c)
            elif not math.isclose(self.C, c, rel_tol=1e-9):
                raise ValueError(f"C={self.C} inconsistent with g, Gamma (gives {c})")
        if self.C is None:
            raise ValueError("give C or both g and Gamma")
        if self.C < 0:
            raise ValueError("C must be non-negative")

    def rate(self, atom: int) -> float:
        if atom == UP:
            return math.inf if math.isinf(self.C) else (1 + 2 * self.C) * self.kappa / 2
        if atom == DOWN:
            return self.kappa / 2
        raise ValueError("atom must be UP or DOWN")

    @property
    def coupling_sq(self) -> float:
        if self.g is not None:
            return self.g**2
        if self.Gamma is None:
            raise ValueError("g or Gamma needed")
        return self.C * self.kappa * self.Gamma / 2


# -- mode functions ---------------------------------------------------------------


@dataclass
class ModeFunction:
    """Real mode function supported on ``[-T/2, T/2]`` and normalized there."""

    kind: str
    T: float
    A: float = 1.0
    omega0: float = 0.0
    shape: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) <= self.T / 2
        if self.kind == "optimal":
            v = self.A * np.cos(self.omega0 * t)
        elif self.kind == "constant":
            v = np.full_like(t, self.A)
        else:
            v = self.A * self.shape(t)
        return np.where(inside, v, 0.0)

    def norm2(self) -> float:
        return _integrate_panels(lambda t: self(t) ** 2, -self.T / 2, self.T / 2, 64)


def optimal_frequency(kappa: float, T: float, tol: float = 1e-12) -> float:
    r"""Root :math:`x=\omega_0T\in(0,\pi)` of :math:`(2x/\kappa T)\tan(x/2)=1`, by bisection."""
    if not kappa * T > 0:
        raise ValueError("kappa*T must be positive")
    kt = kappa * T

    def h(x):
        return 2 * x / kt * math.tan(x / 2) - 1.0

    hi = math.pi * (1 - 1e-15)
    return optimize.bisect(h, 1e-300, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def optimal_mode(kappa: float, T: float) -> ModeFunction:
    x = optimal_frequency(kappa, T)
    w0 = x / T
    A = math.sqrt(2.0 / (T + math.sin(w0 * T) / w0))
    return ModeFunction("optimal", T, A, w0)


def constant_mode(T: float) -> ModeFunction:
    return ModeFunction("constant", T, 1.0 / math.sqrt(T))


def sampled_mode(T: float, shape: Callable[[np.ndarray], np.ndarray] | None = None, t=None, values=None) -> ModeFunction:
    """Mode from a callable shape or from samples (cubic spline), renormalized on ``[-T/2, T/2]``."""
    if shape is None:
        if t is None or values is None:
            raise ValueError("give a shape callable or samples")
        shape = CubicSpline(np.asarray(t, float), np.asarray(values, float), extrapolate=False)
        raw = shape
        shape = lambda x: np.nan_to_num(raw(x))  # noqa: E731
    mode = ModeFunction("sampled", T, 1.0, 0.0, shape)
    n2 = mode.norm2()
    if not n2 > 0:
        raise ValueError("mode has zero norm")
    mode.A = 1.0 / math.sqrt(n2)
    return mode


# -- quadrature ---------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _integrate_panels(fun, a: float, b: float, panels: int) -> float:
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)[:, None]
    mid = (edges[:-1] + edges[1:])[:, None] / 2
    t = mid + h / 2 * _GL_X[None, :]
    return float(np.sum(fun(t) * _GL_W[None, :] * h / 2))


class LowPass:
    r"""Exact exponential-integrator evaluation of :math:`g(t)=\int_{-T/2}^t e^{-\lambda(t-t')}f(t')dt'`.

    Panels are sized to resolve both ``1/lambda`` and the pulse, each using 16-point
    Gauss-Legendre rules; ``g`` is propagated exactly between panel edges.
    """

    def __init__(self, f: Callable[[np.ndarray], np.ndarray], lam: float, T: float, chunk: int = 20000):
        self.f, self.lam, self.T = f, lam, T
        h = min(8.0 / lam, T / 32)
        n = max(int(math.ceil(T / h)), 1)
        self.edges = np.linspace(-T / 2, T / 2, n + 1)
        self.h = T / n
        inc = np.empty(n)
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            inc[lo:hi] = self._panel_g(self.edges[lo:hi], self.h)
        decay = math.exp(-lam * self.h)
        # g_{k+1} = decay * g_k + inc_k
        self.g_edges = np.concatenate([[0.0], lfilter([1.0], [1.0, -decay], inc)])

    def _panel_g(self, left: np.ndarray, width) -> np.ndarray:
        width = np.broadcast_to(width, left.shape)
        tp = left[:, None] + width[:, None] * (_GL_X[None, :] + 1) / 2
        right = (left + width)[:, None]
        return np.sum(np.exp(-self.lam * (right - tp)) * self.f(tp) * _GL_W[None, :], axis=1) * width / 2

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        inside = (t >= -self.T / 2) & (t <= self.T / 2)
        ti = t[inside]
        k = np.clip(((ti + self.T / 2) // self.h).astype(int), 0, len(self.edges) - 2)
        left = self.edges[k]
        out[inside] = np.exp(-self.lam * (ti - left)) * self.g_edges[k] + self._panel_g(left, ti - left)
        after = t > self.T / 2
        out[after] = self.g_edges[-1] * np.exp(-self.lam * (t[after] - self.T / 2))
        return out

    def overlap(self, w: Callable[[np.ndarray], np.ndarray]) -> float:
        r""":math:`\int_{-T/2}^{T/2}w(t)g(t)dt` with nested Gauss-Legendre on every panel."""
        total = 0.0
        n = len(self.edges) - 1
        for lo in range(0, n, 2000):
            hi = min(lo + 2000, n)
            left = self.edges[lo:hi]
            t = left[:, None] + self.h * (_GL_X[None, :] + 1) / 2  # (P, 16)
            carried = np.exp(-self.lam * (t - left[:, None])) * self.g_edges[lo:hi, None]
            # inner integral from panel start to each outer node
            span = t - left[:, None]
            tp = left[:, None, None] + span[:, :, None] * (_GL_X[None, None, :] + 1) / 2
            inner = np.sum(np.exp(-self.lam * (t[:, :, None] - tp)) * self.f(tp) * _GL_W, axis=2) * span / 2
            total += float(np.sum(w(t) * (carried + inner) * _GL_W[None, :]) * self.h / 2)
        return total

    def tail_norm2(self) -> float:
        """Squared norm of ``g`` after the pulse, where it decays freely."""
        return self.g_edges[-1] ** 2 / (2 * self.lam)


def _lowpass(f_in: ModeFunction, params: CavityParams, atom: int) -> LowPass:
    return LowPass(f_in, params.rate(atom), f_in.T)


def cavity_amplitude(f_in: ModeFunction, params: CavityParams, atom: int, t, alpha: complex = 1.0) -> np.ndarray:
    r"""Cavity field :math:`\gamma_j(t)` for input :math:`\alpha f_\mathrm{in}(t)`."""
    if atom == UP and math.isinf(params.C):
        return np.zeros_like(np.atleast_1d(np.asarray(t, dtype=float)), dtype=complex)
    return alpha * math.sqrt(params.kappa) * _lowpass(f_in, params, atom)(t)


def cavity_amplitude_discrete(f_in: ModeFunction, params: CavityParams, atom: int, tau: float, alpha: complex = 1.0):
    """Round-trip recursion of the input mirror with step ``tau``; converges as ``O(tau)``.

    Returns:
        ``(t, gamma, alpha_out)`` sampled at ``t_k = -T/2 + k tau`` over the pulse.
    """
    kappa = params.kappa
    tc2 = kappa * tau
    if tc2 >= 1:
        raise ValueError("tau too large: kappa*tau must be < 1")
    tc, rc = math.sqrt(tc2), math.sqrt(1 - tc2)
    loss = 2 * params.C * kappa * tau if atom == UP else 0.0
    if loss > 1:
        raise ValueError("tau too large for the atomic loss rate")
    tj = math.sqrt(1 - loss)
    t = -f_in.T / 2 + tau * np.arange(int(f_in.T / tau) + 1)
    a_in = alpha * f_in(t)
    gam = np.zeros(len(t), dtype=complex)
    out = np.zeros(len(t), dtype=complex)
    prev = 0.0
    for k in range(len(t)):
        gam[k] = tc * math.sqrt(tau) * a_in[k] + rc * tj * prev
        out[k] = rc * a_in[k] - tc * tj * prev / math.sqrt(tau)
        prev = gam[k]
    return t, gam, out


@dataclass
class OutputMode:
    """Distorted output mode ``f_in - kappa * g``; not normalized if light was scattered."""

    f_in: ModeFunction
    lowpass: LowPass | None
    kappa: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.lowpass is None:
            return self.f_in(t)
        return self.f_in(t) - self.kappa * self.lowpass(t).reshape(t.shape)

    def norm2(self) -> float:
        f = self.f_in
        if self.lowpass is None:
            return 1.0
        lp = self.lowpass
        # int (f - k g)^2 = 1 - 2k <f, g> + k^2 int g^2
        g2 = _integrate_panels(lambda t: lp(t.ravel()).reshape(t.shape) ** 2, -f.T / 2, f.T / 2, len(lp.edges) - 1)
        return 1.0 - 2 * self.kappa * lp.overlap(f) + self.kappa**2 * (g2 + lp.tail_norm2())


def output_mode(f_in: ModeFunction, params: CavityParams, atom: int) -> OutputMode:
    if atom == UP and math.isinf(params.C):
        return OutputMode(f_in, None, params.kappa)
    return OutputMode(f_in, _lowpass(f_in, params, atom), params.kappa)


def overlap_deviation(f_in: ModeFunction, params: CavityParams, atom: int) -> float:
    r""":math:`E_j=1+(-1)^{\delta_{j\uparrow}}\int f_\mathrm{in}f^{(j)}_\mathrm{out}dt`."""
    if atom == UP and math.isinf(params.C):
        return 0.0
    lp = _lowpass(f_in, params, atom)
    ov = 1.0 - params.kappa * lp.overlap(f_in)
    sign = -1.0 if atom == UP else 1.0
    return 1.0 + sign * ov


def e_down_optimal(kappa: float, T: float) -> float:
    x = optimal_frequency(kappa, T)
    return 2 * math.cos(x / 2) ** 2


def e_down_constant(kappa: float, T: float) -> float:
    kt = kappa * T
    return 4 * (-math.expm1(-kt / 2)) / kt


def e_up_ideal(C: float) -> float:
    return 2.0 / (1 + 2 * C)


# -- frequency domain --------------------------------------------------------------------


def transfer_K(omega, params: CavityParams, atom: int):
    r""":math:`K_j(\omega)=-((1-2C\delta)\kappa/2-i\omega)/((1+2C\delta)\kappa/2+i\omega)`."""
    w = np.asarray(omega, dtype=float)
    k2 = params.kappa / 2
    if atom == DOWN:
        return -(k2 - 1j * w) / (k2 + 1j * w)
    if atom != UP:
        raise ValueError("atom must be UP or DOWN")
    if math.isinf(params.C):
        return np.ones_like(w, dtype=complex)
    C = params.C
    return -((1 - 2 * C) * k2 - 1j * w) / ((1 + 2 * C) * k2 + 1j * w)


def scalar_K(params: CavityParams, atom: int) -> complex:
    return complex(transfer_K(0.0, params, atom))


def output_mode_spectral(f_in: ModeFunction, params: CavityParams, atom: int, dt: float, window: float):
    """Output mode via FFT: multiply the spectrum by ``K_j`` on ``[-window, window]``.

    Returns:
        ``(t, f_out)`` on the FFT grid.
    """
    n = int(round(2 * window / dt))
    t = -window + dt * np.arange(n)
    spec = np.fft.fft(f_in(t))
    omega = 2 * np.pi * np.fft.fftfreq(n, dt)
    # the grid starts at -window; shift the phase reference consistently
    out = np.fft.ifft(spec * transfer_K(omega, params, atom))
    return t, out


# -- decoherence and mixtures --------------------------------------------------------------------


def scattering_strength(C: float) -> float:
    """``4C/(1+2C)^2``: fraction of ``|amplitude|^2`` entering the exponent of ``d``."""
    if math.isinf(C):
        return 0.0
    return 4 * C / (1 + 2 * C) ** 2


def decoherence_factor(a_n, a_m, params: CavityParams, i: int, p: int):
    r"""Narrowband trace factor :math:`d_{ip}` for ket amplitude ``a_n`` and bra amplitude ``a_m``."""
    di, dp = float(i == UP), float(p == UP)
    s = scattering_strength(params.C)
    a_n = np.asarray(a_n, dtype=complex)
    a_m = np.asarray(a_m, dtype=complex)
    return np.exp(-s * (np.abs(a_n) ** 2 * di + np.abs(a_m) ** 2 * dp - 2 * a_n * np.conj(a_m) * di * dp))


def decoherence_factor_spectral(spec_n: Callable, spec_m: Callable, params: CavityParams, i: int, p: int, limit: float) -> complex:
    """``d_ip`` from the Lorentzian-weighted frequency integral of amplitude spectra on ``[-limit, limit]``."""
    di, dp = float(i == UP), float(p == UP)
    C, k = params.C, params.kappa
    if math.isinf(C):
        return 1.0 + 0j

    def integrand(w, part):
        lor = C * k**2 / ((1 + 2 * C) ** 2 * (k / 2) ** 2 + w**2)
        an, am = spec_n(w), spec_m(w)
        val = lor * (abs(an) ** 2 * di + abs(am) ** 2 * dp - 2 * an * np.conj(am) * di * dp)
        return val.real if part == 0 else val.imag

    opts = dict(limit=400, epsabs=1e-14, epsrel=1e-12)
    re = integrate.quad(integrand, -limit, limit, args=(0,), **opts)[0]
    im = integrate.quad(integrand, -limit, limit, args=(1,), **opts)[0]
    return complex(np.exp(-(re + 1j * im)))


def _overlap_coherent(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``<y|x>`` for rows of multimode coherent amplitudes (broadcast)."""
    return np.exp(np.sum(-0.5 * np.abs(x) ** 2 - 0.5 * np.abs(y) ** 2 + np.conj(y) * x, axis=-1))


@dataclass
class CoherentDyadMixture:
    """``rho = sum_nm c[n, m] |kets[n]><kets[m]|`` with two-mode coherent ``kets``."""

    kets: np.ndarray
    c: np.ndarray

    @classmethod
    def coherent(cls, alpha: complex, beta: complex | None = None) -> "CoherentDyadMixture":
        beta = alpha if beta is None else beta
        return cls(np.array([[alpha, beta]], dtype=complex), np.ones((1, 1), dtype=complex))

    def gram(self) -> np.ndarray:
        """``G[m, n] = <kets[m]|kets[n]>``."""
        return _overlap_coherent(self.kets[None, :, :], self.kets[:, None, :])

    def trace(self) -> float:
        return float(np.sum(self.c * self.gram().T).real)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.c, self.c.conj().T, atol=tol * max(1.0, np.abs(self.c).max())))

    def merged(self, tol: float = MERGE_TOL) -> "CoherentDyadMixture":
        """Combine kets closer than ``tol`` (rows and columns of ``c`` summed)."""
        groups: list[int] = []
        reps: list[np.ndarray] = []
        for k in self.kets:
            for gi, r in enumerate(reps):
                if np.max(np.abs(k - r)) <= tol:
                    groups.append(gi)
                    break
            else:
                groups.append(len(reps))
                reps.append(k)
        G = np.zeros((len(reps), len(self.kets)))
        G[groups, np.arange(len(self.kets))] = 1.0
        return CoherentDyadMixture(np.array(reps), G @ self.c @ G.T)

    def fock_matrix(self, cutoff: int) -> np.ndarray:
        """Density matrix in the two-mode Fock basis ``|n_a, n_b>``, ``n <= cutoff`` per mode."""
        n = np.arange(cutoff + 1)
        from scipy.special import gammaln

        def amps(x):
            logf = -0.5 * gammaln(n + 1)
            va = np.exp(-abs(x[0]) ** 2 / 2) * x[0] ** n * np.exp(logf)
            vb = np.exp(-abs(x[1]) ** 2 / 2) * x[1] ** n * np.exp(logf)
            return np.kron(va, vb)

        V = np.array([amps(k) for k in self.kets]).T
        return V @ self.c @ V.conj().T


def _bs_amplitude_matrix(bs_phase: float) -> np.ndarray:
    # single-photon shell of the beam splitter in (a, b) order
    m = fock.beam_splitter_shell(1, math.pi / 4, bs_phase)
    return m[::-1, ::-1].copy()


def _check_regime(params: CavityParams) -> None:
    if params.kappa * params.T < KAPPA_T_MIN:
        raise ValueError(
            f"kappa*T={params.kappa * params.T:g} is below {KAPPA_T_MIN:g}; the scalar-K unit is not valid "
            "there and needs the sampled-spectrum treatment"
        )


def unit_transform_nonideal(
    rho: CoherentDyadMixture,
    params: CavityParams,
    phi: float | None = None,
    bs_phase: float = FILTER_BS_PHASE,
    merge_tol: float = MERGE_TOL,
) -> CoherentDyadMixture:
    """One filter unit with imperfect cavities, conditioned on both atoms reading ``+``.

    Each ket spawns four kets (atom states ``i, j``), weights pick up
    ``(1/16) d_ip d_jq`` and an optional phase layer rotates the amplitudes by
    ``exp(+-i phi)``. Near-identical kets are merged.
    """
    _check_regime(params)
    B = _bs_amplitude_matrix(bs_phase)
    Binv = np.linalg.inv(B)
    Ks = {UP: scalar_K(params, UP), DOWN: scalar_K(params, DOWN)}
    inner = rho.kets @ B.T  # amplitudes entering the two cavities
    combos = [(i, j) for i in (UP, DOWN) for j in (UP, DOWN)]
    new_kets = []
    for i, j in combos:
        new_kets.append((inner * np.array([Ks[i], Ks[j]])) @ Binv.T)
    new_kets = np.stack(new_kets, axis=1).reshape(-1, 2)  # ket n -> rows 4n..4n+3
    K = len(rho.kets)
    c = np.zeros((4 * K, 4 * K), dtype=complex)
    for ci, (i, j) in enumerate(combos):
        for cp, (p, q) in enumerate(combos):
            d_a = decoherence_factor(inner[:, 0][:, None], inner[:, 0][None, :], params, i, p)
            d_b = decoherence_factor(inner[:, 1][:, None], inner[:, 1][None, :], params, j, q)
            c[ci::4, cp::4] = rho.c * d_a * d_b / 16
    if phi is not None:
        new_kets = new_kets * np.array([np.exp(1j * phi), np.exp(-1j * phi)])
    return CoherentDyadMixture(new_kets, c).merged(merge_tol)


def run_filter_nonideal(
    alpha: complex,
    N: int,
    params: CavityParams,
    schedule: PhaseSchedule | str = "halving-pi/4",
    bs_phase: float = FILTER_BS_PHASE,
) -> CoherentDyadMixture:
    """``N + 1`` non-ideal units on ``|alpha>|alpha>`` with the schedule's phases in between."""
    sched = cascade.make_schedule(schedule, N) if isinstance(schedule, str) else schedule.truncated(N)
    rho = CoherentDyadMixture.coherent(alpha)
    for u in range(N + 1):
        phi = sched.angles[u] if u < N else None
        rho = unit_transform_nonideal(rho, params, phi, bs_phase)
    return rho


def target_overlap(kets: np.ndarray, alpha: complex) -> np.ndarray:
    r"""Normalized :math:`\langle\hat\psi_\infty|\beta,\gamma\rangle` for the exact twin projection of :math:`|\alpha\rangle|\alpha\rangle`.

    Uses :math:`\sum_n z^n/(n!)^2=I_0(2\sqrt z)` with :math:`z=\bar\alpha^2\beta\gamma`.
    """
    a2 = abs(alpha) ** 2
    z = np.conj(alpha) ** 2 * kets[:, 0] * kets[:, 1]
    norm = math.sqrt(iv(0, 2 * a2))  # e^{-|a|^2} factors cancel between both sides
    pre = np.exp(-0.5 * (np.abs(kets[:, 0]) ** 2 + np.abs(kets[:, 1]) ** 2))
    return pre * iv(0, 2 * np.sqrt(z.astype(complex))) / norm


def mixture_fidelity(rho: CoherentDyadMixture, alpha: complex) -> float:
    """``<psi_inf|rho|psi_inf> / Tr rho`` with ``psi_inf`` normalized."""
    tr = rho.trace()
    if not tr > 0:
        raise ZeroDivisionError("mixture has zero trace")
    v = target_overlap(rho.kets, alpha)
    return float((np.conj(v) @ rho.c @ v).real / tr)


@dataclass
class NonidealPoint:
    C: float
    fidelity: float
    probability: float


def fidelity_vs_C(
    alpha_sq: float,
    N: int,
    C_grid: Sequence[float],
    schedule: PhaseSchedule | str = "halving-pi/4",
    kappa: float = 1.0,
    T: float = math.inf,
) -> list[NonidealPoint]:
    alpha = math.sqrt(alpha_sq)
    out = []
    for C in C_grid:
        params = CavityParams(kappa, C=float(C), T=T)
        rho = run_filter_nonideal(alpha, N, params, schedule)
        out.append(NonidealPoint(float(C), mixture_fidelity(rho, alpha), rho.trace()))
    return out


def ideal_fidelity(alpha_sq: float, N: int, schedule: PhaseSchedule | str = "halving-pi/4") -> float:
    return cascade.fidelity_F(cascade.coherent_pair(math.sqrt(alpha_sq)), N, schedule)


# -- adiabatic elimination ----------------------------------------------------


def adiabatic_check(peak_flux: float, params: CavityParams, threshold: float = ADIABATIC_THRESHOLD, warn: bool = True) -> float:
    r"""Ratio :math:`\kappa\max|\alpha_\mathrm{in}|^2/g^2`; warns at ``threshold`` and above."""
    if peak_flux < 0:
        raise ValueError("flux must be non-negative")
    ratio = params.kappa * peak_flux / params.coupling_sq
    if warn and ratio >= threshold:
        warnings.warn(f"adiabatic ratio {ratio:.3g} >= {threshold:g}", AdiabaticityWarning, stacklevel=2)
    return ratio


def adiabatic_ratio_exact(peak_flux: float, params: CavityParams) -> float:
    """The un-approximated form ``4C/(1+2C)^2 * 2 flux / Gamma``."""
    if params.Gamma is None:
        raise ValueError("Gamma needed")
    return scattering_strength(params.C) * 2 * peak_flux / params.Gamma
