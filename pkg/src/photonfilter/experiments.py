"""Experiment runners behind the command line: one function per experiment id."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__, cascade, cavity, counter, loss
from .fock import DOWN, UP


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    params: dict[str, Any]
    notes: list[str] = field(default_factory=list)


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(table: Table, experiment: str) -> str:
    lines = [f"# photonfilter {__version__}", f"# experiment={experiment}"]
    lines.append("# params=" + json.dumps(table.params, sort_keys=True, default=str))
    lines += [f"# {n}" for n in table.notes]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def _pool_map(fn: Callable, items: list, threads: int) -> list:
    # results come back in grid order whatever the worker count
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _N_label(N) -> str:
    return "inf" if N is None else str(N)


def _parse_N(v):
    if v in (None, "inf", "Infinity", math.inf):
        return None
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, int) or v < 0:
        raise ConfigError(f"N must be a non-negative integer or 'inf', got {v!r}")
    return v


# -- filter -------------------------------------------------------------------


def fig3(p: dict, threads: int = 1) -> Table:
    grid = np.linspace(p["alpha_sq_min"], p["alpha_sq_max"], int(p["points"]))
    Ns = [_parse_N(n) for n in p["N"]]
    rows = []
    for a2 in grid:
        c = cascade.coherent_pair(math.sqrt(a2)) if a2 > 0 else cascade.twin_state([1.0])
        p_inf = cascade.success_prob_limit(c)
        for N in Ns:
            if N is None:
                rows.append([float(a2), "inf", 1.0, p_inf, p_inf])
                continue
            res = cascade.project_S(c, N, p["schedule"])
            rows.append([float(a2), N, res.fidelity, res.success_probability, p_inf])
    return Table(["alpha_sq", "N", "fidelity", "probability", "p_inf"], rows, p)


# -- counting -------------------------------------------------------------------


def _p_same_table(p: dict) -> Table:
    sched = counter.CountSchedule.divisibility(int(p["n0"]), int(p["N"]))
    rows = [[n, counter.p_same(n, sched)] for n in range(int(p["n_max"]) + 1)]
    q = counter.q_confidence(sched)
    return Table(["n", "p_same"], rows, p, [f"q={q!r}"])


def fig4(p: dict, threads: int = 1) -> Table:
    return _p_same_table(p)


def fig5(p: dict, threads: int = 1) -> Table:
    return _p_same_table(p)


def plan(p: dict, threads: int = 1) -> dict:
    pl = counter.plan_tests(int(p["n_max"]), float(p["target"]))
    out = json.loads(pl.to_json())
    out["exact_confidence"] = counter.exact_confidence(pl)
    out["log_base_check"] = counter.log_base_check(int(p["n_max"]))
    out["version"] = __version__
    return out


def record(p: dict, threads: int = 1, seed: int | None = None) -> Table:
    if seed is None:
        raise ConfigError("record runs are stochastic and need --seed")
    steps = int(p["steps"])
    if steps < 1:
        raise ConfigError("steps must be positive")
    phi = float(p["phi"])
    sched = counter.CountSchedule.fixed(phi, steps)
    rec = counter.simulate_record(int(p["n"]), sched, seed)
    est = counter.estimate_n(rec, phi) if steps else float("nan")
    return Table(["n", "phi", "steps", "f", "n_estimate", "record"], [[int(p["n"]), phi, steps, rec.f, est, str(rec)]], p)


def qnd(p: dict, threads: int = 1) -> Table:
    rows = []
    for n in range(int(p["n_max"]) + 1):
        for q in range(int(p["q_max"]) + 1):
            for phi in p["phi"]:
                ana = counter.qnd_block(n, q, phi)
                sim = counter.qnd_block_simulation(n, q, phi)
                prob, post = sim[(1, 1)]
                ref = counter.fock.fock_state((n, q))
                fid = abs(counter.fock.overlap(ref, post)) ** 2 if prob > 0 else abs(counter.fock.overlap(ref, sim[(-1, -1)][1])) ** 2
                rows.append([n, q, float(phi), ana.p_plus, prob, sim[(-1, -1)][0], fid])
    return Table(["n", "q", "phi", "p_plus", "p_plus_simulated", "p_minus_simulated", "photonic_fidelity"], rows, p)


# -- loss -------------------------------------------------------------------------------


def _fig7_point(args):
    a2, R, N, schedule = args
    r = loss.purify_two_mode(a2, R, N, schedule)
    return [R, r.fidelity, r.probability, r.purity, a2, _N_label(N)]


def _fig8_point(args):
    a2, R, N, schedule, reproject = args
    r = loss.purify_four_mode(a2, R, N, schedule, reproject)
    return [R, r.fidelity, r.probability, r.purity, a2, _N_label(N)]


def _R_grid(p):
    return [float(r) for r in np.linspace(p["R_min"], p["R_max"], int(p["points"]))]


def fig7(p: dict, threads: int = 1) -> Table:
    N = _parse_N(p["N"])
    items = [(float(a2), R, N, p["schedule"]) for a2 in p["alpha_sq"] for R in _R_grid(p)]
    rows = _pool_map(_fig7_point, items, threads)
    return Table(["R", "fidelity", "probability", "purity", "alpha_sq", "N"], rows, p)


def fig8(p: dict, threads: int = 1) -> Table:
    N = _parse_N(p["N"])
    items = [(float(a2), R, N, p["schedule"], p["reproject"]) for a2 in p["alpha_sq"] for R in _R_grid(p)]
    rows = _pool_map(_fig8_point, items, threads)
    return Table(["R", "fidelity", "probability", "purity", "alpha_sq", "N"], rows, p)


# -- cavity -------------------------------------------------------------------------------


def _modes_point(args):
    kT, C = args
    params = cavity.CavityParams(1.0, C=C, T=kT)
    fo, fc = cavity.optimal_mode(1.0, kT), cavity.constant_mode(kT)
    return [kT, cavity.overlap_deviation(fo, params, UP), cavity.overlap_deviation(fo, params, DOWN), cavity.overlap_deviation(fc, params, DOWN)]


def modes(p: dict, threads: int = 1) -> Table:
    grid = [float(x) for x in np.geomspace(p["kappa_T_min"], p["kappa_T_max"], int(p["points"]))]
    rows = _pool_map(_modes_point, [(kT, float(p["C"])) for kT in grid], threads)
    return Table(["kappa_T", "E_up", "E_down_optimal", "E_down_constant"], rows, p)


def _fig9_point(args):
    a2, N, C, schedule = args
    pt = cavity.fidelity_vs_C(a2, N, [C], schedule)[0]
    return [C, pt.fidelity, a2, N]


def fig9(p: dict, threads: int = 1) -> Table:
    Cs = [float(c) for c in np.geomspace(p["C_min"], p["C_max"], int(p["points"]))]
    items = [(float(a2), int(N), C, p["schedule"]) for a2 in p["alpha_sq"] for N in p["N"] for C in Cs]
    rows = _pool_map(_fig9_point, items, threads)
    notes = []
    for a2 in p["alpha_sq"]:
        for N in p["N"]:
            notes.append(f"ideal alpha_sq={a2} N={N} F={cavity.ideal_fidelity(float(a2), int(N), p['schedule'])!r}")
    if p.get("peak_flux") and p.get("g"):
        params = cavity.CavityParams(1.0, C=Cs[0], g=float(p["g"]), Gamma=2 * float(p["g"]) ** 2 / Cs[0])
        ratio = cavity.adiabatic_check(float(p["peak_flux"]), params)
        notes.append(f"adiabatic_ratio={ratio!r}")
    return Table(["C", "F", "alpha_sq", "N"], rows, p, notes)


DEFAULTS: dict[str, dict[str, Any]] = {
    "fig3": {"alpha_sq_min": 0.0, "alpha_sq_max": 10.0, "points": 41, "N": [0, 1, 2, "inf"], "schedule": "halving-pi/4"},
    "fig4": {"n0": 20, "N": 4, "n_max": 100},
    "fig5": {"n0": 100, "N": 7, "n_max": 500},
    "fig7": {"alpha_sq": [2.0, 4.0], "R_min": 0.0, "R_max": 0.3, "points": 31, "N": "inf", "schedule": "halving-pi/2"},
    "fig8": {"alpha_sq": [2.0, 4.0], "R_min": 0.0, "R_max": 0.3, "points": 31, "N": "inf", "schedule": "halving-pi/2", "reproject": "pairs"},
    "fig9": {"alpha_sq": [2.0, 4.0], "N": [0, 1, 2], "C_min": 10.0, "C_max": 1e6, "points": 21, "schedule": "halving-pi/4", "peak_flux": 0.0, "g": None},
    "modes": {"kappa_T_min": 1.0, "kappa_T_max": 1000.0, "points": 25, "C": 1000.0},
    "plan": {"n_max": 10, "target": 0.99},
    "record": {"n": 2, "phi": math.pi / 8, "steps": 10000},
    "qnd": {"n_max": 3, "q_max": 3, "phi": [math.pi / 8, math.pi / 5]},
}

RUNNERS: dict[str, Callable] = {
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig7": fig7,
    "fig8": fig8,
    "fig9": fig9,
    "modes": modes,
    "plan": plan,
    "record": record,
    "qnd": qnd,
}

STOCHASTIC = {"record"}


def resolve(experiment: str, overrides: dict[str, Any]) -> dict[str, Any]:
    """Defaults updated by overrides; unknown keys are rejected."""
    if experiment not in RUNNERS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(RUNNERS)}")
    params = json.loads(json.dumps(DEFAULTS[experiment]))
    bad = set(overrides) - set(params)
    if bad:
        raise ConfigError(f"unknown parameter(s) for {experiment}: {', '.join(sorted(bad))}")
    params.update(overrides)
    return params


def run_experiment(experiment: str, params: dict[str, Any], seed: int | None = None, threads: int = 1):
    fn = RUNNERS[experiment]
    if experiment in STOCHASTIC:
        return fn(params, threads, seed=seed)
    return fn(params, threads)
