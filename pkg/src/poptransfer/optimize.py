"""Derivative-free protocol refinement.

Brent line minimization, Powell's direction-set method, and multi-start
drivers over polynomial and ansatz parameterizations of the detunings.
All objectives are minimized; protocol drivers minimize ``-rho_ff(T)`` and
report populations.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .controls import Ansatz1, ControlSchedule, ParityPolys, PolyPair
from .lindblad import MAX_RK4_STEPS, HamiltonianSpec, transfer_population

__all__ = [
    "PowellConfig",
    "PowellResult",
    "OptimizationResult",
    "bracket_minimum",
    "brent_min",
    "powell_min",
    "transfer_objective",
    "optimize_polynomial",
    "optimize_ansatz",
]

GOLD = 1.618033988749895
CGOLD = 0.3819660112501051
TINY = 1e-21


def bracket_minimum(f: Callable[[float], float], a: float = 0.0, b: float = 1.0,
                    fa: float | None = None, growth: float = GOLD, grow_limit: float = 100.0,
                    max_evals: int = 200):
    """Expand from ``(a, b)`` downhill until a minimum is bracketed.

    Returns ``((a, b, c), (fa, fb, fc))`` with ``fb <= fa`` and ``fb <= fc``.
    """
    fa = f(a) if fa is None else fa
    fb = f(b)
    n = 1
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
    c = b + growth * (b - a)
    fc = f(c)
    n += 1
    while fb > fc:
        if n >= max_evals:
            raise RuntimeError("could not bracket a minimum (objective unbounded below?)")
        r = (b - a) * (fb - fc)
        q = (b - a) * (fb - fa)
        denom = 2.0 * math.copysign(max(abs(q - r), TINY), q - r)
        u = b - ((b - c) * q - (b - a) * r) / denom
        ulim = b + grow_limit * (c - b)
        if (b - u) * (u - c) > 0.0:
            fu = f(u)
            n += 1
            if fu < fc:
                return (b, u, c), (fb, fu, fc)
            if fu > fb:
                return (a, b, u), (fa, fb, fu)
            u = c + growth * (c - b)
            fu = f(u)
            n += 1
        elif (c - u) * (u - ulim) > 0.0:
            fu = f(u)
            n += 1
            if fu < fc:
                b, c, u = c, u, u + growth * (u - c)
                fb, fc, fu = fc, fu, f(u)
                n += 1
        elif (u - ulim) * (ulim - c) >= 0.0:
            u = ulim
            fu = f(u)
            n += 1
        else:
            u = c + growth * (c - b)
            fu = f(u)
            n += 1
        a, b, c = b, c, u
        fa, fb, fc = fb, fc, fu
    return (a, b, c), (fa, fb, fc)


def brent_min(f: Callable[[float], float], bracket, tol: float = 1.48e-8, max_iter: int = 500,
              fb: float | None = None):
    """Minimize a 1-D function inside a bracket ``(a, b, c)`` with ``f(b) < f(a), f(c)``.

    Golden-section search with parabolic interpolation. Converges when the
    bracketing interval shrinks below ``2 * (tol * |x| + 1e-12)``.

    Returns:
        ``(x_min, f_min)``.
    """
    a, b, c = (float(v) for v in bracket)
    if not (min(a, c) < b < max(a, c)):
        raise ValueError("bracket middle point must lie strictly between the ends")
    fx = f(b) if fb is None else fb
    fa_, fc_ = f(a), f(c)
    if not (fx < fa_ and fx < fc_):
        raise ValueError("invalid bracket: f(b) must be below f(a) and f(c)")
    lo, hi = min(a, c), max(a, c)
    x = w = v = b
    fw = fv = fx
    d = e = 0.0
    for _ in range(max_iter):
        xm = 0.5 * (lo + hi)
        tol1 = tol * abs(x) + 1e-12
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (hi - lo):
            return x, fx
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            etemp = e
            e = d
            if abs(p) >= abs(0.5 * q * etemp) or p <= q * (lo - x) or p >= q * (hi - x):
                e = (lo - x) if x >= xm else (hi - x)
                d = CGOLD * e
            else:
                d = p / q
                u = x + d
                if u - lo < tol2 or hi - u < tol2:
                    d = math.copysign(tol1, xm - x)
        else:
            e = (lo - x) if x >= xm else (hi - x)
            d = CGOLD * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = f(u)
        if fu <= fx:
            if u >= x:
                lo = x
            else:
                hi = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                lo = u
            else:
                hi = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    raise RuntimeError(f"Brent did not converge in {max_iter} iterations")


@dataclass
class PowellConfig:
    x_tol: float = 1e-8
    f_tol: float = 1e-8
    max_iter: int = 1000
    bracket_growth: float = GOLD
    restarts: int = 10
    init_range: tuple[float, float] | None = None
    seed: int = 0
    line_tol: float = 1e-6
    max_evals: int = 100_000
    reset_every: int | None = None

    def __post_init__(self):
        if self.x_tol <= 0 or self.f_tol <= 0 or self.line_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be >= 1")


@dataclass
class PowellResult:
    x: np.ndarray
    fun: float
    n_evals: int
    n_iter: int
    history: list[float] = field(default_factory=list)


class _Counted:
    def __init__(self, f, max_evals):
        self.f = f
        self.n = 0
        self.max_evals = max_evals

    def __call__(self, x):
        if self.n >= self.max_evals:
            raise _EvalBudget
        self.n += 1
        val = float(self.f(x))
        if not math.isfinite(val):
            raise FloatingPointError(f"objective returned {val} at {x}")
        return val


class _EvalBudget(Exception):
    pass


def _line_min(f, x, fx, u, cfg):
    def g(alpha):
        return f(x + alpha * u)

    (a, b, c), (fa, fb, fc) = bracket_minimum(g, 0.0, 1.0, fa=fx, growth=cfg.bracket_growth)
    if not (fb < fa and fb < fc):
        # flat along u: keep the best of the three points
        alpha, fbest = min(((a, fa), (b, fb), (c, fc)), key=lambda p: p[1])
    else:
        alpha, fbest = brent_min(g, (a, b, c), tol=cfg.line_tol, fb=fb)
    if fbest < fx:
        return x + alpha * u, fbest
    return x, fx


def powell_min(f: Callable[[np.ndarray], float], x0, cfg: PowellConfig | None = None,
               directions=None) -> PowellResult:
    """Powell's conjugate direction method.

    Each cycle line-minimizes along every direction, then considers the net
    displacement as a new direction and swaps it for the direction of largest
    decrease when Powell's test allows. Directions reset to the coordinate
    basis every ``reset_every`` cycles (default ``n``). Stops when a cycle's
    relative improvement drops below ``f_tol``, the step below ``x_tol``, or
    after ``max_iter`` cycles.
    """
    cfg = cfg or PowellConfig()
    x = np.array(x0, dtype=float)
    n = x.size
    fc = _Counted(f, cfg.max_evals)
    fx = fc(x)
    basis = np.eye(n) if directions is None else np.array(directions, dtype=float)
    dirs = basis.copy()
    reset_every = cfg.reset_every or n
    history = [fx]
    it = 0
    try:
        for it in range(1, cfg.max_iter + 1):
            x_start, f_start = x.copy(), fx
            big_i, big_drop = 0, 0.0
            for i in range(n):
                f_prev = fx
                x, fx = _line_min(fc, x, fx, dirs[i], cfg)
                if f_prev - fx > big_drop:
                    big_i, big_drop = i, f_prev - fx
            history.append(fx)
            if 2.0 * (f_start - fx) <= cfg.f_tol * (abs(f_start) + abs(fx)) + TINY:
                break
            if np.max(np.abs(x - x_start)) <= cfg.x_tol * (1.0 + np.max(np.abs(x))):
                break
            new_dir = x - x_start
            f_ext = fc(2.0 * x - x_start)
            if f_ext < f_start:
                t = (2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - big_drop) ** 2
                     - big_drop * (f_start - f_ext) ** 2)
                if t < 0.0:
                    x, fx = _line_min(fc, x, fx, new_dir, cfg)
                    dirs[big_i] = dirs[-1]
                    dirs[-1] = new_dir
            if it % reset_every == 0:
                dirs = basis.copy()
    except _EvalBudget:
        pass
    return PowellResult(x, fx, fc.n, it, history)


def transfer_objective(build: Callable[[np.ndarray], ControlSchedule], T: float,
                       sink_rate: float = 0.0, spec: HamiltonianSpec | None = None,
                       max_steps: int = 200_000, method: str = "magnus") -> Callable[[np.ndarray], float]:
    """``-rho_ff(T)`` as a function of a parameter vector.

    Parameter vectors whose detunings are too large to integrate within
    ``max_steps`` score 0 population, i.e. the worst possible value.
    """
    def objective(params):
        try:
            res = transfer_population(build(np.asarray(params)), T, sink_rate, spec,
                                      max_steps=max_steps, method=method)
        except ValueError:
            return 0.0
        return -res.final_target if math.isfinite(res.final_target) else 0.0

    return objective


@dataclass
class OptimizationResult:
    schedule: ControlSchedule
    score: float
    params: np.ndarray
    run_scores: list[float]
    n_evals: int


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("QCTRL_THREADS", "1")))
    except ValueError:
        return 1


def _multistart(objective, build, n_params, n_runs, init_range, cfg, rescore):
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_runs)
    starts = [np.random.default_rng(s).uniform(*init_range, size=n_params) for s in seeds]

    def run(x0):
        return powell_min(objective, x0, cfg)

    if _workers() > 1 and n_runs > 1:
        with ThreadPoolExecutor(_workers()) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(x0) for x0 in starts]
    # Searches run on the Magnus objective; report every run on the RK4 reference path.
    scores = [-rescore(r.x) for r in results]
    i = int(np.argmax(scores))
    return OptimizationResult(build(results[i].x), scores[i], results[i].x, scores,
                              sum(r.n_evals for r in results))


def _poly_builder(order):
    def build(p):
        return PolyPair(p[: order + 1], p[order + 1:])
    return build


def optimize_polynomial(T: float = 40.0, order: int = 5, n_runs: int = 10,
                        cfg: PowellConfig | None = None, sink: bool = False,
                        spec: HamiltonianSpec | None = None) -> OptimizationResult:
    """Best-of-``n_runs`` Powell search over polynomial coefficients of both detunings.

    Coefficients (in ``x = t/T - 0.5``, lowest degree first) start uniform in
    ``cfg.init_range`` (default ``[-20, 20]``). With ``sink=True`` the
    objective includes the training sink at rate ``10/T``.
    """
    cfg = cfg or PowellConfig()
    if order < 0:
        raise ValueError("order must be non-negative")
    build = _poly_builder(order)
    rate = 10.0 / T if sink else 0.0
    objective = transfer_objective(build, T, rate, spec)
    rescore = transfer_objective(build, T, rate, spec, max_steps=MAX_RK4_STEPS, method="rk4")
    return _multistart(objective, build, 2 * (order + 1), n_runs, cfg.init_range or (-20.0, 20.0), cfg,
                       rescore)


_ANSATZ = {
    "ansatz1": (lambda p: Ansatz1(*p), 4, (-5.0, 5.0)),
    "parity_polys": (lambda p: ParityPolys(p[:3], p[3:]), 6, (0.0, 20.0)),
}


def optimize_ansatz(T: float = 40.0, family: str = "ansatz1", cfg: PowellConfig | None = None,
                    sink: bool = False, spec: HamiltonianSpec | None = None) -> OptimizationResult:
    """Multi-start Powell search over an ansatz family.

    ``family`` is ``"ansatz1"`` (parameters ``c1, c2, k, m``; starts in
    ``[-5, 5]``) or ``"parity_polys"`` (odd ``delta_p`` then even ``delta``
    coefficients; starts in ``[0, 20]``). ``cfg.restarts`` sets the number of
    starts.
    """
    cfg = cfg or PowellConfig()
    try:
        build, n_params, default_range = _ANSATZ[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; expected one of {sorted(_ANSATZ)}") from None
    rate = 10.0 / T if sink else 0.0
    objective = transfer_objective(build, T, rate, spec)
    rescore = transfer_objective(build, T, rate, spec, max_steps=MAX_RK4_STEPS, method="rk4")
    return _multistart(objective, build, n_params, cfg.restarts, cfg.init_range or default_range, cfg, rescore)
