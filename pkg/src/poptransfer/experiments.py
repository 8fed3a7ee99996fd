"""Robustness and comparison sweeps over a fixed protocol.

Each sweep evaluates the protocol on a grid of noise rates, stray detunings,
durations or constant detunings and records the final target population and
the peak excited population at every grid point.
"""

from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controls import ConstantRaman, ControlSchedule
from .lindblad import E, F, HamiltonianSpec, NoiseChannel, ground_state, propagate_schedule
from .protocols import resolve_protocol

__all__ = [
    "Axis",
    "SweepSpec",
    "SweepResult",
    "SCENARIOS",
    "default_axes",
    "run_sweep",
    "sweep_decay",
    "sweep_dephasing",
    "dephasing_curves",
    "sweep_stray",
    "scan_total_time",
    "raman_baseline",
]

SCENARIOS = ("lambda", "ladder", "dephasing", "stray", "time_scan", "raman_baseline")


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    n_points: int
    spacing: str = "linear"

    def values(self) -> np.ndarray:
        if self.n_points < 1 or not (np.isfinite(self.min) and np.isfinite(self.max)):
            raise ValueError(f"axis {self.name}: bad bounds or size")
        if self.max < self.min:
            raise ValueError(f"axis {self.name}: max below min")
        if self.spacing == "linear":
            return np.linspace(self.min, self.max, self.n_points)
        if self.spacing == "log":
            if self.min <= 0:
                raise ValueError(f"axis {self.name}: log spacing needs min > 0")
            return np.geomspace(self.min, self.max, self.n_points)
        raise ValueError(f"axis {self.name}: unknown spacing {self.spacing!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "min": self.min, "max": self.max,
                "n_points": self.n_points, "spacing": self.spacing}


def default_axes(scenario: str, level: str | None = None) -> list[Axis]:
    """Default grids; the sweep ranges are not fixed by the source figures."""
    return {
        "lambda": [Axis("gamma_eg", 0.0, 0.5, 21)],
        "ladder": [Axis("gamma_eg", 0.0, 0.5, 21), Axis("gamma_fe", 0.0, 0.05, 21)],
        "dephasing": [Axis(f"gamma_{level or 'g'}", 0.0, 0.2, 21)],
        "stray": [Axis("stray_dp", -2.0, 2.0, 21), Axis("stray_d", -0.2, 0.2, 21)],
        "time_scan": [Axis("T", 20.0, 80.0, 61)],
        "raman_baseline": [Axis("delta_p", -20.0, 20.0, 81)],
    }[scenario]


@dataclass
class SweepSpec:
    """What to sweep.

    ``include_sink=None`` picks the scenario default: on for ``stray`` and
    ``raman_baseline``, off otherwise.
    """

    protocol: ControlSchedule | None
    T: float
    scenario: str
    axes: list[Axis] | None = None
    include_sink: bool | None = None
    level: str | None = None
    n_samples: int = 401
    spec: HamiltonianSpec | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.scenario == "dephasing" and self.level not in ("g", "e", "f"):
            raise ValueError("dephasing sweeps need level in {'g', 'e', 'f'}")
        if self.axes is None:
            self.axes = default_axes(self.scenario, self.level)
        n_axes = 2 if self.scenario in ("ladder", "stray") else 1
        if len(self.axes) != n_axes:
            raise ValueError(f"{self.scenario} sweeps take {n_axes} axis/axes")
        if self.include_sink is None:
            self.include_sink = self.scenario in ("stray", "raman_baseline")
        if self.protocol is None and self.scenario != "raman_baseline":
            raise ValueError("a protocol is required")
        if self.T <= 0:
            raise ValueError("T must be positive")
        for ax in self.axes:
            vals = ax.values()
            if self.scenario in ("lambda", "ladder", "dephasing") and vals.min() < 0:
                raise ValueError("rates must be non-negative")
            if self.scenario == "time_scan" and vals.min() <= 0:
                raise ValueError("durations must be positive")


@dataclass
class SweepResult:
    """Grid of final target populations and peak excited populations.

    ``extras`` holds additional per-point series (same shape as the grid) and
    ``meta`` scalar annotations such as a reference value.
    """

    axis_names: list[str]
    coords: list[np.ndarray]
    final_rho_ff: np.ndarray
    max_rho_ee: np.ndarray
    extras: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict[str, float] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.coords)

    def rows(self):
        """Flattened rows ``(*coords, final_rho_ff, max_rho_ee, *extras)`` in C order."""
        for idx in itertools.product(*(range(len(c)) for c in self.coords)):
            row = [c[i] for c, i in zip(self.coords, idx)]
            row += [self.final_rho_ff[idx], self.max_rho_ee[idx]]
            row += [self.extras[k][idx] for k in self.extras]
            yield row

    @property
    def columns(self) -> list[str]:
        return [*self.axis_names, "final_rho_ff", "max_rho_ee", *self.extras]

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows():
                w.writerow([f"{float(v):.12g}" for v in row])


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("QCTRL_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    if _workers() > 1 and len(items) > 1:
        with ThreadPoolExecutor(_workers()) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _channels(spec: SweepSpec, point: dict) -> list[NoiseChannel]:
    ch = []
    if spec.include_sink:
        ch.append(NoiseChannel.sink(10.0 / point.get("T", spec.T)))
    if "gamma_eg" in point:
        ch.append(NoiseChannel.decay_eg(point["gamma_eg"]))
    if "gamma_fe" in point:
        ch.append(NoiseChannel.decay_fe(point["gamma_fe"]))
    for lvl in "gef":
        if f"gamma_{lvl}" in point:
            ch.append(NoiseChannel.dephase(lvl, point[f"gamma_{lvl}"]))
    return ch


def _evaluate(spec: SweepSpec, point: dict):
    T = point.get("T", spec.T)
    if spec.scenario == "raman_baseline":
        sched = ConstantRaman(point["delta_p"])
    else:
        sched = spec.protocol
    if "stray_dp" in point or "stray_d" in point:
        sched = sched.with_stray(point.get("stray_dp", 0.0), point.get("stray_d", 0.0))
    channels = _channels(spec, point)
    dim = 4 if spec.include_sink else 3
    traj = propagate_schedule(ground_state(dim), sched, T, channels, spec.n_samples, spec.spec)
    return traj.final_target, traj.max_excited, traj.max_target


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate every grid point of ``spec``; points are independent."""
    names = [ax.name for ax in spec.axes]
    coords = [ax.values() for ax in spec.axes]
    points = [dict(zip(names, vals)) for vals in itertools.product(*coords)]
    out = np.array(_map(lambda p: _evaluate(spec, p), points)).reshape(*(len(c) for c in coords), 3)
    res = SweepResult(names, coords, out[..., 0], out[..., 1])
    if spec.scenario == "raman_baseline":
        res.extras["max_rho_ff"] = out[..., 2]
    return res


def sweep_decay(spec: SweepSpec) -> SweepResult:
    """Lambda (``gamma_eg``) or Ladder (``gamma_eg`` x ``gamma_fe``) decay sweep."""
    if spec.scenario not in ("lambda", "ladder"):
        raise ValueError("sweep_decay needs scenario 'lambda' or 'ladder'")
    return run_sweep(spec)


def sweep_dephasing(spec: SweepSpec) -> SweepResult:
    """Pure dephasing on the single level ``spec.level``."""
    if spec.scenario != "dephasing":
        raise ValueError("sweep_dephasing needs scenario 'dephasing'")
    return run_sweep(spec)


def dephasing_curves(protocol: ControlSchedule, T: float, rates=None, **kw) -> dict[str, SweepResult]:
    """One dephasing curve per level ``g``, ``e``, ``f`` on a shared rate grid."""
    out = {}
    for lvl in "gef":
        axes = None
        if rates is not None:
            r = np.asarray(rates, dtype=float)
            axes = [Axis(f"gamma_{lvl}", float(r.min()), float(r.max()), len(r))]
        out[lvl] = sweep_dephasing(SweepSpec(protocol, T, "dephasing", axes, level=lvl, **kw))
    return out


def sweep_stray(spec: SweepSpec) -> SweepResult:
    """Constant stray detunings ``(stray_dp, stray_d)`` added to the protocol."""
    if spec.scenario != "stray":
        raise ValueError("sweep_stray needs scenario 'stray'")
    return run_sweep(spec)


def scan_total_time(protocol: ControlSchedule, T_grid=None, include_sink: bool = False,
                    n_samples: int = 401) -> SweepResult:
    """Evaluate the protocol stretched to each duration in ``T_grid``."""
    T_grid = np.linspace(20.0, 80.0, 61) if T_grid is None else np.asarray(T_grid, dtype=float)
    spec = SweepSpec(protocol, float(T_grid.max()), "time_scan",
                     [Axis("T", float(T_grid.min()), float(T_grid.max()), len(T_grid))],
                     include_sink=include_sink, n_samples=n_samples)
    names = ["T"]
    out = np.array(_map(lambda T: _evaluate(spec, {"T": float(T)}), list(T_grid)))
    return SweepResult(names, [T_grid], out[:, 0], out[:, 1])


def raman_baseline(T: float, dp_grid=None, include_sink: bool = True, n_samples: int = 2001,
                   reference: ControlSchedule | None = None) -> SweepResult:
    """Peak target population under ``delta = 0`` and constant ``delta_p``.

    ``extras["max_rho_ff"]`` holds the maximum of ``rho_ff(t)`` over the run;
    ``meta["reference"]`` is the final population of protocol 1 (the variant
    designed for ``T`` when available) under the same sink setting.
    """
    dp_grid = np.linspace(-20.0, 20.0, 81) if dp_grid is None else np.asarray(dp_grid, dtype=float)
    spec = SweepSpec(None, T, "raman_baseline",
                     [Axis("delta_p", float(dp_grid.min()), float(dp_grid.max()), len(dp_grid))],
                     include_sink=include_sink, n_samples=n_samples)
    out = np.array(_map(lambda dp: _evaluate(spec, {"delta_p": float(dp)}), list(dp_grid)))
    res = SweepResult(["delta_p"], [dp_grid], out[:, 0], out[:, 1], {"max_rho_ff": out[:, 2]})
    ref = reference if reference is not None else resolve_protocol("protocol1", T)[0]
    dim = 4 if include_sink else 3
    channels = [NoiseChannel.sink(10.0 / T)] if include_sink else []
    res.meta["reference"] = propagate_schedule(ground_state(dim), ref, T, channels).final_target
    return res
