"""Detuning control schedules.

Every schedule maps a time ``t`` in ``[0, T]`` to the pair
``(delta_p, delta)`` in units of the coupling ``Omega_0``. Smooth families are
written in the centred variable ``x = t/T - 0.5``. A constant stray offset
``(stray_dp, stray_d)`` can be attached to any schedule and is added to every
evaluation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ControlSchedule",
    "PiecewiseConstant",
    "PolyPair",
    "Ansatz1",
    "ParityPolys",
    "ConstantRaman",
    "SymmetryReport",
    "eval_schedule",
    "pwc_from_actions",
    "symmetry_report",
    "schedule_from_dict",
]


def _as_pair(stray) -> tuple[float, float]:
    dp, d = stray
    return float(dp), float(d)


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Base class; subclasses implement :meth:`_raw`."""

    stray: tuple[float, float] = field(default=(0.0, 0.0), kw_only=True)

    kind = "abstract"

    def __post_init__(self):
        object.__setattr__(self, "stray", _as_pair(self.stray))

    def _raw(self, t: np.ndarray, T: float) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def evaluate(self, t, T: float):
        """Detunings at time(s) ``t``; raises ``ValueError`` outside ``[0, T]``."""
        if T <= 0:
            raise ValueError(f"total time must be positive, got {T}")
        ts = np.asarray(t, dtype=float)
        if np.any(ts < 0) or np.any(ts > T) or not np.all(np.isfinite(ts)):
            raise ValueError(f"time outside the schedule domain [0, {T}]")
        dp, d = self._raw(ts, T)
        dp = np.asarray(dp, dtype=float) + self.stray[0]
        d = np.asarray(d, dtype=float) + self.stray[1]
        if ts.ndim == 0:
            return float(dp), float(d)
        return np.broadcast_to(dp, ts.shape).copy(), np.broadcast_to(d, ts.shape).copy()

    def stage_controls(self, T: float, n_steps: int):
        """Detunings at the RK4 stage times of a uniform ``n_steps`` grid.

        Returns two ``(n_steps, 3)`` arrays for the step start, midpoint and end.
        """
        h = T / n_steps
        t0 = np.arange(n_steps) * h
        ts = np.stack([t0, t0 + 0.5 * h, t0 + h], axis=1)
        dp, d = self.evaluate(np.clip(ts, 0.0, T), T)
        return dp, d

    @property
    def is_piecewise_constant(self) -> bool:
        return False

    def with_stray(self, stray_dp: float, stray_d: float) -> "ControlSchedule":
        return dataclasses.replace(self, stray=(stray_dp, stray_d))

    def params(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "stray":
                continue
            v = getattr(self, f.name)
            out[f.name] = np.asarray(v).tolist() if isinstance(v, (np.ndarray, tuple, list)) else v
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params(), "stray": list(self.stray)}

    def __eq__(self, other):
        if not isinstance(other, ControlSchedule):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = object.__hash__


def _vector(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PiecewiseConstant(ControlSchedule):
    """Constant detunings on ``n_steps`` equal intervals.

    Value ``i`` applies on ``[i T/n, (i+1) T/n)``; ``t = T`` uses the last value.
    """

    values: np.ndarray
    kind = "piecewise_constant"

    def __post_init__(self):
        super().__post_init__()
        vals = _vector(self.values)
        if vals.ndim != 2 or vals.shape[1] != 2 or vals.shape[0] < 1:
            raise ValueError(f"values must have shape (n_steps, 2), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("piecewise-constant values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def is_piecewise_constant(self) -> bool:
        return True

    def segment_index(self, t, T):
        idx = np.floor(np.asarray(t, dtype=float) / T * self.n_steps).astype(int)
        return np.clip(idx, 0, self.n_steps - 1)

    def _raw(self, t, T):
        idx = self.segment_index(t, T)
        return self.values[idx, 0], self.values[idx, 1]

    def stage_controls(self, T, n_steps):
        if n_steps % self.n_steps:
            raise ValueError("RK4 grid must align with the segment boundaries")
        rep = n_steps // self.n_steps
        dp = np.repeat(self.values[:, 0], rep) + self.stray[0]
        d = np.repeat(self.values[:, 1], rep) + self.stray[1]
        return np.repeat(dp[:, None], 3, axis=1), np.repeat(d[:, None], 3, axis=1)

    def segment_values(self) -> np.ndarray:
        """Per-segment detunings including the stray offset."""
        return self.values + np.asarray(self.stray)


@dataclass(frozen=True, eq=False)
class PolyPair(ControlSchedule):
    """Independent polynomials in ``x = t/T - 0.5``, coefficients lowest degree first."""

    coeffs_dp: np.ndarray
    coeffs_d: np.ndarray
    kind = "poly_pair"

    def __post_init__(self):
        super().__post_init__()
        for name in ("coeffs_dp", "coeffs_d"):
            arr = _vector(getattr(self, name))
            if arr.ndim != 1 or arr.size < 1:
                raise ValueError(f"{name} must be a non-empty 1-D sequence")
            object.__setattr__(self, name, arr)

    def _raw(self, t, T):
        x = t / T - 0.5
        return (np.polynomial.polynomial.polyval(x, self.coeffs_dp),
                np.polynomial.polynomial.polyval(x, self.coeffs_d))


@dataclass(frozen=True, eq=False)
class Ansatz1(ControlSchedule):
    """``delta_p = c1 - c2 exp(k x^2)`` and ``delta = m x``."""

    c1: float
    c2: float
    k: float
    m: float
    kind = "ansatz1"

    def _raw(self, t, T):
        x = t / T - 0.5
        with np.errstate(over="ignore"):
            dp = self.c1 - self.c2 * np.exp(self.k * x * x)
        return dp, self.m * x


@dataclass(frozen=True, eq=False)
class ParityPolys(ControlSchedule):
    """Odd quintic ``delta_p`` (x, x^3, x^5) and even quartic ``delta`` (1, x^2, x^4)."""

    dp_odd: np.ndarray
    d_even: np.ndarray
    kind = "parity_polys"

    def __post_init__(self):
        super().__post_init__()
        for name in ("dp_odd", "d_even"):
            arr = _vector(getattr(self, name))
            if arr.shape != (3,):
                raise ValueError(f"{name} needs exactly 3 coefficients")
            object.__setattr__(self, name, arr)

    def _raw(self, t, T):
        x = t / T - 0.5
        x2 = x * x
        dp = x * (self.dp_odd[0] + x2 * (self.dp_odd[1] + x2 * self.dp_odd[2]))
        d = self.d_even[0] + x2 * (self.d_even[1] + x2 * self.d_even[2])
        return dp, d


@dataclass(frozen=True, eq=False)
class ConstantRaman(ControlSchedule):
    """Constant single-photon detuning with zero two-photon detuning."""

    dp: float
    kind = "constant_raman"

    def _raw(self, t, T):
        return np.full(np.shape(t), float(self.dp)), np.zeros(np.shape(t))

    def as_piecewise(self) -> PiecewiseConstant:
        return PiecewiseConstant([[self.dp, 0.0]], stray=self.stray)


_KINDS = {cls.kind: cls for cls in (PiecewiseConstant, PolyPair, Ansatz1, ParityPolys, ConstantRaman)}


def schedule_from_dict(data: dict) -> ControlSchedule:
    """Inverse of :meth:`ControlSchedule.to_dict`."""
    data = dict(data)
    try:
        cls = _KINDS[data.pop("kind")]
    except KeyError as exc:
        raise ValueError(f"unknown schedule kind {exc}; expected one of {sorted(_KINDS)}") from None
    stray = data.pop("stray", (0.0, 0.0))
    names = {f.name for f in dataclasses.fields(cls)} - {"stray"}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown keys for {cls.kind}: {sorted(unknown)}")
    return cls(**data, stray=tuple(stray))


def eval_schedule(schedule: ControlSchedule, t: float, T: float) -> tuple[float, float]:
    """Return ``(delta_p, delta)`` at time ``t``, stray offsets included."""
    return schedule.evaluate(float(t), T)


def pwc_from_actions(actions, ranges) -> PiecewiseConstant:
    """Scale normalized actions in ``[-1, 1]^2`` to detunings.

    Args:
        actions: array of shape ``(n_steps, 2)`` ordered ``(a_dp, a_d)``.
        ranges: ``(half_range_dp, half_range_d)``.
    """
    a = np.asarray(actions, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"actions must have shape (n_steps, 2), got {a.shape}")
    if np.any(np.abs(a) > 1.0) or not np.all(np.isfinite(a)):
        raise ValueError("normalized actions must lie in [-1, 1]")
    return PiecewiseConstant(a * np.asarray(ranges, dtype=float))


@dataclass(frozen=True, eq=False)
class SymmetryReport:
    """RMS deviations of each detuning from its even and odd parts about ``T/2``."""

    dp_even_dev: float
    dp_odd_dev: float
    d_even_dev: float
    d_odd_dev: float

    @property
    def dp_parity(self) -> float:
        """Smaller of the two deviations for ``delta_p``; zero means definite parity."""
        return min(self.dp_even_dev, self.dp_odd_dev)

    @property
    def d_parity(self) -> float:
        return min(self.d_even_dev, self.d_odd_dev)


def symmetry_report(schedule: ControlSchedule, T: float, n_points: int = 201) -> SymmetryReport:
    if n_points < 101:
        raise ValueError("use at least 101 grid points")
    t = np.linspace(0.0, T, n_points)
    dp, d = schedule.evaluate(t, T)

    def devs(f):
        mirrored = f[::-1]
        odd_part = 0.5 * (f - mirrored)
        even_part = 0.5 * (f + mirrored)
        return float(np.sqrt(np.mean(odd_part**2))), float(np.sqrt(np.mean(even_part**2)))

    dp_even, dp_odd = devs(dp)
    d_even, d_odd = devs(d)
    return SymmetryReport(dp_even, dp_odd, d_even, d_odd)
