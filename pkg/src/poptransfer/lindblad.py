"""Three-level Hamiltonian, Lindblad generator and propagators.

Levels are ordered ``g, e, f`` with an optional sink ``s`` as a fourth level.
Units: hbar = 1, times in ``1/Omega_0``, rates and detunings in ``Omega_0``.

Density matrices are plain complex ``numpy`` arrays. Superoperators act on the
row-major flattening ``rho.reshape(-1)``, for which
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .controls import ConstantRaman, ControlSchedule

__all__ = [
    "G", "E", "F", "S",
    "HamiltonianSpec",
    "ChannelKind",
    "NoiseChannel",
    "TrajectoryResult",
    "TransferResult",
    "ground_state",
    "check_density_matrix",
    "build_hamiltonian",
    "lindblad_rhs",
    "liouvillian",
    "propagate_constant",
    "propagate_schedule",
    "transfer_population",
    "magnus_steps",
    "pwc_final_populations",
    "rk4_step_size",
]

G, E, F, S = 0, 1, 2, 3
LEVEL_NAMES = ("g", "e", "f", "s")

MAX_STEP = 0.01
# RK4 phase error per step scales as (h * lambda)^5; 0.02 keeps the global
# error near 1e-9 for the protocol durations used here.
STEP_PHASE = 0.02
MAX_RK4_STEPS = 2_000_000
# Magnus steps: base size, and the largest detuning change allowed across one step.
MAGNUS_STEP = 0.08
MAGNUS_MAX_JUMP = 0.25
_GAUSS = np.array([0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0])


@dataclass(frozen=True)
class HamiltonianSpec:
    """Always-on pump and Stokes couplings in units of ``Omega_0``."""

    omega_p: float = 1.0
    omega_s: float = 1.0

    def __post_init__(self):
        if not (self.omega_p > 0 and self.omega_s > 0):
            raise ValueError("coupling strengths must be positive")


class ChannelKind(str, Enum):
    SINK = "sink"
    DECAY_EG = "decay_eg"
    DECAY_FE = "decay_fe"
    DEPHASE = "dephase"


@dataclass(frozen=True)
class NoiseChannel:
    """A single collapse operator ``sqrt(rate) * L``.

    ``level`` is only used by dephasing channels (0, 1, 2 for g, e, f).
    """

    kind: ChannelKind
    rate: float
    level: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if not self.rate >= 0:
            raise ValueError(f"channel rate must be non-negative, got {self.rate}")
        if self.kind is ChannelKind.DEPHASE:
            if self.level not in (G, E, F):
                raise ValueError("dephasing needs a level in {0, 1, 2}")
        elif self.level is not None:
            raise ValueError(f"{self.kind.value} channel takes no level")

    @classmethod
    def sink(cls, rate: float) -> "NoiseChannel":
        return cls(ChannelKind.SINK, rate)

    @classmethod
    def decay_eg(cls, rate: float) -> "NoiseChannel":
        return cls(ChannelKind.DECAY_EG, rate)

    @classmethod
    def decay_fe(cls, rate: float) -> "NoiseChannel":
        return cls(ChannelKind.DECAY_FE, rate)

    @classmethod
    def dephase(cls, level: int | str, rate: float) -> "NoiseChannel":
        if isinstance(level, str):
            level = LEVEL_NAMES.index(level)
        return cls(ChannelKind.DEPHASE, rate, level)

    def operator(self, dim: int) -> np.ndarray:
        """The collapse operator including the ``sqrt(rate)`` prefactor."""
        if self.kind is ChannelKind.SINK and dim != 4:
            raise ValueError("the sink channel needs dim = 4")
        target, source = {
            ChannelKind.SINK: (S, E),
            ChannelKind.DECAY_EG: (G, E),
            ChannelKind.DECAY_FE: (E, F),
            ChannelKind.DEPHASE: (self.level, self.level),
        }[self.kind]
        L = np.zeros((dim, dim), dtype=complex)
        L[target, source] = math.sqrt(self.rate)
        return L

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "rate": self.rate}
        if self.level is not None:
            out["level"] = LEVEL_NAMES[self.level]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseChannel":
        level = data.get("level")
        if isinstance(level, str):
            level = LEVEL_NAMES.index(level)
        return cls(ChannelKind(data["kind"]), float(data["rate"]), level)


def ground_state(dim: int = 3) -> np.ndarray:
    """``|g><g|`` in dimension ``dim``."""
    if dim not in (3, 4):
        raise ValueError(f"dim must be 3 or 4, got {dim}")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[G, G] = 1.0
    return rho


def check_density_matrix(rho: np.ndarray, *, herm_tol=1e-12, trace_tol=1e-9, pos_tol=1e-9) -> None:
    """Raise ``ValueError`` unless ``rho`` is a valid 3- or 4-level state."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (3, 4):
        raise ValueError(f"density matrix must be 3x3 or 4x4, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real}, expected 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -pos_tol:
        raise ValueError("density matrix is not positive semidefinite")


def build_hamiltonian(delta_p: float, delta: float, spec: HamiltonianSpec | None = None,
                      dim: int = 3) -> np.ndarray:
    """Rotating-frame Hamiltonian for detunings ``(delta_p, delta)``.

    The sink row and column (``dim = 4``) are zero.
    """
    if dim not in (3, 4):
        raise ValueError(f"dim must be 3 or 4, got {dim}")
    spec = spec or HamiltonianSpec()
    H = np.zeros((dim, dim), dtype=complex)
    H[G, E] = H[E, G] = 0.5 * spec.omega_p
    H[E, F] = H[F, E] = 0.5 * spec.omega_s
    H[E, E] = delta_p
    H[F, F] = delta
    return H


def _check_dims(rho, H, channels):
    d = rho.shape[0]
    if rho.shape != (d, d) or H.shape != (d, d):
        raise ValueError(f"dimension mismatch: rho {rho.shape}, H {H.shape}")
    for ch in channels:
        if ch.kind is ChannelKind.SINK and d != 4:
            raise ValueError("the sink channel needs dim = 4")


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, channels: Sequence[NoiseChannel] = ()) -> np.ndarray:
    """``-i[H, rho] + sum_c (L rho L^+ - {L^+ L, rho}/2)``."""
    rho = np.asarray(rho, dtype=complex)
    H = np.asarray(H, dtype=complex)
    _check_dims(rho, H, channels)
    out = -1j * (H @ rho - rho @ H)
    for ch in channels:
        L = ch.operator(rho.shape[0])
        LdL = L.conj().T @ L
        out += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def liouvillian(H: np.ndarray, channels: Sequence[NoiseChannel] = ()) -> np.ndarray:
    """Superoperator matrix of :func:`lindblad_rhs` in the row-major basis."""
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for ch in channels:
        L = ch.operator(d)
        LdL = L.conj().T @ L
        sup += np.kron(L, L.conj()) - 0.5 * (np.kron(LdL, eye) + np.kron(eye, LdL.T))
    return sup


def propagate_constant(rho: np.ndarray, H: np.ndarray, channels: Sequence[NoiseChannel] = (),
                       dt: float = 0.0) -> np.ndarray:
    """Apply ``exp(dt * L)`` for a time-independent generator."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    rho = np.asarray(rho, dtype=complex)
    _check_dims(rho, np.asarray(H), channels)
    if dt == 0:
        return rho.copy()
    d = rho.shape[0]
    out = (expm(dt * liouvillian(H, channels)) @ rho.reshape(-1)).reshape(d, d)
    return 0.5 * (out + out.conj().T)


@dataclass
class TrajectoryResult:
    """Sampled density-matrix trajectory.

    ``populations`` has one column per level, ``coherences`` holds
    ``|rho_ge|, |rho_gf|, |rho_ef|`` and ``controls`` the detunings
    ``(delta_p, delta)`` at each sample time.
    """

    times: np.ndarray
    populations: np.ndarray
    coherences: np.ndarray
    controls: np.ndarray
    final_state: np.ndarray
    states: np.ndarray | None = None

    @property
    def max_excited(self) -> float:
        return float(self.populations[:, E].max())

    @property
    def final_target(self) -> float:
        return float(self.populations[-1, F])

    @property
    def max_target(self) -> float:
        return float(self.populations[:, F].max())


def _control_generators(dim, spec, channels):
    H0 = build_hamiltonian(0.0, 0.0, spec, dim)
    Pe = np.zeros((dim, dim), dtype=complex)
    Pe[E, E] = 1.0
    Pf = np.zeros((dim, dim), dtype=complex)
    Pf[F, F] = 1.0
    return liouvillian(H0, channels), liouvillian(Pe), liouvillian(Pf)


def rk4_step_size(schedule: ControlSchedule, T: float, spec: HamiltonianSpec | None = None,
                  channels: Sequence[NoiseChannel] = (), max_step: float = MAX_STEP) -> float:
    """Largest step for the fixed-step integrator.

    ``min(max_step, T/4000, 0.02/lam)`` where ``lam`` bounds the generator's
    frequency scale from the couplings, the peak detunings and the rates.
    """
    if not 0 < max_step <= MAX_STEP:
        raise ValueError(f"max_step must lie in (0, {MAX_STEP}]")
    spec = spec or HamiltonianSpec()
    dp, d = schedule.evaluate(np.linspace(0.0, T, 2001), T)
    lam = (spec.omega_p + spec.omega_s + np.max(np.abs(dp)) + np.max(np.abs(d))
           + sum(ch.rate for ch in channels))
    if not np.isfinite(lam):
        raise ValueError("schedule produces non-finite detunings")
    return min(max_step, T / 4000.0, STEP_PHASE / lam)


def _rk4_grid(schedule, T, spec, channels, n_intervals, max_step, max_steps=MAX_RK4_STEPS):
    h_max = rk4_step_size(schedule, T, spec, channels, max_step)
    if schedule.is_piecewise_constant:
        n_intervals = math.lcm(n_intervals, schedule.n_steps)
    per = max(1, math.ceil(T / h_max / n_intervals - 1e-9))
    n_steps = per * n_intervals
    if n_steps > max_steps:
        raise ValueError(f"required {n_steps} RK4 steps exceeds the limit of {max_steps}")
    return n_steps, per


def propagate_schedule(rho0: np.ndarray, schedule: ControlSchedule, T: float,
                       channels: Sequence[NoiseChannel] = (), n_samples: int = 401,
                       spec: HamiltonianSpec | None = None, method: str = "auto",
                       max_step: float = MAX_STEP, keep_states: bool = False) -> TrajectoryResult:
    """Propagate ``rho0`` under a time-dependent schedule over ``[0, T]``.

    ``method="auto"`` uses exact segment exponentials for piecewise-constant
    and constant schedules and fixed-step RK4 otherwise; ``"exact"`` and
    ``"rk4"`` force one path (``"exact"`` only for piecewise-constant).
    """
    if not T > 0:
        raise ValueError(f"total time must be positive, got {T}")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    rho0 = np.asarray(rho0, dtype=complex)
    check_density_matrix(rho0)
    dim = rho0.shape[0]
    _check_dims(rho0, rho0, channels)
    G0, Gp, Gd = _control_generators(dim, spec, channels)

    if isinstance(schedule, ConstantRaman) and method != "rk4":
        schedule = schedule.as_piecewise()
    if method == "auto":
        method = "exact" if schedule.is_piecewise_constant else "rk4"

    if method == "exact":
        if not schedule.is_piecewise_constant:
            raise ValueError("exact propagation needs a piecewise-constant schedule")
        seg = schedule.segment_values()
        n_seg = len(seg)
        sub = max(1, math.ceil((n_samples - 1) / n_seg))
        dt = T / (n_seg * sub)
        vecs = [rho0.reshape(-1)]
        v = vecs[0]
        for dp, d in seg:
            P = expm(dt * (G0 + dp * Gp + d * Gd))
            for _ in range(sub):
                v = P @ v
                vecs.append(v)
        states = np.array(vecs)
    elif method == "rk4":
        n_steps, per = _rk4_grid(schedule, T, spec, channels, n_samples - 1, max_step)
        dp_st, d_st = schedule.stage_controls(T, n_steps)
        states = _kernels.rk4_affine(G0, Gp, Gd, dp_st, d_st, rho0.reshape(-1), T / n_steps, per)
    else:
        raise ValueError(f"unknown method {method!r}")

    states = states.reshape(-1, dim, dim)
    states = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    times = np.linspace(0.0, T, len(states))
    pops = np.real(np.einsum("nii->ni", states))
    coh = np.abs(states[:, [G, G, E], [E, F, F]])
    dp, d = schedule.evaluate(times, T)
    return TrajectoryResult(
        times=times,
        populations=pops,
        coherences=coh,
        controls=np.stack([dp, d], axis=1),
        final_state=states[-1].copy(),
        states=states if keep_states else None,
    )


@dataclass(frozen=True)
class TransferResult:
    """Summary of a pure-state run from ``|g>``."""

    final_target: float
    max_excited: float
    max_target: float
    sink_population: float


def _effective_generators(spec, sink_rate):
    H0 = build_hamiltonian(0.0, 0.0, spec, 3)
    H0[E, E] -= 0.5j * sink_rate
    Pe = np.zeros((3, 3), dtype=complex)
    Pe[E, E] = 1.0
    Pf = np.zeros((3, 3), dtype=complex)
    Pf[F, F] = 1.0
    return -1j * H0, -1j * Pe, -1j * Pf


def magnus_steps(schedule: ControlSchedule, T: float, max_steps: int = MAX_RK4_STEPS) -> int:
    """Step count for :func:`transfer_population` with ``method="magnus"``.

    Starts from steps of ``MAGNUS_STEP`` and refines until neither detuning
    changes by more than ``MAGNUS_MAX_JUMP`` between consecutive step ends.
    """
    n = max(16, math.ceil(T / MAGNUS_STEP))
    for _ in range(8):
        dp, d = schedule.evaluate(np.linspace(0.0, T, n + 1), T)
        if not (np.all(np.isfinite(dp)) and np.all(np.isfinite(d))):
            raise ValueError("schedule produces non-finite detunings")
        jump = max(np.max(np.abs(np.diff(dp))), np.max(np.abs(np.diff(d))))
        if jump <= MAGNUS_MAX_JUMP:
            break
        n = math.ceil(n * min(jump / MAGNUS_MAX_JUMP, 16.0))
        if n > max_steps:
            raise ValueError(f"required {n} Magnus steps exceeds the limit of {max_steps}")
    return n


def transfer_population(schedule: ControlSchedule, T: float, sink_rate: float = 0.0,
                        spec: HamiltonianSpec | None = None, max_step: float = MAX_STEP,
                        max_steps: int = MAX_RK4_STEPS, method: str = "rk4") -> TransferResult:
    """Fast pure-state evaluation of a schedule starting in ``|g>``.

    With only the sink channel present, the ``{g, e, f}`` block of the density
    matrix stays rank one and evolves under ``H - i (sink_rate/2) |e><e|``;
    the norm lost from that block is the sink population. Peaks are taken
    over every integration step.

    ``method="rk4"`` uses the same fixed-step grid as
    :func:`propagate_schedule`. ``method="magnus"`` uses a fourth-order
    commutator-free Magnus scheme whose step does not shrink with the size of
    the detunings, only with how fast they change; it is much cheaper for
    large detunings and is meant for inner optimization loops.
    """
    if not T > 0:
        raise ValueError(f"total time must be positive, got {T}")
    if sink_rate < 0:
        raise ValueError("sink rate must be non-negative")
    G0, Gp, Gd = _effective_generators(spec, sink_rate)
    psi0 = np.array([1.0, 0.0, 0.0], dtype=complex)
    if isinstance(schedule, ConstantRaman):
        schedule = schedule.as_piecewise()
    if method == "magnus":
        # On a constant segment the two Magnus factors multiply to the exact
        # exponential, so piecewise-constant schedules need one step per segment.
        n_steps = schedule.n_steps if schedule.is_piecewise_constant else magnus_steps(schedule, T, max_steps)
        h = T / n_steps
        ts = (np.arange(n_steps)[:, None] + _GAUSS[None, :]) * h
        dp_n, d_n = schedule.evaluate(np.clip(ts, 0.0, T), T)
        psi, peak = _kernels.magnus4_state_extrema(G0, Gp, Gd, dp_n, d_n, psi0, h)
    elif method == "rk4":
        channels = [NoiseChannel.sink(sink_rate)] if sink_rate else []
        n_int = schedule.n_steps if schedule.is_piecewise_constant else 1
        n_steps, _ = _rk4_grid(schedule, T, spec, channels, n_int, max_step, max_steps)
        dp_st, d_st = schedule.stage_controls(T, n_steps)
        psi, peak = _kernels.rk4_state_extrema(G0, Gp, Gd, dp_st, d_st, psi0, T / n_steps)
    else:
        raise ValueError(f"unknown method {method!r}")
    pops = np.abs(psi) ** 2
    return TransferResult(float(pops[F]), float(peak[E]), float(peak[F]), float(1.0 - pops.sum()))


def pwc_final_populations(values: np.ndarray, T: float, sink_rate: float = 0.0,
                          spec: HamiltonianSpec | None = None) -> np.ndarray:
    """Final populations of a batch of piecewise-constant schedules.

    Args:
        values: detunings of shape ``(batch, n_steps, 2)`` ordered ``(delta_p, delta)``.

    Returns:
        Array ``(batch, 4)`` of ``rho_gg, rho_ee, rho_ff, rho_ss`` at ``T``,
        from exact segment exponentials of the sink-augmented no-jump
        generator.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[None]
    batch, n_steps, _ = values.shape
    dt = T / n_steps
    G0, Gp, Gd = _effective_generators(spec, sink_rate)
    gens = (G0 + values[..., 0, None, None] * Gp + values[..., 1, None, None] * Gd) * dt
    props = expm(gens.reshape(-1, 3, 3)).reshape(batch, n_steps, 3, 3)
    psi = np.zeros((batch, 3), dtype=complex)
    psi[:, G] = 1.0
    for i in range(n_steps):
        psi = np.einsum("bij,bj->bi", props[:, i], psi)
    pops = np.abs(psi) ** 2
    return np.column_stack([pops, 1.0 - pops.sum(axis=1)])
