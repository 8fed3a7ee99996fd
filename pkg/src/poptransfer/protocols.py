"""Named built-in protocols."""

from __future__ import annotations

from .controls import Ansatz1, ControlSchedule, ParityPolys

__all__ = ["BUILTIN_PROTOCOLS", "builtin_protocols", "get_protocol", "resolve_protocol"]

# Protocol 1 at Omega_0 T = 40 uses c2 = -0.038: with +0.038 the transfer
# collapses to ~0.63, while -0.038 reproduces 0.9996 / max rho_ee 0.0146.
BUILTIN_PROTOCOLS: dict[str, tuple[ControlSchedule, float]] = {
    "protocol1_T20": (Ansatz1(2.34, -0.038, 21.52, 0.58), 20.0),
    "protocol1_T40": (Ansatz1(5.11, -0.038, 21.51, 0.29), 40.0),
    "protocol2_T40": (ParityPolys(dp_odd=[26.0, -87.0, 312.0], d_even=[0.19, -0.37, -4.85]), 40.0),
}


def builtin_protocols() -> dict[str, ControlSchedule]:
    """Registry of named schedules."""
    return {name: sched for name, (sched, _) in BUILTIN_PROTOCOLS.items()}


def get_protocol(name: str) -> ControlSchedule:
    try:
        return BUILTIN_PROTOCOLS[name][0]
    except KeyError:
        raise KeyError(f"unknown protocol {name!r}; valid names: {', '.join(BUILTIN_PROTOCOLS)}") from None


def resolve_protocol(name: str, T: float | None = None) -> tuple[ControlSchedule, float]:
    """Look up a protocol by full name or by family (``protocol1``, ``protocol2``).

    A family name picks the variant optimized for ``T`` when one exists, else
    the ``T = 40`` variant. Returns the schedule and its design duration.
    """
    if name in BUILTIN_PROTOCOLS:
        return BUILTIN_PROTOCOLS[name]
    candidates = {n: v for n, v in BUILTIN_PROTOCOLS.items() if n.split("_")[0] == name}
    if not candidates:
        get_protocol(name)
    for n, (sched, design_T) in candidates.items():
        if T is not None and design_T == T:
            return sched, design_T
    return candidates.get(f"{name}_T40", next(iter(candidates.values())))
