"""Detuning-controlled population transfer in driven three-level systems."""

from .controls import (Ansatz1, ConstantRaman, ControlSchedule, ParityPolys, PiecewiseConstant,
                       PolyPair, eval_schedule, pwc_from_actions, schedule_from_dict,
                       symmetry_report)
from .lindblad import (HamiltonianSpec, NoiseChannel, TrajectoryResult, build_hamiltonian,
                       check_density_matrix,
                       ground_state, lindblad_rhs, liouvillian, propagate_constant,
                       propagate_schedule, transfer_population)
from .protocols import builtin_protocols, get_protocol, resolve_protocol

__version__ = "0.1.0"
