"""Two-qubit controlled-phase gates on Rydberg-blockaded atom pairs.

The geometric protocol sweeps the drive phase in two segments separated
by a pi flip, cancelling dynamical phase and keeping only the geometric
part.  Two optimized cyclic drives (Rabi-modulated and phase-modulated)
serve as baselines.
"""

from .evolve import (
    CollapseSet,
    ConvergenceError,
    PropagatorOptions,
    check_convergence,
    lindblad_evolve,
    make_collapse_set,
    propagate_state,
    propagate_unitary,
    time_ordered_exponential,
)
from .experiments import (
    ProtocolSettings,
    QftConvention,
    QftTimingModel,
    SweepReport,
    blockade_sweep,
    decoherence_scan,
    gate_dynamics,
    noise_monte_carlo,
    qft_timing,
    run_gate,
    run_schedule,
    systematic_sweep,
)
from .metrics import (
    GateResult,
    PhaseDecomposition,
    acquired_phases,
    cz_target,
    gate_fidelity,
    phase_decomposition,
    relative_phase,
    state_fidelity,
)
from .model import Frame, ModelMode, PhysicalParams, SubspaceId, hamiltonian, mhz
from .pulses import (
    NcgcParams,
    PerturbationSpec,
    PmConstants,
    Protocol,
    PulseSchedule,
    RmConstants,
    make_schedule,
    ncgc_schedule,
    perturb,
    pm_schedule,
    rm_schedule,
)

__version__ = "0.1.0"
