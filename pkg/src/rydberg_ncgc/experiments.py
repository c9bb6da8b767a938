"""Gate runs, parameter sweeps and the QFT timing model.

Every sweep returns a :class:`SweepReport` whose rows follow the grid
order, independent of how work items were scheduled across threads.
"""

from __future__ import annotations

import enum
import hashlib
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .evolve import (
    CollapseSet,
    PropagatorOptions,
    lindblad_evolve,
    make_collapse_set,
    no_collapse,
    propagate_state,
    propagate_unitary,
)
from .metrics import GateResult, cz_target, fit_cz_class, computational_block, relative_phase, state_fidelity
from .model import COMPUTATIONAL, LOWER, NS, UPPER, ModelMode, PhysicalParams, basis_state, mhz
from .pulses import (
    NcgcParams,
    PerturbationSpec,
    PmConstants,
    Protocol,
    PulseSchedule,
    RmConstants,
    make_schedule,
    perturb,
)


@dataclass(frozen=True)
class ProtocolSettings:
    """Shape constants of all three protocols, bundled for sweeps."""

    ncgc: NcgcParams = NcgcParams()
    rm: RmConstants = RmConstants()
    pm: PmConstants = PmConstants()

    def schedule(self, protocol, params: PhysicalParams) -> PulseSchedule:
        return make_schedule(protocol, params, self.ncgc, self.rm, self.pm)


DEFAULT_SETTINGS = ProtocolSettings()


# -- single gates -------------------------------------------------------


@lru_cache(maxsize=128)
def _nominal_target(protocol: Protocol, params: PhysicalParams, settings: ProtocolSettings, opts: PropagatorOptions):
    u = propagate_unitary(params, settings.schedule(protocol, params), ModelMode.REDUCED, opts)
    return fit_cz_class(computational_block(u))


def gate_target(
    protocol,
    params: PhysicalParams,
    settings: ProtocolSettings = DEFAULT_SETTINGS,
    opts: PropagatorOptions = PropagatorOptions(),
) -> np.ndarray:
    """Reference operator for fidelities.

    The geometric protocol targets ``cz_target(a pi)``.  The optimized
    protocols only realize controlled-Z up to single-qubit phases, so
    their target is the controlled-Z class operator fitted to the
    unperturbed blockade-limit run at the same duration.
    """
    protocol = Protocol.parse(protocol)
    if protocol is Protocol.NCGC:
        return cz_target(settings.ncgc.rotation)
    nominal = params.replace(delta=0.0, v_blockade=PhysicalParams().v_blockade)
    return _nominal_target(protocol, nominal, settings, opts)


def adiabaticity_factor(params: PhysicalParams, p: NcgcParams) -> float:
    """``K = Omega T / (dphi / 2)``; a diagnostic of how adiabatic a run is."""
    return params.omega * params.duration * NS / (0.5 * p.rotation)


def run_schedule(
    schedule: PulseSchedule,
    params: PhysicalParams,
    target: np.ndarray,
    mode: ModelMode = ModelMode.REDUCED,
    opts: PropagatorOptions = PropagatorOptions(),
    meta: dict | None = None,
) -> GateResult:
    """Propagate an arbitrary schedule and score it against ``target``."""
    u = propagate_unitary(params, schedule, mode, opts)
    return GateResult.from_propagator(u, target, meta)


def run_gate(
    protocol,
    params: PhysicalParams = PhysicalParams(),
    perturbation: PerturbationSpec | None = None,
    mode: ModelMode = ModelMode.REDUCED,
    opts: PropagatorOptions = PropagatorOptions(),
    settings: ProtocolSettings = DEFAULT_SETTINGS,
    trial: int = 0,
) -> GateResult:
    """Build, perturb, propagate and score one gate."""
    protocol = Protocol.parse(protocol)
    mode = ModelMode.parse(mode)
    schedule = settings.schedule(protocol, params)
    if perturbation is not None:
        schedule = perturb(schedule, perturbation, trial)
    meta = {
        "protocol": protocol.value,
        "mode": mode.value,
        "duration_ns": params.duration,
        "v_blockade_2pi_mhz": params.v_blockade / mhz(1.0),
        "step_ns": opts.step,
        "order": opts.order,
        **{k: v for k, v in schedule.meta.items()},
    }
    if protocol is Protocol.NCGC:
        meta["k_adiabatic"] = adiabaticity_factor(params, settings.ncgc)
    return run_schedule(schedule, params, gate_target(protocol, params, settings, opts), mode, opts, meta)


@dataclass(frozen=True)
class GateDynamics:
    """Population and phase history of the three driven computational inputs.

    ``lower[k]`` and ``upper[k]`` are the populations of input ``k`` and of
    its Rydberg partner; ``phase[k]`` is ``Arg <psi(t)|psi(0)>``.
    """

    times: np.ndarray
    inputs: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    phase: np.ndarray


def gate_dynamics(
    params: PhysicalParams = PhysicalParams(),
    settings: ProtocolSettings = DEFAULT_SETTINGS,
    protocol=Protocol.NCGC,
    mode: ModelMode = ModelMode.REDUCED,
    opts: PropagatorOptions = PropagatorOptions(),
    sample_step: float = 1.0,
) -> GateDynamics:
    schedule = settings.schedule(protocol, params)
    times = schedule.grid(sample_step)
    labels = ("01", "10", "11")
    lower, upper, phase = [], [], []
    for lab, lo, up in zip(labels, LOWER, UPPER):
        psi0 = basis_state(lab, mode)
        traj = propagate_state(params, schedule, mode, psi0, opts, times)
        lower.append(np.abs(traj.states[:, lo]) ** 2)
        upper.append(np.abs(traj.states[:, up]) ** 2)
        ph = []
        for s in traj.states:
            try:
                ph.append(relative_phase(s, psi0))
            except ValueError:
                ph.append(np.nan)
        phase.append(ph)
    return GateDynamics(times, labels, np.array(lower), np.array(upper), np.array(phase))


# -- reports and output -------------------------------------------------


@dataclass(frozen=True)
class Series:
    mean: np.ndarray
    std: np.ndarray
    n_trials: int


@dataclass(frozen=True)
class SweepReport:
    """Fidelity curves over a grid.

    ``points`` are tuples over ``axis`` in strictly increasing
    lexicographic order; ``seeds[i]`` lists the ``(seed, trial)`` keys used
    at point ``i``.
    """

    experiment: str
    axis: tuple[str, ...]
    points: tuple[tuple[float, ...], ...]
    series: dict[str, Series]
    seeds: tuple[tuple[tuple[int, int], ...], ...]
    metadata: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.points:
            raise ValueError("empty grid")
        if any(not a < b for a, b in zip(self.points[:-1], self.points[1:])):
            raise ValueError("grid must be strictly increasing")
        for s in self.series.values():
            if s.n_trials < 1 or len(s.mean) != len(self.points):
                raise ValueError("series does not match the grid")
        if len(self.seeds) != len(self.points):
            raise ValueError("every point needs its seed list")

    def values(self, name: str) -> np.ndarray:
        return self.series[name].mean

    def grid(self, i: int = 0) -> np.ndarray:
        return np.array([p[i] for p in self.points])

    def header(self) -> list[str]:
        cols = list(self.axis)
        for name in self.series:
            cols += [f"{name}_mean", f"{name}_std", f"{name}_n"]
        return cols

    def rows(self) -> list[list[float]]:
        out = []
        for i, p in enumerate(self.points):
            row = list(p)
            for s in self.series.values():
                row += [s.mean[i], s.std[i], s.n_trials]
            out.append(row)
        return out

    def to_csv(self) -> str:
        return format_csv(self.header(), self.rows())

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "axis": list(self.axis),
            "points": [list(p) for p in self.points],
            "series": {
                k: {"mean": s.mean.tolist(), "std": s.std.tolist(), "n_trials": s.n_trials}
                for k, s in self.series.items()
            },
            "seeds": [[list(k) for k in s] for s in self.seeds],
            "metadata": self.metadata,
            "summary": self.summary,
        }


def format_number(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, Fraction):
        return format_number(float(x))
    return "%.17g" % float(x)


def format_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV with 17 significant digits and ``\\n`` line endings."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else format_number(v) for v in row) + "\n")
    return buf.getvalue()


def content_hash(data: bytes) -> str:
    """Git blob hash of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_outputs(path, csv_text: str, sidecar: dict) -> tuple[Path, Path]:
    """Write ``path`` and ``path.json``; the sidecar records the CSV's hash."""
    path = Path(path)
    data = csv_text.encode()
    path.write_bytes(data)
    side = dict(sidecar)
    side["content_hash"] = content_hash(data)
    json_path = path.with_name(path.name + ".json")
    json_path.write_text(json.dumps(side, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path, json_path


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, enum.Enum):
        return x.value
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _opts_meta(opts: PropagatorOptions, mode: ModelMode) -> dict:
    return {"step_ns": opts.step, "order": opts.order, "tolerance": opts.tolerance, "mode": mode.value}


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- sweeps -------------------------------------------------------------


def systematic_sweep(
    protocols: Sequence,
    axis: str,
    grid: Sequence[float],
    params: PhysicalParams = PhysicalParams(),
    mode: ModelMode = ModelMode.REDUCED,
    opts: PropagatorOptions = PropagatorOptions(),
    settings: ProtocolSettings = DEFAULT_SETTINGS,
    threads: int = 1,
) -> SweepReport:
    """Fidelity against a static Rabi scale error (``kappa1``) or detuning offset (``kappa2``)."""
    if axis not in ("kappa1", "kappa2"):
        raise ValueError("axis must be kappa1 or kappa2")
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty grid")
    protocols = [Protocol.parse(p) for p in protocols]
    mode = ModelMode.parse(mode)
    work = list(itertools.product(protocols, grid))

    def one(item):
        proto, k = item
        spec = PerturbationSpec(**{axis: k})
        return run_gate(proto, params, spec, mode, opts, settings).fidelity

    fids = np.array(_map(one, work, threads)).reshape(len(protocols), len(grid))
    series = {p.value: Series(fids[i], np.zeros(len(grid)), 1) for i, p in enumerate(protocols)}
    return SweepReport(
        "sweep-systematic",
        (axis,),
        tuple((g,) for g in grid),
        series,
        tuple(() for _ in grid),
        {**_opts_meta(opts, mode), "protocols": [p.value for p in protocols]},
    )


def noise_monte_carlo(
    protocol,
    rabi_amps: Sequence[float] = (0.0, 0.05, 0.1),
    detuning_amps: Sequence[float] = (0.0, 0.05, 0.1),
    trials: int = 50,
    seed: int = 0,
    params: PhysicalParams = PhysicalParams(),
    mode: ModelMode = ModelMode.REDUCED,
    opts: PropagatorOptions = PropagatorOptions(),
    settings: ProtocolSettings = DEFAULT_SETTINGS,
    noise_segment: float = 1.0,
    symmetric: bool = False,
    threads: int = 1,
) -> SweepReport:
    """Mean fidelity under time-dependent amplitude and detuning noise.

    Trial ``j`` at every grid point uses the stream keyed by ``(seed, j)``.
    Points without noise are deterministic and run once.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    protocol = Protocol.parse(protocol)
    mode = ModelMode.parse(mode)
    points = [(float(a), float(b)) for a in rabi_amps for b in detuning_amps]
    if not points:
        raise ValueError("empty grid")
    specs = [
        PerturbationSpec(noise_rabi=a, noise_detuning=b, noise_segment=noise_segment, seed=seed, symmetric=symmetric)
        for a, b in points
    ]
    counts = [trials if s.has_noise else 1 for s in specs]
    work = [(i, j) for i, n in enumerate(counts) for j in range(n)]

    def one(item):
        i, j = item
        return run_gate(protocol, params, specs[i], mode, opts, settings, trial=j).fidelity

    flat = _map(one, work, threads)
    mean, std, seeds = [], [], []
    pos = 0
    for n in counts:
        chunk = np.array(flat[pos : pos + n])
        pos += n
        mean.append(chunk.mean())
        std.append(chunk.std())
        seeds.append(tuple((seed, j) for j in range(n)))
    return SweepReport(
        "sweep-noise",
        ("noise_rabi", "noise_detuning"),
        tuple(points),
        {protocol.value: Series(np.array(mean), np.array(std), trials)},
        tuple(seeds),
        {
            **_opts_meta(opts, mode),
            "trials": trials,
            "seed": seed,
            "noise_segment_ns": noise_segment,
            "symmetric": symmetric,
            "deterministic_points_run_once": True,
        },
    )


def blockade_sweep(
    protocols: Sequence = (Protocol.NCGC, Protocol.PM),
    v_grid: Sequence[float] = tuple(mhz(v) for v in (200, 300, 400, 600, 1000)),
    durations: Sequence[float] = (500.0, 250.0),
    params: PhysicalParams = PhysicalParams(),
    opts: PropagatorOptions = PropagatorOptions(),
    settings: ProtocolSettings = DEFAULT_SETTINGS,
    threads: int = 1,
) -> SweepReport:
    """Finite-blockade fidelity, always with the doubly excited level included.

    Shorter gates keep the geometric protocol's Rabi frequency (only its
    phase sweep speeds up) while the phase-modulated drive keeps its pulse
    area, so its Rabi frequency grows as ``1 / T``.
    """
    protocols = [Protocol.parse(p) for p in protocols]
    if any(p is Protocol.RM for p in protocols):
        raise ValueError("blockade sweep compares the geometric and phase-modulated drives only")
    v_grid = [float(v) for v in v_grid]
    if not v_grid:
        raise ValueError("empty grid")
    combos = list(itertools.product(protocols, durations))
    work = list(itertools.product(combos, v_grid))

    def one(item):
        (proto, T), v = item
        p = params.replace(duration=float(T), v_blockade=v)
        return run_gate(proto, p, None, ModelMode.FULL, opts, settings).fidelity

    fids = np.array(_map(one, work, threads)).reshape(len(combos), len(v_grid))
    series = {f"{p.value}_T{T:g}": Series(fids[i], np.zeros(len(v_grid)), 1) for i, (p, T) in enumerate(combos)}
    return SweepReport(
        "sweep-blockade",
        ("v_blockade_2pi_mhz",),
        tuple((v / mhz(1.0),) for v in v_grid),
        series,
        tuple(() for _ in v_grid),
        {**_opts_meta(opts, ModelMode.FULL), "durations_ns": list(durations)},
    )


DECOHERENCE_INPUTS = ("00", "01", "10", "11", "uniform")


def _input_state(label: str) -> np.ndarray:
    if label == "uniform":
        return sum(basis_state(b, ModelMode.OPEN) for b in ("00", "01", "10", "11")) / 2.0
    return basis_state(label, ModelMode.OPEN)


def find_crossing(t: np.ndarray, f: np.ndarray, level: float) -> float | None:
    """First time ``f`` drops below ``level``, linearly interpolated."""
    for i in range(len(t) - 1):
        if f[i] >= level > f[i + 1]:
            return float(t[i] + (f[i] - level) * (t[i + 1] - t[i]) / (f[i] - f[i + 1]))
    return None


def decoherence_scan(
    durations: Sequence[float] | None = None,
    rates_khz: tuple[float, float, float] = (1.0, 4.0, 30.0),
    params: PhysicalParams = PhysicalParams(),
    opts: PropagatorOptions = PropagatorOptions(),
    settings: ProtocolSettings = DEFAULT_SETTINGS,
    convention: str = "doubled",
    thresholds: Sequence[float] = (0.99, 0.999),
    threads: int = 1,
) -> SweepReport:
    """Geometric-gate state fidelity against gate time under decay and dephasing.

    Inputs are the four computational states and their uniform
    superposition; ``rho_ideal`` is the ideal controlled-Z output.  The
    series ``uniform`` (the superposition input) drives the headline
    threshold crossings; ``average`` is the mean over all five inputs.
    """
    if durations is None:
        durations = np.geomspace(40.0, 1000.0, 20)
    durations = [float(t) for t in durations]
    collapse: CollapseSet = no_collapse() if not any(rates_khz) else make_collapse_set(*rates_khz)
    states = [_input_state(lab) for lab in DECOHERENCE_INPUTS]
    rho0 = np.array([np.outer(s, s.conj()) for s in states])
    ideal = np.eye(ModelMode.OPEN.dim, dtype=complex)
    cz = cz_target(settings.ncgc.rotation)
    idx = list(COMPUTATIONAL)
    ideal[np.ix_(idx, idx)] = cz
    targets = [ideal @ s for s in states]

    def one(T):
        p = params.replace(duration=T)
        schedule = settings.schedule(Protocol.NCGC, p)
        out = lindblad_evolve(p, schedule, collapse, rho0, opts, convention)
        return [state_fidelity(r, np.outer(t, t.conj())) for r, t in zip(out, targets)]

    fids = np.array(_map(one, durations, threads)).T
    series = {f"in_{lab}" if lab != "uniform" else "uniform": Series(f, np.zeros(len(f)), 1) for lab, f in zip(DECOHERENCE_INPUTS, fids)}
    series["average"] = Series(fids.mean(axis=0), fids.std(axis=0), 1)
    t = np.array(durations)
    summary = {
        name: {str(level): find_crossing(t, series[name].mean, level) for level in thresholds}
        for name in ("uniform", "average")
    }
    return SweepReport(
        "sweep-decoherence",
        ("duration_ns",),
        tuple((d,) for d in durations),
        series,
        tuple(() for _ in durations),
        {
            **_opts_meta(opts, ModelMode.OPEN),
            "rates_khz": list(rates_khz),
            "gammas_khz": list(collapse.gammas_khz),
            "convention": convention,
            "v_blockade_2pi_mhz": params.v_blockade / mhz(1.0),
        },
        {"crossings_ns": summary},
    )


# -- QFT timing ---------------------------------------------------------


class QftConvention(enum.Enum):
    PROPORTIONAL_TO_ANGLE = "proportional"
    PAPER_TEXT = "paper_text"

    @classmethod
    def parse(cls, value) -> "QftConvention":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        aliases = {"proportionaltoangle": "proportional", "papertext": "paper_text"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class QftTimingModel:
    """Wall-time accounting for an ``N``-qubit quantum Fourier transform.

    The controlled-phase gate of angle ``2 pi / 2^L`` appears ``N - L``
    times.  A cyclic scheme spends three full-length gates on each; the
    geometric scheme spends one gate of length ``T_L``.
    """

    n_qubits: int
    t_gate_ns: Fraction = Fraction(250)
    convention: QftConvention = QftConvention.PROPORTIONAL_TO_ANGLE
    k_adiabatic: float | None = None

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError("need at least two qubits")
        object.__setattr__(self, "t_gate_ns", Fraction(self.t_gate_ns))
        object.__setattr__(self, "convention", QftConvention.parse(self.convention))
        if self.t_gate_ns <= 0:
            raise ValueError("gate time must be positive")

    def gate_time(self, level: int) -> Fraction:
        """Duration of the gate with angle ``2 pi / 2^level``."""
        if self.convention is QftConvention.PROPORTIONAL_TO_ANGLE:
            return self.t_gate_ns * Fraction(2, 2**level)
        return self.t_gate_ns / 2**level


@dataclass(frozen=True)
class QftTiming:
    model: QftTimingModel
    cyclic_total: Fraction
    ncgc_total: Fraction
    breakdown: tuple[tuple[int, float, int, Fraction], ...]

    def to_json(self) -> dict:
        return {
            "n_qubits": self.model.n_qubits,
            "convention": self.model.convention.value,
            "t_gate_ns": float(self.model.t_gate_ns),
            "k_adiabatic": self.model.k_adiabatic,
            "cyclic_total_ns": float(self.cyclic_total),
            "ncgc_total_ns": float(self.ncgc_total),
            "cyclic_total_exact": str(self.cyclic_total),
            "ncgc_total_exact": str(self.ncgc_total),
            "gates": [
                {"level": L, "angle_rad": a, "count": n, "duration_ns": float(t), "duration_exact": str(t)}
                for L, a, n, t in self.breakdown
            ],
        }


def qft_timing(model: QftTimingModel) -> QftTiming:
    """Total gate time of the cyclic and geometric schedules, in exact ns."""
    n, tn = model.n_qubits, model.t_gate_ns
    pairs = n * (n - 1) // 2
    cyclic = n * tn + 3 * tn * pairs
    breakdown = tuple((L, 2 * math.pi / 2**L, n - L, model.gate_time(L)) for L in range(1, n))
    ncgc = n * tn + sum(count * t for _, _, count, t in breakdown)
    return QftTiming(model, cyclic, ncgc, breakdown)


def qft_report(
    n_values: Sequence[int] = range(2, 13), t_gate_ns=Fraction(250), k_adiabatic: float | None = None
) -> SweepReport:
    """Cyclic and geometric totals for a range of register sizes, both conventions."""
    n_values = [int(n) for n in n_values]
    cols: dict[str, list[float]] = {"cyclic": [], "ncgc_proportional": [], "ncgc_paper_text": []}
    for n in n_values:
        for conv in QftConvention:
            res = qft_timing(QftTimingModel(n, t_gate_ns, conv, k_adiabatic))
            cols[f"ncgc_{conv.value}"].append(float(res.ncgc_total))
        cols["cyclic"].append(float(res.cyclic_total))
    zeros = np.zeros(len(n_values))
    return SweepReport(
        "qft-timing",
        ("n_qubits",),
        tuple((n,) for n in n_values),
        {k: Series(np.array(v), zeros, 1) for k, v in cols.items()},
        tuple(() for _ in n_values),
        {"t_gate_ns": float(Fraction(t_gate_ns)), "k_adiabatic": k_adiabatic},
    )
