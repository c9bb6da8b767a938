"""Time-ordered propagation and master-equation evolution.

Unitary evolution uses a fixed-step fourth-order Magnus integrator with
two Gauss-Legendre nodes per step.  Each step exponent is Hermitian, so
step propagators come from a batched ``eigh`` and stay unitary to
rounding.  The grid is split at every schedule breakpoint so the pi flip
of the geometric protocol falls exactly on a step boundary.

The master equation is integrated with Strang splitting: the
time-independent dissipator is exponentiated once per step width and
sandwiches the unitary step.  Both factors are completely positive and
trace preserving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .model import (
    LOWER,
    NS,
    SINK,
    UPPER,
    ModelMode,
    PhysicalParams,
    assemble,
    counterdiabatic_operator,
)
from .pulses import PulseSchedule

_GAUSS = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_MAGNUS_C = math.sqrt(3) / 12


class ConvergenceError(RuntimeError):
    """Step size too coarse for the requested tolerance."""


@dataclass(frozen=True)
class PropagatorOptions:
    """Integrator settings.

    Attributes
    ----------
    step : float
        Nominal step in ns; each interval between breakpoints is divided
        into ``ceil(length / step)`` equal steps.
    order : int
        2 (exponential midpoint) or 4 (two-node Magnus).
    tolerance : float
        Bound for :func:`check_convergence`.
    include_cd : bool
        Add the per-block counter-diabatic term built from the schedule's
        phase rate.  Refused for schedules whose detuning already carries it.
    """

    step: float = 0.1
    order: int = 4
    tolerance: float = 1e-7
    include_cd: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.order not in (2, 4):
            raise ValueError("order must be 2 or 4")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def halved(self) -> "PropagatorOptions":
        return PropagatorOptions(self.step / 2, self.order, self.tolerance, self.include_cd)


# -- grids and step exponents -------------------------------------------


def step_grid(t0: float, t1: float, step: float, breakpoints: Sequence[float] = ()):
    """Step starts and widths covering ``[t0, t1]``, split at breakpoints.

    Returns ``(starts, widths, edges)`` where ``edges`` are the interval
    boundaries actually used.
    """
    inner = sorted({float(b) for b in breakpoints if t0 < b < t1})
    edges = [t0, *inner, t1]
    starts, widths = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((b - a) / step - 1e-9)))
        w = (b - a) / n
        starts.append(a + w * np.arange(n))
        widths.append(np.full(n, w))
    if not starts:
        return np.zeros(0), np.zeros(0), edges
    return np.concatenate(starts), np.concatenate(widths), edges


def step_exponents(h_fn: Callable, starts: np.ndarray, widths: np.ndarray, order: int = 4) -> np.ndarray:
    """Hermitian ``K_k`` with step propagator ``exp(-i K_k)``.

    ``h_fn`` maps an array of times (ns) to stacked Hamiltonians (rad/us).
    """
    dt = (widths * NS)[:, None, None]
    if order == 2:
        return dt * h_fn(starts + 0.5 * widths)
    h1 = h_fn(starts + _GAUSS[0] * widths)
    h2 = h_fn(starts + _GAUSS[1] * widths)
    comm = h1 @ h2 - h2 @ h1
    return 0.5 * dt * (h1 + h2) + 1j * _MAGNUS_C * dt**2 * comm


def unitary_steps(k: np.ndarray) -> np.ndarray:
    """Batched ``exp(-i K)`` for Hermitian ``K``."""
    k = 0.5 * (k + np.conj(np.swapaxes(k, -1, -2)))
    w, v = np.linalg.eigh(k)
    return (v * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _chain(steps: np.ndarray, dim: int) -> np.ndarray:
    u = np.eye(dim, dtype=complex)
    for s in steps:
        u = s @ u
    return u


def time_ordered_exponential(
    h_fn: Callable, t0: float, t1: float, dim: int, step: float = 0.1, breakpoints=(), order: int = 4
) -> np.ndarray:
    """Propagator of an arbitrary vectorized ``h_fn`` from ``t0`` to ``t1`` (ns)."""
    starts, widths, _ = step_grid(t0, t1, step, breakpoints)
    if len(starts) == 0:
        return np.eye(dim, dtype=complex)
    return _chain(unitary_steps(step_exponents(h_fn, starts, widths, order)), dim)


# -- schedule Hamiltonians ----------------------------------------------


def hamiltonian_fn(params: PhysicalParams, schedule: PulseSchedule, mode: ModelMode, opts: PropagatorOptions):
    """Vectorized ``H(t)`` for ``schedule`` in ``mode``'s basis."""
    mode = ModelMode.parse(mode)
    if opts.include_cd:
        if schedule.meta.get("sta_enabled"):
            raise ValueError("schedule already carries the counter-diabatic detuning")
        if schedule.phase_rate_fn is None:
            raise ValueError("schedule has no phase rate for a counter-diabatic term")

    def h(t):
        omega, delta, phi = schedule.controls(t)
        out = assemble(omega, delta, phi, params.v_blockade, mode, schedule.frame)
        if opts.include_cd:
            out = out + counterdiabatic_operator(schedule.phase_rate_fn(t), mode)
        return out

    return h


def _schedule_steps(params, schedule, mode, opts, extra=()):
    starts, widths, edges = step_grid(0.0, schedule.duration, opts.step, (*schedule.breakpoints, *extra))
    if len(starts) == 0:
        return np.zeros((0, mode.dim, mode.dim), dtype=complex), starts, widths
    h = hamiltonian_fn(params, schedule, mode, opts)
    return unitary_steps(step_exponents(h, starts, widths, opts.order)), starts, widths


def propagate_unitary(
    params: PhysicalParams,
    schedule: PulseSchedule,
    mode: ModelMode = ModelMode.REDUCED,
    opts: PropagatorOptions = PropagatorOptions(),
) -> np.ndarray:
    """Time-ordered propagator of ``schedule`` over ``[0, T]``."""
    mode = ModelMode.parse(mode)
    if mode is ModelMode.OPEN:
        raise ValueError("use lindblad_evolve for the open model")
    steps, _, _ = _schedule_steps(params, schedule, mode, opts)
    u = _chain(steps, mode.dim)
    err = np.max(np.abs(u.conj().T @ u - np.eye(mode.dim)))
    if not np.isfinite(err) or err > 10 * max(opts.tolerance, 1e-9):
        raise ConvergenceError(f"propagator lost unitarity ({err:.2e})")
    return u


def check_convergence(
    params: PhysicalParams,
    schedule: PulseSchedule,
    mode: ModelMode = ModelMode.REDUCED,
    opts: PropagatorOptions = PropagatorOptions(),
) -> float:
    """Richardson estimate of the global error of ``propagate_unitary``.

    Raises :class:`ConvergenceError` when it exceeds ``opts.tolerance``.
    """
    u1 = propagate_unitary(params, schedule, mode, opts)
    u2 = propagate_unitary(params, schedule, mode, opts.halved())
    est = float(np.max(np.abs(u1 - u2))) / (2**opts.order - 1)
    if est > opts.tolerance:
        raise ConvergenceError(f"estimated error {est:.2e} exceeds tolerance {opts.tolerance:.1e}")
    return est


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2


def propagate_state(
    params: PhysicalParams,
    schedule: PulseSchedule,
    mode: ModelMode,
    psi0,
    opts: PropagatorOptions = PropagatorOptions(),
    times=None,
) -> Trajectory:
    """Evolve ``psi0`` and return it on ``times`` (default: every step edge)."""
    mode = ModelMode.parse(mode)
    if mode is ModelMode.OPEN:
        raise ValueError("use lindblad_evolve for the open model")
    psi = np.asarray(psi0, dtype=complex).copy()
    if psi.shape != (mode.dim,):
        raise ValueError(f"state must have shape ({mode.dim},)")
    extra = () if times is None else tuple(np.asarray(times, dtype=float))
    steps, starts, widths = _schedule_steps(params, schedule, mode, opts, extra)
    edges = np.concatenate([[0.0], starts + widths]) if len(starts) else np.array([0.0])
    states = np.empty((len(edges), mode.dim), dtype=complex)
    states[0] = psi
    for i, s in enumerate(steps, start=1):
        psi = s @ psi
        states[i] = psi
    if times is None:
        return Trajectory(edges, states)
    times = np.asarray(times, dtype=float)
    idx = np.array([int(np.argmin(np.abs(edges - t))) for t in times])
    if np.any(np.abs(edges[idx] - times) > 1e-9):
        raise ValueError("requested times outside the schedule")
    return Trajectory(times, states[idx])


# -- master equation ------------------------------------------------------


@dataclass(frozen=True)
class CollapseSet:
    """Decay and dephasing channels on the open basis.

    ``rates_khz`` are the input rates, ``gammas_khz`` the derived
    ``Gamma_n^2 / sqrt(sum Gamma^2)``, and ``gammas`` the same in 1/us.
    """

    rates_khz: tuple[float, float, float]
    gammas_khz: tuple[float, float, float]
    operators: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def gammas(self) -> tuple[float, ...]:
        return tuple(g * 1e-3 for g in self.gammas_khz)


def make_collapse_set(gamma1: float, gamma2: float, gamma3: float) -> CollapseSet:
    """Build the three channels from rates in kHz (10^3 / s).

    ``L1`` sends each upper level to its lower partner, ``L2`` sends every
    upper level to ``W`` and ``L3`` dephases upper against lower.
    """
    rates = np.array([gamma1, gamma2, gamma3], dtype=float)
    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise ValueError("rates must be finite and non-negative")
    norm = math.sqrt(float(np.sum(rates**2)))
    if norm == 0:
        raise ValueError("at least one rate must be non-zero")
    gam = rates**2 / norm
    dim = ModelMode.OPEN.dim
    l1, l2, l3 = (np.zeros((dim, dim), dtype=complex) for _ in range(3))
    for lo, up in zip(LOWER, UPPER):
        l1[lo, up] = 1.0
        l2[SINK, up] = 1.0
        l3[up, up] = 1.0
        l3[lo, lo] = -1.0
    ops = tuple(math.sqrt(g * 1e-3) * op for g, op in zip(gam, (l1, l2, l3)))
    return CollapseSet(tuple(rates.tolist()), tuple(gam.tolist()), ops)


def no_collapse() -> CollapseSet:
    dim = ModelMode.OPEN.dim
    zero = np.zeros((dim, dim), dtype=complex)
    return CollapseSet((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (zero, zero, zero))


def _weight(convention: str) -> float:
    if convention == "doubled":
        return 1.0
    if convention == "standard":
        return 0.5
    raise ValueError(f"unknown Lindblad convention {convention!r}")


def dissipator(collapse: CollapseSet, convention: str = "doubled") -> np.ndarray:
    """Superoperator of the jump terms acting on row-major ``vec(rho)``.

    ``doubled`` is ``sum 2 L rho L^+ - L^+ L rho - rho L^+ L``; ``standard``
    is half of that.
    """
    c = _weight(convention)
    dim = ModelMode.OPEN.dim
    eye = np.eye(dim)
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for op in collapse.operators:
        ld = op.conj().T @ op
        out += c * (2 * np.kron(op, op.conj()) - np.kron(ld, eye) - np.kron(eye, ld.T))
    return out


def lindblad_rhs(h: np.ndarray, collapse: CollapseSet, rho: np.ndarray, convention: str = "doubled") -> np.ndarray:
    """Right-hand side of the master equation, in rad/us units."""
    c = _weight(convention)
    out = -1j * (h @ rho - rho @ h)
    for op in collapse.operators:
        ld = op.conj().T @ op
        out = out + c * (2 * op @ rho @ op.conj().T - ld @ rho - rho @ ld)
    return out


def _validate_density(rho: np.ndarray):
    if np.max(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2)))) > 1e-10:
        raise ValueError("density matrix must be Hermitian")
    tr = np.real(np.trace(rho, axis1=-2, axis2=-1))
    if np.any(np.abs(tr - 1) > 1e-10):
        raise ValueError("density matrix must have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
        raise ValueError("density matrix must be positive semidefinite")


def lindblad_evolve(
    params: PhysicalParams,
    schedule: PulseSchedule,
    collapse: CollapseSet,
    rho0,
    opts: PropagatorOptions = PropagatorOptions(),
    convention: str = "doubled",
) -> np.ndarray:
    """Evolve one density matrix, or a stack of them, under the open model.

    The Hamiltonian is the full two-atom one (finite blockade) embedded
    with the sink ``W``.
    """
    mode = ModelMode.OPEN
    rho = np.array(rho0, dtype=complex)
    single = rho.ndim == 2
    if single:
        rho = rho[None]
    if rho.shape[1:] != (mode.dim, mode.dim):
        raise ValueError(f"density matrices must be {mode.dim}x{mode.dim}")
    _validate_density(rho)
    _weight(convention)
    steps, _, widths = _schedule_steps(params, schedule, mode, opts)
    generator = dissipator(collapse, convention)
    cache: dict[float, np.ndarray] = {}
    n = mode.dim
    flat = rho.reshape(len(rho), n * n).T
    for u, w in zip(steps, widths):
        e = cache.get(w)
        if e is None:
            e = cache[w] = expm(generator * 0.5 * w * NS)
        flat = e @ flat
        r = flat.T.reshape(-1, n, n)
        r = u @ r @ u.conj().T
        flat = e @ r.reshape(-1, n * n).T
        r = flat.T.reshape(-1, n, n)
        r = 0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))
        flat = r.reshape(-1, n * n).T
    out = flat.T.reshape(-1, n, n)
    tr = np.real(np.trace(out, axis1=-2, axis2=-1))
    if np.any(np.abs(tr - 1) > 1e-6):
        raise ConvergenceError("trace drifted beyond 1e-6")
    return out[0] if single else out
