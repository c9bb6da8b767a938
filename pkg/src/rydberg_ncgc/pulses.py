"""Control waveforms for the three gate protocols and their perturbations.

A :class:`PulseSchedule` holds the analytic waveform as a vectorized
callable, so integrators sample it exactly where they need it.  Times are
in ns, frequencies in rad/us, phases in rad.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .model import NS, Frame, PhysicalParams, mhz

ControlFn = Callable[[np.ndarray], tuple]


class Protocol(enum.Enum):
    NCGC = "ncgc"
    RM = "rm"
    PM = "pm"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown protocol {value!r}") from None


@dataclass(frozen=True)
class PulseSchedule:
    """Time-parameterized control record on ``[0, duration]``.

    Attributes
    ----------
    control_fn
        Maps an array of times (ns) to ``(omega, delta, phi)`` arrays.
    breakpoints
        Interior times where a control is discontinuous.  Integrators split
        their grid there.
    frame
        Detuning reference the drive is written in (see :class:`Frame`).
    phase_rate_fn
        Optional ``d phi / dt`` in rad/us, needed for counter-diabatic terms.
    meta
        Protocol constants, echoed into run sidecars.
    """

    protocol: Protocol
    duration: float
    control_fn: ControlFn
    breakpoints: tuple[float, ...] = ()
    frame: Frame = Frame.LAB
    phase_rate_fn: Callable[[np.ndarray], np.ndarray] | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("duration must be non-negative")
        if any(not 0 < b < self.duration for b in self.breakpoints):
            raise ValueError("breakpoints must lie strictly inside (0, duration)")

    def controls(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-9) or np.any(t > self.duration + 1e-9):
            raise ValueError("time outside the schedule")
        omega, delta, phi = self.control_fn(t)
        return (
            np.broadcast_to(np.asarray(omega, dtype=float), t.shape),
            np.broadcast_to(np.asarray(delta, dtype=float), t.shape),
            np.broadcast_to(np.asarray(phi, dtype=float), t.shape),
        )

    def grid(self, step: float = 1.0) -> np.ndarray:
        """Uniform sampling grid that also contains every breakpoint."""
        if step <= 0:
            raise ValueError("step must be positive")
        n = max(1, int(math.ceil(self.duration / step - 1e-9)))
        t = np.linspace(0.0, self.duration, n + 1)
        return np.unique(np.concatenate([t, self.breakpoints]))

    def sample(self, times=None, step: float = 1.0) -> np.ndarray:
        """Rows of ``(t, omega, delta, phi)``."""
        t = self.grid(step) if times is None else np.asarray(times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        return np.column_stack([t, *self.controls(t)])

    @property
    def samples(self) -> np.ndarray:
        return self.sample()


# -- NCGC ---------------------------------------------------------------


@dataclass(frozen=True)
class NcgcParams:
    """Shape of the two-segment phase sweep.

    ``a`` sets the swept angle ``a * pi``; ``tau`` (ns) is the segment
    boundary and defaults to half the gate time.
    """

    a: float = 1.0
    tau: float | None = None
    phi_initial: float = 0.0
    sta_enabled: bool = True

    def __post_init__(self):
        if not 0 < self.a <= 1:
            raise ValueError("a must lie in (0, 1]")

    def boundary(self, duration: float) -> float:
        tau = 0.5 * duration if self.tau is None else self.tau
        if not 0 < tau < duration:
            raise ValueError("tau must lie strictly inside (0, T)")
        return tau

    @property
    def rotation(self) -> float:
        return self.a * math.pi


def _check_times(t, duration):
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-9) or np.any(t > duration + 1e-9):
        raise ValueError("time outside [0, T]")
    return t


def ncgc_phase(t, p: NcgcParams, duration: float):
    """Control phase of the geometric protocol.

    Rises as ``0.5 a pi (1 - cos(pi t / tau))`` up to ``tau`` (inclusive),
    then jumps by pi and sweeps another ``a pi`` over the second segment.
    """
    t = _check_times(t, duration)
    tau = p.boundary(duration)
    half = 0.5 * p.a * math.pi
    first = half * (1.0 - np.cos(math.pi * t / tau))
    second = math.pi + half * (3.0 - np.cos(math.pi * (t - tau) / tau))
    out = p.phi_initial + np.where(t <= tau, first, second)
    return float(out) if out.ndim == 0 else out


def sta_detuning(t, p: NcgcParams, duration: float):
    """Auxiliary detuning ``d phi / dt`` of :func:`ncgc_phase` in rad/us.

    The pi flip at ``tau`` is a frame jump and contributes nothing.
    """
    t = _check_times(t, duration)
    tau = p.boundary(duration)
    amp = 0.5 * p.a * math.pi * (math.pi / (tau * NS))
    out = amp * np.where(t <= tau, np.sin(math.pi * t / tau), np.sin(math.pi * (t - tau) / tau))
    return float(out) if out.ndim == 0 else out


def ncgc_schedule(params: PhysicalParams, p: NcgcParams = NcgcParams()) -> PulseSchedule:
    """Constant Rabi drive with the two-segment phase sweep.

    The drive is written in the centered frame.  With STA enabled the
    detuning is ``delta - sta_detuning``: in the centered frame that term
    equals the exact counter-diabatic correction of every block.
    """
    T = params.duration
    tau = p.boundary(T)

    def controls(t):
        phi = ncgc_phase(t, p, T)
        delta = params.delta - (sta_detuning(t, p, T) if p.sta_enabled else 0.0)
        return params.omega, delta, phi

    return PulseSchedule(
        Protocol.NCGC,
        T,
        controls,
        breakpoints=(tau,),
        frame=Frame.CENTERED,
        phase_rate_fn=lambda t: sta_detuning(t, p, T),
        meta={
            "a": p.a,
            "tau_ns": tau,
            "phi_initial_rad": p.phi_initial,
            "sta_enabled": p.sta_enabled,
            "omega_2pi_mhz": params.omega / mhz(1.0),
        },
    )


# -- RM -----------------------------------------------------------------


def bernstein(v: int, n: int, x):
    """Bernstein basis polynomial ``C(n, v) x^v (1 - x)^(n - v)``."""
    if not 0 <= v <= n:
        raise ValueError("need 0 <= v <= n")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("x must lie in [0, 1]")
    out = math.comb(n, v) * x**v * (1.0 - x) ** (n - v)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RmConstants:
    """Rabi-modulated drive.

    ``betas_mhz`` and ``delta_mhz`` are in 2*pi x MHz and realize the
    gate when the pulse lasts ``reference_duration`` ns; other durations
    rescale every frequency by ``reference_duration / T``.
    """

    betas_mhz: tuple[float, ...] = (1.419, 0.0, 5.076, 13.425)
    delta_mhz: float = 3.512
    degree: int = 8
    reference_duration: float = 1000.0

    def scale(self, duration: float) -> float:
        return self.reference_duration / duration


def rm_envelope(t, duration: float, c: RmConstants = RmConstants()):
    t = _check_times(t, duration)
    x = np.clip(t / duration, 0.0, 1.0)
    n = c.degree
    total = np.zeros_like(x)
    for nu, beta in enumerate(c.betas_mhz, start=1):
        total = total + beta * (bernstein(nu, n, x) + bernstein(n - nu, n, x))
    out = mhz(total) * c.scale(duration)
    return float(out) if np.ndim(out) == 0 else out


def rm_waveform(t, duration: float, c: RmConstants = RmConstants()):
    """``(omega, delta, phi)`` of the Rabi-modulated protocol."""
    omega = rm_envelope(t, duration, c)
    delta = mhz(c.delta_mhz) * c.scale(duration)
    return omega, delta * np.ones_like(omega), 0.0 * np.ones_like(omega)


def rm_schedule(duration: float, c: RmConstants = RmConstants()) -> PulseSchedule:
    return PulseSchedule(
        Protocol.RM,
        duration,
        lambda t: rm_waveform(t, duration, c),
        meta={
            "betas_2pi_mhz": list(c.betas_mhz),
            "delta_2pi_mhz": c.delta_mhz,
            "degree": c.degree,
            "reference_duration_ns": c.reference_duration,
        },
    )


# -- PM -----------------------------------------------------------------


@dataclass(frozen=True)
class PmConstants:
    """Phase-modulated drive ``phi(t) = A cos(w t - phi0)`` at constant Rabi.

    The Rabi frequency is ``pulse_area / T`` unless ``rabi`` (rad/us)
    pins it; the modulation frequency is ``modulation_ratio * Omega``.
    """

    amplitude: float = mhz(0.1122)
    modulation_ratio: float = 1.0431
    phase_offset: float = -0.7318
    pulse_area: float = 7.612
    rabi: float | None = None

    @classmethod
    def printed(cls) -> "PmConstants":
        """Constants exactly as printed: 2*pi x 4.6 MHz over 500 ns, ``w = 0.1431 Omega``."""
        return cls(modulation_ratio=0.1431, pulse_area=mhz(4.6) * 500.0 * NS)

    def rabi_for(self, duration: float) -> float:
        return self.rabi if self.rabi is not None else self.pulse_area / (duration * NS)


def pm_waveform(t, duration: float, c: PmConstants = PmConstants()):
    """``(omega, delta, phi)`` of the phase-modulated protocol."""
    t = _check_times(t, duration)
    omega = c.rabi_for(duration)
    w = c.modulation_ratio * omega
    phi = c.amplitude * np.cos(w * t * NS - c.phase_offset)
    return omega * np.ones_like(phi), np.zeros_like(phi), phi


def pm_schedule(duration: float, c: PmConstants = PmConstants()) -> PulseSchedule:
    omega = c.rabi_for(duration)
    w = c.modulation_ratio * omega
    return PulseSchedule(
        Protocol.PM,
        duration,
        lambda t: pm_waveform(t, duration, c),
        phase_rate_fn=lambda t: -c.amplitude * w * np.sin(w * np.asarray(t) * NS - c.phase_offset),
        meta={
            "omega_2pi_mhz": omega / mhz(1.0),
            "amplitude_rad": c.amplitude,
            "modulation_ratio": c.modulation_ratio,
            "phase_offset_rad": c.phase_offset,
        },
    )


def make_schedule(
    protocol,
    params: PhysicalParams,
    ncgc: NcgcParams = NcgcParams(),
    rm: RmConstants = RmConstants(),
    pm: PmConstants = PmConstants(),
) -> PulseSchedule:
    protocol = Protocol.parse(protocol)
    if protocol is Protocol.NCGC:
        return ncgc_schedule(params, ncgc)
    if protocol is Protocol.RM:
        return rm_schedule(params.duration, rm)
    return pm_schedule(params.duration, pm)


# -- perturbations ------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    """Systematic offsets plus piecewise-constant random noise.

    ``kappa1`` scales the Rabi frequency, ``kappa2`` shifts the detuning in
    units of the Rabi frequency.  The noise adds ``k1(t) Omega`` and
    ``k2(t) Omega`` with ``k1``, ``k2`` redrawn every ``noise_segment`` ns,
    uniform on ``[0, amp]`` (``[-amp, amp]`` when ``symmetric``).
    """

    kappa1: float = 0.0
    kappa2: float = 0.0
    noise_rabi: float = 0.0
    noise_detuning: float = 0.0
    noise_segment: float = 1.0
    seed: int = 0
    symmetric: bool = False

    def __post_init__(self):
        if self.noise_segment <= 0:
            raise ValueError("noise_segment must be positive")
        if self.noise_rabi < 0 or self.noise_detuning < 0:
            raise ValueError("noise amplitudes must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if abs(self.kappa1) > 0.1 or abs(self.kappa2) > 0.1:
            warnings.warn("systematic offset outside [-0.1, 0.1]", stacklevel=3)

    @property
    def has_noise(self) -> bool:
        return self.noise_rabi > 0 or self.noise_detuning > 0

    @property
    def is_null(self) -> bool:
        return self.kappa1 == 0 and self.kappa2 == 0 and not self.has_noise


def noise_draws(spec: PerturbationSpec, duration: float, trial: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment ``(k1, k2)`` draws for one trial.

    The generator is Philox keyed by ``(seed, trial)``, so trials can be
    produced in any order or in parallel.
    """
    nseg = max(1, int(math.ceil(duration / spec.noise_segment - 1e-9)))
    seq = np.random.SeedSequence(spec.seed, spawn_key=(trial,))
    rng = np.random.Generator(np.random.Philox(seq))
    lo = -1.0 if spec.symmetric else 0.0
    k1 = rng.uniform(lo * spec.noise_rabi, spec.noise_rabi, nseg)
    k2 = rng.uniform(lo * spec.noise_detuning, spec.noise_detuning, nseg)
    return k1, k2


def perturb(schedule: PulseSchedule, spec: PerturbationSpec, trial: int = 0) -> PulseSchedule:
    """Apply systematic offsets and, if requested, one noise realization."""
    if spec.is_null:
        return schedule
    base = schedule.control_fn
    if spec.has_noise:
        k1, k2 = noise_draws(spec, schedule.duration, trial)
        seg = spec.noise_segment

        def offsets(t):
            i = np.clip((np.asarray(t) // seg).astype(int), 0, len(k1) - 1)
            return k1[i], k2[i]
    else:

        def offsets(t):
            return 0.0, 0.0

    def controls(t):
        omega, delta, phi = base(t)
        n1, n2 = offsets(t)
        return (1.0 + spec.kappa1 + n1) * omega, delta + (spec.kappa2 + n2) * omega, phi

    meta = dict(schedule.meta)
    meta["perturbation"] = {
        "kappa1": spec.kappa1,
        "kappa2": spec.kappa2,
        "noise_rabi": spec.noise_rabi,
        "noise_detuning": spec.noise_detuning,
        "noise_segment_ns": spec.noise_segment,
        "seed": spec.seed,
        "trial": trial,
        "symmetric": spec.symmetric,
    }
    breaks = set(schedule.breakpoints)
    if spec.has_noise:
        n = int(math.ceil(schedule.duration / spec.noise_segment - 1e-9))
        breaks.update(k * spec.noise_segment for k in range(1, n))
        breaks = {b for b in breaks if 0 < b < schedule.duration}
    return replace(schedule, control_fn=controls, breakpoints=tuple(sorted(breaks)), meta=meta)
