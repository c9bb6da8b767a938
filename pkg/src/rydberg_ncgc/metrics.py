"""Gate and state figures of merit.

Gate fidelity compares the computational block of a propagator with a
target up to global phase, ``|tr(U V^+)|^2 / 16``.  The unsquared
``|tr(U V^+)| / 16`` tops out at 0.25 for unitaries; it is kept as
``fidelity_raw`` for reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import COMPUTATIONAL, NS, BASIS_LABELS, Controls, PhysicalParams, SubspaceId, dressed_frame
from .pulses import NcgcParams


def wrap_phase(x):
    """Map angles into ``(-pi, pi]``."""
    out = math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2 * math.pi)
    return float(out) if np.ndim(out) == 0 else out


def computational_block(u: np.ndarray) -> np.ndarray:
    """Project the evolved computational inputs back onto ``{00, 01, 10, 11}``.

    No re-unitarization: leakage shows up as lost norm.
    """
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] < 7:
        raise ValueError("expected a square propagator on the 7, 8 or 9 level basis")
    idx = list(COMPUTATIONAL)
    return u[np.ix_(idx, idx)]


def cz_target(dphi: float) -> np.ndarray:
    """``diag(1, e^{-i dphi}, e^{-i dphi}, e^{-i dphi})``."""
    if not 0 <= dphi <= math.pi:
        raise ValueError("dphi must lie in [0, pi]")
    z = np.exp(-1j * dphi)
    return np.diag([1.0, z, z, z]).astype(complex)


def cz_class_target(phi_01: float, phi_10: float) -> np.ndarray:
    """Controlled-Z dressed with single-qubit phases.

    ``diag(1, e^{-i p01}, e^{-i p10}, e^{-i (p01 + p10 + pi)})`` satisfies
    ``phi_11 - phi_10 - phi_01 = pi`` by construction.
    """
    return np.diag(np.exp(-1j * np.array([0.0, phi_01, phi_10, phi_01 + phi_10 + math.pi]))).astype(complex)


def fit_cz_class(u_comp: np.ndarray) -> np.ndarray:
    """Closest controlled-Z class target, reading the single-qubit phases off ``u_comp``."""
    p01, p10, _ = acquired_phases(u_comp)
    return cz_class_target(p01, p10)


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.shape != (4, 4) or b.shape != (4, 4):
        raise ValueError("both operators must be 4x4")


def gate_fidelity(u_actual, u_target) -> float:
    """``|tr(U V^+)|^2 / 16``; 1 iff ``U`` equals ``V`` up to global phase."""
    u_actual, u_target = np.asarray(u_actual), np.asarray(u_target)
    _check_pair(u_actual, u_target)
    return float(min(1.0, abs(np.trace(u_actual @ u_target.conj().T)) ** 2 / 16.0))


def gate_fidelity_raw(u_actual, u_target) -> float:
    """``|tr(U V^+)| / 16`` as literally defined; at most 0.25."""
    u_actual, u_target = np.asarray(u_actual), np.asarray(u_target)
    _check_pair(u_actual, u_target)
    return float(abs(np.trace(u_actual @ u_target.conj().T)) / 16.0)


def state_fidelity(rho, rho_ideal) -> float:
    """``sqrt(tr(rho_ideal rho))``; the Uhlmann fidelity when ``rho_ideal`` is pure."""
    rho, rho_ideal = np.asarray(rho), np.asarray(rho_ideal)
    if rho.shape != rho_ideal.shape or rho.ndim != 2:
        raise ValueError("density matrices must share one square shape")
    return float(math.sqrt(max(0.0, float(np.real(np.trace(rho_ideal @ rho))))))


def relative_phase(psi_final, psi_initial) -> float:
    """``Arg <psi_final | psi_initial>`` in ``(-pi, pi]``."""
    psi_final, psi_initial = np.asarray(psi_final), np.asarray(psi_initial)
    if psi_final.shape != psi_initial.shape:
        raise ValueError("states must share one shape")
    overlap = np.vdot(psi_final, psi_initial)
    if abs(overlap) < 1e-6:
        raise ValueError("overlap too small for a well-defined phase")
    return wrap_phase(np.angle(overlap))


def acquired_phases(u_comp) -> tuple[float, float, float]:
    """``(phi_01, phi_10, phi_11)`` with ``u_jj = e^{-i phi_j}`` relative to ``u_00``."""
    u_comp = np.asarray(u_comp)
    if u_comp.shape != (4, 4):
        raise ValueError("expected a 4x4 block")
    ref = u_comp[0, 0]
    if abs(ref) < 1e-6:
        ref = 1.0
    d = np.diag(u_comp) / (ref / abs(ref))
    return tuple(wrap_phase(-np.angle(d[1:])).tolist())


def cz_condition(phases) -> float:
    """Distance of ``phi_11 - phi_10 - phi_01`` from ``+-pi`` (which are identified)."""
    p01, p10, p11 = phases
    return abs(abs(wrap_phase(p11 - p10 - p01)) - math.pi)


@dataclass(frozen=True)
class GateResult:
    """Outcome of one gate simulation.

    ``populations[k]`` is the final population vector of computational
    input ``k`` over the full simulation basis.
    """

    u_comp: np.ndarray
    target: np.ndarray
    fidelity: float
    fidelity_raw: float
    phases: tuple[float, float, float]
    populations: np.ndarray
    leakage: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValueError("fidelity outside [0, 1]")
        if self.leakage < 0:
            raise ValueError("negative leakage")

    @classmethod
    def from_propagator(cls, u: np.ndarray, target: np.ndarray | None = None, meta: dict | None = None):
        """Evaluate a full propagator; ``target`` defaults to the fitted controlled-Z class."""
        u_comp = computational_block(u)
        if target is None:
            target = fit_cz_class(u_comp)
        norms = np.sum(np.abs(u_comp) ** 2, axis=0)
        cols = np.asarray(u)[:, list(COMPUTATIONAL)]
        return cls(
            u_comp=u_comp,
            target=np.asarray(target),
            fidelity=gate_fidelity(u_comp, target),
            fidelity_raw=gate_fidelity_raw(u_comp, target),
            phases=acquired_phases(u_comp),
            populations=(np.abs(cols) ** 2).T,
            leakage=float(max(0.0, 1.0 - np.min(norms))),
            meta=dict(meta or {}),
        )

    def to_json(self) -> dict:
        p01, p10, p11 = self.phases
        dim = self.populations.shape[1]
        labels = BASIS_LABELS[:dim]
        inputs = [BASIS_LABELS[i] for i in COMPUTATIONAL]
        return {
            "fidelity": self.fidelity,
            "fidelity_raw": self.fidelity_raw,
            "phi_01": p01,
            "phi_10": p10,
            "phi_11": p11,
            "leakage": self.leakage,
            "populations": {
                a: {b: float(x) for b, x in zip(labels, row)} for a, row in zip(inputs, self.populations)
            },
            "meta": self.meta,
        }


# -- analytic phase bookkeeping ---------------------------------------


@dataclass(frozen=True)
class PhaseDecomposition:
    """Geometric and dynamical phases of one block, per segment.

    ``delta_*`` are Berry phases of the dressed states along each segment's
    sweep; ``beta_*`` the dynamical phases ``-int E dt``.  In the second
    segment the pi flip swaps which path accrues ``beta_+``, so the
    dynamical parts cancel in the composed operator.
    """

    eta: SubspaceId
    rotation: float
    delta_plus: tuple[float, float]
    delta_minus: tuple[float, float]
    beta_plus: tuple[float, float]
    beta_minus: tuple[float, float]

    @property
    def segment_operators(self) -> tuple[np.ndarray, np.ndarray]:
        d, b = self.delta_plus, self.beta_plus
        dm, bm = self.delta_minus, self.beta_minus
        u1 = np.diag(np.exp(1j * np.array([d[0] + b[0], dm[0] + bm[0]])))
        u2 = np.diag(np.exp(1j * np.array([d[1] + bm[1], dm[1] + b[1]])))
        return u1, u2

    def composed(self) -> np.ndarray:
        """Dressed-basis operator of both segments."""
        u1, u2 = self.segment_operators
        return u2 @ u1

    @property
    def total_plus(self) -> float:
        return wrap_phase(np.angle(self.composed()[0, 0]))

    @property
    def total_minus(self) -> float:
        return wrap_phase(np.angle(self.composed()[1, 1]))


def berry_phase(p: NcgcParams, eta: SubspaceId, omega: float, phi_start: float, phi_end: float, n: int = 2001):
    """Numerical ``i int <lambda_+| d lambda_+>`` along a straight phase sweep at zero detuning."""
    phis = np.linspace(phi_start, phi_end, n)
    states = np.array([dressed_frame(Controls(omega, 0.0, f), eta).lambda_plus for f in phis])
    overlaps = np.sum(np.conj(states[:-1]) * states[1:], axis=1)
    return float(-np.sum(np.angle(overlaps)))


def phase_decomposition(params: PhysicalParams, p: NcgcParams, eta: SubspaceId) -> PhaseDecomposition:
    """Analytic phases of the two-segment protocol for block ``eta``.

    The dressed states carry ``e^{+i phi}`` on the upper level, so a sweep
    by ``a pi`` gives ``delta_+ = -a pi / 2`` and ``delta_- = +a pi / 2``
    per segment.  Both segments see the same energy ``E_+ = f Omega / 2``.
    """
    eta = SubspaceId(eta)
    if params.delta != 0:
        raise ValueError("the decomposition assumes zero static detuning")
    T = params.duration
    tau = p.boundary(T)
    e_plus = dressed_frame(Controls(params.omega, 0.0, p.phi_initial), eta).energy_plus
    geo = 0.5 * p.rotation
    dyn = tuple(-e_plus * seg * NS for seg in (tau, T - tau))
    return PhaseDecomposition(
        eta=eta,
        rotation=p.rotation,
        delta_plus=(-geo, -geo),
        delta_minus=(geo, geo),
        beta_plus=dyn,
        beta_minus=tuple(-x for x in dyn),
    )
