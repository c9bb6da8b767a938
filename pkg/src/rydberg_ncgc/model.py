"""Two-atom Rydberg-blockade Hamiltonians in a fixed labeled basis.

Units
-----
Frequencies are angular and expressed in rad/us, so ``mhz(4.0)`` is
2*pi x 4 MHz.  Times are in ns.  A phase accumulated over ``dt`` ns at
angular frequency ``w`` is ``w * dt * NS``.

Basis ordering
--------------
Every operator uses the ordering::

    index  0     1     2     3     4     5     6    7     8
    label  00    01    0r    10    r0    11    R    rr    W

where ``R = (|1r> + |r1>)/sqrt(2)`` and ``W`` is an external sink level.
The reduced model keeps the first 7 states, the full model the first 8
and the open model all 9.  The antisymmetric combination of ``|1r>`` and
``|r1>`` is never driven and is omitted.

Drive convention
----------------
Each driven pair couples as ``<upper|H|lower> = (f * Omega / 2) e^{i phi}``
with ``f = 1`` for the single-excitation pairs and ``f = sqrt(2)`` for
``{11, R}``.  With this orientation the dressed states returned by
:func:`dressed_frame` are exact eigenvectors at zero detuning.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi
NS = 1e-3  # ns -> us
SQRT2 = math.sqrt(2.0)

BASIS_LABELS = ("00", "01", "0r", "10", "r0", "11", "R", "rr", "W")
COMPUTATIONAL = (0, 1, 3, 5)
LOWER = (1, 3, 5)
UPPER = (2, 4, 6)
RR = 7
SINK = 8


def mhz(value):
    """Convert a frequency in MHz to angular units (rad/us)."""
    return TWO_PI * value


def to_mhz(value):
    """Inverse of :func:`mhz`."""
    return value / TWO_PI


class ModelMode(enum.Enum):
    """Which Hamiltonian and basis to simulate."""

    REDUCED = "reduced"
    FULL = "full"
    OPEN = "open"

    @property
    def dim(self) -> int:
        return {"reduced": 7, "full": 8, "open": 9}[self.value]

    @property
    def labels(self) -> tuple[str, ...]:
        return BASIS_LABELS[: self.dim]

    @classmethod
    def parse(cls, value) -> "ModelMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown model mode {value!r}") from None


class Frame(enum.Enum):
    """Energy reference for the detuning.

    ``LAB`` places the detuning on the Rydberg-containing levels only, as
    in the two-atom Hamiltonian.  ``CENTERED`` shifts every driven level by
    ``-delta/2`` so that each two-level block reads ``(delta/2) sigma_z``
    plus the coupling; ``|00>`` and ``W`` are untouched.
    """

    LAB = "lab"
    CENTERED = "centered"


def basis_index(label: str, mode: ModelMode = ModelMode.OPEN) -> int:
    """Position of ``label`` in the basis of ``mode``."""
    labels = mode.labels
    if label not in labels:
        raise ValueError(f"state {label!r} is not part of the {mode.value} basis")
    return labels.index(label)


def basis_state(label: str, mode: ModelMode = ModelMode.REDUCED) -> np.ndarray:
    psi = np.zeros(mode.dim, dtype=complex)
    psi[basis_index(label, mode)] = 1.0
    return psi


class SubspaceId(enum.IntEnum):
    """Driven two-level blocks.  ``eta=1`` is {10, r0}, 2 is {01, 0r}, 3 is {11, R}."""

    ONE = 1
    TWO = 2
    THREE = 3

    @property
    def rabi_factor(self) -> float:
        return SQRT2 if self is SubspaceId.THREE else 1.0

    @property
    def lower(self) -> int:
        return {1: 3, 2: 1, 3: 5}[int(self)]

    @property
    def upper(self) -> int:
        return {1: 4, 2: 2, 3: 6}[int(self)]

    def mixing_angle(self, omega: float, delta: float) -> float:
        """``theta = arctan(f * Omega / Delta)``, equal to pi/2 at zero detuning."""
        return math.atan2(self.rabi_factor * omega, delta)


class Controls(NamedTuple):
    omega: float
    delta: float
    phi: float


@dataclass(frozen=True)
class PhysicalParams:
    """Static system constants.

    Attributes
    ----------
    omega, delta, v_blockade : float
        Rabi frequency, base detuning and blockade shift in rad/us.
    duration : float
        Gate duration in ns.
    """

    omega: float = mhz(4.0)
    delta: float = 0.0
    v_blockade: float = mhz(500.0)
    duration: float = 500.0

    def __post_init__(self):
        for name in ("omega", "delta", "v_blockade", "duration"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.v_blockade < 0:
            raise ValueError("v_blockade must be non-negative")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def blockade_ratio(self) -> float:
        return self.v_blockade / self.omega

    @property
    def soft_blockade(self) -> bool:
        """True when ``V / Omega < 10``."""
        return self.blockade_ratio < 10.0

    def replace(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DressedFrame:
    """Instantaneous dressed pair of one driven block.

    The vectors are two-component in ``(mu_plus, mu_minus) = (upper, lower)``
    order.
    """

    eta: SubspaceId
    theta: float
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    energy_plus: float
    energy_minus: float


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise ValueError("controls must be finite")


def assemble(omega, delta, phi, v_blockade: float, mode: ModelMode, frame: Frame = Frame.LAB) -> np.ndarray:
    """Vectorized Hamiltonian builder.

    ``omega``, ``delta`` and ``phi`` broadcast against each other; the
    result has shape ``broadcast_shape + (dim, dim)``.
    """
    mode = ModelMode.parse(mode)
    omega, delta, phi = np.broadcast_arrays(
        np.asarray(omega, dtype=float), np.asarray(delta, dtype=float), np.asarray(phi, dtype=float)
    )
    _check_finite(omega, delta, phi)
    dim = mode.dim
    h = np.zeros(omega.shape + (dim, dim), dtype=complex)
    half = 0.5 * omega * np.exp(1j * phi)
    for eta in SubspaceId:
        lo, up = eta.lower, eta.upper
        c = eta.rabi_factor * half
        h[..., up, lo] = c
        h[..., lo, up] = np.conj(c)
        h[..., up, up] = delta
    if mode is not ModelMode.REDUCED:
        c = SQRT2 * half
        h[..., RR, 6] = c
        h[..., 6, RR] = np.conj(c)
        h[..., RR, RR] = v_blockade + 2.0 * delta
    if Frame(frame) is Frame.CENTERED:
        driven = list(LOWER) + list(UPPER) + ([RR] if mode is not ModelMode.REDUCED else [])
        for i in driven:
            h[..., i, i] -= 0.5 * delta
    return h


def hamiltonian(params: PhysicalParams, controls: Controls, mode: ModelMode, frame: Frame = Frame.LAB) -> np.ndarray:
    """Hamiltonian over the basis of ``mode`` for instantaneous controls.

    In the reduced mode the ``{11, R, rr}`` block is replaced by its
    blockade limit ``{11, R}``.  The sink ``W`` carries no Hamiltonian
    matrix elements.
    """
    omega, delta, phi = controls
    if not all(math.isfinite(x) for x in (omega, delta, phi)):
        raise ValueError("controls must be finite")
    return assemble(omega, delta, phi, params.v_blockade, ModelMode.parse(mode), frame)


def subspace_hamiltonian(controls: Controls, eta: SubspaceId) -> np.ndarray:
    """2x2 block of ``eta`` in ``(upper, lower)`` order."""
    omega, delta, phi = controls
    c = 0.5 * SubspaceId(eta).rabi_factor * omega * np.exp(1j * phi)
    return np.array([[delta, c], [np.conj(c), 0.0]], dtype=complex)


def dressed_frame(controls: Controls, eta: SubspaceId) -> DressedFrame:
    """Dressed states of block ``eta`` and the eigenvalues of that block.

    The states follow the mixing-angle parameterization::

        lambda_+ = sin(theta/2) e^{i phi} |upper> + cos(theta/2) |lower>
        lambda_- = cos(theta/2) |upper> - sin(theta/2) e^{-i phi} |lower>

    and are exact eigenvectors when ``delta == 0``.  Energies come from
    diagonalizing :func:`subspace_hamiltonian`, so at zero detuning they
    are ``+-f Omega / 2``.
    """
    eta = SubspaceId(eta)
    omega, delta, phi = controls
    _check_finite(omega, delta, phi)
    if omega == 0 and delta == 0:
        raise ValueError("dressed states are undefined at zero field")
    theta = eta.mixing_angle(omega, delta)
    s, c = math.sin(theta / 2), math.cos(theta / 2)
    plus = np.array([s * np.exp(1j * phi), c], dtype=complex)
    minus = np.array([c, -s * np.exp(-1j * phi)], dtype=complex)
    evals = np.linalg.eigvalsh(subspace_hamiltonian(controls, eta))
    return DressedFrame(eta, theta, plus, minus, float(evals[1]), float(evals[0]))


def counterdiabatic_term(phi_dot: float, eta: SubspaceId, phi: float = 0.0, delta: float = 0.0) -> np.ndarray:
    """Counter-diabatic correction of block ``eta`` for pure phase motion.

    Returns ``diag(-phi_dot/2, +phi_dot/2)`` in ``(upper, lower)`` order.
    The matrix does not depend on ``phi`` or on the block; ``phi`` is
    accepted so callers can pass the full instantaneous state.
    """
    SubspaceId(eta)
    if delta != 0:
        raise ValueError("counter-diabatic term is only available at zero detuning")
    if not (math.isfinite(phi_dot) and math.isfinite(phi)):
        raise ValueError("phi_dot must be finite")
    return np.diag([-0.5 * phi_dot, 0.5 * phi_dot]).astype(complex)


def counterdiabatic_operator(phi_dot, mode: ModelMode) -> np.ndarray:
    """Sum of the per-block counter-diabatic terms embedded in ``mode``'s basis.

    Vectorized over ``phi_dot``.
    """
    mode = ModelMode.parse(mode)
    phi_dot = np.asarray(phi_dot, dtype=float)
    out = np.zeros(phi_dot.shape + (mode.dim, mode.dim), dtype=complex)
    for eta in SubspaceId:
        out[..., eta.upper, eta.upper] = -0.5 * phi_dot
        out[..., eta.lower, eta.lower] = 0.5 * phi_dot
    return out


# -- single-atom product picture -------------------------------------------

PRODUCT_LABELS = tuple(a + b for a in "01r" for b in "01r")
SYMMETRIC_LABELS = BASIS_LABELS[:8] + ("A",)


def two_atom_hamiltonian(params: PhysicalParams, controls: Controls) -> np.ndarray:
    """Two-atom Hamiltonian in the 9-state product basis ``{0,1,r} x {0,1,r}``.

    Each atom sees ``(Omega/2) e^{i phi} |r><1| + h.c. + Delta |r><r|`` and the
    pair carries ``V |rr><rr|``.
    """
    omega, delta, phi = controls
    single = np.zeros((3, 3), dtype=complex)
    single[2, 1] = 0.5 * omega * np.exp(1j * phi)
    single[1, 2] = np.conj(single[2, 1])
    single[2, 2] = delta
    eye = np.eye(3)
    h = np.kron(single, eye) + np.kron(eye, single)
    rr = np.zeros((3, 3))
    rr[2, 2] = 1.0
    return h + params.v_blockade * np.kron(rr, rr)


def symmetrization_unitary() -> np.ndarray:
    """Unitary mapping product-basis amplitudes onto ``SYMMETRIC_LABELS``.

    Rows are ``00, 01, 0r, 10, r0, 11, R, rr, A`` with
    ``A = (|1r> - |r1>)/sqrt(2)``.
    """
    s = np.zeros((9, 9))
    p = PRODUCT_LABELS.index
    for row, label in enumerate(SYMMETRIC_LABELS[:8]):
        if label == "R":
            s[row, p("1r")] = s[row, p("r1")] = 1 / SQRT2
        else:
            s[row, p(label)] = 1.0
    s[8, p("1r")] = 1 / SQRT2
    s[8, p("r1")] = -1 / SQRT2
    return s
