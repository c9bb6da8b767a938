import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from rydberg_ncgc.evolve import (
    ConvergenceError,
    PropagatorOptions,
    check_convergence,
    dissipator,
    lindblad_evolve,
    lindblad_rhs,
    make_collapse_set,
    no_collapse,
    propagate_state,
    propagate_unitary,
    step_grid,
    time_ordered_exponential,
)
from rydberg_ncgc.model import (
    Controls,
    Frame,
    ModelMode,
    PhysicalParams,
    SubspaceId,
    assemble,
    basis_index,
    basis_state,
    counterdiabatic_term,
    dressed_frame,
    mhz,
    subspace_hamiltonian,
)
from rydberg_ncgc.pulses import NcgcParams, PmConstants, Protocol, PulseSchedule, ncgc_schedule, pm_schedule

PARAMS = PhysicalParams()


def constant_schedule(omega, delta, phi, duration, frame=Frame.LAB):
    return PulseSchedule(Protocol.PM, duration, lambda t: (omega, delta, phi), frame=frame)


def piecewise_schedule(segments, frame=Frame.LAB):
    """``segments``: list of (duration_ns, omega, delta, phi)."""
    edges = np.cumsum([0.0] + [s[0] for s in segments])
    vals = np.array([s[1:] for s in segments])

    def fn(t):
        i = np.clip(np.searchsorted(edges, np.asarray(t), side="right") - 1, 0, len(segments) - 1)
        return vals[i, 0], vals[i, 1], vals[i, 2]

    return PulseSchedule(Protocol.PM, float(edges[-1]), fn, breakpoints=tuple(edges[1:-1]), frame=frame)


def test_options_validation():
    with pytest.raises(ValueError):
        PropagatorOptions(step=0)
    with pytest.raises(ValueError):
        PropagatorOptions(order=3)
    with pytest.raises(ValueError):
        PropagatorOptions(tolerance=0)


def test_step_grid_hits_breakpoints():
    starts, widths, edges = step_grid(0.0, 10.0, 0.3, (2.5, 7.0))
    ends = starts + widths
    for b in (2.5, 7.0):
        assert np.min(np.abs(ends - b)) < 1e-12
    assert ends[-1] == pytest.approx(10.0)
    assert np.all(widths <= 0.3 + 1e-12)


def test_zero_schedule_is_identity():
    for mode in (ModelMode.REDUCED, ModelMode.FULL):
        u = propagate_unitary(PARAMS.replace(v_blockade=0.0), constant_schedule(0.0, 0.0, 0.0, 100.0), mode)
        np.testing.assert_allclose(u, np.eye(mode.dim), atol=1e-14)
    u0 = propagate_unitary(PARAMS, constant_schedule(1.0, 0.0, 0.0, 0.0), ModelMode.REDUCED)
    np.testing.assert_array_equal(u0, np.eye(7))


def test_open_mode_is_refused():
    with pytest.raises(ValueError):
        propagate_unitary(PARAMS, constant_schedule(1.0, 0.0, 0.0, 10.0), ModelMode.OPEN)


@pytest.mark.parametrize("duration", [37.0, 125.0, 311.7])
def test_rabi_formula(duration):
    omega = mhz(4)
    u = propagate_unitary(PARAMS, constant_schedule(omega, 0.0, 0.3, duration), ModelMode.REDUCED)
    psi = u @ basis_state("10", ModelMode.REDUCED)
    t = duration * 1e-3
    assert abs(psi[3]) ** 2 == pytest.approx(math.cos(omega * t / 2) ** 2, abs=1e-8)
    assert abs(psi[4]) ** 2 == pytest.approx(math.sin(omega * t / 2) ** 2, abs=1e-8)
    assert abs(psi[5]) == 0
    psi11 = u @ basis_state("11", ModelMode.REDUCED)
    assert abs(psi11[5]) ** 2 == pytest.approx(math.cos(math.sqrt(2) * omega * t / 2) ** 2, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(1.0, 40.0), st.floats(0.0, 40.0), st.floats(-30.0, 30.0), st.floats(-3.0, 3.0)),
        min_size=1,
        max_size=5,
    ),
    st.sampled_from([ModelMode.REDUCED, ModelMode.FULL]),
    st.sampled_from(list(Frame)),
)
def test_piecewise_constant_matches_exact_exponentials(segments, mode, frame):
    params = PARAMS.replace(v_blockade=mhz(50))
    sched = piecewise_schedule(segments, frame)
    u = propagate_unitary(params, sched, mode, PropagatorOptions(step=0.5))
    hams = [assemble(o, d, p, params.v_blockade, mode, frame) for _, o, d, p in segments]
    ref = oracles.piecewise_propagator(hams, [s[0] * 1e-3 for s in segments])
    assert np.max(np.abs(u - ref)) <= 1e-8


def test_unitarity_of_protocol_schedules():
    for proto, mode in [("ncgc", ModelMode.REDUCED), ("ncgc", ModelMode.FULL), ("pm", ModelMode.FULL)]:
        sched = ncgc_schedule(PARAMS) if proto == "ncgc" else pm_schedule(500.0)
        u = propagate_unitary(PARAMS, sched, mode)
        assert np.max(np.abs(u.conj().T @ u - np.eye(mode.dim))) <= 1e-8


@pytest.mark.parametrize("order", [2, 4])
def test_step_halving_shows_integrator_order(order):
    sched = pm_schedule(500.0)
    us = [propagate_unitary(PARAMS, sched, ModelMode.REDUCED, PropagatorOptions(step=h, order=order)) for h in (4.0, 2.0, 1.0)]
    ratio = np.max(np.abs(us[0] - us[1])) / np.max(np.abs(us[1] - us[2]))
    assert ratio >= 2**order - 0.5


def test_convergence_check():
    est = check_convergence(PARAMS, ncgc_schedule(PARAMS))
    assert est < 1e-10
    with pytest.raises(ConvergenceError):
        check_convergence(PARAMS, ncgc_schedule(PARAMS), ModelMode.REDUCED, PropagatorOptions(step=25.0, tolerance=1e-12))


def test_include_cd_reproduces_baked_in_sta():
    baked = propagate_unitary(PARAMS, ncgc_schedule(PARAMS))
    bare = ncgc_schedule(PARAMS, NcgcParams(sta_enabled=False))
    added = propagate_unitary(PARAMS, bare, ModelMode.REDUCED, PropagatorOptions(include_cd=True))
    np.testing.assert_allclose(added, baked, atol=1e-12)
    with pytest.raises(ValueError):
        propagate_unitary(PARAMS, ncgc_schedule(PARAMS), ModelMode.REDUCED, PropagatorOptions(include_cd=True))


def _smooth_phase(coeffs, duration):
    def phi(t):
        x = np.asarray(t) / duration
        return sum(c * np.sin((k + 1) * math.pi * x) ** 2 for k, c in enumerate(coeffs))

    def rate(t):
        x = np.asarray(t) / duration
        return sum(
            c * (k + 1) * math.pi / (duration * 1e-3) * np.sin(2 * (k + 1) * math.pi * x) for k, c in enumerate(coeffs)
        )

    return phi, rate


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-4.0, 4.0), min_size=1, max_size=3), st.sampled_from(list(SubspaceId)), st.floats(0.5, 8.0))
def test_counterdiabatic_term_keeps_dressed_state(coeffs, eta, omega_mhz):
    duration = 200.0
    omega = mhz(omega_mhz)
    phi, rate = _smooth_phase(coeffs, duration)

    def h(t):
        t = np.atleast_1d(t)
        out = np.empty(t.shape + (2, 2), dtype=complex)
        for i, (f, r) in enumerate(zip(phi(t), rate(t))):
            out[i] = subspace_hamiltonian(Controls(omega, 0.0, f), eta) + counterdiabatic_term(r, eta)
        return out

    start = dressed_frame(Controls(omega, 0.0, phi(0.0)), eta).lambda_plus
    for t_end in (50.0, 137.0, duration):
        u = time_ordered_exponential(h, 0.0, t_end, 2, step=0.1)
        psi = u @ start
        target = dressed_frame(Controls(omega, 0.0, float(phi(t_end))), eta).lambda_plus
        assert abs(np.vdot(target, psi)) >= 1 - 1e-6


def test_fast_regime_tracks_instantaneous_eigenstates():
    # Omega T = 4 pi: far from adiabatic, yet the dressed populations are kept
    sched = ncgc_schedule(PARAMS)
    times = np.linspace(0, 500, 51)
    for eta in SubspaceId:
        psi0 = np.zeros(7, dtype=complex)
        lam = dressed_frame(Controls(PARAMS.omega, 0.0, 0.0), eta).lambda_plus
        psi0[eta.upper], psi0[eta.lower] = lam
        traj = propagate_state(PARAMS, sched, ModelMode.REDUCED, psi0, times=times)
        for t, psi in zip(times, traj.states):
            # past the flip the tracked branch is lambda_+ of the unflipped phase
            phi = float(sched.controls(t)[2]) - (math.pi if t > 250.0 else 0.0)
            lam_t = dressed_frame(Controls(PARAMS.omega, 0.0, phi), eta).lambda_plus
            pop = abs(np.vdot(lam_t, psi[[eta.upper, eta.lower]])) ** 2
            assert pop >= 1 - 1e-4


def test_propagate_state_basics():
    sched = ncgc_schedule(PARAMS)
    times = [0.0, 100.0, 250.0, 500.0]
    traj = propagate_state(PARAMS, sched, ModelMode.REDUCED, basis_state("00", ModelMode.REDUCED), times=times)
    np.testing.assert_array_equal(traj.states, np.tile(basis_state("00", ModelMode.REDUCED), (4, 1)))
    t11 = propagate_state(PARAMS, sched, ModelMode.REDUCED, basis_state("11", ModelMode.REDUCED), times=times)
    norms = np.linalg.norm(t11.states, axis=1)
    assert np.max(np.abs(norms - 1)) <= 1e-8
    final = t11.states[-1][5]
    assert abs(final) ** 2 == pytest.approx(1.0, abs=1e-3)
    assert abs(abs(np.angle(final)) - math.pi) < 1e-2
    a = propagate_state(PARAMS, sched, ModelMode.REDUCED, basis_state("10", ModelMode.REDUCED))
    b = propagate_state(PARAMS, sched, ModelMode.REDUCED, basis_state("01", ModelMode.REDUCED))
    np.testing.assert_allclose(a.states[:, [3, 4]], b.states[:, [1, 2]], atol=1e-14)


def test_collapse_set_rates_and_structure():
    c = make_collapse_set(1, 4, 30)
    for g, ref in zip(c.gammas_khz, oracles.GAMMAS_1_4_30):
        assert g == pytest.approx(ref, rel=1e-14)
    assert math.sqrt(1 + 16 + 900) == pytest.approx(oracles.SQRT_917)
    l1, l2, l3 = (op / math.sqrt(g) for op, g in zip(c.operators, c.gammas))
    assert l1[basis_index("11"), basis_index("R")] == 1 and l1[basis_index("01"), basis_index("0r")] == 1
    assert l2[basis_index("W"), basis_index("r0")] == 1 and np.count_nonzero(l2) == 3
    np.testing.assert_array_equal(l3, l3.conj().T)
    assert np.trace(l3) == 0 and np.count_nonzero(l3) == 6
    z = make_collapse_set(1, 0, 30)
    assert not np.any(z.operators[1])
    with pytest.raises(ValueError):
        make_collapse_set(0, 0, 0)
    with pytest.raises(ValueError):
        make_collapse_set(-1, 0, 0)


def _rho(psi):
    return np.outer(psi, psi.conj())


def test_lindblad_no_dynamics_is_identity():
    rho0 = _rho(basis_state("R", ModelMode.OPEN))
    sched = constant_schedule(0.0, 0.0, 0.0, 100.0)
    out = lindblad_evolve(PARAMS.replace(v_blockade=0.0), sched, no_collapse(), rho0)
    np.testing.assert_allclose(out, rho0, atol=1e-14)


def test_lindblad_collective_sink_decay_closed_form():
    # only L2: the written operator sums three upper levels into one sink,
    # so |R> has amplitude 2/3 + exp(-3 g t)/3 left after time t
    c = make_collapse_set(0, 4000.0, 0)  # 4 MHz so decay is visible within a microsecond
    g = c.gammas[1]
    rho0 = _rho(basis_state("R", ModelMode.OPEN))
    params = PARAMS.replace(v_blockade=0.0)
    for t in (100.0, 400.0, 1000.0):
        out = lindblad_evolve(params, constant_schedule(0.0, 0.0, 0.0, t), c, rho0, PropagatorOptions(step=1.0))
        amp = 2 / 3 + math.exp(-3 * g * t * 1e-3) / 3
        assert out[6, 6].real == pytest.approx(amp**2, abs=1e-10)
        assert out[8, 8].real == pytest.approx(1 - amp**2 - 2 * (amp - 1) ** 2, abs=1e-10)
    short = lindblad_evolve(params, constant_schedule(0.0, 0.0, 0.0, 1.0), c, rho0, PropagatorOptions(step=0.01))
    assert (1 - short[6, 6].real) / 1e-3 == pytest.approx(2 * g, rel=1e-2)


def test_lindblad_matches_adaptive_reference():
    c = make_collapse_set(100, 400, 3000)  # rates scaled up so dissipation is visible over 100 ns
    sched = ncgc_schedule(PARAMS.replace(duration=100.0))
    params = PARAMS.replace(duration=100.0)
    psi = (basis_state("01", ModelMode.OPEN) + basis_state("11", ModelMode.OPEN)) / math.sqrt(2)
    rho0 = _rho(psi)
    for convention, factor in (("doubled", 1.0), ("standard", 0.5)):
        ours = lindblad_evolve(params, sched, c, rho0, PropagatorOptions(step=0.05), convention)

        def h(t_us):
            om, de, ph = sched.controls(min(t_us * 1e3, 100.0))
            return assemble(om, de, ph, params.v_blockade, ModelMode.OPEN, sched.frame)

        ref = oracles.lindblad_reference(h, c.operators, rho0, 0.05, factor)
        ref2 = oracles.lindblad_reference(h, c.operators, ref, 0.05, factor)
        assert np.max(np.abs(ours - ref2)) < 1e-6


def test_lindblad_rhs_matches_superoperator():
    c = make_collapse_set(1, 4, 30)
    rng = np.random.default_rng(3)
    a = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    zero = np.zeros((9, 9))
    via_super = (dissipator(c) @ rho.reshape(-1)).reshape(9, 9)
    np.testing.assert_allclose(lindblad_rhs(zero, c, rho), via_super, atol=1e-14)
    with pytest.raises(ValueError):
        dissipator(c, "other")


def test_lindblad_invariants_at_reference_settings():
    c = make_collapse_set(1, 4, 30)
    psi = sum(basis_state(b, ModelMode.OPEN) for b in ("00", "01", "10", "11")) / 2
    out = lindblad_evolve(PARAMS, ncgc_schedule(PARAMS), c, _rho(psi))
    assert abs(np.trace(out) - 1) <= 1e-6
    assert np.min(np.linalg.eigvalsh(out)) >= -1e-8
    np.testing.assert_array_equal(out, out.conj().T)


def test_lindblad_without_collapse_matches_pure_evolution():
    psi = (basis_state("10", ModelMode.OPEN) + basis_state("11", ModelMode.OPEN)) / math.sqrt(2)
    sched = ncgc_schedule(PARAMS)
    out = lindblad_evolve(PARAMS, sched, no_collapse(), _rho(psi))
    traj = propagate_state(PARAMS, sched, ModelMode.FULL, psi[:8])
    ref = np.zeros((9, 9), dtype=complex)
    ref[:8, :8] = _rho(traj.states[-1])
    assert np.max(np.abs(out - ref)) <= 1e-6


def test_lindblad_rejects_invalid_states():
    sched = constant_schedule(0.0, 0.0, 0.0, 10.0)
    bad_trace = 2 * _rho(basis_state("00", ModelMode.OPEN))
    with pytest.raises(ValueError):
        lindblad_evolve(PARAMS, sched, no_collapse(), bad_trace)
    negative = np.diag([1.5, -0.5] + [0.0] * 7).astype(complex)
    with pytest.raises(ValueError):
        lindblad_evolve(PARAMS, sched, no_collapse(), negative)
    with pytest.raises(ValueError):
        lindblad_evolve(PARAMS, sched, no_collapse(), np.eye(8) / 8)
