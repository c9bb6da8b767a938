import dataclasses
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydberg_ncgc.evolve import PropagatorOptions, propagate_unitary
from rydberg_ncgc.experiments import (
    QftConvention,
    QftTimingModel,
    Series,
    SweepReport,
    adiabaticity_factor,
    blockade_sweep,
    content_hash,
    decoherence_scan,
    find_crossing,
    format_csv,
    format_number,
    gate_dynamics,
    gate_target,
    noise_monte_carlo,
    qft_report,
    qft_timing,
    run_gate,
    run_schedule,
    systematic_sweep,
    write_outputs,
)
from rydberg_ncgc.metrics import cz_target
from rydberg_ncgc.model import ModelMode, PhysicalParams, mhz
from rydberg_ncgc.pulses import NcgcParams, ncgc_schedule

# below this the fidelity deficit is rounding, not physics
FIDELITY_FLOOR = 1e-12


def test_ncgc_baseline_and_adiabaticity_factor():
    res = run_gate("ncgc")
    assert res.fidelity >= 0.9999
    # Omega T = 4 pi against a half sweep of pi / 2
    assert res.meta["k_adiabatic"] == pytest.approx(8.0)
    assert adiabaticity_factor(PhysicalParams(duration=250.0), NcgcParams()) == pytest.approx(4.0)


def test_comparison_protocols_baselines():
    assert run_gate("rm").fidelity > 0.9999
    assert run_gate("pm").fidelity > 0.999
    assert run_gate("pm", mode=ModelMode.FULL).fidelity > 0.995


def test_zero_length_gate_scores_identity_overlap():
    params = PhysicalParams()
    base = ncgc_schedule(params)
    empty = dataclasses.replace(base, duration=0.0, breakpoints=())
    res = run_schedule(empty, params, cz_target(math.pi))
    assert res.fidelity == pytest.approx(0.25)


def test_targets():
    np.testing.assert_array_equal(gate_target("ncgc", PhysicalParams()), cz_target(math.pi))
    t = gate_target("pm", PhysicalParams())
    assert np.allclose(np.abs(np.diag(t)), 1.0)
    # the fitted target is insensitive to the perturbed parameters
    np.testing.assert_array_equal(gate_target("pm", PhysicalParams(delta=0.3)), t)


def test_gate_dynamics_shows_pi_phase():
    dyn = gate_dynamics()
    assert dyn.inputs == ("01", "10", "11")
    assert dyn.times[0] == 0.0 and dyn.times[-1] == 500.0
    np.testing.assert_allclose(np.abs(dyn.phase[:, -1]), math.pi, atol=1e-2)
    assert np.all(dyn.lower[:, -1] >= 0.999)
    assert np.all(np.max(dyn.upper, axis=1) > 0.9)


def test_systematic_sweep_ordering_and_baselines():
    rep = systematic_sweep(["ncgc", "pm", "rm"], "kappa1", [-0.1, 0.0, 0.1])
    ncgc, pm, rm = (rep.values(k) for k in ("ncgc", "pm", "rm"))
    assert rm[2] < ncgc[2]
    assert rm[0] < pm[0] < ncgc[0] and rm[2] < pm[2] < ncgc[2]
    for name in ("ncgc", "pm", "rm"):
        assert rep.values(name)[1] == pytest.approx(run_gate(name).fidelity, abs=1e-14)
    assert rep.header()[0] == "kappa1"
    with pytest.raises(ValueError):
        systematic_sweep(["ncgc"], "omega", [0.0])


def test_ncgc_is_flat_in_rabi_error():
    rep = systematic_sweep(["ncgc"], "kappa1", np.linspace(-0.1, 0.1, 9))
    deficit = 1.0 - rep.values("ncgc")
    base = deficit[4]
    assert np.max(deficit) <= 10 * max(base, FIDELITY_FLOOR)
    assert np.min(rep.values("ncgc")) >= 0.999


def test_detuning_offset_hurts_symmetrically():
    rep = systematic_sweep(["ncgc"], "kappa2", [-0.1, 0.0, 0.1])
    f = rep.values("ncgc")
    assert f[0] == pytest.approx(f[2], abs=1e-9) and f[0] < f[1]


def test_noise_monte_carlo_without_noise_runs_once():
    rep = noise_monte_carlo("ncgc", [0.0], [0.0], trials=5)
    assert rep.series["ncgc"].std[0] == 0.0
    assert rep.seeds[0] == ((0, 0),)
    assert rep.values("ncgc")[0] == pytest.approx(run_gate("ncgc").fidelity, abs=1e-15)


def test_noise_monte_carlo_is_deterministic():
    a = noise_monte_carlo("ncgc", [0.0, 0.1], [0.1], trials=3, seed=11)
    b = noise_monte_carlo("ncgc", [0.0, 0.1], [0.1], trials=3, seed=11, threads=2)
    assert a.to_csv() == b.to_csv()
    c = noise_monte_carlo("ncgc", [0.0, 0.1], [0.1], trials=3, seed=12)
    assert a.to_csv() != c.to_csv()
    assert a.seeds[1] == ((11, 0), (11, 1), (11, 2))


def test_rabi_noise_alone_is_harmless_for_ncgc():
    rep = noise_monte_carlo("ncgc", [0.1], [0.0], trials=10, seed=3)
    assert rep.values("ncgc")[0] > 0.9999


def test_noise_monte_carlo_validation():
    with pytest.raises(ValueError):
        noise_monte_carlo("ncgc", [0.0], [0.0], trials=0)


def test_blockade_sweep_default_grid():
    rep = blockade_sweep()
    assert set(rep.series) == {"ncgc_T500", "ncgc_T250", "pm_T500", "pm_T250"}
    np.testing.assert_allclose(rep.grid(), [200, 300, 400, 600, 1000])
    assert rep.values("ncgc_T250")[1] > rep.values("ncgc_T500")[1]
    with pytest.raises(ValueError):
        blockade_sweep(["rm"])


def test_blockade_sweep_converges_to_reduced_model():
    reduced = run_gate("ncgc").fidelity
    v = np.geomspace(mhz(100), mhz(1000), 5)
    rep = blockade_sweep(["ncgc"], v, [500.0])
    gap = np.abs(rep.values("ncgc_T500") - reduced)
    assert np.all(np.diff(gap) < 0)
    far = blockade_sweep(["ncgc", "pm"], [mhz(5000)], [500.0])
    assert abs(far.values("ncgc_T500")[0] - reduced) < 1e-3
    assert abs(far.values("pm_T500")[0] - run_gate("pm").fidelity) < 1e-3


def test_decoherence_scan_is_monotone_and_reports_crossings():
    rep = decoherence_scan(np.geomspace(40, 1000, 8))
    for name in ("uniform", "average", "in_11"):
        assert np.all(np.diff(rep.values(name)) <= 1e-4)
    assert set(rep.summary["crossings_ns"]) == {"uniform", "average"}
    assert rep.metadata["gammas_khz"][2] == pytest.approx(29.72061840077219, rel=1e-9)


def test_decoherence_without_rates_is_closed_system():
    durations = [100.0, 500.0]
    rep = decoherence_scan(durations, rates_khz=(0.0, 0.0, 0.0))
    comp = [0, 1, 3, 5]
    psi = np.zeros(8, dtype=complex)
    psi[comp] = 0.5
    ideal = np.zeros(8, dtype=complex)
    ideal[comp] = cz_target(math.pi) @ np.full(4, 0.5)
    for i, T in enumerate(durations):
        params = PhysicalParams(duration=T)
        u = propagate_unitary(params, ncgc_schedule(params), ModelMode.FULL)
        closed = abs(np.vdot(ideal, u @ psi))
        assert rep.values("uniform")[i] == pytest.approx(closed, abs=1e-8)
    assert rep.summary["crossings_ns"]["uniform"]["0.99"] is None


def test_find_crossing_interpolates():
    t = np.array([0.0, 10.0, 20.0])
    assert find_crossing(t, np.array([1.0, 0.995, 0.985]), 0.99) == pytest.approx(15.0)
    assert find_crossing(t, np.ones(3), 0.99) is None


def test_qft_examples():
    two = qft_timing(QftTimingModel(2))
    assert two.cyclic_total == 1250 and two.ncgc_total == 750
    text = qft_timing(QftTimingModel(2, convention="paper_text"))
    assert text.ncgc_total == 625
    eight = qft_timing(QftTimingModel(8))
    assert eight.ncgc_total < eight.cyclic_total
    assert isinstance(eight.ncgc_total, Fraction)
    with pytest.raises(ValueError):
        QftTimingModel(1)
    assert QftConvention.parse("PaperText") is QftConvention.PAPER_TEXT


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.sampled_from(list(QftConvention)))
def test_qft_totals_and_growth(n, conv):
    res = qft_timing(QftTimingModel(n, convention=conv))
    assert res.cyclic_total == n * 250 + 3 * 250 * n * (n - 1) // 2
    assert res.ncgc_total < res.cyclic_total
    nxt = qft_timing(QftTimingModel(n + 1, convention=conv))
    assert nxt.cyclic_total - nxt.ncgc_total > res.cyclic_total - res.ncgc_total
    assert sum(count for _, _, count, _ in res.breakdown) == n * (n - 1) // 2


def test_qft_report_series():
    rep = qft_report()
    assert rep.grid().tolist() == list(range(2, 13))
    assert set(rep.series) == {"cyclic", "ncgc_proportional", "ncgc_paper_text"}


def test_sweep_report_validation():
    s = Series(np.zeros(2), np.zeros(2), 1)
    with pytest.raises(ValueError):
        SweepReport("x", ("a",), ((1.0,), (1.0,)), {"s": s}, ((), ()))
    with pytest.raises(ValueError):
        SweepReport("x", ("a",), ((1.0,),), {"s": s}, ((),))
    with pytest.raises(ValueError):
        SweepReport("x", ("a",), (), {}, ())


def test_csv_format_is_fixed():
    text = format_csv(["a", "b"], [[0.1, 2], [1 / 3, Fraction(1, 2)]])
    assert text == "a,b\n0.10000000000000001,2\n0.33333333333333331,0.5\n"
    assert format_number(np.float64(1e-20)) == "9.9999999999999995e-21"


def test_outputs_carry_a_content_hash(tmp_path):
    csv_path, side_path = write_outputs(tmp_path / "out.csv", "a\n1\n", {"k": 1})
    body = json.loads(side_path.read_text())
    assert body["content_hash"] == content_hash(csv_path.read_bytes())
    # git's hash of the empty blob
    assert content_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


def test_gate_runs_honour_integrator_options():
    coarse = run_gate("ncgc", opts=PropagatorOptions(step=0.5))
    assert coarse.meta["step_ns"] == 0.5
    assert coarse.fidelity == pytest.approx(run_gate("ncgc").fidelity, abs=1e-8)
