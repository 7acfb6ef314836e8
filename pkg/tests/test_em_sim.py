import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gprinvert import em_sim, signals
from gprinvert.em_sim import C0, GridSpec, MaterialLayer, Pulse, PulseKind, Scene
from gprinvert.errors import InvalidArgumentError, NumericalFailureError, StabilityError


def air_scene(depth=0.5):
    return Scene(0.0, (MaterialLayer(depth, 1.0),), 1.0)


# -- pulses ------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["gaussian", "ricker"])
def test_pulse_peaks_at_delay_with_amplitude(kind):
    pulse = Pulse(kind, 1e9)
    assert pulse.waveform(pulse.delay) == pytest.approx(1.0, abs=1e-15)
    scaled = Pulse(kind, 1e9, amplitude=2.5)
    t = np.append(np.linspace(0, 4e-9, 4001), scaled.delay)
    assert np.max(np.abs(scaled.waveform(t))) == pytest.approx(2.5, rel=1e-12)


def test_default_delays():
    assert Pulse("gaussian", 1e9).delay == pytest.approx(1e-9)
    assert Pulse("ricker", 1e9).delay == pytest.approx(math.sqrt(2) * 1e-9)


@given(tau=st.floats(0.0, 2.0))
def test_gaussian_is_even_about_delay(tau):
    pulse = Pulse("gaussian", 1e9)
    d = tau / pulse.center_frequency
    assert pulse.waveform(pulse.delay - d) == pytest.approx(pulse.waveform(pulse.delay + d), rel=1e-12, abs=1e-300)


def test_ricker_matches_closed_form():
    f = 0.7e9
    pulse = Pulse("ricker", f)
    t = np.linspace(0, 6e-9, 97)
    tau = t - pulse.delay
    x = (math.pi * f * tau) ** 2
    assert np.allclose(pulse.waveform(t), (1 - 2 * x) * np.exp(-x), atol=1e-14)


def test_pulse_validation():
    with pytest.raises(InvalidArgumentError):
        Pulse("gaussian", 0.0)
    with pytest.raises(InvalidArgumentError):
        Pulse("gaussian", 1e9, amplitude=-1.0)
    with pytest.raises(ValueError):
        PulseKind.parse("square")
    assert PulseKind.parse("Ricker") is PulseKind.RICKER


def test_synthesize_pulse():
    pulse = Pulse("gaussian", 1e9)
    trace = em_sim.synthesize_pulse(pulse, 1e-11, 600)
    assert len(trace) == 600
    assert trace.samples[100] == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        em_sim.synthesize_pulse(pulse, 0.0, 10)
    with pytest.raises(InvalidArgumentError):
        em_sim.synthesize_pulse(pulse, 1e-11, 0)


# -- types -------------------------------------------------------------------------


def test_layer_and_scene_validation():
    with pytest.raises(InvalidArgumentError):
        MaterialLayer(0.0, 4.0)
    with pytest.raises(InvalidArgumentError):
        MaterialLayer(0.1, 0.5)
    with pytest.raises(InvalidArgumentError):
        MaterialLayer(0.1, 4.0, -1e-3)
    with pytest.raises(InvalidArgumentError):
        Scene(0.1, (), 1.0)
    scene = Scene(0.1, (MaterialLayer(0.2, 4.0), MaterialLayer(0.3, 9.0)), 25.0)
    assert scene.total_depth == pytest.approx(0.6)
    assert scene.max_permittivity == 25.0


def test_trace_is_immutable_and_validated():
    trace = em_sim.Trace(1e-12, np.arange(4.0))
    with pytest.raises(ValueError):
        trace.samples[0] = 1.0
    with pytest.raises(InvalidArgumentError):
        em_sim.Trace(1e-12, [1.0])
    with pytest.raises(InvalidArgumentError):
        em_sim.Trace(0.0, [1.0, 2.0])
    with pytest.raises(InvalidArgumentError):
        em_sim.Trace(1e-12, [1.0, np.nan])


# -- grid ------------------------------------------------------------------------------


def test_build_grid_air_1ghz():
    grid = em_sim.build_grid(air_scene(), Pulse("gaussian", 1e9), 5e-9)
    assert grid.dz <= 0.03
    assert grid.courant <= 0.99 + 1e-12


def test_build_grid_eps25_2ghz():
    scene = Scene(0.0, (MaterialLayer(0.2, 25.0),), 1.0)
    grid = em_sim.build_grid(scene, Pulse("gaussian", 2e9), 5e-9)
    assert grid.dz <= 0.003
    assert grid.courant <= 0.99 + 1e-12


@settings(max_examples=40, deadline=None)
@given(
    f=st.floats(1e8, 3e9),
    eps=st.floats(1.0, 40.0),
    depth=st.floats(0.01, 0.5),
    refine=st.integers(1, 3),
)
def test_grid_invariants(f, eps, depth, refine):
    scene = Scene(0.0, (MaterialLayer(depth, eps),), 1.0)
    pulse = Pulse("ricker", f)
    grid = em_sim.build_grid(scene, pulse, 1e-9, refine=refine)
    assert grid.courant <= 0.99 * (1 + 1e-12)
    assert grid.dz <= C0 / (pulse.max_frequency * math.sqrt(eps)) / 10 * (1 + 1e-12)
    assert (grid.cell_count - grid.source_index) * grid.dz >= scene.total_depth


def test_courant_violation_refuses_to_run():
    scene, pulse = air_scene(), Pulse("gaussian", 1e9)
    good = em_sim.build_grid(scene, pulse, 3e-9)
    bad = GridSpec(good.dz, 1.01 * good.dz / C0, good.cell_count, good.step_count)
    with pytest.raises(StabilityError):
        em_sim.run_fdtd(scene, pulse, bad)


def test_coarse_grid_rejected():
    scene, pulse = air_scene(), Pulse("gaussian", 1e9)
    good = em_sim.build_grid(scene, pulse, 3e-9)
    coarse = GridSpec(2 * good.dz, good.dt, good.cell_count, good.step_count)
    with pytest.raises(InvalidArgumentError):
        em_sim.run_fdtd(scene, pulse, coarse)


def test_nan_mid_run_reports_step():
    scene, pulse = air_scene(), Pulse("gaussian", 1e9)
    grid = em_sim.build_grid(scene, pulse, 3e-9)
    source = np.zeros(grid.step_count)
    source[57] = np.inf
    with pytest.raises(NumericalFailureError) as info:
        em_sim.run_fdtd(scene, pulse, grid, source=source)
    assert info.value.step == 57


# -- solver physics ---------------------------------------------------------------------


@pytest.mark.parametrize("refine, tol", [(1, 0.02), (2, 0.005)])
def test_air_scene_is_the_direct_wavelet(refine, tol):
    pulse = Pulse("gaussian", 1e9)
    scene = air_scene()
    trace = em_sim.run_fdtd(scene, pulse, em_sim.build_grid(scene, pulse, 8e-9, refine=refine))
    peak = np.max(np.abs(trace.samples))
    assert peak == pytest.approx(1.0, rel=tol)
    assert np.allclose(trace.samples, pulse.waveform(trace.times), atol=tol)
    late = trace.times > pulse.delay + 3 * pulse.period
    assert np.max(np.abs(trace.samples[late])) < 0.01 * peak


def test_first_reflection_delay_over_eps9():
    pulse = Pulse("ricker", 2e9)
    scene = Scene(0.1, (MaterialLayer(0.3, 9.0),), 9.0)
    grid = em_sim.build_grid(scene, pulse, 4e-9, refine=2)
    env = signals.envelope(em_sim.run_fdtd(scene, pulse, grid))
    peaks = signals.find_peaks(env)
    assert peaks.separation() == pytest.approx(2 * 0.1 / C0, rel=0.02)
    assert 2 * 0.1 / C0 == pytest.approx(0.667e-9, rel=1e-3)


def test_reflection_ratio_eps9():
    assert oracles.reflection_ratio(9.0) == pytest.approx(0.5, rel=0.05)


def test_reflection_polarity_inverts_into_denser_medium():
    pulse = Pulse("ricker", 1.5e9)
    scene = Scene(0.3, (MaterialLayer(0.3, 9.0),), 9.0)
    trace = em_sim.run_fdtd(scene, pulse, em_sim.build_grid(scene, pulse, 5e-9))
    t_echo = pulse.delay + 2 * 0.3 / C0
    i = int(round(t_echo / trace.dt))
    assert trace.samples[i] < 0 < trace.samples[int(round(pulse.delay / trace.dt))]


def test_time_of_flight_is_grid_independent():
    pulse = Pulse("ricker", 1e9)
    scene = Scene(0.3, (MaterialLayer(0.3, 4.0),), 4.0)
    times = []
    for refine in (1, 2, 4):
        grid = em_sim.build_grid(scene, pulse, 5e-9, refine=refine)
        env = signals.envelope(em_sim.run_fdtd(scene, pulse, grid))
        times.append([oracles.sub_sample_peak(env, t) for t in signals.find_peaks(env).times[:2]])
    times = np.array(times)
    assert np.ptp(times[:, 0]) < 2e-12
    assert np.ptp(times[:, 1]) < 5e-12


@pytest.mark.parametrize("eps", [1.0, 4.0, 9.0, 25.0, 40.0])
@pytest.mark.parametrize("kind", ["gaussian", "ricker"])
def test_absorbing_boundary_residual_below_one_percent(kind, eps):
    # residual = difference from a run whose terminations are too far away to be reached
    pulse = Pulse(kind, 1e9)
    scene = Scene(0.0, (MaterialLayer(0.05, eps),), eps)
    grid = em_sim.build_grid(scene, pulse, 8e-9)
    far = dataclasses.replace(grid, cell_count=grid.cell_count + 4000, source_index=grid.source_index + 2000)
    near = em_sim.run_fdtd(scene, pulse, grid).samples
    reference = em_sim.run_fdtd(scene, pulse, far).samples
    assert np.max(np.abs(near - reference)) < 0.01 * np.max(np.abs(reference))


def test_lossy_medium_decays():
    pulse = Pulse("ricker", 1e9)
    lossless = Scene(0.0, (MaterialLayer(0.2, 4.0),), 1.0)
    lossy = Scene(0.0, (MaterialLayer(0.2, 4.0, 0.02),), 1.0)
    grid = em_sim.build_grid(lossless, pulse, 6e-9)
    a = em_sim.run_fdtd(lossless, pulse, grid)
    b = em_sim.run_fdtd(lossy, pulse, grid)
    echo = a.times > pulse.delay + 1.5 * pulse.period
    assert np.max(np.abs(b.samples[echo])) < np.max(np.abs(a.samples[echo]))


@settings(max_examples=15, deadline=None)
@given(eps=st.floats(1.0, 30.0), depth=st.floats(0.05, 0.3), sigma=st.floats(0.0, 0.05))
def test_traces_are_finite_and_deterministic(eps, depth, sigma):
    pulse = Pulse("gaussian", 1e9)
    scene = Scene(0.05, (MaterialLayer(depth, eps, sigma),), 1.0)
    grid = em_sim.build_grid(scene, pulse, em_sim.required_record_window(scene, pulse))
    a = em_sim.run_fdtd(scene, pulse, grid)
    b = em_sim.run_fdtd(scene, pulse, grid)
    assert np.all(np.isfinite(a.samples))
    assert a.identical(b)


# -- batch -----------------------------------------------------------------------------


def test_batch_run_contract():
    pulse = Pulse("gaussian", 1e9)
    scene = air_scene()
    grid = em_sim.build_grid(scene, pulse, 3e-9)
    assert em_sim.batch_run([]) == []
    [one] = em_sim.batch_run([(scene, pulse, grid)])
    assert one.identical(em_sim.run_fdtd(scene, pulse, grid))
    a, b = em_sim.batch_run([(scene, pulse, grid)] * 2, max_workers=2)
    assert a.identical(b)


def test_batch_run_reports_errors_in_place():
    pulse = Pulse("gaussian", 1e9)
    scene = air_scene()
    grid = em_sim.build_grid(scene, pulse, 3e-9)
    bad = GridSpec(grid.dz, 2 * grid.dt, grid.cell_count, grid.step_count)
    out = em_sim.batch_run([(scene, pulse, grid), (scene, pulse, bad), (scene, pulse, grid)])
    assert isinstance(out[1], em_sim.JobError)
    assert isinstance(out[1].error, StabilityError)
    assert out[0].identical(out[2])
