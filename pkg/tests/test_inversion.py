import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gprinvert import em_sim, harness
from gprinvert.em_sim import Pulse, Trace
from gprinvert.errors import DegenerateSignalError, InvalidArgumentError, InversionError
from gprinvert.inversion import (
    InversionConfig,
    Observation,
    SearchSpace,
    aggregate_objective,
    calibrate_pulse,
    default_bounds,
    invert,
    permittivity_to_moisture,
    relative_error,
)
from gprinvert.optimize import Dimension, initial_design_size

LOW = Pulse("gaussian", harness.LOW_FREQUENCY)
HIGH = Pulse("gaussian", harness.HIGH_FREQUENCY)


def observe(scene, pulse, *, refine):
    bound = scene.with_permittivities([40.0, 40.0])
    window = em_sim.required_record_window(bound, LOW)
    return em_sim.run_fdtd(scene, pulse, em_sim.build_grid(bound, pulse, window, refine=refine))


# -- misfit ---------------------------------------------------------------------------------


def test_relative_error_examples():
    y = np.array([0.3, -1.2, 2.0])
    assert relative_error(y, y) == 0.0
    assert relative_error(y, np.zeros(3)) == pytest.approx(100.0, rel=1e-9)
    assert relative_error([1.0, 0.0], [0.0, 1.0]) == pytest.approx(141.421356, abs=1e-6)
    assert relative_error([2.0], [1.0]) == pytest.approx(50.0, rel=1e-9)


def test_relative_error_errors():
    with pytest.raises(DegenerateSignalError):
        relative_error([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        relative_error([1.0, 0.0], [1.0])


# squared magnitudes below ~1e-154 underflow to zero energy
finite = st.floats(-10, 10).filter(lambda v: v == 0 or abs(v) > 1e-100)


@given(y=st.lists(finite, min_size=1, max_size=20), k=st.floats(0.1, 10))
def test_relative_error_scale_invariant(y, k):
    y = np.array(y)
    if not np.any(y):
        return
    z = np.roll(y, 1)
    assert relative_error(k * y, k * z) == pytest.approx(relative_error(y, z), rel=1e-9)


def test_aggregate_examples():
    assert aggregate_objective({"a": 37.0}) == 37.0
    assert aggregate_objective({"a": 30.0, "b": 50.0}) == 40.0
    assert aggregate_objective({"a": 30.0, "b": 50.0}, {"a": 3, "b": 1}) == 35.0
    with pytest.raises(InvalidArgumentError):
        aggregate_objective({})


def test_topp_examples():
    assert permittivity_to_moisture(20.0) == pytest.approx(0.3454, abs=1e-4)
    assert permittivity_to_moisture(3.0) == pytest.approx(0.0298, abs=1e-4)
    assert permittivity_to_moisture(1.0) == 0.0
    with pytest.raises(InvalidArgumentError):
        permittivity_to_moisture(0.5)


@given(eps=st.floats(1.0, 40.0))
def test_topp_matches_polynomial_oracle(eps):
    assert permittivity_to_moisture(eps) == pytest.approx(oracles.topp(eps), abs=1e-12)


# -- configuration ------------------------------------------------------------------------


def test_config_validation():
    scene = harness.two_layer_scene(4.0, 20.0)
    with pytest.raises(InvalidArgumentError):
        InversionConfig(scene, free_layers=(0, 2))
    with pytest.raises(InvalidArgumentError):
        InversionConfig(scene, bounds=SearchSpace.from_bounds(a=(0.5, 40.0), b=(1.0, 40.0)))
    with pytest.raises(InvalidArgumentError):
        InversionConfig(scene, free_layers=(1,))
    with pytest.raises(InvalidArgumentError):
        Observation("low", LOW, Trace(1e-12, [1.0, 0.0]), weight=0.0)
    config = InversionConfig(scene)
    assert config.scene_at([3.0, 7.0]).layers[1].relative_permittivity == 7.0
    assert config.scene_at([3.0, 7.0]).layers[1].conductivity == scene.layers[1].conductivity


def test_zero_energy_observations():
    scene = harness.two_layer_scene(4.0, 20.0)
    flat = Trace(1e-11, np.zeros(200))
    with pytest.raises(InversionError):
        invert([Observation("low", LOW, flat)], InversionConfig(scene, budget=5))
    real = observe(scene, HIGH, refine=1)
    result = invert([Observation("low", LOW, flat), Observation("high", HIGH, real)],
                    InversionConfig(scene, budget=5))
    assert set(result.per_frequency_re) == {"high"}


# -- inversion ------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def scene_4_20():
    return harness.two_layer_scene(4.0, 20.0)


def test_same_solver_dual_recovery(scene_4_20):
    obs = [Observation("low", LOW, observe(scene_4_20, LOW, refine=1)),
           Observation("high", HIGH, observe(scene_4_20, HIGH, refine=1))]
    result = invert(obs, InversionConfig(scene_4_20, budget=120, seed=0))
    assert result.eps_top == pytest.approx(4.0, rel=0.10)
    assert result.eps_soil == pytest.approx(20.0, rel=0.10)
    assert result.aggregate_re <= 5.0
    assert result.aggregate_re == pytest.approx(np.mean(list(result.per_frequency_re.values())))
    assert len(result.run.history) <= 120
    assert default_bounds().contains(result.estimated)


def test_fine_grid_dual_recovery(scene_4_20):
    obs = [Observation("low", LOW, observe(scene_4_20, LOW, refine=2)),
           Observation("high", HIGH, observe(scene_4_20, HIGH, refine=2))]
    result = invert(obs, InversionConfig(scene_4_20, budget=120, seed=0))
    assert result.eps_top == pytest.approx(4.0, rel=0.15)
    assert result.eps_soil == pytest.approx(20.0, rel=0.15)


def test_budget_at_initial_design_returns_best_design_point(scene_4_20):
    obs = [Observation("high", HIGH, observe(scene_4_20, HIGH, refine=1))]
    n = initial_design_size(2)
    result = invert(obs, InversionConfig(scene_4_20, budget=n, seed=3))
    values = [v for _, v in result.run.history]
    assert len(values) == n
    assert result.aggregate_re == min(values)
    assert result.estimated == result.run.history[int(np.argmin(values))][0]


def test_single_free_layer(scene_4_20):
    obs = [Observation("high", HIGH, observe(scene_4_20, HIGH, refine=2))]
    config = InversionConfig(scene_4_20, bounds=SearchSpace((Dimension("eps_soil", 1.0, 40.0),)),
                             free_layers=(1,), budget=25, seed=0)
    result = invert(obs, config)
    assert result.eps_top is None
    assert result.eps_soil == pytest.approx(20.0, rel=0.05)


def test_raw_comparison_mode(scene_4_20):
    obs = [Observation("high", HIGH, observe(scene_4_20, HIGH, refine=2))]
    result = invert(obs, InversionConfig(scene_4_20, compare_on="raw", budget=60, seed=0))
    assert result.eps_top == pytest.approx(4.0, rel=0.15)


# -- calibration ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def known_scene():
    return harness.two_layer_scene(4.0, 20.0)


def fine_observation(scene, pulse):
    window = em_sim.required_record_window(scene, Pulse("gaussian", 0.4e9))
    return em_sim.run_fdtd(scene, pulse, em_sim.build_grid(scene, Pulse("gaussian", 2.5e9), window, refine=2))


@pytest.mark.parametrize("kind, freq", [("gaussian", 1.578e9), ("ricker", 0.7e9)])
def test_calibration_recovers_kind_and_frequency(known_scene, kind, freq):
    observed = fine_observation(known_scene, Pulse(kind, freq))
    result = calibrate_pulse(observed, known_scene, ["gaussian", "ricker"], (0.4e9, 2.5e9))
    assert result.pulse.kind.value == kind
    assert result.pulse.center_frequency == pytest.approx(freq, rel=0.05)
    assert result.pulse.delay == pytest.approx(Pulse(kind, freq).delay, rel=0.05)


def test_calibration_restricted_kinds(known_scene):
    observed = fine_observation(known_scene, Pulse("ricker", 0.7e9))
    result = calibrate_pulse(observed, known_scene, ["gaussian"], (0.4e9, 2.5e9), budget=10)
    assert result.pulse.kind.value == "gaussian"
    assert list(result.per_kind) == ["gaussian"]


def test_calibration_argument_errors(known_scene):
    observed = fine_observation(known_scene, Pulse("ricker", 0.7e9))
    with pytest.raises(InvalidArgumentError):
        calibrate_pulse(observed, known_scene, [], (0.4e9, 2.5e9))
    with pytest.raises(InvalidArgumentError):
        calibrate_pulse(observed, known_scene, ["gaussian"], (2.5e9, 0.4e9))
    with pytest.raises(ValueError):
        calibrate_pulse(observed, known_scene, ["sinc"], (0.4e9, 2.5e9))
