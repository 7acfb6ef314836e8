import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gprinvert import io
from gprinvert.em_sim import MaterialLayer, Pulse, Scene, Trace
from gprinvert.errors import InvalidArgumentError

SCENE = {
    "antenna_height_m": 0.1,
    "layers": [
        {"thickness_m": 0.2, "eps_r": "unknown", "sigma_s_per_m": 0.001},
        {"thickness_m": 0.2, "eps_r": 20.0, "sigma_s_per_m": 0.04},
    ],
    "basement_eps_r": 1.0,
}


def test_scene_with_unknown_layer():
    scene, unknown = io.scene_from_dict(SCENE)
    assert unknown == (0,)
    assert scene.layers[0].relative_permittivity == io.PLACEHOLDER_EPS
    assert scene.layers[1].conductivity == 0.04
    assert io.scene_to_dict(scene, unknown) == SCENE


def test_sigma_defaults_to_lossless():
    obj = {"antenna_height_m": 0.0, "layers": [{"thickness_m": 0.1, "eps_r": 4}], "basement_eps_r": 9}
    assert io.scene_from_dict(obj)[0].layers[0].conductivity == 0.0


@pytest.mark.parametrize(
    "patch",
    [
        {"layers": []},
        {"antenna_height_m": -0.1},
        {"antenna_height_m": "high"},
        {"basement_eps_r": 0.5},
        {"layers": [{"thickness_m": 0.1, "eps_r": 4}] * 2 + [{"thickness_m": 0.1, "eps_r": "unknown"}]},
        {"layers": [{"thickness_m": 0.1}]},
        {"layers": [{"thickness_m": float("nan"), "eps_r": 4}]},
    ],
)
def test_invalid_scene_configs(patch):
    with pytest.raises(ValueError):
        io.scene_from_dict({**SCENE, **patch})


def test_load_scene_errors(tmp_path):
    with pytest.raises(InvalidArgumentError):
        io.load_scene(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InvalidArgumentError):
        io.load_scene(bad)


@given(
    samples=arrays(np.float64, st.integers(2, 50), elements=st.floats(-1e6, 1e6)),
    dt=st.floats(1e-13, 1e-9),
    t0=st.floats(-1e-9, 1e-9),
)
def test_trace_csv_roundtrip_is_exact(samples, dt, t0):
    trace = Trace(dt, samples, t0)
    back = io.trace_from_csv(io.trace_to_csv(trace))
    assert np.array_equal(back.samples, trace.samples)
    assert np.allclose(back.times, trace.times, rtol=0, atol=1e-9 * dt)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "t,y\n0,1\n1,2\n",
        "time_s,amplitude\n0,1\n",
        "time_s,amplitude\n0,1\n0,2\n",
        "time_s,amplitude\n0,1\n1,2\n3,4\n",
        "time_s,amplitude\n0,1\n1,x\n",
    ],
)
def test_invalid_trace_csv(text):
    with pytest.raises(InvalidArgumentError):
        io.trace_from_csv(text)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    io.write_atomic(target, "a\nb\n")
    assert target.read_bytes() == b"a\nb\n"
    assert [p.name for p in target.parent.iterdir()] == ["out.txt"]


def test_pulse_roundtrip():
    pulse = Pulse("ricker", 0.7e9, 2.0)
    back = io.pulse_from_dict(json.loads(io.dump_json(io.pulse_to_dict(pulse))))
    assert back == pulse


def test_dump_json_rejects_nan():
    with pytest.raises(ValueError):
        io.dump_json({"x": float("nan")})


def test_scene_dict_roundtrip_known():
    scene = Scene(0.05, (MaterialLayer(0.2, 4.0, 0.001), MaterialLayer(0.3, 20.0, 0.04)), 9.0)
    assert io.scene_from_dict(io.scene_to_dict(scene)) == (scene, ())
