import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

#: criterion number -> (passed, description), filled by the acceptance tests
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    """Compile the FDTD kernel once so timings measure solves, not the JIT."""
    from gprinvert import em_sim

    scene = em_sim.Scene(0.0, (em_sim.MaterialLayer(0.05, 4.0, 0.01),), 1.0)
    pulse = em_sim.Pulse("gaussian", 2e9)
    em_sim.run_fdtd(scene, pulse, em_sim.build_grid(scene, pulse, 1e-9))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}")
