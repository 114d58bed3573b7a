import numpy as np
import pytest

from ymlab.lattice import TorusGrid
from ymlab.functional import Configuration, PerturbationSpec
from ymlab.critical import findCritical


def constant_connection(grid, th, dim=1):
    A = grid.zeros(1, dim)
    A[0, ..., -1] = th[0] / grid.Lx
    A[1, ..., -1] = th[1] / grid.Ly
    return Configuration(grid, A, grid.zeros(0, dim))


@pytest.fixture(scope="session")
def grid8():
    return TorusGrid(8, 8)


@pytest.fixture(scope="session")
def cos_cos(grid8):
    return PerturbationSpec.cos_cos(grid8, 0.2)


@pytest.fixture(scope="session")
def cos_cos_points(grid8, cos_cos):
    """Minimum, the two saddles and the maximum of the cos+cos model, by cycle phases."""
    out = {}
    for name, th in (("min", (0, 0)), ("sx", (np.pi, 0)), ("sy", (0, np.pi)), ("max", (np.pi, np.pi))):
        out[name] = findCritical(cos_cos, constant_connection(grid8, th))
    return out


def _solve_set(grid, eps, pairs, S=25.0, M=64):
    from ymlab.flow import solveTrajectory
    from ymlab.morse import _lifts, shift_lift
    pert = PerturbationSpec.cos_cos(grid, eps)
    pts = {}
    for name, th in (("min", (0, 0)), ("sx", (np.pi, 0)), ("sy", (0, np.pi)), ("max", (np.pi, np.pi))):
        pts[name] = findCritical(pert, constant_connection(grid, th))
    out = []
    for a, b in pairs:
        src, tgt = pts[a], pts[b]
        for k in _lifts(src, tgt, np.pi + 1e-6):
            end = shift_lift(tgt.cfg, k)
            p = solveTrajectory((src, end), pert, S, M)
            out.append({"path": p, "src": src, "tgt": tgt, "pert": pert, "eps": eps, "lift": k,
                        "label": f"eps={eps} {a}->{b} lift={k}"})
    return out


@pytest.fixture(scope="session")
def trajectories(grid8):
    """Twelve converged index-one trajectories of the cos+cos model on 8x8."""
    out = _solve_set(grid8, 0.2, [("max", "sx"), ("max", "sy"), ("sx", "min"), ("sy", "min")])
    out += _solve_set(grid8, 0.3, [("max", "sx"), ("sx", "min")])
    return out


_ACCEPTANCE = []


@pytest.fixture
def record(capsys):
    """Print and keep one PASS/FAIL line per acceptance criterion."""

    def rec(n, ok, title, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d} {title}: {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return rec


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
