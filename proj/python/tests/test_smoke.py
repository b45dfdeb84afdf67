import json
import pathlib

import numpy as np
import pytest

import bilsyn

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "fixtures"


def load(name):
    return bilsyn.load_problem(str(FIXTURES / name))


def test_kron_layout():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.eye(2)
    np.testing.assert_allclose(bilsyn.kron(a, b), np.kron(a, b))


def test_load_problem():
    p = load("example1_stab.json")
    assert p.system.N == 1 and p.system.m == 1
    assert not p.has_performance
    assert p.region.contains(np.array([0.9]))


def test_validation_error():
    bad = {"system": {"A": [[1]], "B0": [[1]], "B": [[[1]]]},
           "region": {"Qz": [[1]], "Sz": [[0]], "Rz": [[1]]}}
    with pytest.raises(bilsyn.ValidationError, match="negative definite"):
        bilsyn.parse_problem(json.dumps(bad))


@pytest.mark.parametrize("mode", ["linear", "gs"])
def test_example1_stability(mode):
    p = load("example1_stab.json")
    r = bilsyn.synthesize_stability(p, mode=mode)
    assert r.accepted and r.status == "feasible"
    assert r.P[0, 0] == pytest.approx(0.9, abs=1e-3)


def test_controller_and_simulation():
    p = load("example1_stab.json")
    r = bilsyn.synthesize_stability(p, mode="gs")
    c = bilsyn.extract_controller(r, p.region)
    u = c(np.array([0.5]))
    assert u.shape == (1,)
    traj = bilsyn.simulate(p, c, np.array([0.5]), steps=200)
    assert not traj["truncated"]
    assert abs(traj["z"][-1][0]) < 1e-6
    assert traj["csv"].startswith("k,z1,u1,V")


def test_verify_and_report():
    p = load("example1_stab.json")
    r = bilsyn.synthesize_stability(p, mode="gs")
    summary = bilsyn.verify(r, p, samples=500)
    assert summary["passed"]
    assert summary["xi_max_eig"] < 0
    report = json.loads(bilsyn.report_json(p, r, samples=500))
    assert report["status"] == "feasible"


def test_minimize_gamma_example3():
    p = load("example3_mimo.json")
    gamma, r = bilsyn.minimize_gamma(p, 0.0, mode="gs")
    assert r.accepted
    assert 3.80 <= gamma <= 3.96


def test_infeasible_region():
    p = load("example1_stab.json")
    r = bilsyn.synthesize_stability(p.with_region(bilsyn.RegionSpec.ball(1, 1.0)))
    assert not r.accepted
    with pytest.raises(bilsyn.Error):
        bilsyn.extract_controller(r, p.region)


def test_sweep_rows():
    p = load("example1_perf.json")
    rows = bilsyn.sweep_gamma_vs_p(p, [0.5], mode="linear")
    level, gamma, status = rows[0]
    assert level == 0.5 and gamma == pytest.approx(3.41, abs=0.01)
