import json
import math

import numpy as np
import pytest

import maggeo


def torus_circle(n=64):
    b = maggeo.make_bundle("torus", 1)
    x = maggeo.lifted_orbit(b, np.array([0.5, 0.5]), np.array([1.0, 0.0]), 4 * math.pi**2, n)
    return b, x


def test_fiberwise_rotation_action():
    b = maggeo.make_bundle("torus", 1)
    x = maggeo.fiberwise_rotation(b, np.array([0.1, 0.2, 0.3]), 1, 0.5, 1.0, 64)
    assert x.samples.shape == (3, 64)
    assert maggeo.action(b, x) == pytest.approx(-2 * math.pi + 0.5, abs=1e-12)


def test_lifted_circle_is_critical():
    # residuals of the lifted circle fall at fourth order in N
    b, x = torus_circle(256)
    assert x.T == pytest.approx(4 * math.pi**2)
    assert maggeo.critical_residuals(b, x).max() < 1e-3
    loop, dT, dphi = maggeo.action_differential(b, x)
    assert loop.shape == (3, 256)
    assert abs(dT) < 1e-7 and abs(dphi) < 1e-7


def test_descend_from_perturbed_circle():
    b, x = torus_circle(128)
    x.samples = x.samples + 0.01 * np.sin(np.linspace(0, 2 * math.pi, 128, endpoint=False))
    x.T *= 1.01
    cfg = maggeo.FlowConfig()
    cfg.max_steps = 50
    r = maggeo.descend(b, x, cfg)
    assert r["status"] == "critical"
    assert r["candidate"].T == pytest.approx(4 * math.pi**2, rel=1e-6)
    assert r["residuals"].max() < 1e-4


def test_invalid_k_raises():
    b, x = torus_circle()
    x.k = 0.4
    with pytest.raises(ValueError, match="k must exceed 1/2"):
        maggeo.evolve(b, x)


def test_snapshot_round_trip():
    b, x = torus_circle(16)
    model, flux, y = maggeo.parse_loop_snapshot(maggeo.loop_snapshot(b, x))
    assert (model, flux) == ("torus", 1)
    assert np.array_equal(x.samples, y.samples)
    assert y.T == x.T and y.phi == x.phi


def test_stability_scans():
    t = json.loads(maggeo.torus_contact_scan(1.0, 20))
    assert t["model"] == "torus" and t["min_abs_det"] > 0
    s = json.loads(maggeo.su2_scan(0.5, 20))
    assert s["residual_stats"]["det_minus_2k_minus_1"]["max"] < 1e-8


def test_cli_in_process(tmp_path):
    code, out, err = maggeo.run_cli(["verify-all", "--seed", "7", "--out", str(tmp_path)])
    assert code == 0, err
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["summary"]["all_pass"]
    code, _, err = maggeo.run_cli(["descend", "--override", "k=0.4", "--out", str(tmp_path / "x")])
    assert code == 2 and "k must exceed 1/2" in err
