import json
import os
import pathlib

import numpy as np
import pytest

import ftcbf

ROOT = pathlib.Path(os.environ.get("FTCBF_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


def wmr():
    return ftcbf.Scenario.load(str(ROOT / "scenarios" / "wmr.json"))


def test_presets_have_expected_dimensions():
    w = ftcbf.Scenario.wmr()
    assert (w.n, w.p, w.q) == (4, 2, 6)
    b = ftcbf.Scenario.boeing()
    assert (b.n, b.p) == (4, 3)


def test_json_round_trip():
    s = wmr()
    text = s.to_json()
    assert ftcbf.Scenario.from_json(text).to_json() == text
    assert json.loads(text)["seeds"] == list(range(1, 21))


def test_bad_document_raises():
    with pytest.raises(ftcbf.ScenarioValidationError):
        ftcbf.Scenario.from_json('{"preset": "mars"}')
    with pytest.raises(ftcbf.Error):
        ftcbf.Scenario.from_json("{")


def test_boeing_run_stays_in_band():
    r = ftcbf.run(ftcbf.Scenario.boeing(), 1)
    assert r["min_h"] >= 0.0
    assert np.linalg.norm(r["states"][-1]) <= 0.01
    assert np.all(np.abs(r["states"][:, 1]) <= 0.025)


def test_run_is_deterministic():
    s = ftcbf.Scenario.from_json('{"preset": "wmr", "sim": {"horizon": 3.0}}')
    a = ftcbf.run(s, 4, with_csv=True)
    b = ftcbf.run(s, 4, with_csv=True)
    assert a["csv"] == b["csv"]
    assert np.array_equal(a["states"], b["states"])


def test_wmr_metrics():
    m = ftcbf.metrics(wmr(), seeds=[1, 2, 3])
    assert m["safety_violations"] == 0
    assert m["safety_rate"] == 1.0
    assert len(m["min_h"]) == 3


def test_qp_and_certificate():
    r = ftcbf.solve_qp(np.eye(2), np.array([[1.0, 0.0]]), np.array([1.0]))
    assert r["feasible"]
    assert np.allclose(r["u"], [1.0, 0.0])
    r = ftcbf.solve_qp(np.eye(1), np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))
    assert not r["feasible"]
    y = r["certificate"]
    assert np.all(y >= 0.0)
    # Rows are A u >= b; the certificate combines them into 0 >= positive.
    assert abs(y @ np.array([1.0, -1.0])) < 1e-12
    assert y @ np.array([1.0, 0.0]) > 0.0
    assert ftcbf.farkas_certificate(np.array([[1.0]]), np.array([1.0])) is None


def test_verify_reports():
    rep = ftcbf.verify(ftcbf.Scenario.boeing(), budget=500)
    assert rep["counterexample"] is None
    blind = ftcbf.Scenario.load(str(ROOT / "tests" / "data" / "no_authority.json"))
    rep = ftcbf.verify(blind, budget=500)
    assert rep["counterexample"] is not None
    with pytest.raises(ftcbf.ContractViolation):
        ftcbf.verify(blind, budget=0)


def test_calibrate_noise_free_gives_zero_radius():
    s = ftcbf.Scenario.from_json(
        '{"preset": "wmr", "model": {"sigma": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]},'
        ' "sim": {"horizon": 1.0}}'
    )
    cal = ftcbf.calibrate(s, 50)
    assert cal["gammas"] == [0.0, 0.0]
