"""Parabolic rescaling, soliton references and the blow-up report."""
import csv
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import calabiflow as cf

BLOWUP_CSV_HEADER = ["j", "t", "K", "a_hat", "selfsim_prev", "soliton_rms",
                     "fik_dist"]


# ---------------------------------------------------------------------------
# rescaling

def test_rescale_magnification(contract_default):
    trace, _ = contract_default
    ck = next(c for c in trace.checkpoints if c.j == 6)
    rp = cf.rescale(ck.profile, T=1.0)
    assert rp.K == 1.0 / (1.0 - ck.t)
    assert rp.t == ck.t
    assert rp.a_hat == pytest.approx(1.0, abs=1e-12)


def test_blowup_window_tracks_rescaled_class(contract_default):
    trace, _ = contract_default
    early = cf.rescale(next(c.profile for c in trace.checkpoints if c.j == 1), 1.0)
    late = cf.rescale(next(c.profile for c in trace.checkpoints if c.j == 6), 1.0)
    lo, hi = cf.blowup_window(early)
    assert lo == pytest.approx(1.1, abs=1e-9)
    assert hi == pytest.approx(2.5, abs=1e-9)   # half of b_hat = 5
    lo, hi = cf.blowup_window(late)
    assert lo == pytest.approx(1.1, abs=1e-9)
    assert hi == 10.0                            # capped


# ---------------------------------------------------------------------------
# reference solitons

def test_gaussian_reference_oracle():
    m = cf.gaussian_reference()
    assert np.array_equal(m.phi, m.x)
    fit = cf.soliton_residual(m, n=2)
    assert fit.rms < 1e-12
    assert_allclose(fit.mu, 0.5, rtol=1e-9)
    assert abs(fit.c) < 1e-12
    assert fit.lam == 0.5


def test_cone_reference_oracle():
    m = cf.fik_reference(2, 1, a_hat=1.0)
    fit = cf.soliton_residual(m, n=2)
    assert fit.rms < 1e-10
    assert_allclose(fit.mu, 0.5, rtol=1e-6)
    assert_allclose(fit.c, 1.0, rtol=1e-6)


def test_cone_reference_higher_dimension():
    m = cf.fik_reference(3, 2, a_hat=1.0)
    fit = cf.soliton_residual(m, n=3)
    assert fit.rms < 1e-10
    assert_allclose(fit.mu, 0.5, rtol=1e-6)
    assert_allclose(fit.c, 1.0, rtol=1e-6)


def test_cone_reference_shape():
    m = cf.fik_reference(2, 1, a_hat=1.0, x_max=8.0)
    assert m.x[0] == 1.0
    assert abs(m.eval(np.array([1.0]))[0]) < 1e-12
    # phi(x) = (x - 1/x)/2 for n = 2, k = 1, a_hat = 1
    xs = np.linspace(1.5, 7.5, 25)
    assert_allclose(m.eval(xs), 0.5 * (xs - 1.0 / xs), rtol=1e-6)
    assert_allclose(m.slopes[0], 1.0, rtol=1e-9)


def test_soliton_residual_rejects_bad_window():
    m = cf.fik_reference(2, 1, a_hat=1.0, x_max=8.0)
    with pytest.raises(cf.MomentDomainError):
        cf.soliton_residual(m, n=2, window=(9.0, 12.0))


# ---------------------------------------------------------------------------
# report assembly

def test_blowup_report_rows(contract_default, tmp_path):
    trace, _ = contract_default
    report = cf.blowup_report(list(trace.checkpoints), T=1.0, n=2, k=1,
                              out_dir=tmp_path)
    assert report.n == 2 and report.k == 1 and report.T == 1.0
    assert report.lam == 0.5
    assert [r.j for r in report.rows] == [4, 5, 6, 7, 8, 9]
    for r in report.rows:
        assert r.K == 2.0**r.j
        assert r.a_hat == pytest.approx(1.0, abs=1e-3)
        assert math.isfinite(r.soliton_rms)
    assert math.isnan(report.rows[0].selfsim_prev)
    assert all(math.isfinite(r.selfsim_prev) for r in report.rows[1:])

    with open(tmp_path / "blowup.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == BLOWUP_CSV_HEADER
    assert len(rows) == 1 + len(report.rows)

    with open(tmp_path / "blowup.json") as fh:
        payload = json.load(fh)
    assert payload["n"] == 2 and payload["lambda"] == 0.5
    assert payload["rows"][0]["selfsim_prev"] is None
    assert payload["rows"][1]["selfsim_prev"] == pytest.approx(
        report.rows[1].selfsim_prev)
    assert "mu" in payload["rows"][0] and "c" in payload["rows"][0]


def test_blowup_report_needs_enough_checkpoints(contract_default):
    trace, _ = contract_default
    early = [c for c in trace.checkpoints if c.j <= 3]
    with pytest.raises(cf.BlowupError):
        cf.blowup_report(early, T=1.0, n=2, k=1)


def test_blowup_report_checks_singular_time(contract_default):
    trace, _ = contract_default
    with pytest.raises(cf.BlowupError):
        cf.blowup_report(list(trace.checkpoints), T=2.0, n=2, k=1)


def test_blowup_report_rejects_other_regimes(collapse_run):
    with pytest.raises(cf.RegimeMismatchError):
        cf.blowup_report(list(collapse_run.checkpoints), T=0.5, n=2, k=1)
