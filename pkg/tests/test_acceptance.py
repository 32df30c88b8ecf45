"""Acceptance gates: quantitative end-to-end checks of the solver, the
monitors and the rescaling analysis.

Each test prints exactly one verdict line before asserting, so running
this module yields a readable scorecard even when a gate misses.
"""
import math

import numpy as np
import pytest

import calabiflow as cf


def _gate(capfd, num, name, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    with capfd.disabled():
        print(f"criterion {num:2d} ({name}): {verdict} - {detail}")
    assert ok, f"{name}: {detail}"


def _finite(rows, attr, lo=0.0):
    return [getattr(r, attr) for r in rows
            if r.t >= lo and math.isfinite(getattr(r, attr))]


@pytest.fixture(scope="module")
def wide_report(contract_wide):
    """Rescaling report over the late checkpoints of the wide contract run."""
    return cf.blowup_report(list(contract_wide.checkpoints), T=1.0, n=2, k=1)


def test_criterion_01_singular_time_and_class_law(contract_default, capfd):
    trace, _ = contract_default
    worst = max(abs(r.a - (1.0 - r.t)) for r in trace.rows)
    ok = trace.T == 1.0 and worst <= 1e-3 and trace.elapsed < 300.0
    _gate(capfd, 1, "singular time and class law", ok,
          f"T={trace.T:g}, max|u'(-L)-a_t|={worst:.2e} (tol 1e-3), "
          f"elapsed {trace.elapsed:.1f}s (limit 300s)")


def test_criterion_02_divisor_eigenvalue_law(contract_wide, capfd):
    rows = [r for r in contract_wide.rows if 0.99 <= r.t <= 0.999]
    vals = _finite(rows, "lambda_div_scaled")
    ok = bool(vals) and min(vals) >= 0.98 and max(vals) <= 1.02
    detail = ("no curvature samples with t in [0.99, 0.999]" if not vals else
              f"(T-t)*lambda2(-L) in [{min(vals):.4f}, {max(vals):.4f}] "
              f"over {len(vals)} samples (band [0.98, 1.02])")
    _gate(capfd, 2, "divisor eigenvalue law", ok, detail)


def test_criterion_03_type_one_band(contract_default, contract_1025, capfd):
    trace, _ = contract_default
    fine = _finite(trace.rows, "typeI", lo=0.5)
    coarse = _finite(contract_1025.rows, "typeI", lo=0.5)
    drift = max(abs(min(fine) / min(coarse) - 1.0),
                abs(max(fine) / max(coarse) - 1.0))
    settled = fine[-1] < 0.9 * max(fine)
    ok = drift < 0.10 and settled
    _gate(capfd, 3, "type one band", ok,
          f"(T-t)*supRm in [{min(fine):.3f}, {max(fine):.3f}], final "
          f"{fine[-1]:.3f} vs 0.9*max {0.9 * max(fine):.3f}, band drift "
          f"{drift:.2e} between grids (tol 0.10)")


def test_criterion_04_maximum_principle_bounds(contract_wide, collapse_run,
                                               shrink_run, capfd):
    bad = []
    parts = []
    for name, trace in (("contract", contract_wide), ("collapse", collapse_run),
                        ("shrink", shrink_run)):
        h0 = trace.rows[0].H_sup
        g0 = trace.rows[0].G_inf
        h_bound = max(h0, 0.5) * (1.0 + 1e-6)
        g_bound = min(g0, -1.0) - 1e-6
        h_max = max(_finite(trace.rows, "H_sup"))
        g_min = min(_finite(trace.rows, "G_inf"))
        parts.append(f"{name} sup H={h_max:.4f}/{h_bound:.4f}")
        if h_max > h_bound or g_min < g_bound:
            bad.append(name)
    _gate(capfd, 4, "maximum principle bounds", not bad,
          ("all presets within H and G bounds" if not bad else
           f"exceeded on {', '.join(bad)}") + "; " + ", ".join(parts))


def test_criterion_05_volume_identity(contract_default, collapse_run,
                                      shrink_run, capfd):
    worst = 0.0
    for trace in (contract_default[0], collapse_run, shrink_run):
        for r in trace.rows:
            if math.isfinite(r.vol_quad):
                worst = max(worst, abs(r.vol_quad - r.vol_class) / r.vol_class)
    ok = worst <= 1e-6
    _gate(capfd, 5, "volume identity", ok,
          f"max |vol_quad/vol_class - 1| = {worst:.2e} over all presets "
          f"(tol 1e-6)")


def test_criterion_06_regime_trichotomy(contract_default, collapse_run,
                                        shrink_run, capfd):
    measured = {
        "contract": cf.regime_indicator(contract_default[0]),
        "collapse": cf.regime_indicator(collapse_run),
        "shrink": cf.regime_indicator(shrink_run),
    }
    expected = {"contract": cf.Regime.CONTRACT, "collapse": cf.Regime.COLLAPSE,
                "shrink": cf.Regime.SHRINK}
    ok = measured == expected
    _gate(capfd, 6, "regime trichotomy", ok,
          ", ".join(f"{k}={v.value}" for k, v in measured.items()))


def test_criterion_07_curvature_identity_suite(contract_seed, contract_default,
                                               capfd):
    trace, _ = contract_default
    ck5 = next(c.profile for c in trace.checkpoints if c.j == 5)
    route_rel = 0.0
    for p in (contract_seed, ck5):
        re_ = cf.scalar_curvature(p, route="eigen")
        rx = cf.scalar_curvature(p, route="explicit")
        a, b = p.cls.a, p.cls.b
        m = (p.du >= a + 0.1 * (b - a)) & (p.du <= b - 0.1 * (b - a))
        route_rel = max(route_rel, float(np.max(
            np.abs(re_[m] - rx[m]) / np.maximum(np.abs(rx[m]), 1.0))))

    K = math.e
    q = cf.rescaled_copy(contract_seed, K)
    hom = 0.0
    pairs = [(np.stack(cf.ricci_eigenvalues(contract_seed)),
              np.stack(cf.ricci_eigenvalues(q))),
             (cf.scalar_curvature(contract_seed), cf.scalar_curvature(q)),
             (cf.c4_combination(contract_seed), cf.c4_combination(q))]
    pairs += list(zip(cf.bisectional_components(contract_seed)[:3],
                      cf.bisectional_components(q)[:3]))
    pairs += [(cf.ratio_h(contract_seed), cf.ratio_h(q)),
              (cf.ratio_g(contract_seed), cf.ratio_g(q))]
    for base, scaled in pairs[:-2]:
        hom = max(hom, float(np.max(np.abs(K * scaled - base))
                             / np.max(np.abs(base))))
    for base, scaled in pairs[-2:]:
        hom = max(hom, float(np.max(np.abs(scaled - base))
                             / np.max(np.abs(base))))

    grid = cf.RhoGrid(12.0, 1025)
    u = np.exp(grid.nodes)
    du, d2u, d3u, d4u, _, _ = cf.differentiate(u, grid, cls=None)
    with np.errstate(divide="ignore", invalid="ignore"):
        flat_r = (-d4u / d2u**2 + d3u**2 / d2u**3 - 2.0 * d3u / (du * d2u)
                  + 2.0 / du)
    m = np.abs(grid.nodes) <= 6.0
    flat = float(np.max(np.abs(flat_r[m])))

    ok = route_rel <= 1e-6 and hom <= 1e-10 and flat <= 1e-4
    _gate(capfd, 7, "curvature identity suite", ok,
          f"route agreement {route_rel:.1e} (tol 1e-6), homogeneity "
          f"{hom:.1e} (tol 1e-10), flat-model residual {flat:.1e} (tol 1e-4)")


def test_criterion_08_scaled_lower_bounds(contract_default, contract_1025,
                                          capfd):
    fine, _ = contract_default
    coarse = contract_1025
    fb = [min(_finite(t.rows, "bisec_min_scaled", lo=0.5)) for t in (coarse, fine)]
    fc = [min(_finite(t.rows, "c4_min_scaled", lo=0.5)) for t in (coarse, fine)]
    drift_b = abs(fb[1] - fb[0]) / abs(fb[0])
    drift_c = abs(fc[1] - fc[0]) / max(abs(fc[0]), 1e-9)
    sig = max(max(r.sigma[0] for r in t.rows if math.isfinite(r.sigma[0]))
              for t in (coarse, fine))
    ok = (fb[1] > -2.0 and fc[1] > -1e-3 and drift_b < 0.10
          and drift_c < 0.10 and sig < 2.0)
    _gate(capfd, 8, "scaled lower bounds", ok,
          f"(T-t)*bisec_min floor {fb[1]:.6f} (drift {drift_b:.1e}), "
          f"(T-t)*c4_min floor {fc[1]:.6f} (drift {drift_c:.1e}), "
          f"sigma2 ratio max {sig:.4f} (bound 2.0)")


def test_criterion_09_self_similarity(wide_report, capfd):
    rows = wide_report.rows
    selfsim = [r.selfsim_prev for r in rows[1:]]
    decreasing = all(b < a for a, b in zip(selfsim, selfsim[1:]))
    ratio = rows[0].soliton_rms / rows[-1].soliton_rms
    ok = decreasing and ratio >= 2.0
    _gate(capfd, 9, "blow-up self-similarity", ok,
          f"C1 distances {selfsim[0]:.4f} -> {selfsim[-1]:.4f} "
          f"{'strictly decreasing' if decreasing else 'not monotone'}, "
          f"soliton rms reduction j4/j9 = {ratio:.3f} (need >= 2)")


def test_criterion_10_soliton_reference_oracles(wide_report, capfd):
    flat = cf.soliton_residual(cf.gaussian_reference(), n=2)
    cone = cf.soliton_residual(cf.fik_reference(2, 1, 1.0), n=2)
    trend = [r.fik_dist for r in wide_report.rows]
    ok = flat.rms <= 1e-12 and cone.rms <= 1e-10
    _gate(capfd, 10, "soliton reference oracles", ok,
          f"flat rms {flat.rms:.1e} (tol 1e-12, mu={flat.mu:.3f}), cone rms "
          f"{cone.rms:.1e} (tol 1e-10, c={cone.c:.3f}); cone distance over j "
          f"{trend[0]:.3f} -> {trend[-1]:.3f} (reported, not gated)")


def test_criterion_11_nonflat_limit(contract_wide, capfd):
    vals = []
    for c in contract_wide.checkpoints:
        if c.j >= 6:
            proxy = cf.curvature_sample(c.profile).rm_proxy
            vals.append((1.0 - c.t) * float(proxy[0]))
    ok = bool(vals) and min(vals) >= 0.95
    detail = ("no checkpoints with j >= 6" if not vals else
              f"(T-t)*|Rm|(-L) over j>=6: min {min(vals):.4f} (bound 0.95)")
    _gate(capfd, 11, "non-flat rescaled limit", ok, detail)
