"""Flow monitors: curvature statistics, volume identities, trace export.

A trace row is one sampled instant of the flow.  Scaled quantities carry a
factor (T - t) per curvature power, so a type-I singularity shows up as
rows with bounded entries.  Every reduction over nodes that involves a raw
fourth difference is restricted to the trust mask from profile.py; in a
degenerating tail those stencils are rounding noise and would otherwise
pollute suprema and minima.

The trace table layout is fixed:

    t,a,b,supRm,typeI,H_sup,G_sup,G_inf,bisec_min,bisec_min_scaled,
    c4_min_scaled,lambda_div_scaled,sigma2,...,sigmaN,
    vol_quad,vol_class,vol_ratio,diam,dt,iters

with one sigma column per symmetric function from 2 to n.  Disabled
monitors leave NaN in their columns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import quad, simpson

from .curvature import curvature_sample, ricci_eigenvalues
from .profile import (
    CalabiProfile,
    FlowParams,
    Regime,
    c4_combination,
    c4_trust_mask,
    ratio_g,
    ratio_h,
)


class DiagnosticsError(RuntimeError):
    pass


@dataclass(frozen=True)
class MonitorSet:
    """Which monitor families to evaluate, and how often (accepted steps)."""

    cadence: int = 10
    curvature: bool = True
    volume: bool = True
    diameter: bool = True
    sigma: bool = True

    def __post_init__(self):
        if self.cadence < 1:
            raise ValueError(f"cadence must be >= 1, got {self.cadence}")


@dataclass(frozen=True)
class TraceRow:
    """One monitor sample; a and b are the measured boundary slopes
    u'(-L) and u'(+L), to be compared against the class endpoints."""

    t: float
    a: float
    b: float
    supRm: float
    typeI: float
    H_sup: float
    G_sup: float
    G_inf: float
    bisec_min: float
    bisec_min_scaled: float
    c4_min_scaled: float
    lambda_div_scaled: float
    sigma: tuple[float, ...]
    vol_quad: float
    vol_class: float
    vol_ratio: float
    diam: float
    dt: float
    iters: int


@dataclass(frozen=True)
class CheckpointRecord:
    j: int
    t: float
    profile: CalabiProfile


@dataclass
class FlowTrace:
    params: FlowParams
    T: float
    regime: Regime
    rows: list[TraceRow] = field(default_factory=list)
    checkpoints: list[CheckpointRecord] = field(default_factory=list)
    initial_profile: CalabiProfile | None = None
    final_profile: CalabiProfile | None = None
    elapsed: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


# ---------------------------------------------------------------------------
# individual monitors

def type_one_ratio(p: CalabiProfile, T: float) -> float:
    """(T - t) times the trusted sup of the curvature proxy."""
    from .curvature import curvature_norm_proxy

    proxy = curvature_norm_proxy(p, trust=c4_trust_mask(p))
    return (T - p.t) * float(np.max(proxy[3:p.grid.N - 3]))


def divisor_eigenvalue_scaled(p: CalabiProfile, T: float, regime: Regime) -> float:
    """(T - t) * lambda2 at the left edge; meaningful only when the zero
    divisor contracts, NaN otherwise."""
    if regime is not Regime.CONTRACT:
        return float("nan")
    _, lam2 = ricci_eigenvalues(p)
    return (T - p.t) * float(lam2[0])


def c4_min_scaled(p: CalabiProfile, T: float) -> float:
    """(T - t) * min of the fourth-order combination over trusted interior
    nodes (three nodes clipped at each end)."""
    trust = c4_trust_mask(p)
    inner = slice(3, p.grid.N - 3)
    vals = c4_combination(p)[inner][trust[inner]]
    if vals.size == 0:
        return float("nan")
    return (T - p.t) * float(np.min(vals))


def bisectional_min(p: CalabiProfile) -> float:
    """Min over interior nodes and components of the holomorphic-frame
    curvatures; the fourth-order component is restricted to trusted nodes."""
    from .curvature import bisectional_components

    r1111, r11kk, rkkkk, rkkll = bisectional_components(p)
    inner = slice(3, p.grid.N - 3)
    itrust = c4_trust_mask(p)[inner]
    cands = [float(np.min(r11kk[inner])), float(np.min(rkkkk[inner]))]
    if rkkll is not None:
        cands.append(float(np.min(rkkll[inner])))
    if itrust.any():
        cands.append(float(np.min(r1111[inner][itrust])))
    return min(cands)


def sigma_bound_ratio(p: CalabiProfile, T: float, j: int) -> float:
    """max |sigma_j| (T-t)^(j-1) relative to the trusted curvature sup."""
    from .curvature import curvature_norm_proxy, sigma_k

    inner = slice(3, p.grid.N - 3)
    trust = c4_trust_mask(p)
    sup = float(np.max(curvature_norm_proxy(p, trust=trust)[inner]))
    vals = np.abs(sigma_k(p, j))[inner][trust[inner]]
    if vals.size == 0:
        return float("nan")
    return (T - p.t) ** (j - 1) * float(np.max(vals)) / max(sup, 1e-30)


def total_volume(p: CalabiProfile) -> tuple[float, float]:
    """(quadrature volume, class volume), both per unit angular factor.

    The density (u')^(n-1) u'' integrates in the moment variable to
    (b^n - a^n)/n exactly; the quadrature value uses Simpson on the grid
    plus the closed-form contribution of the truncated tails.
    """
    n = p.n
    core = float(simpson(p.du ** (n - 1) * p.d2u, dx=p.grid.h))
    left = (float(p.du[0]) ** n - p.cls.a**n) / n
    right = (p.cls.b**n - float(p.du[-1]) ** n) / n
    vol_class = (p.cls.b**n - p.cls.a**n) / n
    return core + left + right, vol_class


@lru_cache(maxsize=1)
def _diameter_alpha() -> float:
    # integral of sqrt(sig(1-sig)/2) drho over the line; equals pi/sqrt(2).
    # Written via exp(-|r|) so the integrand stays finite at the endpoints.
    def f(r: float) -> float:
        m = -abs(r)
        return math.sqrt(0.5) * math.exp(0.5 * m) / (1.0 + math.exp(m))

    val, _ = quad(f, -np.inf, np.inf)
    return val


def divisor_diameter(p: CalabiProfile) -> float:
    """Diameter scale of the zero divisor, proportional to sqrt(a)."""
    return _diameter_alpha() * math.sqrt(p.cls.a)


def fs_slice_diameter(p: CalabiProfile, index: int | None = None) -> float:
    """Diameter scale of the projective slice through a grid node."""
    idx = p.grid.center if index is None else index
    return _diameter_alpha() * math.sqrt(float(p.du[idx]))


def regime_indicator(trace: FlowTrace) -> Regime:
    """Classify the singularity from the volume decay rate near T.

    Fits the log-log slope of vol/(T-t) between the rows closest to
    T-t = 0.01 T and T-t = 0.001 T: slopes below -0.5 mean the volume
    survives (divisor contraction), above +0.5 the volume vanishes at
    order n (global shrink), in between it vanishes linearly (fibration
    collapse).
    """
    rows = [r for r in trace.rows if math.isfinite(r.vol_quad) and r.vol_quad > 0.0]
    if not rows:
        raise DiagnosticsError("trace has no volume samples")
    if rows[-1].t < 0.99 * trace.T:
        raise DiagnosticsError(
            f"trace ends at t={rows[-1].t:.6g}, need at least 0.99 T to classify")
    taus = trace.T - np.array([r.t for r in rows])
    vr = np.array([r.vol_ratio for r in rows])
    i1 = int(np.argmin(np.abs(taus - 0.01 * trace.T)))
    i2 = int(np.argmin(np.abs(taus - 0.001 * trace.T)))
    if i1 == i2 or taus[i1] <= taus[i2] * (1.0 + 1e-9):
        raise DiagnosticsError("insufficient sampling near the singular time")
    slope = (math.log(vr[i2]) - math.log(vr[i1])) / (math.log(taus[i2]) - math.log(taus[i1]))
    if slope < -0.5:
        return Regime.CONTRACT
    if slope > 0.5:
        return Regime.SHRINK
    return Regime.COLLAPSE


# ---------------------------------------------------------------------------
# row assembly

def sample_row(p: CalabiProfile, T: float, regime: Regime, monitors: MonitorSet,
               dt: float = 0.0, iters: int = 0) -> TraceRow:
    nan = float("nan")
    tau = T - p.t
    n = p.n

    supRm = typeI = H_sup = G_sup = G_inf = nan
    bmin = bmin_scaled = c4min = lam_div = nan
    sigma = tuple(nan for _ in range(2, n + 1))

    if monitors.curvature:
        # the outermost three nodes at each end lean on ghost extrapolation;
        # sup/min reductions stay on stencil-supported interior nodes
        inner = slice(3, p.grid.N - 3)
        trust = c4_trust_mask(p)
        itrust = trust[inner]
        cs = curvature_sample(p)
        a_lam1 = np.where(trust, np.abs(cs.lambda1), 0.0)
        a_r1111 = np.where(trust, np.abs(cs.r1111), 0.0)
        pieces = [a_r1111, np.abs(cs.r11kk), np.abs(cs.rkkkk), a_lam1,
                  np.abs(cs.lambda2)]
        if cs.rkkll is not None:
            pieces.append(np.abs(cs.rkkll))
        proxy = np.max(np.stack(pieces), axis=0)
        supRm = float(np.max(proxy[inner]))
        typeI = tau * supRm

        H = ratio_h(p)[inner]
        G = ratio_g(p)[inner]
        H_sup = float(np.max(H))
        G_sup = float(np.max(G))
        G_inf = float(np.min(G))

        cands = [float(np.min(cs.r11kk[inner])), float(np.min(cs.rkkkk[inner]))]
        if cs.rkkll is not None:
            cands.append(float(np.min(cs.rkkll[inner])))
        if itrust.any():
            cands.append(float(np.min(cs.r1111[inner][itrust])))
        bmin = min(cands)
        bmin_scaled = tau * bmin

        vals = c4_combination(p)[inner][itrust]
        c4min = tau * float(np.min(vals)) if vals.size else nan

        if regime is Regime.CONTRACT:
            lam_div = tau * float(cs.lambda2[0])

        if monitors.sigma:
            out = []
            for j in range(2, n + 1):
                vals = np.abs(cs.sigma[j])[inner][itrust]
                if vals.size == 0:
                    out.append(nan)
                else:
                    out.append(tau ** (j - 1) * float(np.max(vals))
                               / max(supRm, 1e-30))
            sigma = tuple(out)

    vol_quad = vol_class = vol_ratio = nan
    if monitors.volume:
        vol_quad, vol_class = total_volume(p)
        vol_ratio = vol_quad / tau

    diam = divisor_diameter(p) if monitors.diameter else nan

    return TraceRow(t=p.t, a=float(p.du[0]), b=float(p.du[-1]), supRm=supRm, typeI=typeI,
                    H_sup=H_sup, G_sup=G_sup, G_inf=G_inf, bisec_min=bmin,
                    bisec_min_scaled=bmin_scaled, c4_min_scaled=c4min,
                    lambda_div_scaled=lam_div, sigma=sigma, vol_quad=vol_quad,
                    vol_class=vol_class, vol_ratio=vol_ratio, diam=diam,
                    dt=dt, iters=iters)


# ---------------------------------------------------------------------------
# export

def trace_header(n: int) -> str:
    cols = ["t", "a", "b", "supRm", "typeI", "H_sup", "G_sup", "G_inf",
            "bisec_min", "bisec_min_scaled", "c4_min_scaled",
            "lambda_div_scaled"]
    cols += [f"sigma{j}" for j in range(2, n + 1)]
    cols += ["vol_quad", "vol_class", "vol_ratio", "diam", "dt", "iters"]
    return ",".join(cols)


def export_trace(trace: FlowTrace, path: str | Path) -> None:
    """Write the trace as CSV with %.17g floats; fully deterministic."""
    n = trace.params.n
    lines = [trace_header(n)]
    for r in trace.rows:
        vals = [r.t, r.a, r.b, r.supRm, r.typeI, r.H_sup, r.G_sup, r.G_inf,
                r.bisec_min, r.bisec_min_scaled, r.c4_min_scaled,
                r.lambda_div_scaled, *r.sigma, r.vol_quad, r.vol_class,
                r.vol_ratio, r.diam, r.dt]
        lines.append(",".join("%.17g" % v for v in vals) + ",%d" % r.iters)
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path: str | Path) -> dict[str, np.ndarray]:
    """Read a trace CSV back as named columns."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.shape == ():
        data = data.reshape(1)
    return {name: np.asarray(data[name], dtype=float) for name in data.dtype.names}


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_summary(trace: FlowTrace, path: str | Path) -> None:
    rows = trace.rows
    typeI = [r.typeI for r in rows if math.isfinite(r.typeI)]
    summary = {
        "regime": trace.regime.value,
        "T": trace.T,
        "n": trace.params.n,
        "k": trace.params.k,
        "a0": trace.params.a0,
        "b0": trace.params.b0,
        "t_final": _clean(rows[-1].t if rows else float("nan")),
        "typeI_max": _clean(max(typeI) if typeI else float("nan")),
        "supRm_final": _clean(rows[-1].supRm if rows else float("nan")),
        "lambda_div_final": _clean(rows[-1].lambda_div_scaled if rows else float("nan")),
        "vol_ratio_final": _clean(rows[-1].vol_ratio if rows else float("nan")),
        "num_rows": len(rows),
        "checkpoints": [c.j for c in trace.checkpoints],
        "elapsed_seconds": round(trace.elapsed, 3),
    }
    with Path(path).open("w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
