"""Rotationally symmetric Kahler potentials on the one-point blow-up of CP^n.

A metric in the symmetric ansatz is a convex potential u(rho) of the log
fiber radius rho with u' increasing from a to b, the endpoints of the Kahler
class.  Everything downstream (flow, curvature, blow-up analysis) consumes
the sampled potential together with its first four derivatives on a uniform
truncated grid rho in [-L, L].

Boundary handling: beyond the grid the potential follows its asymptotic
model u = a*rho + D + E*e^(k*rho) + F*e^(2*k*rho) (mirrored on the right),
which encodes smoothness of the metric across the zero and infinity
divisors.  Ghost nodes for the high-order stencils, and the guarded
evaluation of ratios like u'''/u'' deep in the tails, both come from that
model.  Raw third and fourth differences are rounding-limited wherever u''
is a few orders below its peak, so the guarded forms are the ones monitors
should use; c4_trust_mask marks the nodes where fourth-difference output
is credible at all.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import expit

from .moment import MomentProfile

CHECKPOINT_VERSION = 1

# The boundary model is fitted on a band of fixed rho-width next to each
# edge (per unit k, capped by a third of the half-width), and the guarded
# evaluators blend model against raw stencil values by tail position
# w = e^(-k * dist) alone: full model weight for w <= 5e-3, full raw
# weight for w >= 5e-2.  Position-based weights stay meaningful when a
# class endpoint degenerates, which profile-dependent normalizations
# do not.
TAIL_BAND_WIDTH = 3.0
LN_W_MODEL = math.log(5e-3)
LN_W_RAW = math.log(5e-2)
MIN_FIT_NODES = 8

# Rounding-noise scale of the fourth-difference stencil, as a multiple of
# eps * sup|u| / h^4 (the stencil's absolute coefficient sum is ~27).
FD4_NOISE_COEF = 32.0


class ProfileError(ValueError):
    """Raised for inadmissible profiles or inconsistent construction input."""


class Regime(str, Enum):
    CONTRACT = "Contract"
    COLLAPSE = "Collapse"
    SHRINK = "Shrink"


@dataclass(frozen=True)
class FlowParams:
    """Dimension n, divisor twist k, and the initial class endpoints."""

    n: int
    k: int = 1
    a0: float = 1.0
    b0: float = 4.0

    def __post_init__(self):
        if self.n < 2:
            raise ProfileError(f"need n >= 2, got n={self.n}")
        if not 1 <= self.k < self.n:
            raise ProfileError(f"need 1 <= k < n, got k={self.k} with n={self.n}")
        if not 0.0 < self.a0 < self.b0:
            raise ProfileError(f"need 0 < a0 < b0, got a0={self.a0}, b0={self.b0}")


@dataclass(frozen=True)
class KahlerClass:
    """Open interval (a, b) swept by u'; the cohomology class of the metric."""

    a: float
    b: float

    def __post_init__(self):
        if not 0.0 < self.a < self.b:
            raise ProfileError(f"need 0 < a < b, got a={self.a}, b={self.b}")


@dataclass(frozen=True)
class RhoGrid:
    """Uniform grid on [-L, L] with an odd node count, so rho=0 is a node."""

    L: float
    N: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.L <= 0.0:
            raise ProfileError(f"need L > 0, got L={self.L}")
        if self.N < 257 or self.N % 2 == 0:
            raise ProfileError(f"need odd N >= 257, got N={self.N}")
        object.__setattr__(self, "nodes", np.linspace(-self.L, self.L, self.N))

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.N - 1)

    @property
    def center(self) -> int:
        return (self.N - 1) // 2


@dataclass(frozen=True)
class SingularTimeInfo:
    T: float
    regime: Regime
    Ta: float
    Tb: float


@dataclass(frozen=True)
class TailFit:
    """Coefficients (D, E, F) of the boundary model D + E*w + F*w^2.

    w = e^(k*rho) at the left end, w = e^(-k*rho) at the right end, after
    the affine part (a*rho, resp. b*rho) has been removed.
    """

    base: float
    amp: float
    amp2: float


@dataclass(frozen=True)
class CalabiProfile:
    """Potential samples and derivative arrays at one flow time.

    The arrays are treated as immutable after construction.  d3u and d4u
    are raw centered differences; tail-sensitive combinations should go
    through ratio_g / c4_combination below, which switch to the boundary
    model where the raw differences lose significance.
    """

    grid: RhoGrid
    cls: KahlerClass
    t: float
    n: int
    k: int
    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray
    d3u: np.ndarray
    d4u: np.ndarray
    tail_left: TailFit | None = None
    tail_right: TailFit | None = None

    def __post_init__(self):
        for name in ("u", "du", "d2u", "d3u", "d4u"):
            arr = getattr(self, name)
            if arr.shape != (self.grid.N,):
                raise ProfileError(f"{name} has shape {arr.shape}, expected ({self.grid.N},)")


@dataclass(frozen=True)
class Violation:
    invariant: str
    nodes: tuple[int, ...]
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "profile admissible"
        lines = [f"{v.invariant}: {v.detail}" for v in self.violations]
        return "profile inadmissible\n" + "\n".join(lines)


def class_at(params: FlowParams, t: float) -> KahlerClass:
    """Kahler class at time t; endpoints shrink at rates (n-k) and (n+k)."""
    info = singular_time(params)
    if t < 0.0 or t >= info.T:
        raise ProfileError(f"t={t} outside [0, T) with T={info.T}")
    return KahlerClass(params.a0 - (params.n - params.k) * t,
                       params.b0 - (params.n + params.k) * t)


def singular_time(params: FlowParams) -> SingularTimeInfo:
    """First time the class degenerates, and which endpoint gets there."""
    Ta = params.a0 / (params.n - params.k)
    Tb = (params.b0 - params.a0) / (2.0 * params.k)
    T = min(Ta, Tb)
    if abs(Ta - Tb) <= 1e-12 * max(Ta, Tb):
        regime = Regime.SHRINK
    elif Ta < Tb:
        regime = Regime.CONTRACT
    else:
        regime = Regime.COLLAPSE
    return SingularTimeInfo(T=T, regime=regime, Ta=Ta, Tb=Tb)


# ---------------------------------------------------------------------------
# differentiation

_STENCILS = {
    1: (2, np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0),
    2: (2, np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
    3: (3, np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0),
    4: (3, np.array([-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0]) / 6.0),
}


def _apply_stencil(padded: np.ndarray, order: int, h: float) -> np.ndarray:
    radius, coeffs = _STENCILS[order]
    trim = 3 - radius
    arr = padded[trim: len(padded) - trim] if trim else padded
    return np.convolve(arr, coeffs[::-1], mode="valid") / h**order


def _tail_band_count(grid: RhoGrid, k: int) -> int:
    width = min(TAIL_BAND_WIDTH / k, grid.L / 3.0)
    m = int(round(width / grid.h)) + 1
    return min(max(m, MIN_FIT_NODES), grid.N // 3)


def _fit_tail(z: np.ndarray, w: np.ndarray) -> tuple[TailFit, float]:
    """One least-squares fit of z = base + amp*w + amp2*w^2.

    Also returns |4*amp2*w|/amp evaluated at the innermost (largest-w)
    node of the band.  The two-mode model is self-consistent only where
    this ratio is small; it blows up when transition structure leaks into
    the band or when the leading amplitude is not positive.
    """
    wr = float(np.max(w))
    if wr <= 0.0 or not math.isfinite(wr):
        return TailFit(float(z[0]), 0.0, 0.0), math.inf
    ws = w / wr
    A = np.stack([np.ones_like(ws), ws, ws * ws], axis=1)
    coef, *_ = np.linalg.lstsq(A, z, rcond=None)
    fit = TailFit(float(coef[0]), float(coef[1] / wr), float(coef[2] / wr**2))
    if fit.amp <= 0.0:
        return fit, math.inf
    return fit, abs(4.0 * fit.amp2 * wr) / fit.amp


def _fit_tail_trimmed(z: np.ndarray, w: np.ndarray) -> TailFit:
    """Fit over the band, shrinking it from the inside until self-consistent.

    z and w are ordered outermost node first.  When the transition region
    has drifted into the nominal band (late in a divisor contraction) the
    full-band fit returns a wild second mode; dropping the innermost
    quarter repeatedly finds the stretch where the model actually holds.
    """
    m = len(z)
    best: TailFit | None = None
    while True:
        fit, ratio = _fit_tail(z[:m], w[:m])
        best = fit
        if ratio <= 0.5 or m <= MIN_FIT_NODES:
            return best
        m = max(MIN_FIT_NODES, (3 * m) // 4)


def fit_boundary_tails(
    u: np.ndarray, grid: RhoGrid, cls: KahlerClass, k: int = 1
) -> tuple[TailFit, TailFit]:
    """Least-squares fit of the two-mode boundary model at each end.

    The nominal fit band is the outermost stretch of nodes of rho-width
    3/k (capped at L/3); each side is trimmed toward the boundary until
    the fitted second mode stays subordinate across the band.
    """
    rho = grid.nodes
    m = _tail_band_count(grid, k)
    left = _fit_tail_trimmed(u[:m] - cls.a * rho[:m], np.exp(k * rho[:m]))
    right = _fit_tail_trimmed((u[-m:] - cls.b * rho[-m:])[::-1],
                              np.exp(-k * rho[-m:])[::-1])
    return left, right


def _poly_ghosts(u: np.ndarray, rho: np.ndarray, h: float, side: str) -> np.ndarray:
    """Fallback ghosts from a local quintic fit, for profiles with no class."""
    m = min(8, len(u))
    if side == "left":
        xs, ys, x0 = rho[:m], u[:m], rho[0]
        offs = np.array([-3.0, -2.0, -1.0])
    else:
        xs, ys, x0 = rho[-m:], u[-m:], rho[-1]
        offs = np.array([1.0, 2.0, 3.0])
    poly = np.polynomial.Polynomial.fit(xs - x0, ys, deg=min(5, m - 1))
    return poly(offs * h)


def differentiate(
    u: np.ndarray,
    grid: RhoGrid,
    cls: KahlerClass | None = None,
    k: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, TailFit | None, TailFit | None]:
    """Fourth-order centered derivatives of the potential samples.

    With a class given, ghost nodes extend the samples by the boundary
    model fitted to each tail; this keeps the stencils fourth-order right
    up to the ends for admissible profiles.  Without a class (test inputs
    such as plain polynomials) ghosts come from local polynomial fits and
    only interior nodes should be trusted.

    Returns (du, d2u, d3u, d4u, tail_left, tail_right).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.N,):
        raise ProfileError(f"sample array has shape {u.shape}, expected ({grid.N},)")
    rho, h = grid.nodes, grid.h

    if cls is not None:
        left, right = fit_boundary_tails(u, grid, cls, k)
        gl_rho = rho[0] + h * np.array([-3.0, -2.0, -1.0])
        ghosts_l = cls.a * gl_rho + left.base \
            + left.amp * np.exp(k * gl_rho) + left.amp2 * np.exp(2 * k * gl_rho)
        gr_rho = rho[-1] + h * np.array([1.0, 2.0, 3.0])
        ghosts_r = cls.b * gr_rho + right.base \
            + right.amp * np.exp(-k * gr_rho) + right.amp2 * np.exp(-2 * k * gr_rho)
    else:
        left = right = None
        ghosts_l = _poly_ghosts(u, rho, h, "left")
        ghosts_r = _poly_ghosts(u, rho, h, "right")

    padded = np.concatenate([ghosts_l, u, ghosts_r])
    du = _apply_stencil(padded, 1, h)
    d2u = _apply_stencil(padded, 2, h)
    d3u = _apply_stencil(padded, 3, h)
    d4u = _apply_stencil(padded, 4, h)
    return du, d2u, d3u, d4u, left, right


def profile_from_samples(
    u: np.ndarray,
    grid: RhoGrid,
    cls: KahlerClass,
    t: float,
    n: int,
    k: int = 1,
) -> CalabiProfile:
    """Profile with recomputed derivative arrays and tail fits."""
    du, d2u, d3u, d4u, tl, tr = differentiate(u, grid, cls, k)
    return CalabiProfile(grid=grid, cls=cls, t=t, n=n, k=k,
                         u=np.asarray(u, dtype=float), du=du, d2u=d2u,
                         d3u=d3u, d4u=d4u, tail_left=tl, tail_right=tr)


# ---------------------------------------------------------------------------
# canonical seed

def build_canonical_profile(
    cls: KahlerClass,
    grid: RhoGrid,
    n: int = 2,
    k: int = 1,
    t: float = 0.0,
) -> CalabiProfile:
    """Logistic transition seed u = a*rho + ((b-a)/k) * log(1 + e^(k*rho)).

    All derivatives are evaluated in closed form (sig = logistic(k*rho)):
        u'   = a + (b-a)*sig
        u''  = k (b-a) sig (1-sig)
        u''' = k^2 (b-a) sig (1-sig) (1-2 sig)
        u'''' = k^3 (b-a) sig (1-sig) (1 - 6 sig + 6 sig^2)
    The tail fits are the exact series coefficients of the seed.
    """
    rho = grid.nodes
    ba = cls.b - cls.a
    sig = expit(k * rho)
    u = cls.a * rho + (ba / k) * np.logaddexp(0.0, k * rho)
    sp = sig * (1.0 - sig)
    du = cls.a + ba * sig
    d2u = k * ba * sp
    d3u = k**2 * ba * sp * (1.0 - 2.0 * sig)
    d4u = k**3 * ba * sp * (1.0 - 6.0 * sig + 6.0 * sig**2)
    tail = TailFit(0.0, ba / k, -ba / (2.0 * k))
    return CalabiProfile(grid=grid, cls=cls, t=t, n=n, k=k,
                         u=u, du=du, d2u=d2u, d3u=d3u, d4u=d4u,
                         tail_left=tail, tail_right=tail)


# ---------------------------------------------------------------------------
# admissibility

def _node_list(mask: np.ndarray) -> tuple[int, ...]:
    idx = np.flatnonzero(mask)
    return tuple(int(i) for i in idx[:16])


def validate_profile(p: CalabiProfile, tol: float = 1e-8) -> ValidationReport:
    """Check convexity, monotonicity, class bounds and boundary closures.

    Violations name the offending nodes (first 16).  The closure check uses
    the exponentially fitted boundary rows of the flow discretization, which
    are exact on an affine-plus-exponential tail; a derivative-form check
    would amplify tail-fit error by 1/h^2 and reject healthy profiles.  Row
    residuals are normalized to slope units and compared against tol scaled
    by the nearest class endpoint.
    """
    violations: list[Violation] = []

    bad = p.d2u <= 0.0
    if bad.any():
        violations.append(Violation(
            "convexity", _node_list(bad),
            f"d2u <= 0 at {int(bad.sum())} node(s), first at index {_node_list(bad)[0]}"))

    diffs = np.diff(p.du)
    bad = diffs <= 0.0
    if bad.any():
        violations.append(Violation(
            "monotone-du", _node_list(bad),
            f"du not strictly increasing across {int(bad.sum())} interval(s)"))

    bad = (p.du <= p.cls.a) | (p.du >= p.cls.b)
    if bad.any():
        violations.append(Violation(
            "class-range", _node_list(bad),
            f"du outside ({p.cls.a}, {p.cls.b}) at {int(bad.sum())} node(s)"))

    u, h = p.u, p.grid.h
    efac = math.expm1(p.k * h)
    scale = efac * h
    row_l = (u[0] - 2.0 * u[1] + u[2]) - efac * ((u[1] - u[0]) - p.cls.a * h)
    res_l = abs(float(row_l)) / scale
    if res_l > tol * p.cls.a:
        violations.append(Violation(
            "closure-left", (0,),
            f"left closure residual {res_l:.3e} exceeds {tol * p.cls.a:.3e}"))

    row_r = (u[-3] - 2.0 * u[-2] + u[-1]) + efac * ((u[-1] - u[-2]) - p.cls.b * h)
    res_r = abs(float(row_r)) / scale
    if res_r > tol * p.cls.b:
        violations.append(Violation(
            "closure-right", (p.grid.N - 1,),
            f"right closure residual {res_r:.3e} exceeds {tol * p.cls.b:.3e}"))

    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# guarded tail evaluation

def _raw_weights(p: CalabiProfile) -> tuple[np.ndarray, np.ndarray]:
    """Per-node raw-stencil weight against each tail model (0 = pure model)."""
    krho = p.k * p.grid.nodes
    span = LN_W_RAW - LN_W_MODEL
    wl = np.clip((krho - LN_W_MODEL) / span, 0.0, 1.0)
    wr = np.clip((-krho - LN_W_MODEL) / span, 0.0, 1.0)
    return wl, wr


def _tail_w(p: CalabiProfile) -> tuple[np.ndarray, np.ndarray]:
    rho = p.grid.nodes
    return np.exp(p.k * rho), np.exp(-p.k * rho)


def _usable(model: np.ndarray, raw: np.ndarray,
            E: float, F: float, w: np.ndarray) -> np.ndarray:
    """Model values where its own first correction is small, raw otherwise."""
    bad = ~np.isfinite(model) | (np.abs(4.0 * F * w) >= 0.5 * abs(E))
    return np.where(bad, raw, model)


def ratio_h(p: CalabiProfile) -> np.ndarray:
    """u''/u', the fiber-to-base metric ratio."""
    return p.d2u / p.du


def ratio_g(p: CalabiProfile) -> np.ndarray:
    """u'''/u'' with tail-model evaluation near the ends.

    The raw third-difference ratio loses accuracy where u'' is a few
    orders below its peak; the fitted boundary model gives the ratio
    there as +-k * (E + 8 F w) / (E + 4 F w).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = p.d3u / p.d2u
    if p.tail_left is None or p.tail_right is None:
        return raw
    wl, wr = _raw_weights(p)
    w, v = _tail_w(p)
    El, Fl = p.tail_left.amp, p.tail_left.amp2
    Er, Fr = p.tail_right.amp, p.tail_right.amp2
    with np.errstate(divide="ignore", invalid="ignore"):
        model_l = p.k * (El + 8.0 * Fl * w) / (El + 4.0 * Fl * w)
        model_r = -p.k * (Er + 8.0 * Fr * v) / (Er + 4.0 * Fr * v)
    model_l = _usable(model_l, raw, El, Fl, w)
    model_r = _usable(model_r, raw, Er, Fr, v)
    out = wl * raw + (1.0 - wl) * model_l
    out = wr * out + (1.0 - wr) * model_r
    return out


def c4_combination(p: CalabiProfile) -> np.ndarray:
    """The combination -u''''/u''^2 + u'''^2/u''^3, tail-guarded.

    Within the boundary model the combination evaluates to
    -4 E F w^3 / (E w + 4 F w^2)^3; the raw fourth differences are
    rounding-limited in the tails, so the model value takes over there.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = (-p.d4u * p.d2u + p.d3u**2) / p.d2u**3
    if p.tail_left is None or p.tail_right is None:
        return raw
    wl, wr = _raw_weights(p)
    w, v = _tail_w(p)
    El, Fl = p.tail_left.amp, p.tail_left.amp2
    Er, Fr = p.tail_right.amp, p.tail_right.amp2
    with np.errstate(divide="ignore", invalid="ignore"):
        model_l = -4.0 * El * Fl * w**3 / (El * w + 4.0 * Fl * w**2) ** 3
        model_r = -4.0 * Er * Fr * v**3 / (Er * v + 4.0 * Fr * v**2) ** 3
    model_l = _usable(model_l, raw, El, Fl, w)
    model_r = _usable(model_r, raw, Er, Fr, v)
    out = wl * raw + (1.0 - wl) * model_l
    out = wr * out + (1.0 - wr) * model_r
    return out


def c4_trust_mask(p: CalabiProfile, rel: float = 0.05) -> np.ndarray:
    """Nodes where the fourth-order combination is numerically credible.

    Deep-tail nodes are covered by the boundary model.  Elsewhere the raw
    stencil noise eps * sup|u| / h^4, propagated through the combination,
    must stay below rel times the local magnitude (referenced to the
    center value, so near-zero stretches of an otherwise active profile
    are not spuriously trusted).  Monitors that take minima or suprema of
    fourth-difference quantities should restrict to this mask; between
    the model zone and the raw-trust zone there can be a genuine gap when
    a class endpoint degenerates.
    """
    c4 = c4_combination(p)
    if p.tail_left is None or p.tail_right is None:
        model_zone = np.zeros(p.grid.N, dtype=bool)
    else:
        krho = p.k * p.grid.nodes
        model_zone = (krho <= LN_W_MODEL) | (-krho <= LN_W_MODEL)
    noise = (FD4_NOISE_COEF * np.finfo(float).eps * float(np.max(np.abs(p.u)))
             / p.grid.h**4 / p.d2u**2)
    ref = abs(float(c4[p.grid.center]))
    return model_zone | (noise <= rel * (np.abs(c4) + ref))


# ---------------------------------------------------------------------------
# moment coordinates

def to_moment_profile(p: CalabiProfile) -> MomentProfile:
    """Reparametrize by x = u': phi(x) = u'', phi'(x) = u'''/u''.

    Slope samples use the tail-guarded ratio, so the endpoint slopes come
    out as +-k up to the truncation of the grid.
    """
    if np.any(np.diff(p.du) <= 0.0):
        raise ProfileError("profile not admissible: du is not strictly increasing")
    dphi = ratio_g(p)
    return MomentProfile(
        x=p.du.copy(),
        phi=p.d2u.copy(),
        dphi=dphi,
        a_hat=p.cls.a,
        b_hat=p.cls.b,
        slopes=(float(dphi[0]), float(dphi[-1])),
    )


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(p: CalabiProfile, path: str | Path) -> None:
    """Write the potential samples and identifying data as JSON."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "n": p.n,
        "k": p.k,
        "t": p.t,
        "a": p.cls.a,
        "b": p.cls.b,
        "L": p.grid.L,
        "N": p.grid.N,
        "u": [float(x) for x in p.u],
    }
    path = Path(path)
    try:
        with path.open("w") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    except OSError as exc:
        raise ProfileError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path: str | Path) -> CalabiProfile:
    """Rebuild a profile from JSON; derivatives are always recomputed."""
    path = Path(path)
    try:
        with path.open() as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ProfileError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileError(f"checkpoint {path} is not valid JSON: {exc}") from exc

    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise ProfileError(
            f"checkpoint {path} has version {version!r}, expected {CHECKPOINT_VERSION}")
    try:
        grid = RhoGrid(L=float(payload["L"]), N=int(payload["N"]))
        cls = KahlerClass(a=float(payload["a"]), b=float(payload["b"]))
        u = np.asarray(payload["u"], dtype=float)
        n, k, t = int(payload["n"]), int(payload["k"]), float(payload["t"])
    except (KeyError, TypeError) as exc:
        raise ProfileError(f"checkpoint {path} missing field: {exc}") from exc
    if u.shape != (grid.N,):
        raise ProfileError(
            f"checkpoint {path}: u has {u.shape[0]} samples, header says {grid.N}")
    return profile_from_samples(u, grid, cls, t, n, k)


def rescaled_copy(p: CalabiProfile, K: float) -> CalabiProfile:
    """Profile with the potential (and hence the metric) multiplied by K."""
    if K <= 0.0:
        raise ProfileError(f"need K > 0, got {K}")
    cls = KahlerClass(K * p.cls.a, K * p.cls.b)
    scale = lambda tf: None if tf is None else TailFit(K * tf.base, K * tf.amp, K * tf.amp2)
    return replace(
        p, cls=cls,
        u=K * p.u, du=K * p.du, d2u=K * p.d2u, d3u=K * p.d3u, d4u=K * p.d4u,
        tail_left=scale(p.tail_left), tail_right=scale(p.tail_right),
    )
