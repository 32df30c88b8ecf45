"""Time integration of the symmetric potential flow.

The potential evolves by du/dt = log u'' + (n-1) log u' - n*rho + c(t),
where the gauge constant c(t) pins the velocity at rho = 0 to zero in the
default variant:

    c(t) = -log u''(0, t) - (n-1) * log u'(0, t)

(the "literal" variant uses -(n-1) * u'(0, t) for the second term instead).
Each backward-Euler step solves the nonlinear system by a damped Newton
iteration.  Interior rows discretize the equation with second-order
differences; the two boundary rows are exponentially fitted closure
relations that are exact on the asymptotic tail model, so u'(+-L) tracks
the moving class endpoints.  The gauge constant couples every interior row
to the three center unknowns, a rank-one perturbation of the banded
Jacobian that is solved by the Sherman-Morrison identity at the cost of
one extra banded right-hand side.

Step size is controlled by step doubling: the error estimate is the
sup-norm gap between one full step and two half steps, and the dt proposal
follows the usual square-root rule for a first-order integrator.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from . import diagnostics
from .profile import (
    CalabiProfile,
    FlowParams,
    KahlerClass,
    RhoGrid,
    build_canonical_profile,
    class_at,
    profile_from_samples,
    save_checkpoint,
    singular_time,
)

CT_VARIANTS = ("log", "literal")


class FlowError(RuntimeError):
    """Integration failure; carries the partial trace when raised from run()."""

    def __init__(self, message: str, trace: "diagnostics.FlowTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class _StepFailure(Exception):
    """Internal: Newton did not converge or produced an invalid iterate."""


@dataclass(frozen=True)
class StepControl:
    dt_init: float = 1e-6
    dt_min: float = 1e-13
    dt_max: float = 5e-3
    tol_newton: float = 1e-10
    tol_step: float = 1e-6
    t_stop_fraction: float = 0.999
    floor_u2: float = 1e-10
    newton_max_iter: int = 12
    safety: float = 0.9
    max_growth: float = 4.0

    def __post_init__(self):
        if not 0.0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0.0 < self.t_stop_fraction < 1.0:
            raise ValueError("need 0 < t_stop_fraction < 1")


@dataclass(frozen=True)
class StepStats:
    dt: float
    dt_next: float
    newton_iters: int
    residual: float
    error: float
    retries: int


@dataclass(frozen=True)
class FlowState:
    profile: CalabiProfile
    params: FlowParams
    ct: float
    stats: StepStats | None = None


def compute_ct(p: CalabiProfile, n: int | None = None, variant: str = "log") -> float:
    """Gauge constant from the profile's center values."""
    if variant not in CT_VARIANTS:
        raise ValueError(f"unknown ct variant {variant!r}")
    n = p.n if n is None else n
    c = p.grid.center
    d2, d1 = float(p.d2u[c]), float(p.du[c])
    if d2 <= 0.0 or d1 <= 0.0:
        raise FlowError(f"profile degenerate at center: u''={d2}, u'={d1}")
    if variant == "log":
        return -math.log(d2) - (n - 1) * math.log(d1)
    return -math.log(d2) - (n - 1) * d1


def rhs(p: CalabiProfile, ct: float, floor: float = 0.0) -> np.ndarray:
    """Flow velocity log u'' + (n-1) log u' - n rho + ct at every node."""
    d2 = np.maximum(p.d2u, floor) if floor > 0.0 else p.d2u
    return np.log(d2) + (p.n - 1) * np.log(p.du) - p.n * p.grid.nodes + ct


# ---------------------------------------------------------------------------
# Newton solver for one backward-Euler stage

def _second_diffs(w: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """(d1, d2) at interior nodes 1..N-2 by central differences."""
    d1 = (w[2:] - w[:-2]) / (2.0 * h)
    d2 = (w[:-2] - 2.0 * w[1:-1] + w[2:]) / h**2
    return d1, d2


def _valid(w: np.ndarray, h: float, floor: float) -> bool:
    if not np.all(np.isfinite(w)):
        return False
    d1, d2 = _second_diffs(w, h)
    return bool(np.all(d1 > 0.0) and np.all(d2 > floor))


def _ct_discrete(d1c: float, d2c: float, n: int, variant: str) -> float:
    if variant == "log":
        return -math.log(d2c) - (n - 1) * math.log(d1c)
    return -math.log(d2c) - (n - 1) * d1c


def _solve_stage(
    u_prev: np.ndarray,
    dt: float,
    grid: RhoGrid,
    cls_new: KahlerClass,
    n: int,
    k: int,
    ctl: StepControl,
    variant: str,
    w0: np.ndarray,
) -> tuple[np.ndarray, int, float]:
    """One backward-Euler solve; returns (w, iterations, final residual)."""
    N, h, c = grid.N, grid.h, grid.center
    rho_int = grid.nodes[1:-1]
    efac = math.expm1(k * h)
    inv_h2 = 1.0 / h**2
    half_h = 1.0 / (2.0 * h)
    e_int = np.ones(N)
    e_int[0] = e_int[-1] = 0.0

    w = w0.copy()
    if not _valid(w, h, ctl.floor_u2):
        w = u_prev.copy()
        if not _valid(w, h, ctl.floor_u2):
            raise _StepFailure("previous profile invalid at stage entry")

    res = math.inf
    for it in range(1, ctl.newton_max_iter + 1):
        d1, d2 = _second_diffs(w, h)
        d1c, d2c = float(d1[c - 1]), float(d2[c - 1])
        ct = _ct_discrete(d1c, d2c, n, variant)

        F = np.empty(N)
        F[1:-1] = w[1:-1] - u_prev[1:-1] - dt * (
            np.log(d2) + (n - 1) * np.log(d1) - n * rho_int + ct)
        F[0] = (w[0] - 2.0 * w[1] + w[2]) - efac * ((w[1] - w[0]) - cls_new.a * h)
        F[-1] = (w[-3] - 2.0 * w[-2] + w[-1]) + efac * ((w[-1] - w[-2]) - cls_new.b * h)
        res = float(np.max(np.abs(F)))
        if not math.isfinite(res):
            raise _StepFailure("nonfinite residual")

        # banded Jacobian of the ct-frozen part, (l, u) = (2, 2)
        ab = np.zeros((5, N))
        ab[2, 1:-1] = 1.0 + 2.0 * dt * inv_h2 / d2
        ab[3, 0:-2] = -dt * (inv_h2 / d2 - (n - 1) * half_h / d1)
        ab[1, 2:] = -dt * (inv_h2 / d2 + (n - 1) * half_h / d1)
        ab[2, 0] = 1.0 + efac
        ab[1, 1] = -2.0 - efac
        ab[0, 2] = 1.0
        ab[2, -1] = 1.0 + efac
        ab[3, -2] = -2.0 - efac
        ab[4, -3] = 1.0

        # gauge gradient: three nonzeros at the center columns
        g_cm1 = -inv_h2 / d2c + ((n - 1) * half_h / d1c if variant == "log"
                                 else (n - 1) * half_h)
        g_c = 2.0 * inv_h2 / d2c
        g_cp1 = -inv_h2 / d2c - ((n - 1) * half_h / d1c if variant == "log"
                                 else (n - 1) * half_h)

        stacked = np.column_stack([F, e_int])
        try:
            sol = solve_banded((2, 2), ab, stacked)
        except Exception as exc:
            raise _StepFailure(f"banded solve failed: {exc}") from exc
        y, z = sol[:, 0], sol[:, 1]
        gy = g_cm1 * y[c - 1] + g_c * y[c] + g_cp1 * y[c + 1]
        gz = g_cm1 * z[c - 1] + g_c * z[c] + g_cp1 * z[c + 1]
        denom = 1.0 - dt * gz
        if not math.isfinite(denom) or abs(denom) < 1e-13:
            raise _StepFailure("singular gauge coupling")
        delta = y + (dt * gy / denom) * z
        if not np.all(np.isfinite(delta)):
            raise _StepFailure("nonfinite Newton update")

        sup_delta = float(np.max(np.abs(delta)))
        lam = 1.0
        for _ in range(9):
            w_try = w - lam * delta
            if _valid(w_try, h, ctl.floor_u2):
                break
            lam *= 0.5
        else:
            raise _StepFailure("damping exhausted: iterate leaves admissible cone")
        w = w_try
        if lam == 1.0 and sup_delta <= ctl.tol_newton:
            return w, it, res
    raise _StepFailure(f"Newton stalled after {ctl.newton_max_iter} iterations "
                       f"(residual {res:.3e})")


def _predictor(u_prev: np.ndarray, dt: float, grid: RhoGrid, n: int,
               variant: str, floor: float) -> np.ndarray:
    d1, d2 = _second_diffs(u_prev, grid.h)
    d1 = np.maximum(d1, 1e-300)
    d2 = np.maximum(d2, max(floor, 1e-300))
    c = grid.center
    ct = _ct_discrete(float(d1[c - 1]), float(d2[c - 1]), n, variant)
    vel = np.log(d2) + (n - 1) * np.log(d1) - n * grid.nodes[1:-1] + ct
    w = u_prev.copy()
    w[1:-1] += dt * vel
    w[0] += dt * vel[0]
    w[-1] += dt * vel[-1]
    return w


def _attempt(u_prev: np.ndarray, t0: float, dt: float, params: FlowParams,
             grid: RhoGrid, ctl: StepControl, variant: str) -> tuple[np.ndarray, int, float]:
    cls_new = class_at(params, t0 + dt)
    w0 = _predictor(u_prev, dt, grid, params.n, variant, ctl.floor_u2)
    return _solve_stage(u_prev, dt, grid, cls_new, params.n, params.k,
                        ctl, variant, w0)


def step(state: FlowState, ctl: StepControl, t_cap: float | None = None,
         ct_variant: str = "log") -> FlowState:
    """Advance one accepted adaptive step (with internal retries).

    t_cap, when given, is an event time the step must not overshoot; the
    step lands on it exactly when the proposal reaches it.
    """
    if ct_variant not in CT_VARIANTS:
        raise ValueError(f"unknown ct variant {ct_variant!r}")
    p = state.profile
    params = state.params
    grid = p.grid
    info = singular_time(params)
    T = info.T
    t = p.t
    if t >= ctl.t_stop_fraction * T:
        raise FlowError(f"t={t} already beyond the stop time {ctl.t_stop_fraction * T}")

    dt = state.stats.dt_next if state.stats is not None else ctl.dt_init
    dt = min(dt, ctl.dt_max, 0.25 * (T - t))
    retries = 0
    while True:
        hit_cap = False
        if t_cap is not None and t + dt >= t_cap * (1.0 - 1e-14):
            dt = t_cap - t
            hit_cap = True
            if dt <= 0.0:
                raise FlowError(f"event time {t_cap} not ahead of t={t}")
        try:
            uA, _, _ = _attempt(p.u, t, dt, params, grid, ctl, ct_variant)
            uh, _, _ = _attempt(p.u, t, 0.5 * dt, params, grid, ctl, ct_variant)
            uB, iters, res = _attempt(uh, t + 0.5 * dt, 0.5 * dt, params, grid,
                                      ctl, ct_variant)
        except _StepFailure as exc:
            retries += 1
            dt *= 0.5
            if dt < ctl.dt_min:
                raise FlowError(
                    f"profile degenerate: step size underflow at t={t:.12g} ({exc})")
            continue

        err = float(np.max(np.abs(uA - uB)))
        if err <= ctl.tol_step or dt <= 2.0 * ctl.dt_min:
            break
        retries += 1
        dt *= max(0.2, ctl.safety * math.sqrt(ctl.tol_step / err))
        if dt < ctl.dt_min:
            raise FlowError(f"profile degenerate: step size underflow at t={t:.12g}")

    t_new = t_cap if hit_cap else t + dt
    factor = ctl.max_growth if err == 0.0 else \
        min(ctl.max_growth, max(0.2, ctl.safety * math.sqrt(ctl.tol_step / err)))
    dt_next = min(max(dt * factor, ctl.dt_min), ctl.dt_max)

    cls_new = class_at(params, t_new)
    _, d2c = _second_diffs(uB, grid.h)
    if float(np.min(d2c)) <= ctl.floor_u2:
        raise FlowError(f"profile degenerate: u'' at floor after step to t={t_new:.12g}")
    p_new = profile_from_samples(uB, grid, cls_new, t_new, params.n, params.k)
    stats = StepStats(dt=dt, dt_next=dt_next, newton_iters=iters,
                      residual=res, error=err, retries=retries)
    return FlowState(profile=p_new, params=params,
                     ct=compute_ct(p_new, variant=ct_variant), stats=stats)


# ---------------------------------------------------------------------------
# full runs

def checkpoint_times(T: float, t_stop: float, count: int) -> list[tuple[float, int]]:
    """Dyadic approach times T*(1 - 2^-j) that fall inside the run."""
    out = []
    for j in range(1, count + 1):
        tj = T * (1.0 - 0.5**j)
        if tj <= t_stop * (1.0 + 1e-12):
            out.append((tj, j))
    return out


def run(
    params: FlowParams,
    ctl: StepControl | None = None,
    grid: RhoGrid | None = None,
    monitors: "diagnostics.MonitorSet | None" = None,
    seed_profile: CalabiProfile | None = None,
    out_dir: str | Path | None = None,
    checkpoints_j: int = 10,
    ct_variant: str = "log",
) -> "diagnostics.FlowTrace":
    """Integrate from t=0 (or the seed's time) to the stop fraction of T.

    Rows are sampled at t=0, at every cadence-th accepted step, at each
    dyadic checkpoint time, and at the stop time.  With out_dir set, the
    trace table, a JSON summary, per-step log lines and the checkpoint
    profiles are written there.
    """
    ctl = ctl or StepControl()
    grid = grid or RhoGrid(12.0, 2049)
    monitors = monitors or diagnostics.MonitorSet()
    info = singular_time(params)
    T = info.T
    t_stop = ctl.t_stop_fraction * T

    if seed_profile is None:
        seed_profile = build_canonical_profile(class_at(params, 0.0), grid,
                                               params.n, params.k)
    else:
        grid = seed_profile.grid
        expect = class_at(params, seed_profile.t)
        drift = max(abs(seed_profile.cls.a - expect.a),
                    abs(seed_profile.cls.b - expect.b))
        if drift > 1e-9 * max(params.b0, 1.0):
            raise FlowError(
                f"seed class ({seed_profile.cls.a:.9g}, {seed_profile.cls.b:.9g}) "
                f"does not match the class motion at t={seed_profile.t:.9g}")
    if seed_profile.t >= t_stop:
        raise FlowError(f"seed time {seed_profile.t} is past the stop time {t_stop}")

    events = [(tj, j) for tj, j in checkpoint_times(T, t_stop, checkpoints_j)
              if tj > seed_profile.t]
    if not events or t_stop - events[-1][0] > 1e-12 * T:
        events.append((t_stop, 0))

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    log_fh = (out / "run.log").open("w") if out is not None else None

    state = FlowState(profile=seed_profile, params=params,
                      ct=compute_ct(seed_profile, variant=ct_variant))
    trace = diagnostics.FlowTrace(params=params, T=T, regime=info.regime,
                                  rows=[], checkpoints=[],
                                  initial_profile=seed_profile)
    trace.rows.append(diagnostics.sample_row(seed_profile, T, info.regime,
                                             monitors, dt=0.0, iters=0))
    started = time.perf_counter()
    try:
        ev_idx = 0
        accepted = 0
        while state.profile.t < t_stop * (1.0 - 1e-14):
            if ev_idx >= len(events):
                break
            t_cap = events[ev_idx][0]
            state = step(state, ctl, t_cap=t_cap, ct_variant=ct_variant)
            accepted += 1
            t = state.profile.t
            st = state.stats
            if log_fh is not None:
                log_fh.write(f"t={t:.12g} dt={st.dt:.6g} iters={st.newton_iters} "
                             f"res={st.residual:.6g}\n")
            if abs(t - t_cap) <= 1e-12 * max(T, 1.0):
                j = events[ev_idx][1]
                ev_idx += 1
                if j > 0:
                    trace.checkpoints.append(
                        diagnostics.CheckpointRecord(j=j, t=t, profile=state.profile))
                    if out is not None:
                        save_checkpoint(state.profile, out / f"checkpoint_j{j:02d}.json")
                trace.rows.append(diagnostics.sample_row(
                    state.profile, T, info.regime, monitors,
                    dt=st.dt, iters=st.newton_iters))
            elif accepted % monitors.cadence == 0:
                trace.rows.append(diagnostics.sample_row(
                    state.profile, T, info.regime, monitors,
                    dt=st.dt, iters=st.newton_iters))
    except FlowError as exc:
        trace.final_profile = state.profile
        trace.elapsed = time.perf_counter() - started
        exc.trace = trace
        if log_fh is not None:
            log_fh.write(f"error: {exc}\n")
            log_fh.close()
        raise
    else:
        if log_fh is not None:
            log_fh.close()

    trace.final_profile = state.profile
    trace.elapsed = time.perf_counter() - started
    if out is not None:
        diagnostics.export_trace(trace, out / "trace.csv")
        diagnostics.write_summary(trace, out / "summary.json")
    return trace


# ---------------------------------------------------------------------------
# consistency diagnostics

def evolution_residuals(p_prev: CalabiProfile, p_next: CalabiProfile,
                        dt: float) -> dict[str, float]:
    """Sup-norm defects of the differentiated flow equations over one step.

    Compares finite time differences of u', u'', u''' against the
    trapezoidal average of their analytic evolution laws, e.g.
    d(u')/dt = u'''/u'' + (n-1) u''/u' - n.  Restricted to nodes away from
    both tails (raw stencils are exact there); the fifth derivative needed
    for the u''' law is obtained by differencing d4u.
    """
    if p_prev.grid.N != p_next.grid.N:
        raise ValueError("profiles on different grids")
    n = p_prev.n
    h = p_prev.grid.h
    N = p_prev.grid.N
    lo, hi = 4, N - 4

    def pieces(p: CalabiProfile) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        du, d2u, d3u, d4u = p.du, p.d2u, p.d3u, p.d4u
        r1 = d3u / d2u + (n - 1) * d2u / du - n
        r2 = (d4u / d2u - (d3u / d2u) ** 2
              + (n - 1) * (d3u / du - (d2u / du) ** 2))
        radius, coeffs = _D1_STENCIL
        d5_mid = np.convolve(d4u, coeffs[::-1], mode="valid") / h
        d5 = np.full(N, np.nan)
        d5[radius:N - radius] = d5_mid
        r3 = (d5 / d2u - 3.0 * d3u * d4u / d2u**2 + 2.0 * d3u**3 / d2u**3
              + (n - 1) * (d4u / du - 3.0 * d2u * d3u / du**2
                           + 2.0 * d2u**3 / du**3))
        return r1, r2, r3

    prev_r = pieces(p_prev)
    next_r = pieces(p_next)
    # stay in the transition region: raw high-order stencils are only
    # noise-free there, and that is where the dynamics happen anyway
    krho = p_prev.k * p_prev.grid.nodes
    band = np.abs(krho[lo:hi]) <= 2.0
    interior = slice(lo, hi)
    out = {}
    for name, get_prev, get_next, arr_prev, arr_next in (
        ("du", p_prev.du, p_next.du, prev_r[0], next_r[0]),
        ("d2u", p_prev.d2u, p_next.d2u, prev_r[1], next_r[1]),
        ("d3u", p_prev.d3u, p_next.d3u, prev_r[2], next_r[2]),
    ):
        lhs = (get_next[interior] - get_prev[interior]) / dt
        rhs_avg = 0.5 * (arr_prev[interior] + arr_next[interior])
        defect = np.abs(lhs - rhs_avg)[band]
        out[name] = float(np.nanmax(defect))
    return out


_D1_STENCIL = (2, np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0)
