"""Profiles in moment coordinates.

A moment profile is the metric written as a function of the moment variable
x = u'(rho): phi(x) = u''(rho(x)).  The change of variables makes profiles at
different times and scales directly comparable, which is what the blow-up
analysis needs.  Slopes transform by the chain rule, phi'(x) = u'''/u''.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator


class MomentDomainError(ValueError):
    """Requested evaluation window leaves the sampled moment domain."""


@dataclass(eq=False)
class MomentProfile:
    """Sampled moment-coordinate profile with monotone-cubic interpolation.

    x:      strictly increasing sample locations in (a_hat, b_hat)
    phi:    positive profile values at the samples
    dphi:   slope samples phi'(x), supplied rather than differenced so that
            chain-rule values (u'''/u'') can be used when available
    a_hat:  left endpoint of the underlying domain, phi -> 0 there
    b_hat:  right endpoint (may be +inf for non-compact references)
    slopes: limiting endpoint slopes (phi'(a_hat), phi'(b_hat))
    """

    x: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    a_hat: float
    b_hat: float
    slopes: tuple[float, float]
    _interp: PchipInterpolator | None = field(default=None, repr=False)
    _interp_slope: PchipInterpolator | None = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.dphi = np.asarray(self.dphi, dtype=float)
        if self.x.ndim != 1 or self.x.size < 4:
            raise ValueError("moment profile needs at least 4 samples")
        if self.x.shape != self.phi.shape or self.x.shape != self.dphi.shape:
            raise ValueError("moment sample arrays must share one shape")
        if np.any(np.diff(self.x) <= 0.0):
            raise ValueError("moment samples must be strictly increasing in x")

    @property
    def x_min(self) -> float:
        return float(self.x[0])

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    def _interpolants(self):
        if self._interp is None:
            self._interp = PchipInterpolator(self.x, self.phi, extrapolate=False)
            self._interp_slope = PchipInterpolator(self.x, self.dphi, extrapolate=False)
        return self._interp, self._interp_slope

    def check_window(self, window: tuple[float, float]) -> None:
        lo, hi = window
        if not lo < hi:
            raise MomentDomainError(f"empty window ({lo}, {hi})")
        if lo < self.x_min or hi > self.x_max:
            raise MomentDomainError(
                f"window ({lo}, {hi}) outside sampled domain "
                f"({self.x_min}, {self.x_max})"
            )

    def eval(self, xq: np.ndarray) -> np.ndarray:
        interp, _ = self._interpolants()
        return interp(xq)

    def eval_slope(self, xq: np.ndarray) -> np.ndarray:
        _, slope = self._interpolants()
        return slope(xq)

    def restrict(self, window: tuple[float, float]) -> "MomentProfile":
        """Samples falling inside a window, as a new profile."""
        self.check_window(window)
        lo, hi = window
        mask = (self.x >= lo) & (self.x <= hi)
        if int(mask.sum()) < 4:
            raise MomentDomainError(f"window ({lo}, {hi}) contains fewer than 4 samples")
        return MomentProfile(
            x=self.x[mask],
            phi=self.phi[mask],
            dphi=self.dphi[mask],
            a_hat=self.a_hat,
            b_hat=self.b_hat,
            slopes=(float(self.dphi[mask][0]), float(self.dphi[mask][-1])),
        )


def c1_distance(
    m1: MomentProfile,
    m2: MomentProfile,
    window: tuple[float, float],
    samples: int = 801,
) -> float:
    """sup |phi1 - phi2| + sup |phi1' - phi2'| over a shared window."""
    m1.check_window(window)
    m2.check_window(window)
    xq = np.linspace(window[0], window[1], samples)
    d0 = np.max(np.abs(m1.eval(xq) - m2.eval(xq)))
    d1 = np.max(np.abs(m1.eval_slope(xq) - m2.eval_slope(xq)))
    return float(d0 + d1)
