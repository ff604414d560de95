"""Weighted fits of measured g2 curves: the two-exponential model via
Levenberg-Marquardt (in log-rate space, with an analytic Jacobian) and a
closed-form weighted linear baseline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from photonlab.core import TICKS_PER_SECOND
from photonlab.correlation import G2Curve
from photonlab.emitters import G2Model

# convergence per the frozen contract: relative residual change, gradient
# norm, and an iteration cap
FTOL = 1e-10
GTOL = 1e-8
XTOL = 1e-12
MAX_ITER = 500


class DegenerateCurveError(ValueError):
    """All bins identical; no curve shape to fit."""


@dataclass(frozen=True)
class FitResult:
    model: G2Model
    residual_sum: float
    n_iterations: int
    converged: bool
    param_errors: tuple[float, float, float]  # one sigma on (a, lambda1, lambda2)


@dataclass(frozen=True)
class LinearFit:
    slope: float       # per second
    intercept: float
    residual_sum: float
    slope_err: float
    intercept_err: float


def _weights(curve: G2Curve) -> np.ndarray:
    """1/sigma weights; zero or missing error bars get a floor so weights
    stay finite (the floor is the smallest positive error, or 1)."""
    err = np.asarray(curve.g2_err, dtype=np.float64)
    pos = err[np.isfinite(err) & (err > 0)]
    floor = pos.min() if pos.size else 1.0
    err = np.where(np.isfinite(err) & (err > 0), err, floor)
    return 1.0 / err


def _rates(x: np.ndarray) -> tuple[float, float, float]:
    # clip log-rates so wandering LM steps cannot overflow exp
    return x[0], np.exp(min(x[1], 700.0)), np.exp(min(x[2], 700.0))


def model_values(x: np.ndarray, tau_s: np.ndarray) -> np.ndarray:
    """Curve value at x = (a, log lambda1, log lambda2)."""
    a, l1, l2 = _rates(x)
    return 1.0 - (1.0 + a) * np.exp(-l1 * tau_s) + a * np.exp(-l2 * tau_s)


def model_jacobian(x: np.ndarray, tau_s: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of model_values w.r.t. (a, log l1, log l2)."""
    a, l1, l2 = _rates(x)
    e1 = np.exp(-l1 * tau_s)
    e2 = np.exp(-l2 * tau_s)
    return np.column_stack([
        e2 - e1,
        (1.0 + a) * tau_s * l1 * e1,
        -a * tau_s * l2 * e2,
    ])


def _canonical(a: float, l1: float, l2: float) -> tuple[float, float, float]:
    """Enforce lambda1 > lambda2; the form is invariant under
    (a, l1, l2) -> (-(1 + a), l2, l1)."""
    if l1 < l2:
        return -(1.0 + a), l2, l1
    return a, l1, l2


def _start_points(curve: G2Curve) -> list[np.ndarray]:
    tau_s = np.asarray(curve.tau_centers, dtype=np.float64) / TICKS_PER_SECOND
    span = tau_s.max()
    lo = max(tau_s.min(), span / 200.0)
    lams = np.geomspace(0.2 / span, 10.0 / lo, 6)
    starts = []
    for a0 in (0.0, 0.5, 2.0):
        for i, lam1 in enumerate(lams):
            for lam2 in lams[:i]:
                starts.append(np.array([a0, np.log(lam1), np.log(lam2)]))
    return starts


def fit_g2(curve: G2Curve, init: G2Model | None = None,
           max_iter: int = MAX_ITER) -> FitResult:
    """Weighted nonlinear least squares of the two-exponential curve.

    Without `init`, a multi-start over a log-spaced rate grid is run and the
    best residual wins (ties broken by lexicographic parameter order).
    """
    tau_s = np.asarray(curve.tau_centers, dtype=np.float64) / TICKS_PER_SECOND
    g2 = np.asarray(curve.g2, dtype=np.float64)
    counts = np.asarray(curve.counts)
    n_filled = np.count_nonzero(counts) if counts.size else len(g2)
    if n_filled < 4:
        raise ValueError("need at least 4 non-empty bins")
    if np.ptp(g2) == 0.0:
        raise DegenerateCurveError("all bins are identical")
    w = _weights(curve)

    def residuals(x):
        return (model_values(x, tau_s) - g2) * w

    def jac(x):
        return model_jacobian(x, tau_s) * w[:, None]

    if init is not None:
        starts = [np.array([init.a, np.log(init.lambda1), np.log(init.lambda2)])]
    else:
        starts = _start_points(curve)

    best = None
    for x0 in starts:
        try:
            res = least_squares(residuals, x0, jac=jac, method="lm",
                                ftol=FTOL, xtol=XTOL, gtol=GTOL, max_nfev=max_iter)
        except (ValueError, np.linalg.LinAlgError):
            continue
        cost = 2.0 * res.cost  # sum of squared weighted residuals
        if not np.isfinite(cost):
            continue
        _, r1, r2 = _rates(res.x)
        a, l1, l2 = _canonical(res.x[0], r1, r2)
        key = (cost, a, l1, l2)
        if best is None or key < best[0]:
            best = (key, res, (a, l1, l2))
    if best is None:
        raise ValueError("no fit start converged to a finite residual")

    key, res, (a, l1, l2) = best
    jtj = res.jac.T @ res.jac
    _, r1, r2 = _rates(res.x)
    try:
        cov = np.linalg.inv(jtj)
        diag = np.diag(cov)
        sig = np.sqrt(np.where(diag > 0, diag, np.inf))
        # propagate log-rate sigmas back to the rates
        errs = (float(sig[0]), float(r1 * sig[1]), float(r2 * sig[2]))
        if res.x[1] < res.x[2]:  # canonical swap also swaps the rate errors
            errs = (errs[0], errs[2], errs[1])
    except np.linalg.LinAlgError:
        errs = (float("inf"),) * 3
    return FitResult(
        model=G2Model(a=a, lambda1=l1, lambda2=l2),
        residual_sum=float(key[0]),
        n_iterations=int(res.nfev),
        converged=bool(res.status > 0 and res.nfev < max_iter),
        param_errors=errs,
    )


def fit_linear(curve: G2Curve) -> LinearFit:
    """Closed-form weighted least-squares line g2 = slope*tau + intercept
    (tau in seconds)."""
    tau_s = np.asarray(curve.tau_centers, dtype=np.float64) / TICKS_PER_SECOND
    g2 = np.asarray(curve.g2, dtype=np.float64)
    if len(g2) < 2:
        raise ValueError("need at least 2 bins")
    if np.ptp(tau_s) == 0.0:
        raise ValueError("singular design: all tau equal")
    w2 = _weights(curve) ** 2
    S = w2.sum()
    Sx = (w2 * tau_s).sum()
    Sy = (w2 * g2).sum()
    Sxx = (w2 * tau_s * tau_s).sum()
    Sxy = (w2 * tau_s * g2).sum()
    d = S * Sxx - Sx * Sx
    slope = (S * Sxy - Sx * Sy) / d
    intercept = (Sxx * Sy - Sx * Sxy) / d
    resid = float((w2 * (g2 - slope * tau_s - intercept) ** 2).sum())
    return LinearFit(slope=float(slope), intercept=float(intercept),
                     residual_sum=resid,
                     slope_err=float(np.sqrt(S / d)),
                     intercept_err=float(np.sqrt(Sxx / d)))
