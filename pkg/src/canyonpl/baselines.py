"""Closed-form path-loss baselines: the log-distance fit and two 3GPP single-slope curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CARRIER_GHZ = 28.0


@dataclass(frozen=True)
class SlopeInterceptModel:
    A: float       # dB at 1 m
    n: float       # path-loss exponent
    sigma: float   # residual RMSE, dB

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def predict(self, d3d) -> np.ndarray:
        return predict_slope_intercept(self, d3d)


def _positive(name, v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise ValueError(f"{name} must be > 0")
    return arr


def fit_slope_intercept(d3d, pl) -> SlopeInterceptModel:
    """Least-squares line of ``pl`` against ``10 log10(d3d)``."""
    d = _positive("d3d", d3d).reshape(-1)
    y = np.asarray(pl, dtype=np.float64).reshape(-1)
    if len(d) != len(y) or len(d) < 2:
        raise ValueError("need at least two (distance, PL) pairs")
    x = 10.0 * np.log10(d)
    xc = x - x.mean()
    sxx = xc @ xc
    if sxx <= 1e-12 * max(1.0, x.mean() ** 2) * len(x):
        raise ValueError("singular fit: all distances are equal")
    n = float(xc @ (y - y.mean()) / sxx)
    A = float(y.mean() - n * x.mean())
    resid = y - (A + n * x)
    return SlopeInterceptModel(A, n, float(np.sqrt(np.mean(resid * resid))))


def predict_slope_intercept(model: SlopeInterceptModel, d3d):
    d = _positive("d3d", d3d)
    out = model.A + 10.0 * model.n * np.log10(d)
    return float(out) if out.ndim == 0 else out


def gpp_uma_los(d3d, fc: float = CARRIER_GHZ):
    d = _positive("d3d", d3d)
    f = _positive("fc", fc)
    out = 28.0 + 22.0 * np.log10(d) + 20.0 * np.log10(f)
    return float(out) if out.ndim == 0 else out


def gpp_umi_nlos(d3d, fc: float = CARRIER_GHZ):
    d = _positive("d3d", d3d)
    f = _positive("fc", fc)
    out = 22.4 + 35.3 * np.log10(d) + 21.3 * np.log10(f)
    return float(out) if out.ndim == 0 else out
