"""Elementwise normal-distribution kernels with a compiled fast path.

The hot loops of the whole package live here: erfc, the normal CDF/survival
pair, the quantile, and the truncated-tail inverse transform that the
importance sampler applies to every scenario draw. At import time the Cython
extension is preferred; if it is missing (no compiler at install time) or the
environment sets CCOPF_PURE_PYTHON=1, the NumPy reference implementation in
ccopf.kernels.pure is used instead. BACKEND records the choice.

Accuracy contract (either backend): norm_cdf relative error <= 1e-12 for
|z| <= 8, and norm_sf(norm_isf(p)) recovers p to 1e-10 relative.
"""
from __future__ import annotations

import os

import numpy as np

from . import pure

_force_pure = os.environ.get("CCOPF_PURE_PYTHON", "").strip() not in ("", "0")

if _force_pure:
    _backend = pure
    BACKEND = "python"
else:
    try:
        from . import _fast as _backend  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _backend = pure
        BACKEND = "python"

__all__ = [
    "BACKEND",
    "erfc",
    "norm_pdf",
    "norm_cdf",
    "norm_sf",
    "norm_ppf",
    "norm_isf",
    "tail_quantile",
]


def _elementwise(func, x):
    arr = np.asarray(x, dtype=np.float64)
    out = func(np.ascontiguousarray(arr.ravel())).reshape(arr.shape)
    if arr.ndim == 0:
        return float(out)
    return out


def erfc(x):
    """Complementary error function."""
    return _elementwise(_backend.erfc, x)


def norm_pdf(z):
    """Standard normal density."""
    return _elementwise(_backend.norm_pdf, z)


def norm_cdf(z):
    """Standard normal CDF, computed as erfc(-z/sqrt(2))/2."""
    return _elementwise(_backend.norm_cdf, z)


def norm_sf(z):
    """Standard normal survival function, erfc(z/sqrt(2))/2."""
    return _elementwise(_backend.norm_sf, z)


def norm_ppf(p):
    """Standard normal quantile (inverse CDF) at full double precision."""
    return _elementwise(_backend.norm_ppf, p)


def norm_isf(p):
    """Inverse survival function, -norm_ppf(p); stable for small p."""
    return _elementwise(_backend.norm_isf, p)


def tail_quantile(beta, p_tail, u):
    """Inverse transform for the upper tail beyond beta.

    Parameters
    ----------
    beta : float
        Standardized truncation point.
    p_tail : float
        Tail mass norm_sf(beta), passed in to avoid recomputation.
    u : array_like
        Uniform variates in (0, 1].

    Returns
    -------
    ndarray
        y with survival(y) = p_tail * u, clamped to y >= beta.
    """
    arr = np.asarray(u, dtype=np.float64)
    out = _backend.tail_quantile(float(beta), float(p_tail), np.ascontiguousarray(arr.ravel()))
    return out.reshape(arr.shape)
