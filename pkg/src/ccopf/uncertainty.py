"""Default injection uncertainty: independent per-bus fluctuations.

Deviations scale with the nominal injection magnitude, so buses with no
nominal transfer stay fixed and the slack bus never fluctuates on its
own (its response is implied by balance).
"""
from __future__ import annotations

import numpy as np

from .grid import GridCase
from .margins import GaussianSpec


def build_uncertainty(case: GridCase, sigma_frac: float) -> GaussianSpec:
    """Diagonal Gaussian with sigma_i = sigma_frac * |nominal injection|.

    Standard deviations are in p.u. on the case base. The slack bus and
    buses with zero nominal injection get exact zero variance, keeping
    the uncertainty support low-dimensional.

    Parameters
    ----------
    case : GridCase
        Grid whose nominal injections set the fluctuation scale.
    sigma_frac : float
        Relative fluctuation size, e.g. 0.07 for 7 percent.
    """
    if sigma_frac < 0:
        raise ValueError(f"sigma_frac must be non-negative, got {sigma_frac}")
    sigma = sigma_frac * np.abs(case.nominal_injection)
    sigma[case.slack_index] = 0.0
    return GaussianSpec(cov=np.diag(sigma**2), cov_half=np.diag(sigma))
