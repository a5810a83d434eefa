"""Gaussian uncertainty and per-row safety margins.

Fluctuations enter as a zero-mean Gaussian deviation xi of the injection
vector. Each polytope row picks up a margin delta_i so that a dispatch
satisfying the tightened system keeps the row's violation probability at
eta. Rows invisible to the uncertainty (zero variance along the normal)
stay untouched. The inner deviation set {xi : w_i' xi <= delta_i for all i}
is what the margins cover; its probability pi feeds the filtered sample
size bound.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import FeasibilityPolytope
from .kernels import norm_isf, norm_sf

# Rows whose projected standard deviation falls below this times the
# largest one are treated as deterministic.
DETERMINISTIC_CUTOFF = 1e-12

# Slack when testing xi against the inner deviation set; absorbs rounding
# on rows orthogonal to the uncertainty.
_CONTAINS_TOL = 1e-12


@dataclass(frozen=True)
class GaussianSpec:
    """Zero-mean Gaussian deviation model for injections (p.u.).

    cov_half is any factor F with F @ F.T == cov; deviations are sampled
    as F z with z standard normal, so F may be rectangular when cov is
    singular.
    """

    cov: np.ndarray
    cov_half: np.ndarray

    def __post_init__(self):
        if self.cov.ndim != 2 or self.cov.shape[0] != self.cov.shape[1]:
            raise ValueError(f"covariance must be square, got {self.cov.shape}")
        if not np.allclose(self.cov, self.cov.T, rtol=1e-8, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if self.cov_half.ndim != 2 or self.cov_half.shape[0] != self.cov.shape[0]:
            raise ValueError(
                f"factor shape {self.cov_half.shape} incompatible with "
                f"covariance {self.cov.shape}"
            )
        product = self.cov_half @ self.cov_half.T
        scale = max(float(np.max(np.abs(self.cov))), 1e-300)
        if not np.allclose(product, self.cov, rtol=1e-8, atol=1e-10 * scale):
            raise ValueError("cov_half @ cov_half.T does not reproduce cov")
        self.cov.setflags(write=False)
        self.cov_half.setflags(write=False)

    @classmethod
    def from_covariance(cls, cov: np.ndarray) -> GaussianSpec:
        """Build a spec with a symmetric PSD square root of cov."""
        cov = np.asarray(cov, dtype=float)
        sym = 0.5 * (cov + cov.T)
        eigval, eigvec = np.linalg.eigh(sym)
        top = float(np.max(np.abs(eigval))) if eigval.size else 0.0
        if np.any(eigval < -1e-10 * max(top, 1.0)):
            raise ValueError("covariance is not positive semidefinite")
        root = (eigvec * np.sqrt(np.clip(eigval, 0.0, None))) @ eigvec.T
        return cls(cov=sym, cov_half=root)

    @property
    def n(self) -> int:
        return self.cov.shape[0]

    @cached_property
    def _reduction(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Positive-eigenvalue factorisation cov = U U' with U = V sqrt(L).

        Returns (U, V, inv_sqrt_L) where V has orthonormal columns spanning
        the support, so reduced coordinates are w = inv_sqrt_L * (V' xi).
        """
        eigval, eigvec = np.linalg.eigh(self.cov)
        top = float(np.max(np.abs(eigval))) if eigval.size else 0.0
        keep = eigval > 1e-12 * max(top, 1e-300)
        lam = eigval[keep]
        vec = eigvec[:, keep]
        basis = vec * np.sqrt(lam)
        for arr in (basis, vec):
            arr.setflags(write=False)
        inv_sqrt = 1.0 / np.sqrt(lam)
        inv_sqrt.setflags(write=False)
        return basis, vec, inv_sqrt

    @property
    def reduced_dim(self) -> int:
        """Dimension of the uncertainty support."""
        return self._reduction[0].shape[1]

    @property
    def reduced_factor(self) -> np.ndarray:
        """Factor U (n x k) with U @ U.T == cov and full column rank."""
        return self._reduction[0]

    def to_reduced(self, xi: np.ndarray) -> np.ndarray:
        """Coordinates w with U w == xi; raises if xi leaves the support."""
        basis, vec, inv_sqrt = self._reduction
        xi = np.asarray(xi, dtype=float)
        w = (xi @ vec) * inv_sqrt
        residual = w @ basis.T - xi
        norms = np.linalg.norm(np.atleast_2d(residual), axis=-1)
        scale = max(1.0, float(np.max(np.linalg.norm(np.atleast_2d(xi), axis=-1))))
        if np.any(norms > 1e-8 * scale):
            raise ValueError(
                "deviation lies outside the support of the uncertainty; "
                "its density under the restricted Gaussian is undefined"
            )
        return w

    def from_reduced(self, w: np.ndarray) -> np.ndarray:
        """Map reduced coordinates back to a full deviation vector."""
        return np.asarray(w, dtype=float) @ self.reduced_factor.T


@dataclass(frozen=True)
class MarginSet:
    """Per-row margins for a fixed polytope / uncertainty / eta.

    delta is the offset shrink in p.u.; beta = delta / sigma is the same
    margin in standard deviations of the row projection (inf on
    deterministic rows, where delta is 0). Row normals, original offsets
    and sigma are carried along so probability estimates need no second
    look at the polytope.
    """

    delta: np.ndarray
    beta: np.ndarray
    eta: float
    normals: np.ndarray
    offsets: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        n_rows = self.delta.shape[0]
        for name in ("beta", "offsets", "sigma"):
            if getattr(self, name).shape != (n_rows,):
                raise ValueError(f"{name} must have shape ({n_rows},)")
        if self.normals.shape[0] != n_rows:
            raise ValueError("one normal per margin row required")
        for arr in (self.delta, self.beta, self.normals, self.offsets, self.sigma):
            arr.setflags(write=False)

    @property
    def stochastic(self) -> np.ndarray:
        """Mask of rows that actually see the uncertainty."""
        return np.isfinite(self.beta)

    @property
    def tail_probs(self) -> np.ndarray:
        """Per-row violation probability Phi(-beta); zero when deterministic."""
        probs = np.where(self.stochastic, norm_sf(np.where(self.stochastic, self.beta, 0.0)), 0.0)
        return probs


@dataclass(frozen=True)
class PiEstimate:
    """Estimated probability of the inner deviation set."""

    value: float
    mode: str
    is_lower_bound: bool
    stderr: float | None = None


def compute_margins(poly: FeasibilityPolytope, g: GaussianSpec, eta: float) -> MarginSet:
    """Margins making each row's violation probability eta.

    For stochastic row i, delta_i = sigma_i * z with z the upper eta
    quantile of the standard normal and sigma_i the standard deviation of
    the row projection of the deviation. eta must lie in (0, 0.5].

    Parameters
    ----------
    poly : FeasibilityPolytope
        Deterministic feasibility system.
    g : GaussianSpec
        Injection deviation model; dimensions must match the polytope.
    eta : float
        Per-row violation probability target.
    """
    if not 0.0 < eta <= 0.5:
        raise ValueError(f"eta must lie in (0, 0.5], got {eta}")
    if poly.n_buses != g.n:
        raise ValueError(
            f"polytope over {poly.n_buses} buses, uncertainty over {g.n}"
        )
    projected = poly.normals @ g.cov_half
    sigma = np.linalg.norm(projected, axis=1)
    top = float(np.max(sigma)) if sigma.size else 0.0
    stochastic = sigma > DETERMINISTIC_CUTOFF * top

    z = float(norm_isf(eta)) + 0.0  # +0.0 normalises -0.0 at eta = 0.5
    delta = np.where(stochastic, sigma * z, 0.0)
    beta = np.where(stochastic, z, np.inf)
    return MarginSet(
        delta=delta,
        beta=beta,
        eta=eta,
        normals=poly.normals.copy(),
        offsets=poly.offsets.copy(),
        sigma=sigma,
    )


def tightened_polytope(poly: FeasibilityPolytope, m: MarginSet) -> FeasibilityPolytope:
    """Shrink offsets by the margins; normals and labels are unchanged."""
    if m.delta.shape[0] != poly.n_rows:
        raise ValueError(
            f"margin set has {m.delta.shape[0]} rows, polytope {poly.n_rows}"
        )
    return FeasibilityPolytope(
        normals=poly.normals,
        offsets=poly.offsets - m.delta,
        labels=poly.labels,
    )


def contains_inner(m: MarginSet, poly: FeasibilityPolytope, xi: np.ndarray) -> bool | np.ndarray:
    """Whether deviation(s) xi lie in the inner set {w_i' xi <= delta_i}.

    Accepts a single vector or a batch with deviations along the last
    axis; returns a bool or a boolean array accordingly.
    """
    if m.delta.shape[0] != poly.n_rows:
        raise ValueError("margin set does not match the polytope")
    xi = np.asarray(xi, dtype=float)
    proj = xi @ poly.normals.T
    inside = np.all(proj <= m.delta + _CONTAINS_TOL, axis=-1)
    return bool(inside) if xi.ndim == 1 else inside


def estimate_pi(
    m: MarginSet,
    g: GaussianSpec,
    mode: str = "union-bound",
    n_samples: int = 100_000,
    seed: int | None = None,
) -> PiEstimate:
    """Probability that a deviation stays inside the inner set.

    'union-bound' returns the closed-form lower bound
    1 - sum_i Phi(-beta_i), clipped at zero; it is conservative and
    needs no sampling. 'monte-carlo' draws deviations from the model and
    counts the fraction inside, reporting a binomial standard error.

    Parameters
    ----------
    m : MarginSet
        Margins defining the inner set.
    g : GaussianSpec
        Deviation model used for sampling (monte-carlo mode).
    mode : str
        'union-bound' or 'monte-carlo'.
    n_samples : int
        Sample count for monte-carlo mode.
    seed : int, optional
        Seed for the sampling stream.
    """
    if mode == "union-bound":
        value = max(0.0, 1.0 - float(np.sum(m.tail_probs)))
        return PiEstimate(value=value, mode=mode, is_lower_bound=True)
    if mode == "monte-carlo":
        if n_samples <= 0:
            raise ValueError(f"n_samples must be positive, got {n_samples}")
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((n_samples, g.cov_half.shape[1]))
        xi = z @ g.cov_half.T
        proj = xi @ m.normals.T
        inside = np.all(proj <= m.delta + _CONTAINS_TOL, axis=1)
        value = float(np.mean(inside))
        stderr = float(np.sqrt(value * (1.0 - value) / n_samples))
        return PiEstimate(value=value, mode=mode, is_lower_bound=False, stderr=stderr)
    raise ValueError(f"unknown mode {mode!r}; use 'union-bound' or 'monte-carlo'")
