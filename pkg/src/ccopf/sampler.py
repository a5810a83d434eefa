"""Importance sampling mixture over the polytope's stochastic rows.

Each stochastic row i contributes one mixture component: a standard
Gaussian conditioned on the half-space w_i' xi > delta_i. Components are
weighted proportionally to their tail probabilities p_i, which makes the
likelihood ratio against the plain Gaussian bounded by
M = sum(p) / max(p). Sampling and densities run in the reduced
coordinates of the uncertainty support, so singular covariances (fixed
loads, slack bus) cost nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FeasibilityPolytope
from .kernels import norm_isf, norm_sf, tail_quantile
from .margins import GaussianSpec, MarginSet

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class MixtureSampler:
    """Frozen description of the tail mixture.

    directions holds the component axes as full-space unit vectors (rows
    of the symmetric-root image of the row normals); reduced_directions
    holds the same axes in support coordinates, which is what sampling
    and density evaluation use. thresholds are the margins in standard
    deviations, weights the mixture probabilities, tail_probs the
    per-component half-space probabilities, and M the likelihood-ratio
    bound sum(tail_probs) / max(tail_probs). row_indices maps components
    back to polytope rows.
    """

    directions: np.ndarray
    reduced_directions: np.ndarray
    thresholds: np.ndarray
    weights: np.ndarray
    tail_probs: np.ndarray
    M: float
    gaussian: GaussianSpec
    row_indices: tuple[int, ...]

    def __post_init__(self):
        n_comp = self.directions.shape[0]
        if n_comp == 0:
            raise ValueError("mixture needs at least one component")
        shapes = {
            "reduced_directions": self.reduced_directions.shape[0],
            "thresholds": self.thresholds.shape[0],
            "weights": self.weights.shape[0],
            "tail_probs": self.tail_probs.shape[0],
            "row_indices": len(self.row_indices),
        }
        for name, count in shapes.items():
            if count != n_comp:
                raise ValueError(f"{name} has {count} entries for {n_comp} components")
        if np.any(self.weights < 0) or abs(float(np.sum(self.weights)) - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")
        if np.any(self.tail_probs <= 0) or np.any(self.tail_probs > 0.5):
            raise ValueError("tail probabilities must lie in (0, 0.5]")
        norms = np.linalg.norm(self.reduced_directions, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ValueError("reduced directions must be unit vectors")
        for arr in (
            self.directions,
            self.reduced_directions,
            self.thresholds,
            self.weights,
            self.tail_probs,
        ):
            arr.setflags(write=False)

    @property
    def n_components(self) -> int:
        return self.directions.shape[0]

    @property
    def reduced_dim(self) -> int:
        return self.reduced_directions.shape[1]


def build_mixture(poly: FeasibilityPolytope, m: MarginSet, g: GaussianSpec) -> MixtureSampler:
    """Assemble the tail mixture for a tightened polytope.

    Weights are proportional to the per-row tail probabilities, the
    choice that minimises the likelihood-ratio bound M.

    Raises
    ------
    ValueError
        No stochastic rows: every row is deterministic under g, so there
        is no tail to sample.
    """
    if m.delta.shape[0] != poly.n_rows:
        raise ValueError("margin set does not match the polytope")
    stochastic = m.stochastic
    if not bool(np.any(stochastic)):
        raise ValueError(
            "all rows are deterministic under the uncertainty; "
            "the tail mixture is undefined"
        )
    rows = np.nonzero(stochastic)[0]
    normals = poly.normals[rows]
    sigma = m.sigma[rows]
    beta = m.beta[rows]

    basis, vec, _ = g._reduction
    reduced = (normals @ basis) / sigma[:, None]
    directions = reduced @ vec.T

    probs = norm_sf(beta)
    total = float(np.sum(probs))
    weights = probs / total
    bound = total / float(np.max(probs))

    return MixtureSampler(
        directions=directions,
        reduced_directions=reduced,
        thresholds=beta.copy(),
        weights=weights,
        tail_probs=probs,
        M=bound,
        gaussian=g,
        row_indices=tuple(int(r) for r in rows),
    )


def sample_tail(ms: MixtureSampler, i: int, rng: np.random.Generator) -> np.ndarray:
    """One deviation from component i, guaranteed in its half-space.

    Draws a standard normal in the support, then replaces its coordinate
    along the component axis with a truncated-tail draw: the quantile of
    p_i * u lies above the threshold for u in (0, 1].
    """
    if not 0 <= i < ms.n_components:
        raise IndexError(f"component {i} out of range")
    axis = ms.reduced_directions[i]
    z = rng.standard_normal(ms.reduced_dim)
    u = 1.0 - rng.random()  # (0, 1]: keeps the quantile finite
    y = float(tail_quantile(float(ms.thresholds[i]), float(ms.tail_probs[i]), u))
    w = z + axis * (y - float(axis @ z))
    return ms.gaussian.from_reduced(w)


def sample_mixture(ms: MixtureSampler, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """One deviation from the mixture; returns (deviation, component)."""
    comp = int(rng.choice(ms.n_components, p=ms.weights))
    return sample_tail(ms, comp, rng), comp


def sample_mixture_batch(
    ms: MixtureSampler, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """n mixture deviations in one shot; returns (n x buses, components).

    The draw order is fixed (components, then normals, then tail
    uniforms) so results are reproducible for a given generator state.
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    comps = rng.choice(ms.n_components, size=n, p=ms.weights)
    z = rng.standard_normal((n, ms.reduced_dim))
    u = 1.0 - rng.random(n)
    beta = ms.thresholds[comps]
    probs = ms.tail_probs[comps]
    y = np.maximum(norm_isf(probs * u), beta)
    axes = ms.reduced_directions[comps]
    w = z + axes * (y - np.einsum("ij,ij->i", axes, z))[:, None]
    return ms.gaussian.from_reduced(w), comps


def mixture_pdf(ms: MixtureSampler, xi: np.ndarray) -> float | np.ndarray:
    """Mixture density at xi, in support coordinates.

    The value is a density with respect to the reduced coordinates of the
    uncertainty support; likelihood ratios against the base Gaussian in
    the same coordinates are therefore coordinate-free. Zero inside the
    inner set (no component covers it). Raises if xi lies off the
    support.
    """
    w = ms.gaussian.to_reduced(xi)
    batched = np.asarray(xi).ndim > 1
    w2 = np.atleast_2d(w)
    proj = w2 @ ms.reduced_directions.T
    outside = proj > ms.thresholds
    base = _standard_density(w2)
    scale = outside @ (ms.weights / ms.tail_probs)
    values = base * scale
    return values if batched else float(values[0])


def importance_ratio(ms: MixtureSampler, xi: np.ndarray) -> float | np.ndarray:
    """Base-Gaussian over mixture density; inf where the mixture is zero.

    Conditioning the base density on the outside of the inner set divides
    this by the outside probability; the bound ms.M applies to that
    conditioned ratio.
    """
    w = ms.gaussian.to_reduced(xi)
    batched = np.asarray(xi).ndim > 1
    w2 = np.atleast_2d(w)
    proj = w2 @ ms.reduced_directions.T
    outside = proj > ms.thresholds
    scale = outside @ (ms.weights / ms.tail_probs)
    with np.errstate(divide="ignore"):
        values = np.where(scale > 0, 1.0 / np.where(scale > 0, scale, 1.0), np.inf)
    return values if batched else float(values[0])


def _standard_density(w: np.ndarray) -> np.ndarray:
    """Standard normal density rows of w (reduced coordinates)."""
    k = w.shape[1]
    return (2.0 * np.pi) ** (-0.5 * k) * np.exp(-0.5 * np.einsum("ij,ij->i", w, w))
