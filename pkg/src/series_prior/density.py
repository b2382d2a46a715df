"""MCMC-free posterior moments for random-series density estimation.

The density is modeled as p(x) = sum_k theta_k B*_k(x) with normalized
B-splines, a Dirichlet prior on theta given the dimension J, and a truncated
prior on J. The posterior mean and second moment at any point are finite
sums over active-set index assignments, evaluated exactly when the number of
terms is manageable and by uniform term sampling with delta-method standard
errors otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm

from . import _engine
from ._engine import EnumerationCapError
from .basis import Basis, eval_normalized, make_basis
from .priors import CoefficientPrior, ModelSizePrior, log_dirichlet_normalizer

DEFAULT_TERM_CAP = 10_000_000

__all__ = [
    "DensityDataset",
    "TermIndex",
    "PosteriorSummary",
    "EnumerationCapError",
    "bases_for_prior",
    "log_term",
    "exact_moment",
    "mc_moment",
    "credible_band",
    "j_posterior",
]


@dataclass(frozen=True)
class DensityDataset:
    """Observations on [0, 1]."""

    observations: np.ndarray

    def __post_init__(self):
        obs = np.atleast_1d(np.asarray(self.observations, dtype=float))
        if obs.ndim != 1:
            raise ValueError("observations must be one-dimensional")
        if obs.size and (obs.min() < 0.0 or obs.max() > 1.0):
            raise ValueError(
                "observations must lie in [0, 1]; pass rescale=True to from_array "
                "to min-max rescale"
            )
        object.__setattr__(self, "observations", obs)

    @staticmethod
    def from_array(x, rescale: bool = False) -> "DensityDataset":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if rescale and x.size:
            lo, hi = x.min(), x.max()
            if hi > lo:
                x = (x - lo) / (hi - lo)
            else:
                x = np.full_like(x, 0.5)
        return DensityDataset(x)

    @property
    def n(self) -> int:
        return self.observations.size


@dataclass(frozen=True)
class TermIndex:
    """One expansion term: a basis index per observation, plus an optional
    index for the evaluation point."""

    indices: tuple[int, ...]
    eval_index: int | None = None


@dataclass(frozen=True)
class PosteriorSummary:
    """Grid summary of the posterior over the estimated function.

    mc_se is zero in exact mode. j_weights are the posterior probabilities
    of each dimension in the truncation range (j_values aligned).
    """

    grid: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray | None
    band_low: np.ndarray | None
    band_high: np.ndarray | None
    mc_se: np.ndarray
    j_values: np.ndarray
    j_weights: np.ndarray
    mode: str


def bases_for_prior(q: int, model_prior: ModelSizePrior) -> dict[int, Basis]:
    """One basis per dimension in the truncation range (J = q + K - 1)."""
    if model_prior.j_min < q:
        raise ValueError(
            f"truncation range [{model_prior.j_min}, {model_prior.j_max}] contains "
            f"dimensions below the spline order q={q}; need J >= q"
        )
    return {j: make_basis(q, j - q + 1) for j in model_prior.support}


def _dirichlet_params(a, J: int) -> np.ndarray:
    if isinstance(a, CoefficientPrior):
        if a.family != "dirichlet":
            raise ValueError(f"density posterior needs a dirichlet prior, got {a.family!r}")
        return a.params_for(J)[0]
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if arr.size == 1:
        arr = np.full(J, arr[0])
    if arr.shape != (J,) or np.any(arr <= 0.0):
        raise ValueError("Dirichlet parameters must be positive, scalar or length J")
    return arr


def _slots_for(basis: Basis, observations: np.ndarray) -> list[_engine.Slot]:
    slots = []
    vals = eval_normalized(basis, observations) if observations.size else np.empty((0, basis.dimension))
    for row in vals:
        idx = np.flatnonzero(row > 0.0)
        slots.append(_engine.Slot(indices=idx, log_values=np.log(row[idx]), group=0))
    return slots


def log_term(
    basis: Basis,
    a,
    data: DensityDataset,
    term: TermIndex,
    x: float | None = None,
) -> float:
    """Log value of a single expansion term, comparable across dimensions.

    Includes the Dirichlet prior normalizer, which differs across J and must
    be carried for the model average to weight dimensions correctly. The term
    is the conjugate integral for the given assignment times the product of
    normalized basis values at the observations (and at x if present).
    """
    J = basis.dimension
    avec = _dirichlet_params(a, J)
    obs = data.observations
    if len(term.indices) != obs.size:
        raise ValueError("assignment length must match the number of observations")
    if (x is None) != (term.eval_index is None):
        raise ValueError("eval_index must be given exactly when x is")
    points = list(obs)
    idx = list(term.indices)
    if x is not None:
        points.append(float(x))
        idx.append(term.eval_index)
    counts = np.zeros(J)
    log_b = 0.0
    for p, i in zip(points, idx):
        vals = eval_normalized(basis, float(p))
        if not 0 <= i < J or vals[i] <= 0.0:
            raise ValueError(f"index {i} is not active at point {p}")
        counts[i] += 1
        log_b += np.log(vals[i])
    total = obs.size + (0 if x is None else 1)
    return float(
        log_dirichlet_normalizer(avec)
        + gammaln(avec + counts).sum()
        - gammaln(avec.sum() + total)
        + log_b
    )


def _prepare(data, bases, model_prior):
    j_values = np.asarray(sorted(bases), dtype=int)
    if j_values.size == 0:
        raise ValueError("empty truncation range")
    missing = set(model_prior.support) - set(bases)
    if missing:
        raise ValueError(f"no basis supplied for dimensions {sorted(missing)}")
    log_prior = model_prior.log_pmf(j_values)
    obs = np.sort(data.observations)  # canonical order: output invariant under permutation
    return j_values, log_prior, obs


def exact_moment(
    data: DensityDataset,
    grid,
    bases: Mapping[int, Basis],
    model_prior: ModelSizePrior,
    a=1.0,
    m: int = 2,
    term_cap: int = DEFAULT_TERM_CAP,
) -> PosteriorSummary:
    """Posterior moments by full term enumeration.

    m=1 computes the mean only; m=2 also the pointwise second moment. Raises
    EnumerationCapError when any dimension needs more than term_cap terms.
    """
    if m not in (1, 2):
        raise ValueError(f"moment order must be 1 or 2, got {m}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    j_values, log_prior, obs = _prepare(data, bases, model_prior)
    per_j = []
    for j in j_values:
        basis = bases[j]
        slots = _slots_for(basis, obs)
        total = _engine.assignment_count(slots)
        if total > term_cap:
            raise EnumerationCapError(total, term_cap, int(j))
        family = _engine.DirichletFamily(_dirichlet_params(a, basis.dimension))
        eval_cols = eval_normalized(basis, grid).T
        per_j.append(
            _engine.exact_mixture(slots, family, basis.dimension, eval_cols, second=(m == 2))
        )
    mean, second, j_w_log = _engine.combine_exact(per_j, log_prior)
    return PosteriorSummary(
        grid=grid,
        mean=mean,
        second_moment=second,
        band_low=None,
        band_high=None,
        mc_se=np.zeros_like(mean),
        j_values=j_values,
        j_weights=np.exp(j_w_log),
        mode="exact",
    )


def mc_moment(
    data: DensityDataset,
    grid,
    bases: Mapping[int, Basis],
    model_prior: ModelSizePrior,
    a=1.0,
    m: int = 2,
    n_terms: int = 3000,
    seed=0,
) -> PosteriorSummary:
    """Posterior moments by uniform sampling of N terms per dimension.

    The slot draws are shared between numerator and denominator (the ratio
    estimator has O(1/N) bias); mc_se is the delta-method standard error of
    the mean. Reproducible for a given seed regardless of scheduling: each
    dimension uses a generator derived from (seed, j).
    """
    if m not in (1, 2):
        raise ValueError(f"moment order must be 1 or 2, got {m}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    j_values, log_prior, obs = _prepare(data, bases, model_prior)
    pieces = []
    for j in j_values:
        basis = bases[j]
        slots = _slots_for(basis, obs)
        family = _engine.DirichletFamily(_dirichlet_params(a, basis.dimension))
        eval_cols = eval_normalized(basis, grid).T
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(j)]))
        pieces.append(
            _engine.mc_mixture(
                slots, family, basis.dimension, eval_cols, n_terms, rng, second=(m == 2)
            )
        )
    mean, se, second, j_w_log = _engine.combine_mc(pieces, log_prior)
    if second is not None:
        second = np.maximum(second, mean**2)  # sampling noise may undershoot
    return PosteriorSummary(
        grid=grid,
        mean=mean,
        second_moment=second,
        band_low=None,
        band_high=None,
        mc_se=se,
        j_values=j_values,
        j_weights=np.exp(j_w_log),
        mode="mc",
    )


def credible_band(summary: PosteriorSummary, level: float = 0.95) -> PosteriorSummary:
    """Pointwise mean +/- z(level) * sd bands, floored at zero.

    sd comes from the first two posterior moments; requires second_moment.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if summary.second_moment is None:
        raise ValueError("second_moment not populated; rerun with m=2")
    z = norm.ppf(0.5 + level / 2.0)
    sd = np.sqrt(np.maximum(summary.second_moment - summary.mean**2, 0.0))
    low = np.maximum(summary.mean - z * sd, 0.0)
    high = summary.mean + z * sd
    return replace(summary, band_low=low, band_high=high)


def j_posterior(
    data: DensityDataset,
    bases: Mapping[int, Basis],
    model_prior: ModelSizePrior,
    a=1.0,
    term_cap: int = DEFAULT_TERM_CAP,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior weights of each dimension: prior times per-J marginal likelihood."""
    j_values, log_prior, obs = _prepare(data, bases, model_prior)
    per_j = []
    for j in j_values:
        basis = bases[j]
        slots = _slots_for(basis, obs)
        total = _engine.assignment_count(slots)
        if total > term_cap:
            raise EnumerationCapError(total, term_cap, int(j))
        family = _engine.DirichletFamily(_dirichlet_params(a, basis.dimension))
        per_j.append(_engine.exact_mixture(slots, family, basis.dimension, None))
    _, _, j_w_log = _engine.combine_exact(per_j, log_prior)
    return j_values, np.exp(j_w_log)
