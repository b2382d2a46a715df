"""Conjugate series-regression posteriors.

Three likelihoods share the random-series setup f(z) = theta' B(z) on the
plain (unnormalized) basis:

* Gaussian responses with a Zellner g-prior on theta and an inverse-gamma
  prior on the noise variance: closed-form per-dimension posteriors and
  marginal likelihoods, mixed over the dimension prior.
* Binary responses with an identity link and independent Beta priors: the
  partition of unity turns both likelihood factors into sums of basis terms,
  so the same active-set expansion as the density engine applies.
* Poisson counts with an identity link and independent Gamma priors: the
  exponential factor collapses coordinatewise; each observation contributes
  X_i expansion slots.

Binary and Poisson engines run exact or term-sampled, exactly as the density
module, and return the same PosteriorSummary shape.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _engine
from ._engine import EnumerationCapError
from .basis import Basis, eval_basis
from .density import PosteriorSummary, DEFAULT_TERM_CAP
from .priors import CoefficientPrior, ModelSizePrior


@dataclass(frozen=True)
class RegressionDataset:
    """Scalar covariates in [0, 1] with real, binary, or count responses."""

    covariates: np.ndarray
    responses: np.ndarray
    kind: str = "gaussian"  # gaussian | binary | poisson

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.covariates, dtype=float))
        x = np.atleast_1d(np.asarray(self.responses, dtype=float))
        if z.shape != x.shape or z.ndim != 1:
            raise ValueError("covariates and responses must be equal-length vectors")
        if z.size and (z.min() < 0.0 or z.max() > 1.0):
            raise ValueError("covariates must lie in [0, 1]")
        if self.kind == "binary" and not np.all(np.isin(x, (0.0, 1.0))):
            raise ValueError("binary responses must be 0 or 1")
        if self.kind == "poisson" and (np.any(x < 0) or np.any(x != np.round(x))):
            raise ValueError("poisson responses must be nonnegative integers")
        if self.kind not in ("gaussian", "binary", "poisson"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        object.__setattr__(self, "covariates", z)
        object.__setattr__(self, "responses", x)

    @property
    def n(self) -> int:
        return self.covariates.size


@dataclass(frozen=True)
class FunctionalDataset:
    """Curves sampled on a common grid, with scalar responses."""

    grid: np.ndarray
    curves: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.grid, dtype=float))
        Z = np.atleast_2d(np.asarray(self.curves, dtype=float))
        x = np.atleast_1d(np.asarray(self.responses, dtype=float))
        if g.size < 2:
            raise ValueError("curve grid needs at least 2 points")
        if np.any(np.diff(g) <= 0) or g.min() < 0.0 or g.max() > 1.0:
            raise ValueError("curve grid must be strictly increasing inside [0, 1]")
        if Z.shape[1] != g.size:
            raise ValueError("curve rows must match the grid length")
        if x.shape != (Z.shape[0],):
            raise ValueError("one response per curve required")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "curves", Z)
        object.__setattr__(self, "responses", x)

    @property
    def n(self) -> int:
        return self.curves.shape[0]


@dataclass(frozen=True)
class LongitudinalDataset:
    """One (time, covariate value, response) triple per subject."""

    times: np.ndarray
    covariate_values: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        z = np.atleast_1d(np.asarray(self.covariate_values, dtype=float))
        x = np.atleast_1d(np.asarray(self.responses, dtype=float))
        if not (t.shape == z.shape == x.shape):
            raise ValueError("times, covariate values, and responses must match")
        if t.size and (t.min() < 0.0 or t.max() > 1.0):
            raise ValueError("times must lie in [0, 1]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "covariate_values", z)
        object.__setattr__(self, "responses", x)


def design_matrix(data, basis: Basis) -> np.ndarray:
    """n x J design: basis values at scalar covariates, trapezoid integrals
    of curve times basis for functional data, or Z(T) B(T) for longitudinal.

    The functional integrals refine the curve grid with the basis knots
    (curves linearly interpolated, knot values taken one-sided), so the
    quadrature error is O(grid step^2) even for bases that jump at knots.
    """
    if isinstance(data, RegressionDataset):
        return eval_basis(basis, data.covariates)
    if isinstance(data, FunctionalDataset):
        g = data.grid
        inner = basis.breakpoints()
        inner = inner[(inner > g[0]) & (inner < g[-1])]
        gg = np.unique(np.concatenate([g, inner, np.nextafter(inner, -np.inf)]))
        curves = np.vstack([np.interp(gg, g, row) for row in data.curves])
        B = eval_basis(basis, gg)
        dw = np.zeros_like(gg)
        dg = np.diff(gg)
        dw[:-1] += dg / 2.0
        dw[1:] += dg / 2.0
        return (curves * dw) @ B
    if isinstance(data, LongitudinalDataset):
        return data.covariate_values[:, None] * eval_basis(basis, data.times)
    raise ValueError(f"unsupported dataset type {type(data).__name__}")


@dataclass(frozen=True)
class GaussianPosterior:
    """Per-dimension conjugate posteriors under the g-prior, mixed over J.

    coef_mean[j] is the shrunk least-squares solution g/(1+g) * theta_hat;
    coef_cov_base[j] times a draw of sigma^2 is the coefficient covariance;
    sigma^2 | X, j is inverse-gamma(sigma2_shape, sigma2_scale[j]).
    """

    j_values: np.ndarray
    j_weights: np.ndarray
    log_marginals: np.ndarray
    coef_mean: dict[int, np.ndarray]
    coef_cov_base: dict[int, np.ndarray]
    sigma2_shape: float
    sigma2_scale: dict[int, float]
    g: float
    infeasible: tuple[int, ...] = ()


def gaussian_fit(
    designs: Mapping[int, np.ndarray],
    responses,
    model_prior: ModelSizePrior,
    g: float | None = None,
    a: float = 1.0,
    b: float = 1.0,
) -> GaussianPosterior:
    """Closed-form g-prior update for every dimension in the truncation range.

    g=None uses the unit-information default g = n. Dimensions with a
    rank-deficient design are excluded from the model average with a warning.
    """
    x = np.atleast_1d(np.asarray(responses, dtype=float))
    n = x.size
    if g is None:
        g = float(n)
    if g <= 0 or a <= 0 or b <= 0:
        raise ValueError("g, a, b must be positive")
    shrink = g / (1.0 + g)
    j_values = np.asarray(sorted(designs), dtype=int)
    missing = set(model_prior.support) - set(designs)
    if missing:
        raise ValueError(f"no design supplied for dimensions {sorted(missing)}")
    log_prior = model_prior.log_pmf(j_values)
    logml, means, covs, scales, feasible = [], {}, {}, {}, []
    for j, lp in zip(j_values, log_prior):
        W = np.asarray(designs[j], dtype=float)
        if W.shape[0] != n:
            raise ValueError(f"design for J={j} has {W.shape[0]} rows, expected {n}")
        ncol = W.shape[1]
        if np.linalg.matrix_rank(W) < ncol:
            warnings.warn(
                f"design for J={j} is rank deficient; dimension excluded from the average"
            )
            continue
        theta_hat, _, _, _ = np.linalg.lstsq(W, x, rcond=None)
        fitted = W @ theta_hat
        quad = float(x @ x - shrink * fitted @ fitted)
        lm = (
            -0.5 * n * np.log(2.0 * np.pi)
            - 0.5 * ncol * np.log1p(g)
            + a * np.log(b)
            - gammaln(a)
            + gammaln(a + 0.5 * n)
            - (a + 0.5 * n) * np.log(b + 0.5 * quad)
        )
        feasible.append(int(j))
        logml.append(float(lm))
        means[int(j)] = shrink * theta_hat
        covs[int(j)] = shrink * np.linalg.inv(W.T @ W)
        scales[int(j)] = b + 0.5 * quad
    if not feasible:
        raise ValueError("every dimension was rank deficient; nothing to average")
    j_arr = np.asarray(feasible, dtype=int)
    logml = np.asarray(logml)
    log_post = model_prior.log_pmf(j_arr) + logml
    weights = np.exp(log_post - logsumexp(log_post))
    return GaussianPosterior(
        j_values=j_arr,
        j_weights=weights,
        log_marginals=logml,
        coef_mean=means,
        coef_cov_base=covs,
        sigma2_shape=a + 0.5 * n,
        sigma2_scale=scales,
        g=g,
        infeasible=tuple(int(j) for j in j_values if int(j) not in feasible),
    )


def gaussian_predict(
    post: GaussianPosterior, new_designs: Mapping[int, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Model-averaged predictive means and variances for new rows.

    The variance combines the within-dimension predictive variance (posterior
    mean of sigma^2 times 1 + row' Sigma row) and the spread of per-dimension
    means around the average.
    """
    mean = None
    acc_mean = acc_m2 = None
    for j, wt in zip(post.j_values, post.j_weights):
        W = np.asarray(new_designs[int(j)], dtype=float)
        if W.shape[1] != post.coef_mean[int(j)].size:
            raise ValueError(f"new design for J={j} has wrong column count")
        mu = W @ post.coef_mean[int(j)]
        if post.sigma2_shape <= 1.0:
            raise ValueError("posterior sigma^2 mean undefined (shape <= 1); need more data")
        s2 = post.sigma2_scale[int(j)] / (post.sigma2_shape - 1.0)
        qform = np.einsum("ij,jk,ik->i", W, post.coef_cov_base[int(j)], W)
        var_j = s2 * (1.0 + qform)
        if acc_mean is None:
            acc_mean = wt * mu
            acc_m2 = wt * (var_j + mu**2)
        else:
            acc_mean += wt * mu
            acc_m2 += wt * (var_j + mu**2)
    return acc_mean, acc_m2 - acc_mean**2


def _coef_params(prior, family: str, J: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(prior, CoefficientPrior):
        if prior.family != family:
            raise ValueError(f"need a {family} coefficient prior, got {prior.family!r}")
        return prior.params_for(J)
    a, b = prior
    pr = CoefficientPrior(family, a=a, b=b)
    return pr.params_for(J)


def _moment_summary(slot_builder, family_builder, bases, model_prior, z_grid, m, mode, n_terms, seed, term_cap):
    if m not in (1, 2):
        raise ValueError(f"moment order must be 1 or 2, got {m}")
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=float))
    j_values = np.asarray(sorted(bases), dtype=int)
    missing = set(model_prior.support) - set(bases)
    if missing:
        raise ValueError(f"no basis supplied for dimensions {sorted(missing)}")
    log_prior = model_prior.log_pmf(j_values)
    if mode == "auto":
        worst = max(
            _engine.assignment_count(slot_builder(bases[j])) for j in j_values
        )
        mode = "exact" if worst <= term_cap else "mc"
    if mode == "exact":
        per_j = []
        for j in j_values:
            basis = bases[j]
            slots = slot_builder(basis)
            total = _engine.assignment_count(slots)
            if total > term_cap:
                raise EnumerationCapError(total, term_cap, int(j))
            eval_cols = eval_basis(basis, z_grid).T
            per_j.append(
                _engine.exact_mixture(
                    slots, family_builder(basis), basis.dimension, eval_cols, second=(m == 2)
                )
            )
        mean, second, j_w_log = _engine.combine_exact(per_j, log_prior)
        se = np.zeros_like(mean)
    elif mode == "mc":
        pieces = []
        for j in j_values:
            basis = bases[j]
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(j)]))
            eval_cols = eval_basis(basis, z_grid).T
            pieces.append(
                _engine.mc_mixture(
                    slot_builder(basis), family_builder(basis), basis.dimension,
                    eval_cols, n_terms, rng, second=(m == 2),
                )
            )
        mean, se, second, j_w_log = _engine.combine_mc(pieces, log_prior)
        if second is not None:
            second = np.maximum(second, mean**2)  # sampling noise may undershoot
    else:
        raise ValueError(f"mode must be auto, exact, or mc, got {mode!r}")
    return PosteriorSummary(
        grid=z_grid,
        mean=mean,
        second_moment=second,
        band_low=None,
        band_high=None,
        mc_se=se,
        j_values=j_values,
        j_weights=np.exp(j_w_log),
        mode=mode,
    )


def binary_moment(
    data: RegressionDataset,
    bases: Mapping[int, Basis],
    beta_params,
    model_prior: ModelSizePrior,
    z_grid,
    m: int = 2,
    mode: str = "auto",
    n_terms: int = 3000,
    seed=0,
    term_cap: int = DEFAULT_TERM_CAP,
) -> PosteriorSummary:
    """Posterior moments of the success probability f(z) = theta' B(z).

    Each observation contributes one slot; successes and failures update the
    two Beta count groups through the expansion of theta'B and (1-theta)'B.
    """
    if data.kind != "binary":
        raise ValueError("binary_moment needs a binary dataset")
    order = np.lexsort((data.responses, data.covariates))
    z = data.covariates[order]
    x = data.responses[order]

    def slot_builder(basis: Basis):
        slots = []
        vals = eval_basis(basis, z) if z.size else np.empty((0, basis.dimension))
        for row, resp in zip(vals, x):
            idx = np.flatnonzero(row > 0.0)
            slots.append(
                _engine.Slot(indices=idx, log_values=np.log(row[idx]), group=0 if resp == 1.0 else 1)
            )
        return slots

    def family_builder(basis: Basis):
        a, b = _coef_params(beta_params, "beta", basis.dimension)
        return _engine.BetaFamily(a, b)

    return _moment_summary(
        slot_builder, family_builder, bases, model_prior, z_grid, m, mode, n_terms, seed, term_cap
    )


def poisson_moment(
    data: RegressionDataset,
    bases: Mapping[int, Basis],
    gamma_params,
    model_prior: ModelSizePrior,
    z_grid,
    m: int = 2,
    mode: str = "auto",
    n_terms: int = 3000,
    seed=0,
    term_cap: int = DEFAULT_TERM_CAP,
) -> PosteriorSummary:
    """Posterior moments of the Poisson rate f(z) = theta' B(z).

    The exponential likelihood factor contributes the per-coordinate tilt
    c_k = sum_i B_k(Z_i); each observation then adds X_i expansion slots for
    the monomial part (ordered tuples carry the multinomial multiplicities).
    """
    if data.kind != "poisson":
        raise ValueError("poisson_moment needs a poisson dataset")
    order = np.lexsort((data.responses, data.covariates))
    z = data.covariates[order]
    x = data.responses[order].astype(int)

    def slot_builder(basis: Basis):
        slots = []
        vals = eval_basis(basis, z) if z.size else np.empty((0, basis.dimension))
        for row, count in zip(vals, x):
            idx = np.flatnonzero(row > 0.0)
            logv = np.log(row[idx])
            slots.extend(
                _engine.Slot(indices=idx, log_values=logv, group=0) for _ in range(count)
            )
        return slots

    def family_builder(basis: Basis):
        a, b = _coef_params(gamma_params, "gamma", basis.dimension)
        c = eval_basis(basis, z).sum(axis=0) if z.size else np.zeros(basis.dimension)
        return _engine.GammaFamily(a, b, c)

    return _moment_summary(
        slot_builder, family_builder, bases, model_prior, z_grid, m, mode, n_terms, seed, term_cap
    )
