"""Priors on the series length J and on the coefficient vector given J.

Model-size priors are always truncated to an inclusive range [j_min, j_max]
and renormalized there; probabilities are kept in log space. Each family
carries its tail exponents (t1, t2): geometric and negative binomial have
t1 = t2 = 0, Poisson has t1 = t2 = 1. Coefficient priors cover the conjugate
families used by the posterior engines (Dirichlet for densities, independent
Beta for binary responses, independent Gamma for counts) plus the g-prior /
inverse-gamma pair for Gaussian series regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import gammaln, logsumexp

_MODEL_FAMILIES = ("geometric", "poisson", "negative-binomial")
_COEF_FAMILIES = ("dirichlet", "beta", "gamma", "g-prior")

#: (t1, t2) tail exponents of each supported model-size family.
TAIL_EXPONENTS = {
    "geometric": (0, 0),
    "poisson": (1, 1),
    "negative-binomial": (0, 0),
}


def _base_log_pmf(family: str, params: tuple, j: np.ndarray) -> np.ndarray:
    j = np.asarray(j, dtype=float)
    if family == "geometric":
        (p,) = params
        return np.log(p) + (j - 1.0) * np.log1p(-p)
    if family == "poisson":
        (lam,) = params
        return j * np.log(lam) - lam - gammaln(j + 1.0)
    if family == "negative-binomial":
        r, p = params
        return (
            gammaln(j + r)
            - gammaln(r)
            - gammaln(j + 1.0)
            + r * np.log(p)
            + j * np.log1p(-p)
        )
    raise ValueError(f"unknown model-size family {family!r}")


@dataclass(frozen=True)
class ModelSizePrior:
    """Truncated prior on the number of series terms J."""

    family: str
    params: tuple
    j_min: int
    j_max: int
    _log_norm: float = field(repr=False, default=0.0)

    def __post_init__(self):
        if self.family not in _MODEL_FAMILIES:
            raise ValueError(f"unknown model-size family {self.family!r}")
        if not (1 <= self.j_min <= self.j_max):
            raise ValueError(
                f"truncation must satisfy 1 <= j_min <= j_max, got [{self.j_min}, {self.j_max}]"
            )
        support = np.arange(self.j_min, self.j_max + 1)
        norm = float(logsumexp(_base_log_pmf(self.family, self.params, support)))
        object.__setattr__(self, "_log_norm", norm)

    @staticmethod
    def geometric(p: float, j_min: int = 5, j_max: int = 25) -> "ModelSizePrior":
        if not 0.0 < p < 1.0:
            raise ValueError(f"geometric success probability must be in (0,1), got {p}")
        return ModelSizePrior("geometric", (float(p),), int(j_min), int(j_max))

    @staticmethod
    def poisson(lam: float, j_min: int = 5, j_max: int = 25) -> "ModelSizePrior":
        if lam <= 0.0:
            raise ValueError(f"poisson mean must be positive, got {lam}")
        return ModelSizePrior("poisson", (float(lam),), int(j_min), int(j_max))

    @staticmethod
    def negative_binomial(r: float, p: float, j_min: int = 5, j_max: int = 25) -> "ModelSizePrior":
        if r <= 0.0 or not 0.0 < p < 1.0:
            raise ValueError(f"invalid negative-binomial parameters r={r}, p={p}")
        return ModelSizePrior("negative-binomial", (float(r), float(p)), int(j_min), int(j_max))

    @property
    def tail_exponents(self) -> tuple[int, int]:
        return TAIL_EXPONENTS[self.family]

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    def log_pmf(self, j) -> np.ndarray | float:
        """Log probability of J = j; -inf outside the truncation range."""
        j_arr = np.atleast_1d(np.asarray(j))
        out = np.full(j_arr.shape, -np.inf)
        inside = (j_arr >= self.j_min) & (j_arr <= self.j_max)
        if np.any(inside):
            out[inside] = _base_log_pmf(self.family, self.params, j_arr[inside]) - self._log_norm
        return float(out[0]) if np.isscalar(j) else out


def log_pmf_J(prior: ModelSizePrior, j) -> np.ndarray | float:
    """Functional alias for :meth:`ModelSizePrior.log_pmf`."""
    return prior.log_pmf(j)


def _positive_vector(value, J: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(J, arr[0])
    if arr.shape != (J,):
        raise ValueError(f"{name} must be scalar or length-{J}, got shape {arr.shape}")
    if np.any(arr <= 0.0):
        raise ValueError(f"{name} must be strictly positive")
    return arr


@dataclass(frozen=True)
class CoefficientPrior:
    """Prior on the coefficient vector given the dimension J.

    Hyperparameters are stored as given (scalar or vector) and broadcast to
    the requested dimension on use; all must be strictly positive.
    """

    family: str
    a: float | np.ndarray = 1.0
    b: float | np.ndarray = 1.0
    g: float | None = None

    def __post_init__(self):
        if self.family not in _COEF_FAMILIES:
            raise ValueError(f"unknown coefficient family {self.family!r}")
        for name in ("a", "b"):
            val = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(val <= 0.0):
                raise ValueError(f"hyperparameter {name} must be strictly positive")
        if self.g is not None and self.g <= 0.0:
            raise ValueError(f"g must be strictly positive, got {self.g}")

    @staticmethod
    def dirichlet(a=1.0) -> "CoefficientPrior":
        return CoefficientPrior("dirichlet", a=a)

    @staticmethod
    def beta(a=1.0, b=1.0) -> "CoefficientPrior":
        return CoefficientPrior("beta", a=a, b=b)

    @staticmethod
    def gamma(a=1.0, b=1.0) -> "CoefficientPrior":
        return CoefficientPrior("gamma", a=a, b=b)

    @staticmethod
    def g_prior(g: float | None = None, a=1.0, b=1.0) -> "CoefficientPrior":
        """Zellner g-prior with an inverse-gamma IG(a, b) prior on the noise variance.

        g=None means the unit-information default g = n, resolved at fit time.
        """
        return CoefficientPrior("g-prior", a=a, b=b, g=g)

    def params_for(self, J: int) -> tuple[np.ndarray, np.ndarray]:
        return _positive_vector(self.a, J, "a"), _positive_vector(self.b, J, "b")


def sample_coefficients(prior: CoefficientPrior, J: int, seed) -> np.ndarray:
    """One seeded draw of the coefficient vector at dimension J.

    Dirichlet draws lie on the simplex, beta draws in (0,1)^J, gamma draws in
    (0,inf)^J (rate parametrization: Gamma(a, b) has mean a/b). The g-prior
    family is rejected here: its draws require a design matrix.
    """
    if J < 1:
        raise ValueError(f"dimension must be >= 1, got {J}")
    rng = np.random.default_rng(seed)
    a, b = prior.params_for(J) if prior.family != "g-prior" else (None, None)
    if prior.family == "dirichlet":
        return rng.dirichlet(a)
    if prior.family == "beta":
        return rng.beta(a, b)
    if prior.family == "gamma":
        return rng.gamma(shape=a, scale=1.0 / b)
    raise ValueError("g-prior coefficients are sampled by the regression module, not here")


def log_dirichlet_normalizer(a) -> float:
    """log Gamma(sum a) - sum log Gamma(a_k), the Dirichlet density normalizer."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(a <= 0.0):
        raise ValueError("Dirichlet parameters must be a nonempty positive vector")
    return float(gammaln(a.sum()) - gammaln(a).sum())


def priors_from_config(options: Mapping[str, str]) -> tuple[ModelSizePrior, CoefficientPrior]:
    """Build the prior pair from flat key=value configuration text.

    Recognized keys: J.prior (geometric|poisson|negative-binomial), J.p,
    J.lambda, J.r, J.min, J.max, theta.prior (dirichlet|beta|gamma|g-prior),
    theta.a, theta.b, theta.g.
    """
    fam = options.get("J.prior", "geometric")
    j_min = int(options.get("J.min", 5))
    j_max = int(options.get("J.max", 25))
    if fam == "geometric":
        model = ModelSizePrior.geometric(float(options.get("J.p", 0.5)), j_min, j_max)
    elif fam == "poisson":
        model = ModelSizePrior.poisson(float(options.get("J.lambda", 10.0)), j_min, j_max)
    elif fam == "negative-binomial":
        model = ModelSizePrior.negative_binomial(
            float(options.get("J.r", 1.0)), float(options.get("J.p", 0.5)), j_min, j_max
        )
    else:
        raise ValueError(f"unknown J.prior {fam!r}")

    tfam = options.get("theta.prior", "dirichlet")
    a = float(options.get("theta.a", 1.0))
    b = float(options.get("theta.b", 1.0))
    if tfam == "dirichlet":
        coef = CoefficientPrior.dirichlet(a)
    elif tfam == "beta":
        coef = CoefficientPrior.beta(a, b)
    elif tfam == "gamma":
        coef = CoefficientPrior.gamma(a, b)
    elif tfam == "g-prior":
        g = options.get("theta.g")
        coef = CoefficientPrior.g_prior(None if g is None else float(g), a, b)
    else:
        raise ValueError(f"unknown theta.prior {tfam!r}")
    return model, coef
