"""Diagonal-covariance Gaussian mixtures fitted by Expectation-Maximisation.

All density work happens in log space; per-row log-sum-exp subtracts the row
maximum before exponentiating, so responsibilities never come out NaN even
when every component density underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, DataError, DegenerateComponentError, NumericalError

LOG_2PI = math.log(2.0 * math.pi)
RANDOM_ASSIGNMENT = "random_assignment"
FARTHEST_POINT = "farthest_point"
FORMAT_HEADER = "ppid-gmm"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GmmConfig:
    n_components: int = 2
    epsilon: float = 1e-6
    max_iterations: int = 200
    seed: int = 0
    init_method: str = FARTHEST_POINT
    variance_floor: float = 1e-6

    def __post_init__(self):
        if self.n_components < 1:
            raise ConfigError("n_components must be at least 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if not self.variance_floor > 0:
            raise ConfigError("variance_floor must be positive")
        if self.init_method not in (RANDOM_ASSIGNMENT, FARTHEST_POINT):
            raise ConfigError(f"unknown init_method {self.init_method!r}")


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        var = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if mu.shape != var.shape or mu.shape[0] != w.shape[0]:
            raise DataError(
                f"inconsistent shapes: weights {w.shape}, means {mu.shape}, variances {var.shape}")
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise DataError(f"weights must be a probability vector, got {w}")
        if not (var > 0).all():
            raise DataError("variances must be positive")
        for arr in (w, mu, var):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def __eq__(self, other):
        if not isinstance(other, GmmModel):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.variances, other.variances))


@dataclass
class FitTrace:
    """Log-likelihood history of a fit.

    ``log_likelihood[0]`` is the value under the initial parameters and
    ``log_likelihood[t]`` the value after the t-th E/M pass.
    """

    log_likelihood: list[float] = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0


def _as_2d(X, dim=None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if dim is not None and X.shape[1] != dim:
        raise DataError(f"data has {X.shape[1]} features, model expects {dim}")
    return X


def logsumexp_rows(a: np.ndarray) -> np.ndarray:
    peak = a.max(axis=1)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(under="ignore"):
        return peak + np.log(np.exp(a - peak[:, None]).sum(axis=1))


def log_joint(model: GmmModel, X) -> np.ndarray:
    """log(w_k) + log N(x_i; mu_k, diag var_k) as an (n, K) array."""
    X = _as_2d(X, model.dim)
    out = np.empty((X.shape[0], model.n_components))
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    for k in range(model.n_components):
        var = model.variances[k]
        norm = model.dim * LOG_2PI + np.log(var).sum()
        with np.errstate(over="ignore"):
            maha = (((X - model.means[k]) ** 2) / var).sum(axis=1)
        out[:, k] = log_w[k] - 0.5 * (norm + maha)
    return out


def e_step(model: GmmModel, X) -> tuple[np.ndarray, float]:
    """Posterior responsibilities and total data log-likelihood."""
    lj = log_joint(model, X)
    peak = lj.max(axis=1)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(under="ignore"):
        shifted = np.exp(lj - peak[:, None])
    total = shifted.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        resp = shifted / total[:, None]
        row_ll = peak + np.log(total)
    # fsum gives a result independent of any reduction order
    return resp, math.fsum(row_ll.tolist())


def m_step(X, resp, config: GmmConfig | None = None) -> GmmModel:
    """Maximum-likelihood weights, means and floored variances."""
    floor = (config or GmmConfig()).variance_floor
    X = _as_2d(X)
    resp = np.asarray(resp, dtype=np.float64)
    if resp.ndim != 2 or resp.shape[0] != X.shape[0]:
        raise DataError(f"responsibilities shape {resp.shape} does not match {X.shape[0]} rows")
    totals = resp.sum(axis=0)
    for k, t in enumerate(totals):
        if not t > 0:
            raise DegenerateComponentError(k)
    means = (resp.T @ X) / totals[:, None]
    variances = np.empty_like(means)
    for k in range(resp.shape[1]):
        sq = (X - means[k]) ** 2
        variances[k] = (resp[:, k] @ sq) / totals[k]
    np.maximum(variances, floor, out=variances)
    weights = totals / X.shape[0]
    return GmmModel(weights / weights.sum(), means, variances)


def init_params(X, config: GmmConfig) -> GmmModel:
    """Seeded starting parameters.

    With one component the exact maximum-likelihood fit is returned for
    either method.
    """
    X = _as_2d(X)
    n, d = X.shape
    K = config.n_components
    if n < K:
        raise DataError(f"{n} rows cannot seed {K} components")
    if K == 1:
        return m_step(X, np.ones((n, 1)), config)
    rng = np.random.default_rng(config.seed)
    if config.init_method == RANDOM_ASSIGNMENT:
        # every component gets at least one row so the first M-step is defined
        order = rng.permutation(n)
        assign = np.empty(n, dtype=np.intp)
        assign[order[:K]] = np.arange(K)
        assign[order[K:]] = rng.integers(0, K, size=n - K)
        resp = np.zeros((n, K))
        resp[np.arange(n), assign] = 1.0
        return m_step(X, resp, config)

    chosen = [int(rng.integers(n))]
    nearest = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, K):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, ((X - X[nxt]) ** 2).sum(axis=1))
    variances = np.maximum(X.var(axis=0), config.variance_floor)
    return GmmModel(np.full(K, 1.0 / K), X[chosen].copy(), np.tile(variances, (K, 1)))


def fit(X, config: GmmConfig,
        callback: Callable[[int, GmmModel, np.ndarray], None] | None = None,
        init: GmmModel | None = None) -> tuple[GmmModel, FitTrace]:
    """Run EM until the relative log-likelihood change drops below epsilon.

    ``callback(iteration, model, responsibilities)`` is invoked after every
    E-step, starting with iteration 0 for the initial parameters.
    """
    X = _as_2d(X)
    if not np.isfinite(X).all():
        raise DataError("data contains non-finite values; sanitize it first")
    model = init if init is not None else init_params(X, config)
    resp, ll = e_step(model, X)
    if not math.isfinite(ll):
        raise NumericalError("log-likelihood is not finite at iteration 0")
    if callback:
        callback(0, model, resp)
    trace = FitTrace([ll])
    for it in range(1, config.max_iterations + 1):
        model = m_step(X, resp, config)
        resp, new_ll = e_step(model, X)
        if not math.isfinite(new_ll):
            raise NumericalError(f"log-likelihood is not finite at iteration {it}")
        if callback:
            callback(it, model, resp)
        trace.log_likelihood.append(new_ll)
        trace.iterations_run = it
        scale = abs(ll) if ll != 0 else 1.0
        if abs(new_ll - ll) / scale < config.epsilon:
            trace.converged = True
            break
        ll = new_ll
    return model, trace


def log_density(model: GmmModel, row) -> float:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != model.dim:
        raise DataError(f"row has shape {row.shape}, model expects ({model.dim},)")
    return float(logsumexp_rows(log_joint(model, row))[0])


def predict_proba(model: GmmModel, X) -> np.ndarray:
    return e_step(model, X)[0]


def predict_cluster(model: GmmModel, row) -> tuple[int, np.ndarray]:
    """Most probable component (lowest index on ties) and the posterior vector."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != model.dim:
        raise DataError(f"row has shape {row.shape}, model expects ({model.dim},)")
    post = predict_proba(model, row)[0]
    return int(np.argmax(post)), post


# -- serialization --------------------------------------------------------

def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def dump_lines(model: GmmModel) -> list[str]:
    lines = [f"{FORMAT_HEADER} {FORMAT_VERSION}",
             f"components {model.n_components}",
             f"dim {model.dim}"]
    for k in range(model.n_components):
        lines += [f"weight {_fmt([model.weights[k]])}",
                  f"mean {_fmt(model.means[k])}",
                  f"variance {_fmt(model.variances[k])}"]
    return lines


def _expect(lines, key):
    line = next(lines, None)
    if line is None:
        raise DataError(f"model file truncated; expected {key!r}")
    head, _, rest = line.partition(" ")
    if head != key:
        raise DataError(f"model file: expected {key!r}, found {head!r}")
    return rest


def parse_lines(lines) -> GmmModel:
    """Inverse of :func:`dump_lines`; ``lines`` is an iterator and is advanced."""
    version = _expect(lines, FORMAT_HEADER)
    if version.strip() != str(FORMAT_VERSION):
        raise DataError(f"unsupported model format version {version!r}")
    K = int(_expect(lines, "components"))
    d = int(_expect(lines, "dim"))
    w, mu, var = [], [], []
    for _ in range(K):
        w.append(float(_expect(lines, "weight")))
        mu.append([float(t) for t in _expect(lines, "mean").split()])
        var.append([float(t) for t in _expect(lines, "variance").split()])
    if any(len(m) != d for m in mu + var):
        raise DataError("model file: vector length disagrees with dim")
    return GmmModel(np.array(w), np.array(mu).reshape(K, d), np.array(var).reshape(K, d))


def save_model(model: GmmModel, path) -> None:
    Path(path).write_text("\n".join(dump_lines(model)) + "\n", encoding="utf-8")


def load_model(path) -> GmmModel:
    lines = iter(Path(path).read_text(encoding="utf-8").splitlines())
    return parse_lines(lines)
