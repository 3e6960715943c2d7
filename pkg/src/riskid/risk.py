"""The decision rule: fit a rational model by minimizing the posterior-weighted risk.

Given a summary (mean gbar, weight W, optionally covariance Sigma) of the
impulse response, the risk of choosing a parametric model theta is
``0.5 tr(W Sigma) + 0.5 ||gbar - g_theta||^2_W``. The first term does not
depend on theta and is reported, never optimized; the decision minimizes the
second term over the model class by multi-start quasi-Newton descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._threads import single_threaded_blas
from .kernel import FactorizationError
from .lti import (
    MAGNITUDE_CAP,
    Dataset,
    DivergedResponseError,
    RationalModel,
    impulse_response,
    impulse_response_jacobian,
)
from .optimize import minimize_bfgs

__all__ = [
    "SENTINEL_OBJECTIVE",
    "AllStartsDivergedError",
    "RiskSpec",
    "StartReport",
    "Decision",
    "risk_value",
    "risk_gradient",
    "minimize_risk",
    "pem_prediction_error",
    "monte_carlo_risk_check",
]

# Objective reported for diverged candidate models so line searches retreat.
SENTINEL_OBJECTIVE = 1e30


class AllStartsDivergedError(RuntimeError):
    """Every optimizer start ended at the divergence sentinel."""

    def __init__(self, starts):
        super().__init__("risk minimization failed: all starts diverged")
        self.starts = starts


@dataclass(frozen=True, eq=False)
class RiskSpec:
    """Inputs to the decision rule: mean and weight, plus optional covariance.

    ``constant`` holds the theta-independent risk term 0.5 tr(W Sigma) when
    the covariance is known; it is excluded from every optimized objective.
    """

    mean: np.ndarray
    weight: np.ndarray
    covariance: np.ndarray | None = None
    constant: float | None = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        weight = np.asarray(self.weight, dtype=float)
        if weight.shape != (mean.size, mean.size):
            raise ValueError(f"weight must be {mean.size}x{mean.size}, got {weight.shape}")
        cov = self.covariance
        if cov is not None:
            cov = np.asarray(cov, dtype=float)
            if cov.shape != weight.shape:
                raise ValueError("covariance shape does not match weight")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "covariance", cov)

    @property
    def n(self) -> int:
        return self.mean.size

    @classmethod
    def from_posterior(cls, summary) -> "RiskSpec":
        """Build the risk inputs from a posterior summary, filling in the constant term."""
        constant = None
        if summary.covariance is not None:
            constant = 0.5 * float(np.sum(summary.weight * summary.covariance))
        return cls(
            mean=summary.mean,
            weight=summary.weight,
            covariance=summary.covariance,
            constant=constant,
        )


@dataclass(frozen=True)
class StartReport:
    index: int
    objective: float
    status: str
    n_iter: int


@dataclass(frozen=True, eq=False)
class Decision:
    """Result of the risk minimization: the chosen model and the per-start log."""

    model: RationalModel
    objective: float
    starts: tuple[StartReport, ...]

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "objective": self.objective,
            "starts": [
                {
                    "index": s.index,
                    "objective": s.objective,
                    "status": s.status,
                    "iterations": s.n_iter,
                }
                for s in self.starts
            ],
        }


def risk_value(model: RationalModel, spec: RiskSpec, magnitude_cap: float = MAGNITUDE_CAP) -> float:
    """Theta-dependent risk ``0.5 (gbar - g_theta)^T W (gbar - g_theta)``.

    Diverged impulse responses yield the large sentinel objective instead of
    raising, so optimizers can retreat from unstable candidates.
    """
    try:
        g = impulse_response(model, spec.n, magnitude_cap)
    except DivergedResponseError:
        return SENTINEL_OBJECTIVE
    r = g - spec.mean
    with np.errstate(over="ignore", invalid="ignore"):
        value = 0.5 * float(r @ (spec.weight @ r))
    if not np.isfinite(value):
        return SENTINEL_OBJECTIVE
    return value


def risk_gradient(model: RationalModel, spec: RiskSpec, magnitude_cap: float = MAGNITUDE_CAP) -> np.ndarray:
    """Gradient of :func:`risk_value` with respect to the flat parameter vector.

    Chain rule through the impulse response: ``J^T W (g_theta - gbar)``.
    Returns zeros for diverged candidates (where the value is the sentinel).
    """
    try:
        g = impulse_response(model, spec.n, magnitude_cap)
        J = impulse_response_jacobian(model, spec.n, magnitude_cap)
    except DivergedResponseError:
        return np.zeros(model.n_params)
    with np.errstate(over="ignore", invalid="ignore"):
        grad = J.T @ (spec.weight @ (g - spec.mean))
    if not np.all(np.isfinite(grad)):
        return np.zeros(model.n_params)
    return grad


def _random_stable_start(rng: np.random.Generator, orders, mean_scale: float) -> np.ndarray:
    """Random start with all denominator roots inside radius 0.95."""
    n_b, n_f, _ = orders
    poles = []
    for _ in range(n_f // 2):
        r = rng.uniform(0.0, 0.95)
        ang = rng.uniform(0.0, np.pi)
        poles.extend([r * np.exp(1j * ang), r * np.exp(-1j * ang)])
    if n_f % 2:
        poles.append(complex(rng.uniform(0.0, 0.95)))
    f = np.poly(poles).real[1:] if poles else np.zeros(0)
    b = rng.standard_normal(n_b + 1) * mean_scale
    return np.concatenate([b, f])


def minimize_risk(
    spec: RiskSpec,
    orders: tuple[int, int, int],
    init=None,
    restarts: int = 10,
    seed=0,
    max_iter: int = 500,
    gtol_rel: float = 1e-8,
) -> Decision:
    """Minimize the risk over the model class by multi-start quasi-Newton descent.

    Starts are the user ``init`` (a model or a sequence of models, when
    given) followed by ``restarts`` random stable initializations drawn
    deterministically from ``seed``. The best converged start wins; ties
    break toward the lowest start index.

    Raises
    ------
    AllStartsDivergedError
        If every start ends at the divergence sentinel.
    """
    n_b, n_f, n_k = orders
    if n_b < 0 or n_f < 0 or n_k < 0:
        raise ValueError(f"invalid orders {orders}")
    inits = [init] if isinstance(init, RationalModel) else list(init) if init is not None else []
    for model in inits:
        if model.orders != (n_b, n_f, n_k):
            raise ValueError(f"init orders {model.orders} do not match requested {orders}")

    def fun(theta: np.ndarray) -> float:
        return risk_value(RationalModel.unflatten(theta, orders), spec)

    def grad(theta: np.ndarray) -> np.ndarray:
        return risk_gradient(RationalModel.unflatten(theta, orders), spec)

    rng = np.random.default_rng(seed)
    # Scale random numerators from the leading coefficients of the mean; the
    # tail of an unregularized mean sits in weakly excited directions and can
    # be astronomically large without saying anything about the model scale.
    lead = spec.mean[: min(10, spec.n)]
    mean_scale = float(np.linalg.norm(lead)) / np.sqrt(lead.size)
    if not np.isfinite(mean_scale) or mean_scale == 0.0:
        mean_scale = 1.0
    starts = [model.flatten() for model in inits]
    for _ in range(restarts):
        starts.append(_random_stable_start(rng, orders, mean_scale))
    if not starts:
        raise ValueError("need an init or at least one restart")

    reports = []
    best_idx, best_x, best_f = None, None, np.inf
    with single_threaded_blas():
        for idx, x_start in enumerate(starts):
            res = minimize_bfgs(fun, grad, x_start, max_iter=max_iter, gtol_rel=gtol_rel)
            diverged = res.fun >= SENTINEL_OBJECTIVE
            reports.append(
                StartReport(
                    index=idx,
                    objective=res.fun,
                    status="diverged" if diverged else res.status,
                    n_iter=res.n_iter,
                )
            )
            if not diverged and res.fun < best_f:
                best_idx, best_x, best_f = idx, res.x, res.fun
    if best_idx is None:
        raise AllStartsDivergedError(tuple(reports))
    model = RationalModel.unflatten(best_x, orders)
    return Decision(model=model, objective=risk_value(model, spec), starts=tuple(reports))


def pem_prediction_error(model: RationalModel, dataset: Dataset) -> float:
    """Half the squared output prediction error ``0.5 ||y - H g_theta||^2``."""
    g = impulse_response(model, dataset.n)
    y_hat = np.convolve(dataset.u, g)[: dataset.n]
    r = dataset.y - y_hat
    return 0.5 * float(r @ r)


def monte_carlo_risk_check(
    spec: RiskSpec, model: RationalModel, samples: int, seed
) -> tuple[float, float]:
    """Empirical versus closed-form risk of ``model`` under g ~ N(mean, covariance).

    Draws ``samples`` impulse responses, averages the loss
    ``0.5 ||g - g_theta||^2_W`` and returns ``(empirical mean, analytic
    value)`` where the analytic value is
    ``0.5 tr(W Sigma) + 0.5 ||gbar - g_theta||^2_W``.
    """
    if spec.covariance is None:
        raise ValueError("risk check requires a spec with a covariance matrix")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    sigma = 0.5 * (spec.covariance + spec.covariance.T)
    evals, vecs = np.linalg.eigh(sigma)
    top = float(evals.max(initial=0.0))
    if float(evals.min(initial=0.0)) < -1e-10 * max(top, 1.0):
        raise FactorizationError("covariance is not positive semidefinite")
    root = vecs * np.sqrt(np.clip(evals, 0.0, None))
    g_theta = impulse_response(model, spec.n)
    rng = np.random.default_rng(seed)
    draws = spec.mean + rng.standard_normal((samples, spec.n)) @ root.T
    diff = draws - g_theta
    losses = 0.5 * np.einsum("ij,jk,ik->i", diff, spec.weight, diff)
    empirical = float(losses.mean())
    analytic = 0.5 * float(np.sum(spec.weight * sigma)) + risk_value(model, spec)
    return empirical, analytic
