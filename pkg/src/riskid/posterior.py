"""Impulse-response summaries feeding the decision rule: mean, weight and covariance.

Two constructions are provided. ``ls_summary`` is the classical unbiased
least-squares estimate with its precision as the weight; ``gaussian_posterior``
conditions a zero-mean Gaussian prior on the data and returns the exact
posterior mean and precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernel import FactorizationError, chol_psd

__all__ = ["PosteriorSummary", "ls_summary", "gaussian_posterior"]

# Relative singular-value cutoff for the rank-revealing pseudoinverse.
SV_CUTOFF = 1e-10


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Mean, weight (precision) and optional covariance of an impulse response.

    ``covariance`` is absent in the least-squares case when H^T H is
    singular; when present, weight and covariance are inverses of each other.
    """

    mean: np.ndarray
    weight: np.ndarray
    covariance: np.ndarray | None = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        weight = np.asarray(self.weight, dtype=float)
        n = mean.size
        if weight.shape != (n, n):
            raise ValueError(f"weight must be {n}x{n}, got {weight.shape}")
        cov = self.covariance
        if cov is not None:
            cov = np.asarray(cov, dtype=float)
            if cov.shape != (n, n):
                raise ValueError(f"covariance must be {n}x{n}, got {cov.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "covariance", cov)

    @property
    def n(self) -> int:
        return self.mean.size

    def band(self) -> np.ndarray | None:
        """Two-standard-deviation band ``2 sqrt(diag(W^{-1}))``, or None when W is singular."""
        if self.covariance is None:
            return None
        return 2.0 * np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> dict:
        out = {"mean": self.mean.tolist()}
        band = self.band()
        if band is not None:
            out["band"] = band.tolist()
        return out


def ls_summary(H: np.ndarray, y: np.ndarray, sv_cutoff: float = SV_CUTOFF) -> PosteriorSummary:
    """Least-squares summary: mean = pinv(H) y, weight = H^T H.

    The noise variance does not affect the resulting decision and is set to
    unity. The pseudoinverse uses a rank-revealing SVD with relative cutoff
    ``sv_cutoff``; the covariance (H^T H)^{-1} is reported only when H has
    full rank.
    """
    y = np.asarray(y, dtype=float)
    U, s, Vt = np.linalg.svd(H)
    rank = int(np.sum(s > sv_cutoff * s[0])) if s.size and s[0] > 0 else 0
    coeffs = (U[:, :rank].T @ y) / s[:rank]
    mean = Vt[:rank].T @ coeffs
    weight = H.T @ H
    covariance = None
    if rank == H.shape[1]:
        covariance = (Vt.T / s**2) @ Vt
        covariance = 0.5 * (covariance + covariance.T)
    return PosteriorSummary(mean=mean, weight=0.5 * (weight + weight.T), covariance=covariance)


def gaussian_posterior(K: np.ndarray, lam: float, H: np.ndarray, y: np.ndarray) -> PosteriorSummary:
    """Exact Gaussian conditional of g ~ N(0, K) given y = H g + noise of variance lam.

    Evaluated in the data-space form
    ``mean = K H^T (lam I + H K H^T)^{-1} y`` and
    ``cov = K - K H^T (lam I + H K H^T)^{-1} H K``,
    which avoids inverting K directly; the weight is recovered from the
    covariance by a symmetric solve. Algebraically identical to the
    information form ``W = K^{-1} + lam^{-1} H^T H``.
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    y = np.asarray(y, dtype=float)
    N = y.size
    if H.shape != (N, N) or K.shape != (N, N):
        raise ValueError(f"H and K must be {N}x{N}, got {H.shape} and {K.shape}")
    S = H @ K @ H.T
    S = 0.5 * (S + S.T)
    S[np.diag_indices_from(S)] += lam
    L = chol_psd(S)
    KHt = K @ H.T
    z = solve_triangular(L, y, lower=True)
    mean = KHt @ solve_triangular(L.T, z, lower=False)
    V = solve_triangular(L, KHt.T, lower=True)
    cov = K - V.T @ V
    cov = 0.5 * (cov + cov.T)
    weight = _symmetric_inverse(cov)
    return PosteriorSummary(mean=mean, weight=weight, covariance=cov)


def _symmetric_inverse(cov: np.ndarray) -> np.ndarray:
    """Invert a PSD covariance by Cholesky, raising the floor when the clean
    inverse overflows (coefficients the prior pins at ~0 have variances that
    underflow, and their precision exceeds the float range)."""
    N = cov.shape[0]
    eye = np.eye(N)
    scale = max(float(np.trace(cov)) / N, np.finfo(float).tiny)
    for eps in (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
        with np.errstate(over="ignore", invalid="ignore"):
            Lc = chol_psd(cov + (eps * scale) * eye)
            Linv = solve_triangular(Lc, eye, lower=True)
            weight = Linv.T @ Linv
        if np.all(np.isfinite(weight)):
            return 0.5 * (weight + weight.T)
    raise FactorizationError("posterior covariance could not be inverted")
