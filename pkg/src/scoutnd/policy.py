"""Factorized Gaussian search distribution over the design variables.

The distribution is parameterized by its mean ``mu`` and the log of its
per-dimension standard deviation, so that gradient steps can never produce a
negative scale. Samples are produced by pushing unit-hypercube points through
the inverse normal CDF; pseudo-random and quasi-random streams therefore share
one code path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

U_EPS = 1e-12

# Acklam's rational approximation coefficients.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_ppf(p):
    """Inverse of the standard normal CDF on the open interval (0, 1).

    Acklam's rational approximation (relative error ~1e-9) followed by one
    Halley refinement step, which brings the absolute error to roughly
    machine precision.

    Parameters
    ----------
    p : float or array_like
        Probabilities, strictly inside (0, 1).

    Returns
    -------
    float or ndarray
        ``z`` with ``Phi(z) == p``.
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("norm_ppf requires 0 < p < 1")
    z = np.empty_like(p)

    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        z[mid] = num / den
    for mask, tail, sign in ((lo, p[lo], 1.0), (hi, 1.0 - p[hi], -1.0)):
        if np.any(mask):
            q = np.sqrt(-2.0 * np.log(tail))
            num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
            den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
            z[mask] = sign * num / den

    # Halley step; the residual is taken on the smaller tail to avoid cancellation.
    upper = z > 0
    resid = np.where(upper, (1.0 - p) - ndtr(-z), ndtr(z) - p)
    u = resid * np.sqrt(2.0 * np.pi) * np.exp(0.5 * z * z)
    z = z - u / (1.0 + 0.5 * z * u)
    return z[()] if z.ndim == 0 else z


@dataclass(frozen=True)
class ThetaGrad:
    """A vector in parameter space, split into its mean and log-scale blocks."""

    d_mu: np.ndarray
    d_log_sigma: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.d_mu, self.d_log_sigma], axis=-1)

    @classmethod
    def from_flat(cls, v: np.ndarray) -> "ThetaGrad":
        v = np.asarray(v, dtype=float)
        d = v.shape[-1] // 2
        return cls(v[..., :d].copy(), v[..., d:].copy())


@dataclass(frozen=True)
class GaussianPolicy:
    mu: np.ndarray
    log_sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).copy()
        log_sigma = np.atleast_1d(np.asarray(self.log_sigma, dtype=float)).copy()
        if mu.ndim != 1 or mu.shape != log_sigma.shape or mu.size < 1:
            raise ValueError(f"mu {mu.shape} and log_sigma {log_sigma.shape} must be equal-length vectors")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(log_sigma))):
            raise ValueError("policy parameters must be finite")
        mu.setflags(write=False)
        log_sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_sigma", log_sigma)

    @classmethod
    def from_sigma(cls, mu, sigma) -> "GaussianPolicy":
        return cls(mu, np.log(np.asarray(sigma, dtype=float)))

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.mu, self.log_sigma])

    @classmethod
    def from_flat(cls, theta: np.ndarray) -> "GaussianPolicy":
        d = len(theta) // 2
        return cls(theta[:d], theta[d:])


def _check_dim(policy: GaussianPolicy, a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape[-1:] != (policy.dim,):
        raise ValueError(f"{what} has trailing dimension {a.shape[-1:]}, policy has d={policy.dim}")
    return a


def sample(policy: GaussianPolicy, u) -> np.ndarray:
    """Map unit-hypercube points ``u`` (shape ``(d,)`` or ``(S, d)``) to designs."""
    u = _check_dim(policy, u, "u")
    u = np.clip(u, U_EPS, 1.0 - U_EPS)
    return policy.mu + policy.sigma * norm_ppf(u)


def score(policy: GaussianPolicy, x) -> ThetaGrad:
    """Gradient of ``log q(x | theta)`` with respect to ``(mu, log_sigma)``.

    Works row-wise when ``x`` is a batch of shape ``(S, d)``.
    """
    x = _check_dim(policy, x, "x")
    z = (x - policy.mu) / policy.sigma
    return ThetaGrad(d_mu=z / policy.sigma, d_log_sigma=z * z - 1.0)


def log_density(policy: GaussianPolicy, x) -> float | np.ndarray:
    x = _check_dim(policy, x, "x")
    z = (x - policy.mu) / policy.sigma
    per_dim = -0.5 * z * z - policy.log_sigma - 0.5 * np.log(2.0 * np.pi)
    return per_dim.sum(axis=-1)
