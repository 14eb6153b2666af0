"""Training objective: TF-IDF reconstruction plus a kernel MMD prior match.

The latent match pulls the batch of inferred topic distributions toward a
Dirichlet prior by minimizing the unbiased two-sample MMD estimate under
the information diffusion kernel

    k(z, z') = exp(-arccos^2(sum_k sqrt(z_k z'_k))),

a simplex kernel that is sensitive near the boundary and therefore suited
to sparse topic mixtures. The unbiased estimator omits same-set diagonal
terms and can be negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import BatchError, Tensor


class DomainError(ValueError):
    """Input outside the mathematical domain (off-simplex, nonpositive log)."""


@dataclass
class DirichletPrior:
    """Positive concentration vector over K topics."""

    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.alpha.ndim != 1 or self.alpha.size < 1:
            raise ValueError("alpha must be a 1-D vector")
        if np.any(self.alpha <= 0):
            raise ValueError("all concentration parameters must be positive")

    @classmethod
    def symmetric(cls, n_topics: int, alpha: float = 0.1) -> "DirichletPrior":
        return cls(np.full(n_topics, float(alpha)))

    @property
    def n_topics(self) -> int:
        return self.alpha.size


@dataclass
class LossBreakdown:
    """Per-batch loss components; total == rec + lambda_mmd * mmd exactly."""

    rec: float
    mmd: float
    lambda_mmd: float

    @property
    def total(self) -> float:
        return self.rec + self.lambda_mmd * self.mmd


def sample_dirichlet(prior: DirichletPrior, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. Dirichlet rows via Gamma(alpha_k, 1) draws normalized by sum."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    gammas = rng.standard_gamma(prior.alpha, size=(n, prior.n_topics))
    return gammas / gammas.sum(axis=1, keepdims=True)


def _check_simplex(z: np.ndarray, tol: float, name: str):
    if np.any(z < -tol):
        raise DomainError(f"{name} has negative components")
    err = np.max(np.abs(z.sum(axis=-1) - 1.0))
    if err > tol:
        raise DomainError(f"{name} rows off the simplex by {err:.2e} (> {tol})")


def diffusion_kernel(z, z_prime, tol: float = 1e-6) -> float:
    """Information diffusion kernel between two simplex vectors; in (0, 1]."""
    z = np.asarray(z, dtype=np.float64).ravel()
    zp = np.asarray(z_prime, dtype=np.float64).ravel()
    if z.shape != zp.shape:
        raise ValueError(f"dimension mismatch {z.shape} vs {zp.shape}")
    _check_simplex(z, tol, "z")
    _check_simplex(zp, tol, "z_prime")
    s = np.sqrt(np.clip(z, 0.0, None) * np.clip(zp, 0.0, None)).sum()
    return float(np.exp(-np.arccos(np.clip(s, 0.0, 1.0)) ** 2))


def reconstruction_loss(x, x_hat) -> Tensor:
    """-mean over the batch of sum_w x_dw * ln(xhat_dw); grads into x_hat."""
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    x_hat = x_hat if isinstance(x_hat, Tensor) else Tensor(x_hat)
    if x.shape != x_hat.shape:
        raise ad.ShapeError(f"shapes {x.shape} vs {x_hat.shape}")
    if np.any(x_hat.data <= 0.0):
        raise DomainError("reconstruction requires strictly positive x_hat")
    b = x.shape[0]
    return ad.mul_const(ad.sum_all(ad.mul_const(ad.log(x_hat), x)), -1.0 / b)


def _kernel_matrix(gram: Tensor) -> Tensor:
    a = ad.arccos(ad.clamp(gram, 0.0, 1.0))
    return ad.exp(ad.mul_const(ad.mul(a, a), -1.0))


def mmd(z_prior: np.ndarray, z_post) -> Tensor:
    """Unbiased MMD estimate between prior samples and inferred distributions.

    z_prior (m, K) is a constant sample set; z_post (n, K) may be a Tensor,
    in which case the estimate is differentiable with respect to it. The
    same-set sums exclude i == j; the result may be negative.
    """
    zp = np.asarray(z_prior, dtype=np.float64)
    zq = z_post if isinstance(z_post, Tensor) else Tensor(z_post)
    m, n = zp.shape[0], zq.shape[0]
    if m < 2 or n < 2:
        raise BatchError(f"mmd needs >= 2 samples per set, got m={m}, n={n}")
    if zp.shape[1] != zq.shape[1]:
        raise ad.ShapeError(f"dimension mismatch {zp.shape} vs {zq.shape}")

    sp_ = np.sqrt(np.clip(zp, 0.0, None))
    sq = ad.sqrt(zq)

    # prior-prior: constant
    gram_pp = sp_ @ sp_.T
    kpp = np.exp(-np.arccos(np.clip(gram_pp, 0.0, 1.0)) ** 2)
    term_pp = float((kpp.sum() - np.trace(kpp)) / (m * (m - 1)))

    # post-post: differentiable, diagonal masked out of the sum
    kqq = _kernel_matrix(ad.matmul(sq, ad.transpose(sq)))
    off_diag = 1.0 - np.eye(n)
    term_qq = ad.mul_const(ad.sum_all(ad.mul_const(kqq, off_diag)), 1.0 / (n * (n - 1)))

    # cross term
    kpq = _kernel_matrix(ad.matmul(Tensor(sp_), ad.transpose(sq)))
    term_pq = ad.mul_const(ad.sum_all(kpq), -2.0 / (m * n))

    return ad.add_scalar(ad.add(term_qq, term_pq), term_pp)
