"""Activation penalties: graph quadratic form, L1/L2 baselines, spectral filters.

Every penalty is a value-and-gradient pair over a batch of activation rows.
Batch reduction is the MEAN over rows, so the weighting coefficient keeps the
same meaning at any batch size. Gradients are exact derivatives of the value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch
from .graph import EigenBasis, Laplacian

__all__ = [
    "Penalty",
    "quadratic_form",
    "gsr_value_and_grad",
    "lp_value_and_grad",
    "spectral_value_and_grad",
]


def _batch(z) -> np.ndarray:
    values = getattr(z, "values", z)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionMismatch(f"activations must be 1-D or 2-D, got {arr.shape}")
    return arr


def quadratic_form(z, l: Laplacian) -> float:
    """z^T L z, the Laplacian smoothness energy of a single activation vector.

    Equals sum over edges of w_ij * (z_i - z_j)^2; zero exactly when z is
    constant on every connected component.
    """
    zv = np.asarray(z, dtype=np.float64)
    if zv.shape != (l.n,):
        raise DimensionMismatch(f"signal shape {zv.shape} does not match n={l.n}")
    return float(zv @ (l.matrix @ zv))


def gsr_value_and_grad(batch_z, l: Laplacian, alpha: float) -> tuple[float, np.ndarray]:
    """Graph spectral penalty alpha * mean_r(z_r^T L z_r) and its gradient.

    Gradient row r is alpha * (2/B) * L z_r, using symmetry of L.
    """
    z = _batch(batch_z)
    if z.shape[1] != l.n:
        raise DimensionMismatch(f"batch has {z.shape[1]} columns, Laplacian has n={l.n}")
    b = z.shape[0]
    lz = z @ l.matrix  # row r is (L z_r)^T since L is symmetric
    value = alpha * float(np.einsum("ri,ri->", z, lz)) / b
    grad = (2.0 * alpha / b) * lz
    return value, grad


def lp_value_and_grad(batch_z, p: int, alpha: float) -> tuple[float, np.ndarray]:
    """Elementwise L1/L2 activation penalties with mean-over-rows reduction.

    p=1: alpha * mean_r sum|z|, subgradient 0 at exactly 0.
    p=2: alpha * mean_r sum z^2.
    """
    z = _batch(batch_z)
    b = z.shape[0]
    if p == 1:
        value = alpha * float(np.sum(np.abs(z))) / b
        grad = (alpha / b) * np.sign(z)
    elif p == 2:
        value = alpha * float(np.sum(z * z)) / b
        grad = (2.0 * alpha / b) * z
    else:
        raise ValueError(f"p must be 1 or 2, got {p}")
    return value, grad


def spectral_value_and_grad(
    batch_z,
    basis: EigenBasis,
    mu: Callable[[float], float],
    alpha: float,
) -> tuple[float, np.ndarray]:
    """Filtered spectral penalty alpha * mean_r sum_j mu(lambda_j) coeff_rj^2.

    With the identity filter this matches gsr_value_and_grad; with mu == 1 it
    collapses to the L2 penalty by Parseval.
    """
    z = _batch(batch_z)
    if z.shape[1] != basis.n:
        raise DimensionMismatch(f"batch has {z.shape[1]} columns, basis has n={basis.n}")
    b = z.shape[0]
    lam = np.maximum(basis.eigenvalues, 0.0)
    weights = np.array([float(mu(x)) for x in lam])
    if np.any(weights < 0):
        raise ValueError("mu must be non-negative on the spectrum")
    coeffs = z @ basis.eigenvectors  # row r holds the Fourier coefficients of z_r
    value = alpha * float(np.einsum("rj,j,rj->", coeffs, weights, coeffs)) / b
    grad = (2.0 * alpha / b) * ((coeffs * weights) @ basis.eigenvectors.T)
    return value, grad


@dataclass(frozen=True)
class Penalty:
    """Tagged regularizer pluggable into training.

    tag is one of none/l1/l2/gsr/spectral; alpha is the weighting coefficient.
    gsr carries a Laplacian, spectral carries an eigenbasis and filter mu.
    """

    tag: str
    alpha: float = 0.0
    laplacian: Laplacian | None = None
    basis: EigenBasis | None = None
    mu: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.tag not in ("none", "l1", "l2", "gsr", "spectral"):
            raise ValueError(f"unknown penalty tag {self.tag!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.tag == "gsr" and self.laplacian is None:
            raise ValueError("gsr penalty needs a Laplacian")
        if self.tag == "spectral" and (self.basis is None or self.mu is None):
            raise ValueError("spectral penalty needs an eigenbasis and a filter mu")

    @classmethod
    def none(cls) -> "Penalty":
        return cls("none")

    @classmethod
    def l1(cls, alpha: float) -> "Penalty":
        return cls("l1", alpha)

    @classmethod
    def l2(cls, alpha: float) -> "Penalty":
        return cls("l2", alpha)

    @classmethod
    def gsr(cls, alpha: float, l: Laplacian) -> "Penalty":
        return cls("gsr", alpha, laplacian=l)

    @classmethod
    def spectral(cls, alpha: float, basis: EigenBasis, mu: Callable[[float], float]) -> "Penalty":
        return cls("spectral", alpha, basis=basis, mu=mu)

    def value_and_grad(self, batch_z) -> tuple[float, np.ndarray]:
        """alpha-weighted penalty value and gradient for a batch."""
        raw_value, raw_grad = self.raw_value_and_grad(batch_z)
        return self.alpha * raw_value, self.alpha * raw_grad

    def raw_value_and_grad(self, batch_z) -> tuple[float, np.ndarray]:
        """Penalty with the coefficient factored out (as if alpha == 1).

        Training logs this raw value so the history column stays comparable
        across coefficients, including alpha == 0.
        """
        if self.tag == "none":
            z = _batch(batch_z)
            return 0.0, np.zeros_like(z)
        if self.tag == "l1":
            return lp_value_and_grad(batch_z, 1, 1.0)
        if self.tag == "l2":
            return lp_value_and_grad(batch_z, 2, 1.0)
        if self.tag == "gsr":
            return gsr_value_and_grad(batch_z, self.laplacian, 1.0)
        return spectral_value_and_grad(batch_z, self.basis, self.mu, 1.0)

    def expected_width(self) -> int | None:
        """Activation width this penalty is wired for, if it has one."""
        if self.tag == "gsr":
            return self.laplacian.n
        if self.tag == "spectral":
            return self.basis.n
        return None
