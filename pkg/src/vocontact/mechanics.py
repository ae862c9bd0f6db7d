"""Plane-strain compressible Neo-Hookean solid.

Forces and stiffness are integrated over the reference configuration with
Kirchhoff stress and spatial gradients, which is the same integral as the
Cauchy-stress form over the current configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonPositiveJacobian(ArithmeticError):
    """det F <= 0 at a quadrature point."""


@dataclass(frozen=True)
class Material:
    E: float
    nu: float = 0.3

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("E must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError("nu must lie in [0, 0.5)")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return 2.0 * self.mu * self.nu / (1.0 - 2.0 * self.nu)


def _det(F):
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def kirchhoff_stress(mat: Material, F: np.ndarray) -> np.ndarray:
    """tau = J sigma = lam ln J I + mu (F F^T - I), vectorised over leading axes."""
    J = _det(F)
    if np.any(J <= 0):
        raise NonPositiveJacobian("det F <= 0")
    b = F @ np.swapaxes(F, -1, -2)
    I = np.eye(2)
    return (mat.lam * np.log(J))[..., None, None] * I + mat.mu * (b - I)


def cauchy_stress(mat: Material, F) -> np.ndarray:
    F = np.asarray(F, float)
    return kirchhoff_stress(mat, F) / _det(F)[..., None, None]


def spatial_tangent(mat: Material, F) -> np.ndarray:
    """Spatial modulus in Voigt form (xx, yy, xy), ``c = (lam/J) I x I + 2 (mu - lam ln J)/J I_sym``."""
    F = np.asarray(F, float)
    J = _det(F)
    if np.any(J <= 0):
        raise NonPositiveJacobian("det F <= 0")
    m = (mat.mu - mat.lam * np.log(J)) / J
    l = mat.lam / J
    c = np.zeros(np.shape(J) + (3, 3))
    c[..., 0, 0] = c[..., 1, 1] = l + 2 * m
    c[..., 0, 1] = c[..., 1, 0] = l
    c[..., 2, 2] = m
    return c


def body_force_stiffness(mat: Material, dNdX: np.ndarray, wdV: np.ndarray, ue: np.ndarray,
                         stiffness: bool = True):
    """Internal forces (and tangents) of a batch of elements.

    Parameters
    ----------
    dNdX : (E, q, ne, 2) reference gradients
    wdV : (E, q) reference volume weights
    ue : (E, ne, 2) element displacements

    Returns
    -------
    f : (E, ne, 2)
    K : (E, ne, 2, ne, 2) or None
    """
    E_, q_, ne, _ = dNdX.shape
    F = np.eye(2) + np.matmul(np.swapaxes(ue, 1, 2)[:, None], dNdX)
    J = _det(F)
    if np.any(J <= 0):
        raise NonPositiveJacobian("det F <= 0")
    tau = kirchhoff_stress(mat, F)
    g = np.matmul(dNdX, np.linalg.inv(F))  # spatial gradients (E, q, ne, 2)
    gw = g * wdV[..., None, None]
    f = np.einsum("eqij,eqkj->eki", tau, gw)
    if not stiffness:
        return f, None
    m = mat.mu - mat.lam * np.log(J)
    gwT = np.swapaxes(gw.reshape(E_, q_, 2 * ne), 1, 2)  # (E, (k,a), q)
    gf = g.reshape(E_, q_, 2 * ne)
    # lam g_ki g_lj + m g_kj g_li, summed over quadrature points
    K = mat.lam * np.matmul(gwT, gf).reshape(E_, ne, 2, ne, 2)
    K += np.matmul(gwT * m[:, None, :], gf).reshape(E_, ne, 2, ne, 2).transpose(0, 1, 4, 3, 2)
    # geometric part and m delta_ij g_k . g_l
    H = np.matmul(gw, tau + m[..., None, None] * np.eye(2))
    s = np.matmul(np.swapaxes(H, 1, 2).reshape(E_, ne, 2 * q_),
                  np.swapaxes(g, 2, 3).reshape(E_, 2 * q_, ne))
    K += s[:, :, None, :, None] * np.eye(2)[None, None, :, None, :]
    return f, K


def element_internal_force(mat: Material, dNdX: np.ndarray, wdV: np.ndarray, ue: np.ndarray,
                           stiffness: bool = True):
    """Single-element version of :func:`body_force_stiffness` with flat (2*ne) vectors."""
    f, K = body_force_stiffness(mat, dNdX[None], wdV[None], np.asarray(ue, float)[None],
                                stiffness)
    n = 2 * ue.shape[0]
    return f[0].reshape(n), (None if K is None else K[0].reshape(n, n))


def strain_energy_density(mat: Material, F) -> np.ndarray:
    """W = mu/2 (tr C - 2) - mu ln J + lam/2 (ln J)^2 (plane strain)."""
    F = np.asarray(F, float)
    J = _det(F)
    lnJ = np.log(J)
    trC = np.einsum("...ij,...ij->...", F, F)
    return 0.5 * mat.mu * (trC - 2.0) - mat.mu * lnJ + 0.5 * mat.lam * lnJ ** 2
