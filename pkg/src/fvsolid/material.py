"""Isotropic linear-elastic material (Hooke's law)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidMaterialError(ValueError):
    pass


def derived_moduli(youngs_modulus: float, poisson_ratio: float) -> tuple[float, float]:
    """Return the Lame parameters ``(mu, lambda)`` for given ``(E, nu)``."""
    E, nu = float(youngs_modulus), float(poisson_ratio)
    if not E > 0:
        raise InvalidMaterialError(f"Young's modulus must be positive, got {E}")
    if not -1.0 < nu < 0.5:
        raise InvalidMaterialError(
            f"Poisson's ratio must lie in (-1, 0.5), got {nu}; the pure "
            "displacement formulation cannot represent incompressible solids")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam


@dataclass(frozen=True)
class LinearElasticMaterial:
    youngs_modulus: float
    poisson_ratio: float
    density: float = 1.0

    def __post_init__(self):
        derived_moduli(self.youngs_modulus, self.poisson_ratio)
        if not self.density > 0:
            raise InvalidMaterialError(f"density must be positive, got {self.density}")

    @classmethod
    def from_lame(cls, mu: float, lam: float, density: float = 1.0) -> "LinearElasticMaterial":
        if not mu > 0:
            raise InvalidMaterialError(f"shear modulus must be positive, got {mu}")
        if not 2 * mu + lam > 0 or not 3 * lam + 2 * mu > 0:
            raise InvalidMaterialError(f"inadmissible Lame pair mu={mu}, lambda={lam}")
        E = mu * (3 * lam + 2 * mu) / (lam + mu)
        nu = lam / (2 * (lam + mu))
        return cls(E, nu, density)

    @property
    def mu(self) -> float:
        return derived_moduli(self.youngs_modulus, self.poisson_ratio)[0]

    @property
    def lam(self) -> float:
        return derived_moduli(self.youngs_modulus, self.poisson_ratio)[1]

    @property
    def implicit_stiffness(self) -> float:
        """Longitudinal modulus 2 mu + lambda, used as the smoothing coefficient."""
        mu, lam = derived_moduli(self.youngs_modulus, self.poisson_ratio)
        return 2.0 * mu + lam

    @property
    def wave_speed(self) -> float:
        return float(np.sqrt(self.implicit_stiffness / self.density))


def stress_from_gradient(grad_u, material: LinearElasticMaterial) -> np.ndarray:
    """Cauchy stress mu*G + mu*G^T + lambda*tr(G)*I for one or many gradients.

    ``grad_u[..., i, j]`` holds d u_j / d x_i.
    """
    G = np.asarray(grad_u, dtype=float)
    mu, lam = material.mu, material.lam
    trace = np.trace(G, axis1=-2, axis2=-1)
    sigma = mu * (G + np.swapaxes(G, -1, -2))
    sigma += lam * trace[..., None, None] * np.eye(3)
    return sigma


def von_mises(sigma) -> np.ndarray:
    s = np.asarray(sigma, dtype=float)
    dev = s - np.trace(s, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3.0
    return np.sqrt(1.5 * np.einsum("...ij,...ij->...", dev, dev))
