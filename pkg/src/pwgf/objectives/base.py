"""Objective contract for functionals over particle ensembles.

An objective F over probability measures exposes four derivative surfaces
at an empirical measure mu = (1/N) sum_j delta_{x_j}:

* ``value``          F(mu)
* ``gradient``       the Wasserstein gradient field, particle j holds
                     grad_mu F(mu, x_j)
* ``hessian_block``  the d x d kernel matrix grad^2_mu F(mu, x_i, x_j)
* ``grad_grad``      the spatial Jacobian of the gradient at x_i, holding
                     mu fixed

The three derivative objects are tied together through the Euclidean
calculus of F_N(x_1..x_N) := F(mu_N):

    dF_N/dx_j              = (1/N) gradient_j
    d^2F_N/dx_i dx_j       = (1/N^2) hessian_block(i, j)
                             + delta_{ij} (1/N) grad_grad(i)

which is exactly what the finite-difference oracles in ``pwgf.fdcheck``
verify.  Kernel symmetry hessian_block(i, j) = hessian_block(j, i)^T must
hold for every objective that supports a Hessian.

Objectives are immutable after construction and all methods are pure, so
instances are safe to share across threads.  Monte-Carlo reductions over a
dataset run in a fixed order, making every output bit-reproducible.
"""

from __future__ import annotations

import numpy as np

from ..ensemble import ParticleEnsemble, StackedField
from ..errors import CapabilityError, ContractViolationError


class Objective:
    """Base class; concrete objectives fill in the derivative surfaces."""

    #: ambient particle dimension expected by this objective
    dim: int = 0
    #: False for objectives whose second variation is not available
    has_hessian: bool = True
    name: str = "objective"

    # -- contract helpers ---------------------------------------------------

    def check_ensemble(self, ens: ParticleEnsemble) -> None:
        if ens.d != self.dim:
            raise ContractViolationError(
                f"{self.name}: ensemble dimension {ens.d} != objective dimension {self.dim}"
            )

    def _check_index(self, ens: ParticleEnsemble, i: int) -> None:
        if not 0 <= i < ens.n:
            raise ContractViolationError(f"particle index {i} out of range [0, {ens.n})")

    # -- derivative surfaces ------------------------------------------------

    def value(self, ens: ParticleEnsemble, indices=None) -> float:
        raise NotImplementedError

    def gradient(self, ens: ParticleEnsemble, indices=None) -> StackedField:
        raise NotImplementedError

    def value_and_gradient(self, ens: ParticleEnsemble, indices=None):
        """Both surfaces at once; dataset objectives share the feature pass."""
        return self.value(ens, indices), self.gradient(ens, indices)

    def hessian_block(self, ens: ParticleEnsemble, i: int, j: int) -> np.ndarray:
        if not self.has_hessian:
            raise CapabilityError(f"{self.name} does not provide a Hessian kernel")
        raise NotImplementedError

    def grad_grad(self, ens: ParticleEnsemble, i: int) -> np.ndarray:
        if not self.has_hessian:
            raise CapabilityError(f"{self.name} does not provide grad-grad")
        raise NotImplementedError

    # -- bulk hooks (overridden where a vectorized path exists) -------------

    def hessian_blocks(self, ens: ParticleEnsemble) -> np.ndarray:
        """All kernel blocks as an (N, d, N, d) array."""
        self.check_ensemble(ens)
        n, d = ens.n, ens.d
        out = np.empty((n, d, n, d))
        for i in range(n):
            for j in range(n):
                out[i, :, j, :] = self.hessian_block(ens, i, j)
        return out

    def grad_grad_all(self, ens: ParticleEnsemble) -> np.ndarray:
        """Spatial Jacobians for every particle, shape (N, d, d)."""
        self.check_ensemble(ens)
        return np.stack([self.grad_grad(ens, i) for i in range(ens.n)])
