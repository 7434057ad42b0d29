"""Maximum mean discrepancy with the (regularized) Coulomb kernel.

F(mu) is the double integral of (mu - mu_o)^{x2} against the interaction
kernel g(x, y) = (||x - y||^2 + eps^2)^{-(d-2)/2}, d >= 3.  The empirical
form keeps the diagonal self-interaction terms symmetrically for both mu
and mu_o, so F vanishes exactly when mu equals mu_o particle for particle.

Only value and gradient are provided; the second variation is not part of
this objective's contract, so hessian_block and grad_grad raise
CapabilityError.
"""

from __future__ import annotations

import numpy as np

from ..ensemble import ParticleEnsemble, StackedField
from ..errors import CapabilityError, ContractViolationError
from .base import Objective


class CoulombMMD(Objective):
    name = "coulomb_mmd"
    has_hessian = False

    def __init__(self, target: ParticleEnsemble, eps_reg: float = 1e-3):
        if target.d < 3:
            raise ContractViolationError("coulomb_mmd requires dimension d >= 3")
        if not eps_reg > 0:
            raise ContractViolationError("eps_reg must be > 0")
        self.target = target
        self.dim = target.d
        self.eps_reg = float(eps_reg)

    def _kernel_sum(self, xs: np.ndarray, ys: np.ndarray) -> float:
        diff = xs[:, None, :] - ys[None, :, :]
        sq = np.sum(diff**2, axis=2) + self.eps_reg**2
        return float(np.sum(sq ** (-(self.dim - 2) / 2.0)))

    def value(self, ens: ParticleEnsemble, indices=None) -> float:
        self.check_ensemble(ens)
        x, y = ens.positions, self.target.positions
        n, no = ens.n, self.target.n
        return (
            self._kernel_sum(x, x) / n**2
            - 2.0 * self._kernel_sum(x, y) / (n * no)
            + self._kernel_sum(y, y) / no**2
        )

    def gradient(self, ens: ParticleEnsemble, indices=None) -> StackedField:
        """Field i: 2 int grad_x g(x_i, .) d(mu - mu_o)."""
        self.check_ensemble(ens)
        x, y = ens.positions, self.target.positions
        p = -(self.dim - 2) / 2.0 - 1.0

        def attraction(src: np.ndarray) -> np.ndarray:
            diff = x[:, None, :] - src[None, :, :]  # (n, m, d)
            sq = np.sum(diff**2, axis=2) + self.eps_reg**2
            w = -(self.dim - 2) * sq**p
            return np.sum(w[:, :, None] * diff, axis=1) / src.shape[0]

        return StackedField(2.0 * (attraction(x) - attraction(y)))

    def hessian_block(self, ens, i, j):
        raise CapabilityError("coulomb_mmd provides value and gradient only (no Hessian kernel)")

    def grad_grad(self, ens, i):
        raise CapabilityError("coulomb_mmd provides value and gradient only (no grad-grad)")

    def hessian_blocks(self, ens):
        raise CapabilityError("coulomb_mmd provides value and gradient only (no Hessian kernel)")
