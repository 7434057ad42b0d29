"""Analytically solvable objectives used as oracles and sanity anchors."""

from __future__ import annotations

import numpy as np

from ..ensemble import ParticleEnsemble, StackedField
from ..errors import ContractViolationError
from .base import Objective


class LinearPotential(Objective):
    """F(mu) = int V dmu with a quadratic potential V(x) = x'Ax/2 + b'x.

    The first variation is V itself, independent of mu, so the Hessian
    kernel vanishes identically while grad_grad equals A.  Useful as the
    zero-kernel sanity case: the Hessian-guided sampler must degenerate to
    the zero field on it.
    """

    name = "linear_potential"

    def __init__(self, dim: int, quad=None, lin=None):
        self.dim = int(dim)
        A = np.eye(self.dim) if quad is None else np.array(quad, dtype=float)
        if A.shape != (self.dim, self.dim):
            raise ContractViolationError(f"quadratic term must be {self.dim}x{self.dim}")
        self.quad = 0.5 * (A + A.T)
        self.lin = np.zeros(self.dim) if lin is None else np.array(lin, dtype=float)
        if self.lin.shape != (self.dim,):
            raise ContractViolationError(f"linear term must have length {self.dim}")

    def value(self, ens: ParticleEnsemble, indices=None) -> float:
        self.check_ensemble(ens)
        x = ens.positions
        return float(np.mean(0.5 * np.sum((x @ self.quad) * x, axis=1) + x @ self.lin))

    def gradient(self, ens: ParticleEnsemble, indices=None) -> StackedField:
        self.check_ensemble(ens)
        return StackedField(ens.positions @ self.quad + self.lin)

    def hessian_block(self, ens, i, j):
        self.check_ensemble(ens)
        self._check_index(ens, i)
        self._check_index(ens, j)
        return np.zeros((self.dim, self.dim))

    def grad_grad(self, ens, i):
        self.check_ensemble(ens)
        self._check_index(ens, i)
        return self.quad.copy()

    def hessian_blocks(self, ens):
        self.check_ensemble(ens)
        return np.zeros((ens.n, self.dim, ens.n, self.dim))


class MeanQuartic(Objective):
    """F(mu) = ||m||^4/4 - ||m||^2/2 with m the ensemble mean.

    A mean-field double well: the symmetric configuration m = 0 is a strict
    saddle (kernel -I, smallest eigenvalue -1 on constant fields) and the
    sphere ||m|| = 1 is the set of global minima with value -1/4.  All four
    derivative surfaces are closed-form:

        gradient      (||m||^2 - 1) m          (constant across particles)
        kernel        2 m m' + (||m||^2 - 1) I (same for every pair)
        grad_grad     0
    """

    name = "mean_quartic"

    def __init__(self, dim: int):
        self.dim = int(dim)

    @staticmethod
    def _mean(ens: ParticleEnsemble) -> np.ndarray:
        return ens.positions.mean(axis=0)

    def value(self, ens: ParticleEnsemble, indices=None) -> float:
        self.check_ensemble(ens)
        sq = float(np.sum(self._mean(ens) ** 2))
        return 0.25 * sq * sq - 0.5 * sq

    def gradient(self, ens: ParticleEnsemble, indices=None) -> StackedField:
        self.check_ensemble(ens)
        m = self._mean(ens)
        g = (np.sum(m**2) - 1.0) * m
        return StackedField(np.tile(g, (ens.n, 1)))

    def _block(self, ens: ParticleEnsemble) -> np.ndarray:
        m = self._mean(ens)
        return 2.0 * np.outer(m, m) + (np.sum(m**2) - 1.0) * np.eye(self.dim)

    def hessian_block(self, ens, i, j):
        self.check_ensemble(ens)
        self._check_index(ens, i)
        self._check_index(ens, j)
        return self._block(ens)

    def grad_grad(self, ens, i):
        self.check_ensemble(ens)
        self._check_index(ens, i)
        return np.zeros((self.dim, self.dim))

    def hessian_blocks(self, ens):
        self.check_ensemble(ens)
        block = self._block(ens)
        return np.broadcast_to(block[None, :, None, :], (ens.n, self.dim, ens.n, self.dim)).copy()
