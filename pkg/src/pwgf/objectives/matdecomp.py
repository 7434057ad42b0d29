"""Rank-one matrix decomposition through a mean-field two-layer network.

Particles are x = (a, w) in R^{k+l}.  The student features are
h(z) = (1/N) sum_j a_j sigma(w_j' z) and the loss matches the induced
rank-one matrices against a fixed target ensemble:

    F(mu) = (1/2) E_z || h(z) h(z)' - h_o(z) h_o(z)' ||_F^2.

Writing D(z) = h h' - h_o h_o' and J_x(z) = d h_x / dx (the (k+l) x k
feature Jacobian with rows [sigma I_k; sigma' z a']), the derivative
surfaces used everywhere below are

    gradient(x)         2 E_z[ J_x(z) D(z) h(z) ]
    kernel(x, y)        2 E_z[ J_x(z) B(z) J_y(z)' ],
                        B = 2 h h' + ||h||^2 I - h_o h_o'
    grad_grad(x)        2 E_z[ d J_x / dx  contracted with D h ]

The factor 2 in the kernel is required for consistency with the gradient
(confirmed by the finite-difference oracles); the configuration a_j = 0 for
all j is a strict saddle, with the aa block of the kernel equal to
-2 E_z[sigma_i sigma_j h_o h_o'].
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from ..ensemble import ParticleEnsemble, StackedField
from ..errors import ContractViolationError
from .base import Objective
from .dataset import Dataset, sigmoid, sigmoid_d1, sigmoid_d2


class MatrixDecomposition(Objective):
    name = "matdecomp"

    def __init__(self, target: ParticleEnsemble, dataset: Dataset, k: int, l: int):
        self.k = int(k)
        self.l = int(l)
        self.dim = self.k + self.l
        if target.d != self.dim:
            raise ContractViolationError(f"target dimension {target.d} != k+l = {self.dim}")
        if dataset.dim != self.l:
            raise ContractViolationError(f"dataset dimension {dataset.dim} != l = {self.l}")
        self.target = target
        self.dataset = dataset
        # target features for the full dataset, frozen
        self._target_features = self._features_of(target.positions, dataset.samples)

    # -- shared feature machinery -------------------------------------------

    def _split(self, positions: np.ndarray):
        return positions[:, : self.k], positions[:, self.k :]

    def _features_of(self, positions: np.ndarray, Z: np.ndarray) -> np.ndarray:
        a, w = self._split(positions)
        S = sigmoid(w @ Z.T)  # (N, M)
        return S.T @ a / positions.shape[0]  # (M, k)

    def h_features(self, ens: ParticleEnsemble, z) -> np.ndarray:
        """Student features h_mu(z) for one input or a batch of inputs."""
        self.check_ensemble(ens)
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[1] != self.l:
            raise ContractViolationError(f"input dimension {z.shape[1]} != l = {self.l}")
        out = self._features_of(ens.positions, z)
        return out[0] if out.shape[0] == 1 else out

    def _prep(self, ens: ParticleEnsemble, indices=None) -> SimpleNamespace:
        self.check_ensemble(ens)
        Z = self.dataset.samples if indices is None else self.dataset.subset(indices)
        Ho = self._target_features if indices is None else self._target_features[np.asarray(indices, dtype=int)]
        a, w = self._split(ens.positions)
        S = sigmoid(w @ Z.T)  # (N, M)
        H = S.T @ a / ens.n  # (M, k)
        return SimpleNamespace(Z=Z, Ho=Ho, a=a, w=w, S=S, H=H, M=Z.shape[0])

    # -- derivative surfaces -------------------------------------------------

    @staticmethod
    def _value_from(p) -> float:
        hsq = np.sum(p.H**2, axis=1)
        osq = np.sum(p.Ho**2, axis=1)
        cross = np.sum(p.H * p.Ho, axis=1)
        # ||hh' - h_o h_o'||_F^2 = ||h||^4 - 2 (h'h_o)^2 + ||h_o||^4
        return float(0.5 * np.mean(hsq**2 - 2.0 * cross**2 + osq**2))

    @staticmethod
    def _dmh(p) -> np.ndarray:
        """(M, k) rows D(z) h(z) = h ||h||^2 - h_o (h_o' h)."""
        hsq = np.sum(p.H**2, axis=1)
        cross = np.sum(p.H * p.Ho, axis=1)
        return p.H * hsq[:, None] - p.Ho * cross[:, None]

    def _gradient_from(self, p) -> StackedField:
        dmh = self._dmh(p)
        grad_a = 2.0 * p.S @ dmh / p.M  # (N, k)
        Sp = sigmoid_d1(p.S)
        t = p.a @ dmh.T  # (N, M): a_j . D(z) h(z)
        grad_w = 2.0 * (Sp * t) @ p.Z / p.M  # (N, l)
        return StackedField(np.hstack([grad_a, grad_w]))

    def value(self, ens: ParticleEnsemble, indices=None) -> float:
        return self._value_from(self._prep(ens, indices))

    def gradient(self, ens: ParticleEnsemble, indices=None) -> StackedField:
        return self._gradient_from(self._prep(ens, indices))

    def value_and_gradient(self, ens: ParticleEnsemble, indices=None):
        p = self._prep(ens, indices)
        return self._value_from(p), self._gradient_from(p)

    def _kernel_cache(self, p) -> SimpleNamespace:
        Sp = sigmoid_d1(p.S)
        hsq = np.sum(p.H**2, axis=1)
        hA = p.H @ p.a.T  # (M, N): h(z) . a_j
        oA = p.Ho @ p.a.T  # (M, N): h_o(z) . a_j
        return SimpleNamespace(Sp=Sp, hsq=hsq, hA=hA, oA=oA)

    def _block(self, p, c, i: int, j: int) -> np.ndarray:
        """2 E_z[J_i B J_j'] assembled from cached per-sample pieces."""
        k, l, M = self.k, self.l, p.M
        out = np.empty((self.dim, self.dim))
        si, sj = p.S[i], p.S[j]
        spi, spj = c.Sp[i], c.Sp[j]
        # B a_j and B a_i rows: 2 h (h.a) + ||h||^2 a - h_o (h_o.a)
        Ba_j = 2.0 * p.H * c.hA[:, j][:, None] + c.hsq[:, None] * p.a[j] - p.Ho * c.oA[:, j][:, None]
        Ba_i = 2.0 * p.H * c.hA[:, i][:, None] + c.hsq[:, None] * p.a[i] - p.Ho * c.oA[:, i][:, None]
        w_aa = si * sj
        out[:k, :k] = (2.0 / M) * (
            2.0 * (p.H * w_aa[:, None]).T @ p.H
            + np.sum(w_aa * c.hsq) * np.eye(k)
            - (p.Ho * w_aa[:, None]).T @ p.Ho
        )
        out[:k, k:] = (2.0 / M) * (Ba_j * (si * spj)[:, None]).T @ p.Z
        out[k:, :k] = (2.0 / M) * p.Z.T @ (Ba_i * (spi * sj)[:, None])
        scal = 2.0 * c.hA[:, i] * c.hA[:, j] + c.hsq * float(p.a[i] @ p.a[j]) - c.oA[:, i] * c.oA[:, j]
        out[k:, k:] = (2.0 / M) * p.Z.T @ ((spi * spj * scal)[:, None] * p.Z)
        return out

    def hessian_block(self, ens: ParticleEnsemble, i: int, j: int) -> np.ndarray:
        self._check_index(ens, i)
        self._check_index(ens, j)
        p = self._prep(ens)
        return self._block(p, self._kernel_cache(p), i, j)

    def hessian_blocks(self, ens: ParticleEnsemble) -> np.ndarray:
        p = self._prep(ens)
        c = self._kernel_cache(p)
        n = ens.n
        out = np.empty((n, self.dim, n, self.dim))
        for i in range(n):
            for j in range(n):
                out[i, :, j, :] = self._block(p, c, i, j)
        return out

    def grad_grad(self, ens: ParticleEnsemble, i: int) -> np.ndarray:
        self._check_index(ens, i)
        p = self._prep(ens)
        k, M = self.k, p.M
        dmh = self._dmh(p)
        Sp = sigmoid_d1(p.S[i])
        Spp = sigmoid_d2(p.S[i])
        out = np.zeros((self.dim, self.dim))
        aw = 2.0 * (dmh * Sp[:, None]).T @ p.Z / M  # (k, l)
        out[:k, k:] = aw
        out[k:, :k] = aw.T
        t = dmh @ p.a[i]  # (M,)
        out[k:, k:] = 2.0 * p.Z.T @ ((Spp * t)[:, None] * p.Z) / M
        return out
