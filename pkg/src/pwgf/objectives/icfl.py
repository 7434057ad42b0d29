"""In-context feature-learning loss with the attention matrix solved out.

Particles x = (a, w) in R^{k+l} parametrize student features
h(z) = (1/N) sum_j a_j sigma(w_j' z).  With second moments
Sig = E[h h'] + lam I (ridge), C = E[h_o h'] and Q = Sig^{-1} C', the loss is

    F(mu) = (1/2) E_z || zeta(z) ||^2,   zeta = h_o - Q' h.

Derivatives.  Q' is the minimizer of the ridge problem
min_T E||h_o - T h||^2 + lam ||T||_F^2, so F splits into an envelope part

    Ft(mu) = (1/2) E||h_o||^2 - (1/2) tr(C Sig^{-1} C')

whose T-dependence differentiates away, minus the ridge energy
(lam/2) ||T||_F^2.  Both parts are smooth matrix functions of (C, Sig) and
the gradient and grad_grad implemented here are exact for constant lam.

Writing P = Q Q' and taking directions f, g (feature perturbations of two
particles), the second variation of Ft is the five-term bilinear form

    B(f, g) = - E_{z,u}[(f(z)' Sig^{-1} g(u)) (zeta(u)' zeta(z))]
              + E_{z,u}[(f(z)' Sig^{-1} h(u)) (g(u)' Q zeta(z))]
              + E_{z,u}[(f(z)' Q zeta(u)) (g(u)' Sig^{-1} h(z))]
              - E_{z,u}[(f(z)' P g(u)) (h(u)' Sig^{-1} h(z))]
              + E_z[f(z)' P g(z)]

and the kernel block for particles (i, j) is B evaluated on the rows of the
feature Jacobians J_i, J_j (J_x = [sigma I_k; sigma' z a']).  The ridge
energy's second variation is O(lam) and is deliberately dropped from the
kernel; its first derivative is kept (vector u below) so the gradient is
exact.  At first-order optimal points the zeta moments vanish and B reduces
to (E[s_w s_v] - m_w' Sig^{-1} m_v) P, the leading Hessian term of the
attention analysis.
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from ..ensemble import ParticleEnsemble, StackedField
from ..errors import ContractViolationError, NumericalDegeneracyError
from .base import Objective
from .dataset import Dataset, sigmoid, sigmoid_d1, sigmoid_d2


class ICFL(Objective):
    name = "icfl"

    def __init__(self, target: ParticleEnsemble, dataset: Dataset, k: int, l: int, lam_reg=None):
        self.k = int(k)
        self.l = int(l)
        self.dim = self.k + self.l
        if target.d != self.dim:
            raise ContractViolationError(f"target dimension {target.d} != k+l = {self.dim}")
        if dataset.dim != self.l:
            raise ContractViolationError(f"dataset dimension {dataset.dim} != l = {self.l}")
        self.target = target
        self.dataset = dataset
        self._target_features = self._features_of(target.positions, dataset.samples)
        if lam_reg is None:
            # scale-aware default, frozen at construction so it is a true
            # constant under differentiation
            sig_oo = self._target_features.T @ self._target_features / dataset.size
            lam_reg = 1e-6 * float(np.trace(sig_oo)) / self.k
        self.lam_reg = float(lam_reg)
        if self.lam_reg < 0:
            raise ContractViolationError("lam_reg must be >= 0")

    # -- shared feature machinery -------------------------------------------

    def _split(self, positions: np.ndarray):
        return positions[:, : self.k], positions[:, self.k :]

    def _features_of(self, positions: np.ndarray, Z: np.ndarray) -> np.ndarray:
        a, w = self._split(positions)
        S = sigmoid(w @ Z.T)
        return S.T @ a / positions.shape[0]

    def h_features(self, ens: ParticleEnsemble, z) -> np.ndarray:
        self.check_ensemble(ens)
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[1] != self.l:
            raise ContractViolationError(f"input dimension {z.shape[1]} != l = {self.l}")
        out = self._features_of(ens.positions, z)
        return out[0] if out.shape[0] == 1 else out

    def _prep(self, ens: ParticleEnsemble, indices=None) -> SimpleNamespace:
        self.check_ensemble(ens)
        if indices is None:
            Z, Ho = self.dataset.samples, self._target_features
        else:
            idx = np.asarray(indices, dtype=int)
            Z, Ho = self.dataset.subset(idx), self._target_features[idx]
        a, w = self._split(ens.positions)
        S = sigmoid(w @ Z.T)
        M = Z.shape[0]
        H = S.T @ a / ens.n
        sigma = H.T @ H / M + self.lam_reg * np.eye(self.k)
        try:
            L = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise NumericalDegeneracyError(
                f"icfl: Sigma + {self.lam_reg:g} I is not positive definite"
            ) from exc
        Linv = np.linalg.inv(L)
        sinv = Linv.T @ Linv
        C = Ho.T @ H / M  # E[h_o h']
        Q = sinv @ C.T
        zeta = Ho - H @ Q
        return SimpleNamespace(Z=Z, Ho=Ho, a=a, w=w, S=S, H=H, M=M, sinv=sinv, C=C, Q=Q, zeta=zeta)

    def _g_eff(self, p) -> np.ndarray:
        """Rows (Q zeta + lam u)(z)': the exact descent weight per sample."""
        qz = p.zeta @ p.Q.T
        if self.lam_reg == 0.0:
            return qz
        sinv2 = p.sinv @ p.sinv
        x1 = sinv2 @ p.C.T @ p.C @ p.sinv
        u = p.Ho @ (p.C @ sinv2) - p.H @ (x1 + x1.T)
        return qz + self.lam_reg * u

    # -- derivative surfaces -------------------------------------------------

    @staticmethod
    def _value_from(p) -> float:
        return float(0.5 * np.mean(np.sum(p.zeta**2, axis=1)))

    def _gradient_from(self, p) -> StackedField:
        G = self._g_eff(p)
        grad_a = -p.S @ G / p.M
        Sp = sigmoid_d1(p.S)
        grad_w = -(Sp * (p.a @ G.T)) @ p.Z / p.M
        return StackedField(np.hstack([grad_a, grad_w]))

    def value(self, ens: ParticleEnsemble, indices=None) -> float:
        return self._value_from(self._prep(ens, indices))

    def gradient(self, ens: ParticleEnsemble, indices=None) -> StackedField:
        return self._gradient_from(self._prep(ens, indices))

    def value_and_gradient(self, ens: ParticleEnsemble, indices=None):
        p = self._prep(ens, indices)
        return self._value_from(p), self._gradient_from(p)

    def grad_grad(self, ens: ParticleEnsemble, i: int) -> np.ndarray:
        self._check_index(ens, i)
        p = self._prep(ens)
        G = self._g_eff(p)
        k, M = self.k, p.M
        Sp = sigmoid_d1(p.S[i])
        Spp = sigmoid_d2(p.S[i])
        out = np.zeros((self.dim, self.dim))
        aw = -(G * Sp[:, None]).T @ p.Z / M
        out[:k, k:] = aw
        out[k:, :k] = aw.T
        out[k:, k:] = -p.Z.T @ ((Spp * (G @ p.a[i]))[:, None] * p.Z) / M
        return out

    def hessian_block(self, ens: ParticleEnsemble, i: int, j: int) -> np.ndarray:
        self._check_index(ens, i)
        self._check_index(ens, j)
        return self.hessian_blocks(ens)[i, :, j, :]

    def hessian_blocks(self, ens: ParticleEnsemble) -> np.ndarray:
        p = self._prep(ens)
        n, k, l, M = ens.n, self.k, self.l, p.M
        a, Z = p.a, p.Z
        sinv, Q = p.sinv, p.Q
        P = Q @ Q.T
        Sp = sigmoid_d1(p.S)

        qzeta = p.zeta @ Q.T  # rows (Q zeta)'
        sinvh = p.H @ sinv  # rows (Sig^{-1} h)'

        # per-particle moments: A*[i] = E[sigma_i phi], B*[i] = E[sigma_i' z phi']
        Ah = p.S @ p.H / M
        Ao = p.S @ p.Ho / M
        Az = Ao - Ah @ Q  # E[sigma_i zeta]
        Aqz = Az @ Q.T
        Ash = Ah @ sinv
        Bh = np.einsum("im,ml,mc->ilc", Sp, Z, p.H) / M
        Bo = np.einsum("im,ml,mc->ilc", Sp, Z, p.Ho) / M
        Bz = Bo - Bh @ Q
        Bqz = Bz @ Q.T
        Bsh = Bh @ sinv

        # per-pair moments for the same-sample term
        S_pair = p.S @ p.S.T / M
        U_pair = np.einsum("im,jm,ml->ijl", p.S, Sp, Z) / M
        ZZ = (Z[:, :, None] * Z[:, None, :]).reshape(M, l * l)
        W = (Sp[:, None, :] * Sp[None, :, :]).reshape(n * n, M)
        V_pair = (W @ ZZ / M).reshape(n, n, l, l)

        Pa = a @ P
        Sa = a @ sinv
        aPa = a @ P @ a.T
        aSa = a @ sinv @ a.T

        aa = np.zeros((n, k, n, k))
        aw = np.zeros((n, k, n, l))
        wa = np.zeros((n, l, n, k))
        ww = np.zeros((n, l, n, l))

        # T5: + E_z[f' P g]
        aa += np.einsum("ij,ab->iajb", S_pair, P)
        aw += np.einsum("ja,ijm->iajm", Pa, U_pair)
        wa += np.einsum("jim,ib->imjb", U_pair, Pa)
        ww += np.einsum("ij,ijmn->imjn", aPa, V_pair)

        # T1: - E[(f' Sig^{-1} g)(zeta(u)' zeta(z))]
        aa -= np.einsum("ij,ab->iajb", Az @ Az.T, sinv)
        aw -= np.einsum("ja,ijm->iajm", Sa, np.einsum("jmc,ic->ijm", Bz, Az))
        wa -= np.einsum("ijm,ib->imjb", np.einsum("imc,jc->ijm", Bz, Az), Sa)
        ww -= np.einsum("ij,ijmn->imjn", aSa, np.einsum("imc,jnc->ijmn", Bz, Bz))

        # T4: - E[(f' P g)(h(u)' Sig^{-1} h(z))]
        aa -= np.einsum("ij,ab->iajb", Ash @ Ah.T, P)
        aw -= np.einsum("ja,ijm->iajm", Pa, np.einsum("jmc,ic->ijm", Bh, Ash))
        wa -= np.einsum("ijm,ib->imjb", np.einsum("imc,jc->ijm", Bsh, Ah), Pa)
        ww -= np.einsum("ij,ijmn->imjn", aPa, np.einsum("imc,jnc->ijmn", Bsh, Bh))

        # T2: + E[(f' Sig^{-1} h(u))(g' Q zeta(z))]
        aa += np.einsum("ja,ib->iajb", Ash, Aqz)
        aw += np.einsum("ij,jam->iajm", Aqz @ a.T, np.einsum("jmc,ca->jam", Bh, sinv))
        wa += np.einsum("ij,imb->imjb", Sa @ Ah.T, Bqz)
        ww += np.einsum(
            "ijm,jin->imjn",
            np.einsum("imc,jc->ijm", Bqz, a),
            np.einsum("jnc,ic->jin", Bh, Sa),
        )

        # T3: + E[(f' Q zeta(u))(g' Sig^{-1} h(z))]
        aa += np.einsum("ja,ib->iajb", Aqz, Ash)
        aw += np.einsum("ij,jam->iajm", Ah @ Sa.T, np.einsum("ac,jmc->jam", Q, Bz))
        wa += np.einsum("ij,imb->imjb", (a @ Q) @ Az.T, Bsh)
        ww += np.einsum(
            "ijm,jin->imjn",
            np.einsum("imc,jc->ijm", Bsh, a),
            np.einsum("jnc,ic->jin", Bqz, a),
        )

        out = np.empty((n, self.dim, n, self.dim))
        out[:, :k, :, :k] = aa
        out[:, :k, :, k:] = aw
        out[:, k:, :, :k] = wa
        out[:, k:, :, k:] = ww
        return out
