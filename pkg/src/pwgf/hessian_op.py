"""Discrete Wasserstein Hessian operator on L^2(mu)^d.

The kernel blocks grad^2_mu F(mu, x_i, x_j) fill an Nd x Nd symmetric
matrix A in particle-major stacking order (all d coordinates of particle 0,
then particle 1, ...).  The operator acting on stacked fields is

    H_op = (1/N) A,      (H_op f)_i = (1/N) sum_j A_{ij} f_j,

whose eigenvalues are the discrete spectrum of the integral operator.  The
Gaussian-process covariance built from the squared-Hessian kernel is

    K = (1/N) A^2 = N H_op^2,

with (i, j) block (1/N) sum_m A_{im} A_{mj}.

Eigenfields are normalized in L^2(mu), i.e. their stacked Euclidean norm is
sqrt(N), so that l2_inner(psi_a, psi_b) = delta_ab.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .ensemble import ParticleEnsemble, StackedField, l2_norm
from .errors import ContractViolationError, NumericalDegeneracyError

ASYMMETRY_TOL = 1e-8
DEFAULT_MAX_DIM = 20000


@dataclass(frozen=True)
class HessianOperator:
    matrix: np.ndarray  # symmetrized A, shape (Nd, Nd)
    n: int
    d: int

    @property
    def nd(self) -> int:
        return self.n * self.d

    def operator_matrix(self) -> np.ndarray:
        """The discrete operator (1/N) A."""
        return self.matrix / self.n

    def covariance_matrix(self) -> np.ndarray:
        """Stacked GP covariance K = (1/N) A^2."""
        return self.matrix @ self.matrix / self.n

    def hs_norm_sq(self) -> float:
        """sum_n lambda_n^2 = ||H_op||_F^2, no eigendecomposition needed."""
        return float(np.sum((self.matrix / self.n) ** 2))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # ascending, length Nd
    eigenfields: tuple  # StackedField, L^2(mu)-orthonormal


class Classification(enum.Enum):
    NON_STATIONARY = "NonStationary"
    SECOND_ORDER_STATIONARY = "SecondOrderStationary"
    SADDLE = "Saddle"


@dataclass(frozen=True)
class ClassifyResult:
    label: Classification
    grad_norm: float
    lambda_min: float | None


def assemble(obj, ens: ParticleEnsemble, max_dim: int = DEFAULT_MAX_DIM) -> HessianOperator:
    """Fill all N^2 kernel blocks, check symmetry, and symmetrize."""
    obj.check_ensemble(ens)
    nd = ens.n * ens.d
    if nd > max_dim:
        raise ContractViolationError(f"dense Hessian guard: Nd = {nd} exceeds limit {max_dim}")
    blocks = obj.hessian_blocks(ens)
    a = blocks.reshape(nd, nd)
    scale = max(1.0, float(np.linalg.norm(a)))
    asym = float(np.linalg.norm(a - a.T))
    if asym > ASYMMETRY_TOL * scale:
        raise NumericalDegeneracyError(
            f"kernel asymmetry {asym:.3e} exceeds {ASYMMETRY_TOL:.0e} * {scale:.3e};"
            " hessian_block violates transpose symmetry"
        )
    a = 0.5 * (a + a.T)
    return HessianOperator(matrix=a, n=ens.n, d=ens.d)


def apply(h: HessianOperator, f: StackedField) -> StackedField:
    if (f.n, f.d) != (h.n, h.d):
        raise ContractViolationError(f"field ({f.n}, {f.d}) does not match operator ({h.n}, {h.d})")
    return StackedField.from_stacked(h.matrix @ f.stacked() / h.n, h.n, h.d)


def spectrum(h: HessianOperator) -> Spectrum:
    try:
        eigenvalues, vecs = np.linalg.eigh(h.operator_matrix())
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("symmetric eigendecomposition failed") from exc
    root_n = np.sqrt(h.n)
    fields = tuple(
        StackedField.from_stacked(root_n * vecs[:, m], h.n, h.d) for m in range(h.nd)
    )
    return Spectrum(eigenvalues=eigenvalues, eigenfields=fields)


def min_eigenvalue(h: HessianOperator) -> tuple[float, StackedField]:
    spec = spectrum(h)
    return float(spec.eigenvalues[0]), spec.eigenfields[0]


def classify(obj, ens: ParticleEnsemble, eps: float, delta: float) -> ClassifyResult:
    """(eps, delta) test: gradient norm, then smallest Hessian eigenvalue."""
    if not (eps > 0 and delta > 0):
        raise ContractViolationError("eps and delta must be > 0")
    grad_norm = l2_norm(obj.gradient(ens))
    if grad_norm > eps:
        return ClassifyResult(Classification.NON_STATIONARY, grad_norm, None)
    lam_min, _ = min_eigenvalue(assemble(obj, ens))
    if lam_min < -delta:
        return ClassifyResult(Classification.SADDLE, grad_norm, lam_min)
    return ClassifyResult(Classification.SECOND_ORDER_STATIONARY, grad_norm, lam_min)


def save_spectrum_csv(spec: Spectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "eigenvalue"])
        for idx, lam in enumerate(spec.eigenvalues):
            writer.writerow([idx, repr(float(lam))])
