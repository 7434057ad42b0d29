"""Random velocity fields for saddle escape.

Hessian-guided mode draws xi ~ GP(0, K) where K has blocks
(1/N) sum_m A_{im} A_{mj} (the squared-Hessian kernel at the particles).
Two equivalent sampling paths are provided:

* matrix path:   xi = A u / sqrt(N),  u ~ N(0, I_{Nd}).  Covariance
                 E[xi xi'] = (1/N) A^2 = K exactly, one matvec, no
                 factorization.  The sample lies in range(A) by
                 construction.
* KL path:       xi = sqrt(N) sum_n lambda_n g_n e_n with (lambda_n, e_n)
                 the eigenpairs of (1/N) A and g_n ~ N(0, 1) i.i.d. -- the
                 Karhunen-Loeve expansion.  Same covariance; used to
                 cross-check the matrix path in distribution.

Under either path <psi_n, xi>_{L^2(mu)} ~ N(0, lambda_n^2) for the
L^2-orthonormal eigenfields psi_n.

Reproducibility: all randomness flows through numpy Generators constructed
from explicit SeedSequences.  The stream-splitting rule is

    perturbation event e of a run seeded s  ->  SeedSequence((s, 7601, e))
    minibatch stream of a run seeded s      ->  SeedSequence((s, 4242))

so traces replay bit-identically regardless of how many draws each event
consumes.
"""

from __future__ import annotations

import math

import numpy as np

from .ensemble import ParticleEnsemble, StackedField
from .errors import ContractViolationError
from .hessian_op import HessianOperator, Spectrum, spectrum

_PERTURB_TAG = 7601
_BATCH_TAG = 4242


def perturbation_rng(seed: int, event_index: int) -> np.random.Generator:
    """Independent substream for one perturbation event."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), _PERTURB_TAG, int(event_index))))


def minibatch_rng(seed: int) -> np.random.Generator:
    """Substream feeding minibatch index draws."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), _BATCH_TAG)))


def sample_hessian_gp(
    h: HessianOperator,
    rng: np.random.Generator,
    method: str = "matrix",
    spec: Spectrum | None = None,
) -> StackedField:
    """One draw from GP(0, K) with the squared-Hessian kernel."""
    u = rng.standard_normal(h.nd)
    if method == "matrix":
        stacked = h.matrix @ u / math.sqrt(h.n)
    elif method == "kl":
        if spec is None:
            spec = spectrum(h)
        vecs = np.stack([f.stacked() for f in spec.eigenfields], axis=1) / math.sqrt(h.n)
        stacked = math.sqrt(h.n) * (vecs @ (spec.eigenvalues * u))
    else:
        raise ContractViolationError(f"unknown sampling method {method!r}")
    return StackedField.from_stacked(stacked, h.n, h.d)


def sample_isotropic(ens: ParticleEnsemble, scale: float, rng: np.random.Generator) -> StackedField:
    """i.i.d. N(0, scale^2) per coordinate per particle; scale = 0 degenerates to zero."""
    if scale < 0:
        raise ContractViolationError("scale must be >= 0")
    return StackedField(scale * rng.standard_normal((ens.n, ens.d)))


def matched_isotropic_scale(h: HessianOperator) -> float:
    """Scale making E||xi||^2 in L^2(mu) match the Hessian GP's.

    The Hessian GP has E||xi||^2 = sum_n lambda_n^2 = ||H_op||_F^2, while an
    isotropic field has E||xi||^2 = d s^2; matching the root mean square
    gives s = ||H_op||_F / sqrt(d).  (A closed-form proxy for matching
    E||xi||; both scale identically.)
    """
    return math.sqrt(h.hs_norm_sq() / h.d)


def tail_bound(eigenvalues, m_level: float) -> float:
    """Upper bound for P(||xi||_{L^2(mu)} >= M) from the spectrum.

    With kappa_n = lambda_n^2 the bound is
    exp(-(e-1) M^2 / (2 e kappa_1) + (sum kappa_n) / (2 kappa_1)),
    valid for M^2 > sum kappa_n; clamped to 1.
    """
    lams = np.asarray(eigenvalues, dtype=float)
    if lams.size == 0:
        raise ContractViolationError("eigenvalues must be nonempty")
    kappa = lams**2
    total = float(np.sum(kappa))
    if not m_level**2 > total:
        raise ContractViolationError(
            f"tail bound valid only for M^2 > sum lambda_n^2 = {total:.6g}, got M^2 = {m_level**2:.6g}"
        )
    top = float(np.max(kappa))
    if top == 0.0:
        return 0.0
    e = math.e
    val = math.exp(-(e - 1.0) * m_level**2 / (2.0 * e * top) + total / (2.0 * top))
    return min(val, 1.0)
