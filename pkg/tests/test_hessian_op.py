import numpy as np
import pytest

from pwgf.ensemble import ParticleEnsemble, StackedField, l2_inner, l2_norm, zero_field
from pwgf.errors import CapabilityError, ContractViolationError, NumericalDegeneracyError
from pwgf.hessian_op import (
    Classification,
    apply,
    assemble,
    classify,
    min_eigenvalue,
    save_spectrum_csv,
    spectrum,
)
from pwgf.objectives import CoulombMMD, LinearPotential, MeanQuartic

from conftest import random_ensemble, rng_for, unit_field


def saddle_ensemble(n, d, seed=40):
    half = rng_for(seed).standard_normal((n // 2, d))
    return ParticleEnsemble(np.vstack([half, -half]))


def unit_mean_ensemble(n, d):
    pos = np.zeros((n, d))
    pos[:, 0] = 1.0
    return ParticleEnsemble(pos)


def test_assemble_linear_potential_zero():
    rng = rng_for(41)
    ens = random_ensemble(4, 3, rng)
    h = assemble(LinearPotential(3), ens)
    assert np.all(h.matrix == 0.0)


def test_assemble_quartic_saddle_blocks():
    ens = ParticleEnsemble([[1.0, 2.0], [-1.0, -2.0]])  # m = 0, N = 2, d = 2
    h = assemble(MeanQuartic(2), ens)
    expected = np.block([[-np.eye(2), -np.eye(2)], [-np.eye(2), -np.eye(2)]])
    assert np.allclose(h.matrix, expected, atol=1e-15)


def test_assemble_guard_and_capability():
    ens = saddle_ensemble(4, 2)
    with pytest.raises(ContractViolationError):
        assemble(MeanQuartic(2), ens, max_dim=4)
    target = ParticleEnsemble(np.ones((3, 3)))
    with pytest.raises(CapabilityError):
        assemble(CoulombMMD(target), ParticleEnsemble(np.zeros((2, 3))))


class AsymmetricKernel(MeanQuartic):
    name = "asymmetric"

    def hessian_blocks(self, ens):
        out = super().hessian_blocks(ens)
        out[0, :, 1, :] += 1.0  # break K(0,1) = K(1,0)^T
        return out


def test_assemble_rejects_asymmetry():
    ens = saddle_ensemble(4, 2)
    with pytest.raises(NumericalDegeneracyError):
        assemble(AsymmetricKernel(2), ens)


def test_apply_examples():
    ens = saddle_ensemble(6, 2)
    h = assemble(MeanQuartic(2), ens)
    assert np.all(apply(h, zero_field(6, 2)).values == 0.0)
    rng = rng_for(42)
    f = StackedField(rng.standard_normal((6, 2)))
    out = apply(h, f)
    expected = -np.tile(f.values.mean(axis=0), (6, 1))
    assert np.allclose(out.values, expected, atol=1e-14)
    with pytest.raises(ContractViolationError):
        apply(h, zero_field(5, 2))


def test_apply_linearity():
    rng = rng_for(43)
    ens = random_ensemble(5, 3, rng)
    h = assemble(MeanQuartic(3), ens)
    f, g = unit_field(5, 3, rng), unit_field(5, 3, rng)
    lhs = apply(h, StackedField(2.0 * f.values - 0.5 * g.values)).values
    rhs = 2.0 * apply(h, f).values - 0.5 * apply(h, g).values
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_spectrum_quartic_saddle():
    ens = saddle_ensemble(4, 3)
    spec = spectrum(assemble(MeanQuartic(3), ens))
    expected = np.concatenate([[-1.0] * 3, [0.0] * 9])
    assert np.allclose(spec.eigenvalues, expected, atol=1e-10)


def test_spectrum_unit_mean():
    # blocks 2 m m' at ||m|| = 1: one eigenvalue 2 on the constant field along m
    ens = unit_mean_ensemble(5, 2)
    spec = spectrum(assemble(MeanQuartic(2), ens))
    assert spec.eigenvalues[-1] == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(spec.eigenvalues[:-1], 0.0, atol=1e-12)
    top = spec.eigenfields[-1].values
    assert np.allclose(top, np.tile(top[0], (5, 1)), atol=1e-8)  # constant field
    assert abs(top[0, 1]) <= 1e-8  # aligned with m = e_0


def test_eigenrelation_and_orthonormality(matdecomp_obj):
    rng = rng_for(44)
    ens = random_ensemble(5, 8, rng)
    h = assemble(matdecomp_obj, ens)
    spec = spectrum(h)
    for idx in (0, 10, len(spec.eigenvalues) - 1):
        lam, psi = spec.eigenvalues[idx], spec.eigenfields[idx]
        resid = apply(h, psi).values - lam * psi.values
        assert l2_norm(StackedField(resid)) <= 1e-8 * max(1.0, abs(lam))
        assert l2_norm(psi) == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.norm(psi.stacked()) == pytest.approx(np.sqrt(ens.n), rel=1e-10)
    for a in range(0, 40, 7):
        for b in range(0, 40, 11):
            val = l2_inner(spec.eigenfields[a], spec.eigenfields[b])
            assert val == pytest.approx(1.0 if a == b else 0.0, abs=1e-8)


def test_reconstruction_and_covariance_identity(matdecomp_obj):
    rng = rng_for(45)
    ens = random_ensemble(4, 8, rng)
    h = assemble(matdecomp_obj, ens)
    spec = spectrum(h)
    vecs = np.stack([f.stacked() for f in spec.eigenfields], axis=1)
    recon = (vecs * spec.eigenvalues) @ vecs.T / ens.n
    h_op = h.operator_matrix()
    assert np.linalg.norm(recon - h_op) <= 1e-8 * np.linalg.norm(h_op)
    cov = h.covariance_matrix()
    assert np.allclose(cov, ens.n * h_op @ h_op, atol=1e-12)
    w = np.linalg.eigvalsh(cov)
    assert w.min() >= -1e-10 * np.abs(cov).max()


def test_rayleigh_bound(matdecomp_obj):
    rng = rng_for(46)
    ens = random_ensemble(5, 8, rng)
    h = assemble(matdecomp_obj, ens)
    lam_min, _ = min_eigenvalue(h)
    for _ in range(20):
        f = unit_field(5, 8, rng)
        quad = l2_inner(f, apply(h, f))
        assert quad >= lam_min * l2_norm(f) ** 2 - 1e-10


def test_min_eigenvalue_examples(matdecomp_obj):
    ens = saddle_ensemble(4, 3)
    lam, psi = min_eigenvalue(assemble(MeanQuartic(3), ens))
    assert lam == pytest.approx(-1.0, abs=1e-12)
    assert np.allclose(psi.values, np.tile(psi.values[0], (4, 1)), atol=1e-8)

    rng = rng_for(47)
    ens2 = random_ensemble(4, 3, rng)
    lam2, _ = min_eigenvalue(assemble(LinearPotential(3), ens2))
    assert lam2 == 0.0

    # all a_j = 0 is a strict saddle of the matrix-decomposition loss
    w = rng.standard_normal((5, 5))
    ens3 = ParticleEnsemble(np.hstack([np.zeros((5, 3)), w]))
    lam3, _ = min_eigenvalue(assemble(matdecomp_obj, ens3))
    assert lam3 < -1e-4


def test_classify_examples():
    obj = MeanQuartic(3)
    res = classify(obj, unit_mean_ensemble(4, 3), eps=1e-6, delta=0.5)
    assert res.label is Classification.SECOND_ORDER_STATIONARY
    res2 = classify(obj, saddle_ensemble(4, 3), eps=1e-6, delta=0.5)
    assert res2.label is Classification.SADDLE
    assert res2.lambda_min == pytest.approx(-1.0, abs=1e-10)
    ens = ParticleEnsemble(np.full((3, 3), 2.0))
    res3 = classify(obj, ens, eps=1.0, delta=0.5)
    assert res3.label is Classification.NON_STATIONARY
    assert res3.lambda_min is None
    with pytest.raises(ContractViolationError):
        classify(obj, ens, eps=-1.0, delta=0.5)


def test_spectrum_csv(tmp_path):
    spec = spectrum(assemble(MeanQuartic(2), saddle_ensemble(4, 2)))
    path = tmp_path / "spec.csv"
    save_spectrum_csv(spec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,eigenvalue"
    assert len(lines) == 1 + 8
