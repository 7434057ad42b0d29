"""Acceptance suite: one test per release criterion, at the stated tolerances.

Each test prints one ``[ACCEPTANCE] name: PASS/FAIL`` line (visible with
``pytest -s`` or in the captured output of a failing run).
"""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from pwgf.driver import (
    ConstantsConfig,
    Mode,
    PWGFConfig,
    RunStatus,
    descent_audit,
    resolve_hyperparameters,
    run,
)
from pwgf.ensemble import ParticleEnsemble, l2_inner, l2_norm
from pwgf.fdcheck import fd_gradient_check, fd_second_order_check
from pwgf.gp_sampler import sample_hessian_gp, tail_bound
from pwgf.harness import (
    build_initial_ensemble,
    build_objective,
    dump_config,
    mirrored_saddle_ensemble,
    resolve_pwgf_config,
)
from pwgf.hessian_op import Classification, assemble, classify, spectrum
from pwgf.objectives import Dataset, ICFL, LinearPotential, MatrixDecomposition, MeanQuartic

from conftest import rng_for, unit_field


def report(name: str, ok: bool, detail: str = ""):
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


def acceptance_objectives():
    rng = rng_for(2024)
    target = ParticleEnsemble(rng.standard_normal((10, 8)))
    dataset = Dataset(5, 200, seed=11)
    return [
        LinearPotential(3),
        MeanQuartic(3),
        MatrixDecomposition(target, dataset, 3, 5),
        ICFL(target, dataset, 3, 5),
    ]


def _ens_and_field(obj, seed):
    rng = rng_for(seed, 101)
    n = 10
    ens = ParticleEnsemble(0.8 * rng.standard_normal((n, obj.dim)))
    return ens, unit_field(n, obj.dim, rng)


def test_fd_gradient_suite():
    worst = 0.0
    for obj in acceptance_objectives():
        for seed in range(5):
            ens, v = _ens_and_field(obj, seed)
            rep = fd_gradient_check(obj, ens, v, h=1e-4)
            worst = max(worst, rep.errors[0])
            assert rep.passed, f"{obj.name} seed {seed}: {rep.detail}"
    report("fd_gradient_suite", worst <= 1e-4, f"max rel err {worst:.3e}")


def test_fd_second_order_suite():
    slopes = []
    for obj in acceptance_objectives():
        for seed in range(5):
            ens, v = _ens_and_field(obj, seed)
            rep = fd_second_order_check(obj, ens, v)
            assert rep.passed, f"{obj.name} seed {seed}: slope {rep.slope}"
            if rep.slope is not None:
                slopes.append(rep.slope)
    report("fd_second_order_suite", all(s >= 2.7 for s in slopes), f"min slope {min(slopes):.3f}")


def test_analytic_spectrum_and_classification():
    ens = mirrored_saddle_ensemble(4, 3, seed=0)
    spec = spectrum(assemble(MeanQuartic(3), ens))
    expected = np.concatenate([[-1.0] * 3, [0.0] * 9])
    err = float(np.max(np.abs(spec.eigenvalues - expected)))
    label = classify(MeanQuartic(3), ens, eps=1e-6, delta=0.5).label
    report(
        "analytic_spectrum",
        err <= 1e-10 and label is Classification.SADDLE,
        f"max eigenvalue err {err:.2e}, classified {label.value}",
    )


def test_gp_covariance_both_paths():
    ens = mirrored_saddle_ensemble(8, 2, seed=1)
    h = assemble(MeanQuartic(2), ens)
    spec = spectrum(h)
    cov = h.covariance_matrix()
    assert np.allclose(cov, np.tile(np.eye(2), (8, 8)), atol=1e-12)
    worst = 0.0
    for i, method in enumerate(("matrix", "kl")):
        rng = rng_for(90, i)
        draws = np.stack(
            [sample_hessian_gp(h, rng, method=method, spec=spec).stacked() for _ in range(20000)]
        )
        emp = draws.T @ draws / len(draws)
        worst = max(worst, float(np.max(np.abs(emp - cov))))
    report("gp_covariance", worst <= 0.05, f"max entry err {worst:.4f} over both paths")


def test_kl_variance_matdecomp():
    rng = rng_for(91)
    target = ParticleEnsemble(rng.standard_normal((10, 8)))
    obj = MatrixDecomposition(target, Dataset(5, 200, seed=3), 3, 5)
    ens = ParticleEnsemble(0.7 * rng.standard_normal((25, 8)))  # Nd = 200
    h = assemble(obj, ens)
    spec = spectrum(h)
    idx = int(np.argmax(np.abs(spec.eigenvalues)))
    lam, psi = spec.eigenvalues[idx], spec.eigenfields[idx]
    draw_rng = rng_for(92)
    coeffs = np.array([l2_inner(psi, sample_hessian_gp(h, draw_rng)) for _ in range(20000)])
    rel = abs(float(np.var(coeffs)) - lam**2) / lam**2
    report("kl_variance", rel <= 0.05, f"rel err {rel:.4f} (lambda_1^2 = {lam**2:.3e})")


def test_tail_bound_domination():
    ens = mirrored_saddle_ensemble(8, 2, seed=2)
    h = assemble(MeanQuartic(2), ens)
    lams = spectrum(h).eigenvalues
    total = float(np.sum(lams**2))
    rng = rng_for(93)
    norms = np.array([l2_norm(sample_hessian_gp(h, rng)) for _ in range(50000)])
    ok = True
    details = []
    for mult in (2, 3, 4):
        m_level = mult * math.sqrt(total)
        bound = tail_bound(lams, m_level)
        freq = float(np.mean(norms >= m_level))
        se = math.sqrt(bound * (1.0 - bound) / len(norms))
        ok = ok and freq <= bound + 3.0 * se
        details.append(f"M={mult}x: {freq:.5f} <= {bound:.5f}+{3*se:.5f}")
    report("tail_bound", ok, "; ".join(details))


def test_descent_inequality():
    pos = np.zeros((8, 2))
    pos[:, 0] = 0.5
    cfg = PWGFConfig(eta=0.01, eps=1e-15, mode=Mode.STATIC, max_iters=2000, seed=0)
    _, trace = run(MeanQuartic(2), ParticleEnsemble(pos), cfg)
    assert len(trace.f_values) == 2000
    ok = descent_audit(trace, 0.01)
    report("descent_inequality", ok, f"final F {trace.f_values[-1]:.6f}")


def test_saddle_escape():
    obj = MeanQuartic(4)
    ens0 = mirrored_saddle_ensemble(16, 4, seed=3)

    static_cfg = PWGFConfig(eta=0.1, eps=1e-6, mode=Mode.STATIC, max_iters=1000, seed=0)
    _, st = run(obj, ens0, static_cfg)
    f = np.array(st.f_values)
    static_ok = len(f) == 1000 and float(np.max(np.abs(f))) <= 1e-12

    escapes = 0
    for seed in range(10):
        cfg = PWGFConfig(
            eta=0.1, eta_p=0.1, eps=1e-6, delta=0.5, k_thres=200, f_thres=0.01,
            mode=Mode.HESSIAN, max_iters=2000, seed=seed,
        )
        _, tr = run(obj, ens0, cfg)
        escapes += min(tr.f_values) <= -0.2
    report(
        "saddle_escape",
        static_ok and escapes >= 9,
        f"static max|F| {np.max(np.abs(f)):.1e}; hessian escapes {escapes}/10",
    )


TREND_CONFIG = {
    "objective.preset": "matdecomp",
    "objective.k": "5",
    "objective.l": "15",
    "objective.dataset_size": "400",
    "objective.data_seed": "0",
    "objective.target_n": "100",
    "experiment.n": "100",
    "experiment.init": "normal",
    "experiment.init_scale": "1.0",
    "experiment.init_a_scale": "1e-7",
    "pwgf.eta": "0.007",
    "pwgf.eta_p": "0.5",
    "pwgf.eps": "0.01",
    "pwgf.k_thres": "1000",
    "pwgf.f_thres": "0.01",
    "pwgf.max_iters": "3000",
}


def test_matrix_decomposition_trend():
    obj = build_objective(TREND_CONFIG)
    hessian_hits = 0
    static_hits = 0
    for seed in range(10):
        ens0 = build_initial_ensemble(TREND_CONFIG, obj, seed)
        f0 = obj.value(ens0)
        _, tr_s = run(obj, ens0, resolve_pwgf_config(TREND_CONFIG, Mode.STATIC, seed))
        _, tr_h = run(obj, ens0, resolve_pwgf_config(TREND_CONFIG, Mode.HESSIAN, seed))
        static_hits += tr_s.f_values[-1] >= 0.9 * f0
        hessian_hits += min(tr_h.f_values) <= 0.5 * f0
    report(
        "matdecomp_trend",
        hessian_hits >= 8 and static_hits >= 8,
        f"hessian<=50%: {hessian_hits}/10, static>=90%: {static_hits}/10",
    )


def test_hyperparameter_identity_grid():
    consts = ConstantsConfig(L1=1.0, L2=1.0, L3=1.0, R1=1.0, R2=1.0, zeta=0.1, delta_F=1.0)
    worst = 0.0
    for delta in (0.05, 0.1, 0.2):
        for frac in (0.1, 0.5, 1.0):
            eps = frac * delta**2 / (consts.L2 + consts.L3)
            res = resolve_hyperparameters(consts, eps=eps, delta=delta, eta=0.5)
            rhs = res.eta_p * res.m_bound * eps + 0.5 * consts.L1 * (res.eta_p * res.m_bound) ** 2
            worst = max(worst, abs(res.f_thres - rhs) / res.f_thres)
    report("hyperparameter_identity", worst <= 1e-10, f"max rel residual {worst:.2e}")


def test_secondary_plotting(tmp_path):
    # 3 modes x 5 seeds of real harness traces, rendered by the standalone script
    cfg = {
        "objective.preset": "mean_quartic",
        "objective.d": "2",
        "experiment.n": "8",
        "experiment.init": "saddle",
        "experiment.modes": "static,isotropic,hessian",
        "experiment.seeds": "0..4",
        "experiment.outdir": str(tmp_path / "traces"),
        "pwgf.eta": "0.1",
        "pwgf.eta_p": "0.1",
        "pwgf.eps": "1e-6",
        "pwgf.k_thres": "40",
        "pwgf.f_thres": "0.01",
        "pwgf.max_iters": "150",
    }
    from pwgf.harness import run_experiment

    paths = run_experiment(cfg)
    assert len(paths) == 15
    script = os.path.join(os.path.dirname(__file__), "..", "frontend", "plot_pwgf.py")
    ok = True
    detail = []
    for metric in ("loss", "gradnorm"):
        blobs = []
        for attempt in ("a", "b"):
            out = tmp_path / f"{metric}_{attempt}.png"
            proc = subprocess.run(
                [sys.executable, script, "--glob", str(tmp_path / "traces" / "*_seed*.csv"),
                 "--out", str(out), "--metric", metric],
                capture_output=True, text=True,
            )
            ok = ok and proc.returncode == 0 and out.stat().st_size > 0
            blobs.append(out.read_bytes())
        ok = ok and blobs[0] == blobs[1]
        detail.append(f"{metric}: {len(blobs[0])} bytes, reruns identical {blobs[0] == blobs[1]}")
    report("secondary_plotting", ok, "; ".join(detail))


def test_run_determinism(tmp_path):
    base = {
        "objective.preset": "mean_quartic",
        "objective.d": "2",
        "experiment.n": "8",
        "experiment.init": "saddle",
        "experiment.modes": "static,hessian",
        "experiment.seeds": "0,1",
        "pwgf.eta": "0.1",
        "pwgf.eta_p": "0.1",
        "pwgf.eps": "1e-6",
        "pwgf.k_thres": "40",
        "pwgf.f_thres": "0.01",
        "pwgf.max_iters": "150",
    }
    captures = []
    for attempt in ("one", "two"):
        outdir = tmp_path / attempt
        cfg = dict(base, **{"experiment.outdir": str(outdir)})
        cfg_path = tmp_path / f"{attempt}.cfg"
        cfg_path.write_text(dump_config(cfg))
        proc = subprocess.run(
            [sys.executable, "-m", "pwgf.cli", "run", "--config", str(cfg_path)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        chunks = []
        for csv_path in sorted(outdir.glob("*_seed*.csv")):
            rows = csv_path.read_text().splitlines()
            chunks.append("\n".join(",".join(r.split(",")[:4]) for r in rows))
        captures.append("\x00".join(chunks))
    report("run_determinism", captures[0] == captures[1] and len(captures[0]) > 0)
