"""Experiment harness: config files, objective presets, run matrices.

Config format is flat ``key = value`` text with section prefixes
(``objective.*``, ``pwgf.*``, ``constants.*``, ``experiment.*``), chosen so
a resolved config echoes byte-stably into the per-run manifest and the
manifest itself parses as a config that replays the run.

Presets
-------
mean_quartic   objective.d
matdecomp      objective.k/l, dataset_size, data_seed, target_n,
               target_seed, target_a_scale
icfl           as matdecomp plus objective.lam_reg
coulomb_mmd    objective.d, eps_reg, target_n, target_seed

Init specs (``experiment.init``): ``normal`` (standard normal entries times
experiment.init_scale; matdecomp/icfl may override the a-block scale with
experiment.init_a_scale), ``saddle`` (exact-symmetric mean-zero ensemble
for mean_quartic, all a_j = 0 for matdecomp/icfl), or ``file:<path>``.

The saddle init for mean_quartic uses coordinates that are exact binary
fractions, so the ensemble mean is exactly zero in floating point no
matter how sums are associated, and the configuration is an exact fixed
point of gradient descent.
"""

from __future__ import annotations

import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .driver import Mode, PWGFConfig, ConstantsConfig, default_hyperparameters, run
from .ensemble import ParticleEnsemble, load_ensemble_csv, save_ensemble_csv
from .errors import CapabilityError, ConfigError, PWGFError
from .fdcheck import FDReport, run_fd_suite
from .gp_sampler import sample_hessian_gp
from .hessian_op import assemble, classify, save_spectrum_csv, spectrum
from .objectives import CoulombMMD, Dataset, ICFL, LinearPotential, MatrixDecomposition, MeanQuartic

PRESETS = ("mean_quartic", "matdecomp", "icfl", "coulomb_mmd")

_INIT_TAG = 5150
_TARGET_TAG = 7919


# --- config parsing ---------------------------------------------------------


def parse_config_text(text: str) -> dict:
    """Flat key=value parser; '#' starts a comment, blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def dump_config(cfg: dict) -> str:
    return "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))


def _get(cfg, key, default=None, required=False):
    if key in cfg and cfg[key] != "":
        return cfg[key]
    if required:
        raise ConfigError(f"missing required config key {key!r}")
    return default


def _get_float(cfg, key, default=None, required=False):
    raw = _get(cfg, key, None, required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {raw!r}") from exc


def _get_int(cfg, key, default=None, required=False):
    raw = _get(cfg, key, None, required)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {raw!r}") from exc


def _parse_seeds(raw: str) -> list:
    seeds = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        if ".." in item:
            lo, hi = item.split("..", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(item))
    if not seeds:
        raise ConfigError("experiment.seeds resolved to an empty list")
    return seeds


# --- objective and ensemble construction ------------------------------------


def _target_ensemble(cfg, dim_k: int, dim_l: int) -> ParticleEnsemble:
    n_t = _get_int(cfg, "objective.target_n", 20)
    seed = _get_int(cfg, "objective.target_seed", _get_int(cfg, "objective.data_seed", 0) + _TARGET_TAG)
    a_scale = _get_float(cfg, "objective.target_a_scale", float(np.sqrt(n_t)))
    rng = np.random.default_rng(np.random.SeedSequence((seed, _TARGET_TAG)))
    a = a_scale * rng.standard_normal((n_t, dim_k))
    w = rng.standard_normal((n_t, dim_l))
    return ParticleEnsemble(np.hstack([a, w]))


def build_objective(cfg: dict):
    preset = _get(cfg, "objective.preset", required=True)
    if preset == "mean_quartic":
        return MeanQuartic(_get_int(cfg, "objective.d", required=True))
    if preset in ("matdecomp", "icfl"):
        k = _get_int(cfg, "objective.k", required=True)
        l = _get_int(cfg, "objective.l", required=True)
        m = _get_int(cfg, "objective.dataset_size", 400)
        data_seed = _get_int(cfg, "objective.data_seed", 0)
        dataset = Dataset(l, m, data_seed)
        target = _target_ensemble(cfg, k, l)
        if preset == "matdecomp":
            return MatrixDecomposition(target, dataset, k, l)
        return ICFL(target, dataset, k, l, lam_reg=_get_float(cfg, "objective.lam_reg"))
    if preset == "coulomb_mmd":
        d = _get_int(cfg, "objective.d", required=True)
        n_t = _get_int(cfg, "objective.target_n", 20)
        seed = _get_int(cfg, "objective.target_seed", _TARGET_TAG)
        rng = np.random.default_rng(np.random.SeedSequence((seed, _TARGET_TAG)))
        target = ParticleEnsemble(rng.standard_normal((n_t, d)))
        return CoulombMMD(target, eps_reg=_get_float(cfg, "objective.eps_reg", 1e-3))
    raise ConfigError(f"unknown objective.preset {preset!r}; choose one of {PRESETS}")


def mirrored_saddle_ensemble(n: int, d: int, seed: int) -> ParticleEnsemble:
    """Mean-zero-by-construction ensemble on an exact binary-fraction grid."""
    if n % 2 != 0:
        raise ConfigError("saddle init for mean_quartic needs an even particle count")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _INIT_TAG)))
    half = rng.integers(-256, 257, size=(n // 2, d)) / 256.0
    return ParticleEnsemble(np.vstack([half, -half]))


def build_initial_ensemble(cfg: dict, obj, seed: int) -> ParticleEnsemble:
    spec = _get(cfg, "experiment.init", "normal")
    n = _get_int(cfg, "experiment.n", 100)
    preset = _get(cfg, "objective.preset", required=True)
    if spec.startswith("file:"):
        ens = load_ensemble_csv(spec[5:])
        obj.check_ensemble(ens)
        return ens
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _INIT_TAG)))
    if spec == "saddle":
        if preset == "mean_quartic":
            return mirrored_saddle_ensemble(n, obj.dim, seed)
        if preset in ("matdecomp", "icfl"):
            w = rng.standard_normal((n, obj.l))
            return ParticleEnsemble(np.hstack([np.zeros((n, obj.k)), w]))
        raise ConfigError(f"saddle init is not defined for preset {preset!r}")
    if spec == "normal":
        scale = _get_float(cfg, "experiment.init_scale", 0.1)
        positions = scale * rng.standard_normal((n, obj.dim))
        a_scale = _get_float(cfg, "experiment.init_a_scale")
        if a_scale is not None:
            if preset not in ("matdecomp", "icfl"):
                raise ConfigError("experiment.init_a_scale only applies to matdecomp/icfl")
            positions[:, : obj.k] = a_scale * rng.standard_normal((n, obj.k))
        return ParticleEnsemble(positions)
    raise ConfigError(f"unknown experiment.init {spec!r}")


# --- PWGF config resolution ---------------------------------------------------


def _constants_from(cfg: dict) -> ConstantsConfig:
    return ConstantsConfig(
        L1=_get_float(cfg, "constants.L1", required=True),
        L2=_get_float(cfg, "constants.L2", required=True),
        L3=_get_float(cfg, "constants.L3", required=True),
        R1=_get_float(cfg, "constants.R1", required=True),
        R2=_get_float(cfg, "constants.R2", required=True),
        zeta=_get_float(cfg, "constants.zeta", required=True),
        delta_F=_get_float(cfg, "constants.delta_F", required=True),
    )


def resolve_pwgf_config(cfg: dict, mode: Mode, seed: int) -> PWGFConfig:
    auto = _get(cfg, "pwgf.auto", "false").lower() in ("1", "true", "yes")
    if auto:
        base = default_hyperparameters(
            _constants_from(cfg),
            eps=_get_float(cfg, "pwgf.eps", required=True),
            delta=_get_float(cfg, "pwgf.delta", required=True),
            eta=_get_float(cfg, "pwgf.eta", required=True),
        )
        eta_p = _get_float(cfg, "pwgf.eta_p", base.eta_p)
        k_thres = _get_int(cfg, "pwgf.k_thres", base.k_thres)
        f_thres = _get_float(cfg, "pwgf.f_thres", base.f_thres)
    else:
        eta_p = _get_float(cfg, "pwgf.eta_p", 0.1)
        k_thres = _get_int(cfg, "pwgf.k_thres", 100)
        f_thres = _get_float(cfg, "pwgf.f_thres", 1e-2)
    out = PWGFConfig(
        eta=_get_float(cfg, "pwgf.eta", required=True),
        eta_p=eta_p,
        eps=_get_float(cfg, "pwgf.eps", 1e-6),
        delta=_get_float(cfg, "pwgf.delta", 0.5),
        k_thres=k_thres,
        f_thres=f_thres,
        max_iters=_get_int(cfg, "pwgf.max_iters", 1000),
        mode=mode,
        seed=int(seed),
        minibatch=_get_int(cfg, "pwgf.minibatch", 0),
        halt_factor=_get_float(cfg, "pwgf.halt_factor", 0.0),
        isotropic_scale=_get_float(cfg, "pwgf.isotropic_scale"),
    )
    out.validate()
    return out


def _manifest_for(cfg: dict, pcfg: PWGFConfig, mode: Mode, seed: int) -> dict:
    manifest = {k: v for k, v in cfg.items() if k.startswith(("objective.", "experiment."))}
    manifest.pop("experiment.modes", None)
    manifest.pop("experiment.seeds", None)
    manifest["experiment.modes"] = mode.value
    manifest["experiment.seeds"] = str(seed)
    manifest["pwgf.auto"] = "false"  # numbers below are already resolved
    manifest["pwgf.eta"] = repr(pcfg.eta)
    manifest["pwgf.eta_p"] = repr(pcfg.eta_p)
    manifest["pwgf.eps"] = repr(pcfg.eps)
    manifest["pwgf.delta"] = repr(pcfg.delta)
    manifest["pwgf.k_thres"] = str(pcfg.k_thres)
    manifest["pwgf.f_thres"] = repr(pcfg.f_thres)
    manifest["pwgf.max_iters"] = str(pcfg.max_iters)
    manifest["pwgf.minibatch"] = str(pcfg.minibatch)
    manifest["pwgf.halt_factor"] = repr(pcfg.halt_factor)
    if pcfg.isotropic_scale is not None:
        manifest["pwgf.isotropic_scale"] = repr(pcfg.isotropic_scale)
    return manifest


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def run_cell(cfg: dict, mode_name: str, seed: int) -> str:
    """One (mode, seed) cell: build, run, persist trace + manifest + final state."""
    mode = Mode(mode_name)
    obj = build_objective(cfg)
    ens0 = build_initial_ensemble(cfg, obj, seed)
    pcfg = resolve_pwgf_config(cfg, mode, seed)
    final, trace = run(obj, ens0, pcfg)
    outdir = _get(cfg, "experiment.outdir", ".")
    preset = _get(cfg, "objective.preset", required=True)
    stem = os.path.join(outdir, f"{preset}_{mode.value}_seed{seed}")
    _atomic_write(stem + ".csv", trace.to_csv())
    _atomic_write(stem + ".manifest", dump_config(_manifest_for(cfg, pcfg, mode, seed)))
    save_ensemble_csv(final, stem + "_final.csv")
    return stem + ".csv"


def _worker(args):
    cfg, mode_name, seed = args
    try:
        return run_cell(cfg, mode_name, seed)
    except PWGFError as exc:
        raise type(exc)(f"cell (mode={mode_name}, seed={seed}): {exc}") from exc


def run_experiment(cfg: dict) -> list:
    """Run the full (mode x seed) matrix; returns the trace paths written."""
    modes_raw = _get(cfg, "experiment.modes", required=True)
    modes = [Mode(m.strip()) for m in modes_raw.split(",") if m.strip()]
    if not modes:
        raise ConfigError("experiment.modes resolved to an empty list")
    seeds = _parse_seeds(_get(cfg, "experiment.seeds", required=True))
    outdir = _get(cfg, "experiment.outdir", ".")

    # fail fast, before any output: construct everything once
    obj = build_objective(cfg)
    for mode in modes:
        resolve_pwgf_config(cfg, mode, seeds[0])
    build_initial_ensemble(cfg, obj, seeds[0])
    os.makedirs(outdir, exist_ok=True)

    cells = [(cfg, mode.value, seed) for mode in modes for seed in seeds]
    workers = int(os.environ.get("PWGF_THREADS", "1"))
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_worker, cells))
    return [_worker(args) for args in cells]


# --- verify -------------------------------------------------------------------


def _verify_objectives():
    rng = np.random.default_rng(np.random.SeedSequence(2024))
    target = ParticleEnsemble(rng.standard_normal((10, 8)))
    dataset = Dataset(5, 200, seed=11)
    return [
        LinearPotential(3),
        MeanQuartic(3),
        MatrixDecomposition(target, dataset, 3, 5),
        ICFL(target, dataset, 3, 5),
    ]


def _verify_ensemble(obj, rng) -> ParticleEnsemble:
    return ParticleEnsemble(0.8 * rng.standard_normal((10, obj.dim)))


def verify(objectives=None, seeds=(0, 1, 2, 3, 4), stream=None) -> int:
    """Full oracle suite: FD checks plus sampler covariance and KL variance.

    Returns 0 when everything passes, 1 otherwise.  Writes nothing.
    """
    from .ensemble import l2_inner

    stream = stream or sys.stdout
    reports = run_fd_suite(objectives or _verify_objectives(), _verify_ensemble, seeds=seeds)

    # sampler checks at the analytic saddle: covariance of both paths, KL variance
    rng = np.random.default_rng(np.random.SeedSequence(77))
    half = rng.standard_normal((4, 2))
    saddle = ParticleEnsemble(np.vstack([half, -half]))
    h_op = assemble(MeanQuartic(2), saddle)
    cov = h_op.covariance_matrix()
    spec = spectrum(h_op)
    for method in ("matrix", "kl"):
        draw_rng = np.random.default_rng(np.random.SeedSequence((9, 3)))
        draws = np.stack(
            [sample_hessian_gp(h_op, draw_rng, method=method, spec=spec).stacked() for _ in range(20000)]
        )
        err = float(np.max(np.abs(draws.T @ draws / len(draws) - cov)))
        tol = 0.05 * (1.0 + float(np.max(np.abs(cov))))
        reports.append(
            FDReport("mean_quartic", f"gp_covariance[{method}]", (), (err,), None, err <= tol)
        )
    idx = int(np.argmax(np.abs(spec.eigenvalues)))
    lam1, psi1 = spec.eigenvalues[idx], spec.eigenfields[idx]
    draw_rng = np.random.default_rng(np.random.SeedSequence((9, 4)))
    coeffs = np.array(
        [l2_inner(psi1, sample_hessian_gp(h_op, draw_rng)) for _ in range(20000)]
    )
    rel = abs(float(np.var(coeffs)) - lam1**2) / lam1**2
    reports.append(FDReport("mean_quartic", "kl_variance", (), (rel,), None, rel <= 0.05))

    print(FDReport.header(), file=stream)
    for rep in reports:
        print(rep.row(), file=stream)
    n_fail = sum(1 for r in reports if not r.passed)
    print(f"{len(reports) - n_fail}/{len(reports)} checks passed", file=stream)
    return 0 if n_fail == 0 else 1


def classify_point(cfg: dict, ensemble_path: str, eps: float, delta: float,
                   dump_spectrum: str | None = None, stream=None) -> int:
    """CLI surface around hessian_op.classify; prints one summary line."""
    stream = stream or sys.stdout
    obj = build_objective(cfg)
    ens = load_ensemble_csv(ensemble_path)
    result = classify(obj, ens, eps, delta)
    lam = "n/a" if result.lambda_min is None else repr(result.lambda_min)
    print(
        f"classification={result.label.value} grad_norm={result.grad_norm!r} lambda_min={lam}",
        file=stream,
    )
    if dump_spectrum is not None:
        if not obj.has_hessian:
            raise CapabilityError(f"{obj.name} has no Hessian kernel to dump")
        save_spectrum_csv(spectrum(assemble(obj, ens)), dump_spectrum)
    return 0
