"""Discrete-time perturbed Wasserstein gradient descent.

The driver alternates plain Wasserstein gradient-descent steps

    mu <- (Id - eta grad_mu F(mu)) # mu

with perturbation events: whenever the gradient L^2 norm drops to eps and
no evaluation window is open, a random field xi is drawn (Hessian-guided GP
or isotropic, depending on mode), the measure is pushed along eta_p xi, and
an evaluation window of k_thres iterations opens.  If the objective failed
to decrease by more than f_thres over the window, the pre-perturbation
measure is returned as an approximate second-order stationary point;
otherwise the run continues and perturbations re-arm once the window
closes.

Bookkeeping conventions:

* records are taken at the start of each iteration, before any perturbation
  applied at that iteration, so the ``perturb`` row carries the gradient
  norm and objective value that triggered the event;
* the reference value compared at the window close is the pre-perturbation
  objective, matching the saddle-escape guarantee;
* the window-open guard is k - k_p > k_thres with k_p = -(k_thres + 1)
  initially, so a perturbation may fire at iteration 0.

Static mode never perturbs; because exact saddles are fixed points of the
descent map, it additionally halts once the gradient norm falls below
eps * halt_factor so baseline runs stay bounded.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ensemble import ParticleEnsemble, StackedField, l2_norm, pushforward
from .errors import CapabilityError, ConfigError, ContractViolationError, PWGFError
from .gp_sampler import (
    matched_isotropic_scale,
    minibatch_rng,
    perturbation_rng,
    sample_hessian_gp,
    sample_isotropic,
)
from .hessian_op import assemble


class Mode(enum.Enum):
    STATIC = "static"
    ISOTROPIC = "isotropic"
    HESSIAN = "hessian"


class RunStatus(enum.Enum):
    HALTED_AT_STATIONARY = "HaltedAtStationary"
    MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class PWGFConfig:
    eta: float
    eta_p: float = 0.1
    eps: float = 1e-6
    delta: float = 0.5
    k_thres: int = 100
    f_thres: float = 1e-2
    max_iters: int = 1000
    mode: Mode = Mode.HESSIAN
    seed: int = 0
    minibatch: int = 0
    # static-mode halt at eps * halt_factor; 0 disables the halt entirely so
    # exact saddles (gradient identically zero) run to max_iters
    halt_factor: float = 0.0
    isotropic_scale: float | None = None  # None: match the Hessian GP's RMS norm

    def validate(self) -> None:
        if not (self.eta > 0 and self.eta_p > 0 and self.eps > 0 and self.f_thres > 0):
            raise ConfigError("eta, eta_p, eps, f_thres must all be > 0")
        if self.delta <= 0:
            raise ConfigError("delta must be > 0")
        if self.k_thres < 1 or self.max_iters < 1:
            raise ConfigError("k_thres >= 1 and max_iters >= 1 required")
        if self.minibatch < 0:
            raise ConfigError("minibatch must be >= 0 (0 = full batch)")


@dataclass(frozen=True)
class ConstantsConfig:
    """Smoothness and budget constants feeding the default hyperparameters."""

    L1: float  # gradient Lipschitz constant
    L2: float  # Hessian kernel Lipschitz constant
    L3: float  # grad-grad Lipschitz constant
    R1: float  # Hilbert-Schmidt bound on the Hessian operator
    R2: float  # gradient-regularity constant
    zeta: float  # target overall failure probability
    delta_F: float  # objective gap estimate F(mu_0) - inf F

    def validate(self) -> None:
        for name in ("L1", "L2", "L3", "R1", "R2", "zeta", "delta_F"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"constant {name} must be > 0")


@dataclass
class RunTrace:
    iters: list = field(default_factory=list)
    f_values: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    events: list = field(default_factory=list)
    elapsed_ms: list = field(default_factory=list)
    status: RunStatus = RunStatus.MAX_ITERS

    def record(self, k, f, g, event, ms):
        self.iters.append(int(k))
        self.f_values.append(float(f))
        self.grad_norms.append(float(g))
        self.events.append(event)
        self.elapsed_ms.append(float(ms))

    def perturb_count(self) -> int:
        return sum(1 for e in self.events if e == "perturb")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "f_value", "grad_norm", "event", "elapsed_ms"])
        for row in zip(self.iters, self.f_values, self.grad_norms, self.events, self.elapsed_ms):
            writer.writerow([row[0], repr(row[1]), repr(row[2]), row[3], f"{row[4]:.3f}"])
        return buf.getvalue()


def wgd_step(obj, ens: ParticleEnsemble, eta: float) -> ParticleEnsemble:
    """One Wasserstein gradient-descent step (Id - eta grad F) # mu."""
    if not eta > 0:
        raise ContractViolationError("eta must be > 0")
    return pushforward(ens, obj.gradient(ens), -eta)


def _draw_perturbation(obj, ens, cfg: PWGFConfig, event_index: int) -> StackedField:
    rng = perturbation_rng(cfg.seed, event_index)
    if cfg.mode is Mode.HESSIAN:
        return sample_hessian_gp(assemble(obj, ens), rng)
    scale = cfg.isotropic_scale
    if scale is None:
        scale = matched_isotropic_scale(assemble(obj, ens))
    return sample_isotropic(ens, scale, rng)


def run(obj, ens0: ParticleEnsemble, cfg: PWGFConfig) -> tuple[ParticleEnsemble, RunTrace]:
    """Execute discrete-time PWGF and return (final ensemble, trace)."""
    cfg.validate()
    obj.check_ensemble(ens0)
    if cfg.mode is Mode.HESSIAN and not obj.has_hessian:
        raise CapabilityError(f"{obj.name} has no Hessian kernel; hessian mode unavailable")
    if cfg.mode is Mode.ISOTROPIC and cfg.isotropic_scale is None and not obj.has_hessian:
        raise CapabilityError(
            f"{obj.name} has no Hessian kernel to match; set isotropic_scale explicitly"
        )
    if cfg.minibatch:
        dataset = getattr(obj, "dataset", None)
        if dataset is None:
            raise ConfigError(f"{obj.name} has no dataset; minibatch mode unavailable")
        if cfg.minibatch > dataset.size:
            raise ConfigError(f"minibatch {cfg.minibatch} exceeds dataset size {dataset.size}")
        batch_rng = minibatch_rng(cfg.seed)

    trace = RunTrace()
    ens = ens0
    k_p = -(cfg.k_thres + 1)
    ref_ens = None
    ref_value = None
    n_events = 0
    start = time.perf_counter()

    for k in range(cfg.max_iters):
        try:
            if cfg.minibatch:
                # trace value stays full batch; only the step gradient subsamples
                indices = np.sort(batch_rng.choice(obj.dataset.size, size=cfg.minibatch, replace=False))
                f_k = obj.value(ens)
                grad = obj.gradient(ens, indices)
            else:
                indices = None
                f_k, grad = obj.value_and_gradient(ens)
        except PWGFError as exc:
            raise type(exc)(f"objective failed at iteration {k}: {exc}") from exc
        gnorm = l2_norm(grad)
        event = "none"

        if cfg.mode is not Mode.STATIC and gnorm <= cfg.eps and (k - k_p) > cfg.k_thres:
            xi = _draw_perturbation(obj, ens, cfg, n_events)
            ref_ens, ref_value = ens, f_k
            ens = pushforward(ens, xi, cfg.eta_p)
            grad = obj.gradient(ens, indices)
            k_p = k
            n_events += 1
            event = "perturb"

        if k == k_p + cfg.k_thres and ref_value is not None:
            if ref_value - f_k <= cfg.f_thres:
                event = "eval_fail_halt"
                trace.record(k, f_k, gnorm, event, 1e3 * (time.perf_counter() - start))
                trace.status = RunStatus.HALTED_AT_STATIONARY
                return ref_ens, trace
            event = "eval_pass"

        trace.record(k, f_k, gnorm, event, 1e3 * (time.perf_counter() - start))

        if cfg.mode is Mode.STATIC and cfg.halt_factor > 0 and gnorm <= cfg.eps * cfg.halt_factor:
            trace.status = RunStatus.HALTED_AT_STATIONARY
            return ens, trace

        ens = pushforward(ens, grad, -cfg.eta)

    trace.status = RunStatus.MAX_ITERS
    return ens, trace


def descent_audit(trace: RunTrace, eta: float) -> bool:
    """Check F(mu_0) - F(mu_k) >= (eta/2) sum_{l<k} ||grad_l||^2 on every prefix.

    Only meaningful for perturbation-free traces with eta <= 1/L1.
    """
    if trace.perturb_count() > 0:
        raise ContractViolationError("descent_audit requires a perturbation-free (static) trace")
    f = np.asarray(trace.f_values)
    g = np.asarray(trace.grad_norms)
    if f.size == 0:
        return True
    slack = 1e-10 * (1.0 + abs(f[0]))
    lhs = f[0] - f
    rhs = 0.5 * eta * np.concatenate([[0.0], np.cumsum(g[:-1] ** 2)])
    return bool(np.all(lhs >= rhs - slack))


@dataclass(frozen=True)
class ResolvedHyperparameters:
    """All intermediates of the theoretical hyperparameter formulas."""

    m_bound: float  # high-probability bound M on the perturbation norm
    r: float  # escape-rate parameter (worst case lambda_0 = -delta)
    zeta_prime: float  # per-event failure probability after budget split
    k_thres: int
    f_thres: float
    eta_p: float


def resolve_hyperparameters(
    consts: ConstantsConfig, eps: float, delta: float, eta: float
) -> ResolvedHyperparameters:
    """Resolve (eta_p, k_thres, f_thres) from the smoothness constants.

    The per-event failure probability zeta' couples to f_thres through the
    perturbation budget m = ceil(delta_F / f_thres); the fixed point is
    resolved by iteration from zeta' = zeta.  The smallest Hessian
    eigenvalue entering the escape-rate parameter r is replaced by its
    worst admissible value -delta.
    """
    consts.validate()
    if not (eps > 0 and delta > 0 and eta > 0):
        raise ConfigError("eps, delta, eta must be > 0")
    rho = consts.L2 + consts.L3
    if rho * eps > delta**2:
        raise ConfigError(
            f"hypothesis (L2 + L3) * eps <= delta^2 violated: {rho:.6g} * {eps:.6g} > {delta**2:.6g}"
        )
    if eta > 1.0 / consts.L1:
        raise ConfigError(f"hypothesis eta <= 1/L1 violated: {eta:.6g} > {1.0 / consts.L1:.6g}")

    e = math.e
    log_growth = math.log1p(eta * delta)

    def resolve(zeta_p: float):
        m_big = max(
            math.sqrt(e * consts.R1**2 / (e - 1.0) * (1.0 + 2.0 * math.log(2.0 / zeta_p))),
            2.0 * consts.R1 * math.sqrt(math.log(4.0 * math.sqrt(2.0) / zeta_p)),
        )
        r = math.sqrt(2.0 * math.pi) * delta * zeta_p / 8.0
        arg = 16.0 * math.sqrt(2.0) * math.sqrt(consts.L1 * eta) * m_big / (
            math.sqrt(e) * r * math.sqrt(log_growth)
        )
        if arg <= 1.0:
            raise ConfigError(f"k_thres log argument {arg:.6g} <= 1; constants incompatible")
        k_thres = max(1, math.ceil(2.0 / log_growth * math.log(arg)))
        f_thres = (eta * k_thres) ** -3 * math.log(1.5) ** 2 / (18.0 * rho**2)
        return m_big, r, k_thres, f_thres

    zeta_p = consts.zeta
    m_big, r, k_thres, f_thres = resolve(zeta_p)
    for _ in range(100):
        m_budget = math.ceil(consts.delta_F / f_thres)
        zeta_new = consts.zeta / m_budget
        m_big, r, k_thres, f_thres = resolve(zeta_new)
        if abs(zeta_new - zeta_p) <= 1e-6 * zeta_p:
            zeta_p = zeta_new
            break
        zeta_p = zeta_new

    eta_p = 2.0 * f_thres / (m_big * (eps + math.sqrt(eps**2 + 2.0 * consts.L1 * f_thres)))
    return ResolvedHyperparameters(
        m_bound=m_big, r=r, zeta_prime=zeta_p, k_thres=k_thres, f_thres=f_thres, eta_p=eta_p
    )


def default_hyperparameters(
    consts: ConstantsConfig,
    eps: float,
    delta: float,
    eta: float,
    mode: Mode = Mode.HESSIAN,
    seed: int = 0,
    max_iters: int = 100000,
) -> PWGFConfig:
    """A full PWGFConfig populated from the theoretical formulas."""
    resolved = resolve_hyperparameters(consts, eps, delta, eta)
    return PWGFConfig(
        eta=eta,
        eta_p=resolved.eta_p,
        eps=eps,
        delta=delta,
        k_thres=resolved.k_thres,
        f_thres=resolved.f_thres,
        max_iters=max_iters,
        mode=mode,
        seed=seed,
    )
