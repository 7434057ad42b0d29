"""Finite-difference oracles for the objective derivative surfaces.

These checks are deliberately independent of the analytic formulas they
validate: they only drive ``value`` and ``gradient`` through pushforwards
and particle displacements.

* ``fd_gradient_check``       central difference of h -> F((Id + h v) # mu)
                              against <grad F, v> in L^2(mu)
* ``fd_second_order_check``   the residual of the second-order expansion
                              F((Id+hv)#mu) - F - h <grad, v>
                              - (h^2/2) <v, (H + H') v> must decay as h^3
* ``fd_hessian_kernel_check`` displacement response of the gradient field:
                              d grad_i / d x_j = (1/N) kernel(i, j)
                              + delta_{ij} grad_grad(i)

For i = j the response mixes the kernel with the spatial Jacobian because
moving particle j moves both the measure's atom and the evaluation point;
the oracle checks the combined analytic sum, which separates the two terms
whenever one of them is known in closed form (e.g. MeanQuartic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import ParticleEnsemble, StackedField, l2_inner, pushforward
from .errors import ContractViolationError

DEFAULT_H = 1e-4
DEFAULT_H_GRID = (1e-1, 3e-2, 1e-2, 3e-3)
SLOPE_THRESHOLD = 2.7
EXACT_RESIDUAL = 1e-12


@dataclass
class FDReport:
    objective: str
    kind: str
    steps: tuple
    errors: tuple
    slope: float | None
    passed: bool
    detail: str = ""

    def row(self) -> str:
        slope = "-" if self.slope is None else f"{self.slope:7.3f}"
        err = max(self.errors) if self.errors else float("nan")
        status = "PASS" if self.passed else "FAIL"
        return f"{self.objective:<18} {self.kind:<22} {err:12.3e} {slope:>8} {status}"

    @staticmethod
    def header() -> str:
        return f"{'objective':<18} {'check':<22} {'max error':>12} {'slope':>8} status"


def fd_gradient_check(obj, ens: ParticleEnsemble, v: StackedField, h: float = DEFAULT_H) -> FDReport:
    """Compare the directional derivative along v with the analytic gradient."""
    if h <= 0:
        raise ContractViolationError("h must be > 0")
    f_plus = obj.value(pushforward(ens, v, h))
    f_minus = obj.value(pushforward(ens, v, -h))
    fd = (f_plus - f_minus) / (2.0 * h)
    analytic = l2_inner(obj.gradient(ens), v)
    scale = max(abs(analytic), abs(fd), 1e-12)
    rel = abs(fd - analytic) / scale
    return FDReport(
        objective=obj.name,
        kind="gradient",
        steps=(h,),
        errors=(rel,),
        slope=None,
        passed=rel <= 1e-4,
        detail=f"fd={fd:.12g} analytic={analytic:.12g}",
    )


def second_order_form(obj, ens: ParticleEnsemble, v: StackedField) -> float:
    """<v, (H + H') v> in L^2(mu) assembled from the objective's blocks."""
    n = ens.n
    blocks = obj.hessian_blocks(ens)
    vv = v.values
    quad_kernel = np.einsum("ia,iajb,jb->", vv, blocks, vv) / n**2
    gg = obj.grad_grad_all(ens)
    quad_local = np.einsum("ia,iab,ib->", vv, gg, vv) / n
    return float(quad_kernel + quad_local)


def fd_second_order_check(obj, ens: ParticleEnsemble, v: StackedField, h_grid=DEFAULT_H_GRID) -> FDReport:
    """Verify cubic decay of the second-order Taylor residual along v."""
    h_grid = tuple(h_grid)
    if len(h_grid) < 4:
        raise ContractViolationError("h_grid needs at least 4 descending points")
    if any(h_grid[i] <= h_grid[i + 1] for i in range(len(h_grid) - 1)):
        raise ContractViolationError("h_grid must be strictly descending")
    f0 = obj.value(ens)
    slope_term = l2_inner(obj.gradient(ens), v)
    quad_term = second_order_form(obj, ens, v)
    residuals = []
    for h in h_grid:
        fh = obj.value(pushforward(ens, v, h))
        residuals.append(abs(fh - f0 - h * slope_term - 0.5 * h * h * quad_term))
    residuals = tuple(residuals)
    if max(residuals) <= EXACT_RESIDUAL:
        return FDReport(obj.name, "second_order", h_grid, residuals, None, True, "exact")
    logs = np.log(np.maximum(residuals, 1e-300))
    slope = float(np.polyfit(np.log(h_grid), logs, 1)[0])
    return FDReport(obj.name, "second_order", h_grid, residuals, slope, slope >= SLOPE_THRESHOLD)


def fd_hessian_kernel_check(
    obj, ens: ParticleEnsemble, i: int, j: int, h: float = DEFAULT_H
) -> FDReport:
    """Check kernel block (i, j) against the gradient's displacement response."""
    if h <= 0:
        raise ContractViolationError("h must be > 0")
    n, d = ens.n, ens.d
    if not (0 <= i < n and 0 <= j < n):
        raise ContractViolationError("particle index out of range")
    base = ens.positions
    response = np.empty((d, d))
    for a in range(d):
        bump = np.zeros((n, d))
        bump[j, a] = h
        g_plus = obj.gradient(ParticleEnsemble(base + bump)).values[i]
        g_minus = obj.gradient(ParticleEnsemble(base - bump)).values[i]
        response[:, a] = (g_plus - g_minus) / (2.0 * h)
    expected = obj.hessian_block(ens, i, j) / n
    if i == j:
        expected = expected + obj.grad_grad(ens, i)
    err = np.abs(response - expected) - 1e-3 * np.abs(expected)
    worst = float(np.max(err))
    return FDReport(
        objective=obj.name,
        kind=f"hessian_kernel[{i},{j}]",
        steps=(h,),
        errors=(float(np.max(np.abs(response - expected))),),
        slope=None,
        passed=worst <= 1e-3,
    )


def estimate_gradient_lipschitz(obj, ens: ParticleEnsemble, rng, n_samples: int = 20,
                                radius: float = 1e-3) -> float:
    """Local estimate of the gradient Lipschitz constant near an ensemble.

    Samples random small displacements and returns the largest observed ratio
    ||grad(mu') - grad(mu)|| / ||displacement|| in L^2(mu).  Intended for
    step-size guidance (eta <= 1/L1), not as a global certificate.
    """
    g0 = obj.gradient(ens).values
    worst = 0.0
    for _ in range(n_samples):
        direction = rng.standard_normal((ens.n, ens.d))
        direction *= radius / max(np.sqrt(np.mean(np.sum(direction**2, axis=1))), 1e-300)
        moved = ParticleEnsemble(ens.positions + direction)
        g1 = obj.gradient(moved).values
        num = np.sqrt(np.mean(np.sum((g1 - g0) ** 2, axis=1)))
        den = np.sqrt(np.mean(np.sum(direction**2, axis=1)))
        worst = max(worst, num / den)
    return worst


def run_fd_suite(objectives, make_ensemble, seeds=(0, 1, 2, 3, 4)) -> list[FDReport]:
    """All three checks for each (objective, seed); used by harness verify."""
    reports = []
    for obj in objectives:
        for seed in seeds:
            rng = np.random.default_rng(np.random.SeedSequence((seed, 101)))
            ens = make_ensemble(obj, rng)
            v_raw = rng.standard_normal((ens.n, ens.d))
            v_raw /= np.sqrt(np.mean(np.sum(v_raw**2, axis=1)))
            v = StackedField(v_raw)
            reports.append(fd_gradient_check(obj, ens, v))
            if obj.has_hessian:
                reports.append(fd_second_order_check(obj, ens, v))
                i, j = (0, ens.n - 1) if ens.n > 1 else (0, 0)
                reports.append(fd_hessian_kernel_check(obj, ens, i, j))
                reports.append(fd_hessian_kernel_check(obj, ens, 0, 0))
    return reports
