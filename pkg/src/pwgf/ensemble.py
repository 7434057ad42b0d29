"""Empirical measures as uniformly weighted particle sets.

A probability measure is represented by N particles in R^d with implicit
weights 1/N.  Velocity fields living in L^2(mu)^d are sampled at the particle
positions and stored as a ``StackedField`` positionally paired with the
ensemble.  Both types are immutable: every operation returns a new value.

The normative flat layout for operator algebra is particle-major: the
stacked Nd-vector lists all d coordinates of particle 0, then particle 1,
and so on (row-major reshape of the (N, d) array).
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import ContractViolationError


def _validated(values, kind: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 2:
        raise ContractViolationError(f"{kind} must be a (N, d) array, got shape {arr.shape}")
    n, d = arr.shape
    if n < 1 or d < 1:
        raise ContractViolationError(f"{kind} needs N >= 1 and d >= 1, got N={n}, d={d}")
    if not np.isfinite(arr).all():
        raise ContractViolationError(f"{kind} contains non-finite entries")
    arr.flags.writeable = False
    return arr


class ParticleEnsemble:
    """N particles in R^d standing for mu = (1/N) sum_j delta_{x_j}."""

    __slots__ = ("positions",)

    def __init__(self, positions):
        object.__setattr__(self, "positions", _validated(positions, "positions"))

    def __setattr__(self, name, value):
        raise AttributeError("ParticleEnsemble is immutable")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    def stacked(self) -> np.ndarray:
        """Particle-major flat copy of shape (N*d,)."""
        return self.positions.reshape(-1).copy()

    def __repr__(self):
        return f"ParticleEnsemble(n={self.n}, d={self.d})"


class StackedField:
    """A vector field sampled at the particle positions of a paired ensemble."""

    __slots__ = ("values",)

    def __init__(self, values):
        object.__setattr__(self, "values", _validated(values, "field values"))

    def __setattr__(self, name, value):
        raise AttributeError("StackedField is immutable")

    @classmethod
    def from_stacked(cls, flat, n: int, d: int) -> "StackedField":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (n * d,):
            raise ContractViolationError(f"stacked vector must have shape ({n * d},), got {flat.shape}")
        return cls(flat.reshape(n, d))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def stacked(self) -> np.ndarray:
        return self.values.reshape(-1).copy()

    def __repr__(self):
        return f"StackedField(n={self.n}, d={self.d})"


def _check_paired(ens: ParticleEnsemble, field: StackedField) -> None:
    if (ens.n, ens.d) != (field.n, field.d):
        raise ContractViolationError(
            f"field shape ({field.n}, {field.d}) does not match ensemble ({ens.n}, {ens.d})"
        )


def pushforward(ens: ParticleEnsemble, field: StackedField, step: float) -> ParticleEnsemble:
    """Displace every particle by step * field, i.e. (Id + step * v) # mu."""
    _check_paired(ens, field)
    step = float(step)
    if not np.isfinite(step):
        raise ContractViolationError("step must be finite")
    return ParticleEnsemble(ens.positions + step * field.values)


def l2_norm(field: StackedField) -> float:
    """Norm in L^2(mu)^d: sqrt((1/N) sum_j ||v_j||^2)."""
    return float(np.sqrt(np.mean(np.sum(field.values**2, axis=1))))


def l2_inner(a: StackedField, b: StackedField) -> float:
    """Inner product in L^2(mu)^d: (1/N) sum_j a_j . b_j."""
    if (a.n, a.d) != (b.n, b.d):
        raise ContractViolationError(f"field shapes ({a.n}, {a.d}) and ({b.n}, {b.d}) differ")
    return float(np.mean(np.sum(a.values * b.values, axis=1)))


def zero_field(n: int, d: int) -> StackedField:
    return StackedField(np.zeros((n, d)))


# --- CSV serialization -----------------------------------------------------
#
# Schema: header `particle,coord_0,...,coord_{d-1}`, one row per particle.
# Floats are written with repr() so a write/read round trip is bit exact.


def ensemble_to_csv(ens: ParticleEnsemble) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["particle"] + [f"coord_{c}" for c in range(ens.d)])
    for j in range(ens.n):
        writer.writerow([j] + [repr(float(v)) for v in ens.positions[j]])
    return buf.getvalue()


def save_ensemble_csv(ens: ParticleEnsemble, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(ensemble_to_csv(ens))


def load_ensemble_csv(path) -> ParticleEnsemble:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ContractViolationError(f"{path}: empty ensemble file")
    header = rows[0]
    if len(header) < 2 or header[0] != "particle" or header[1] != "coord_0":
        raise ContractViolationError(f"{path}: not an ensemble CSV (header {header!r})")
    positions = [[float(v) for v in row[1:]] for row in rows[1:] if row]
    return ParticleEnsemble(positions)
