"""Particle-based perturbed Wasserstein gradient descent.

Wasserstein gradient descent over empirical measures with Hessian-guided
Gaussian-process perturbations for escaping saddle points, saddle
classification through the discrete Wasserstein Hessian spectrum, and a
benchmark harness comparing static / isotropic / Hessian-guided runs.
"""

from .driver import ConstantsConfig, Mode, PWGFConfig, RunStatus, RunTrace, default_hyperparameters, descent_audit, run, wgd_step
from .ensemble import ParticleEnsemble, StackedField, l2_inner, l2_norm, pushforward
from .errors import CapabilityError, ConfigError, ContractViolationError, NumericalDegeneracyError, PWGFError
from .hessian_op import Classification, HessianOperator, Spectrum, apply, assemble, classify, min_eigenvalue, spectrum
from .objectives import CoulombMMD, Dataset, ICFL, LinearPotential, MatrixDecomposition, MeanQuartic

__version__ = "0.1.0"
