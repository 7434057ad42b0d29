from .base import Objective
from .coulomb import CoulombMMD
from .dataset import Dataset, sigmoid, sigmoid_d1, sigmoid_d2
from .icfl import ICFL
from .matdecomp import MatrixDecomposition
from .simple import LinearPotential, MeanQuartic

__all__ = [
    "Objective",
    "Dataset",
    "LinearPotential",
    "MeanQuartic",
    "MatrixDecomposition",
    "ICFL",
    "CoulombMMD",
    "sigmoid",
    "sigmoid_d1",
    "sigmoid_d2",
]
