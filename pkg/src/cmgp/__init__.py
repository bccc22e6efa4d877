"""Programmatic policies evolved against improved actions from TD3 critics."""
from .kernels import BACKEND
from .program import evaluate, evaluate_population, random_genomes

__version__ = "0.1.0"

__all__ = ["BACKEND", "evaluate", "evaluate_population", "random_genomes", "__version__"]
