"""Cellular genetic algorithm on a toroidal grid, with selective-pressure measurements."""

from .engine import EngineConfig, Population, RunRecord, init_population, run, step
from .grid import CellCoord, GridShape, von_neumann
from .qap import QapInstance, brute_force_optimum, evaluate, load_qaplib, parse_qaplib
from .selection import Anisotropic, BinaryTournament, StochasticTournament, anisotropic_probabilities

__all__ = [
    "Anisotropic",
    "BinaryTournament",
    "CellCoord",
    "EngineConfig",
    "GridShape",
    "Population",
    "QapInstance",
    "RunRecord",
    "StochasticTournament",
    "anisotropic_probabilities",
    "brute_force_optimum",
    "evaluate",
    "init_population",
    "load_qaplib",
    "parse_qaplib",
    "run",
    "step",
    "von_neumann",
]

__version__ = "0.1.0"
