"""Low-rank regularizing Krylov solvers for ill-posed imaging problems."""

from . import cli, krylov, linops, lowrank, nnr, problems
from .linops import LinearOperator, unvec, vec
from .lowrank import Reweighter, SvdTriple
from .nnr import NnrConfig
from .report import Discrepancy, SolveReport

__all__ = [
    "cli",
    "krylov",
    "linops",
    "lowrank",
    "nnr",
    "problems",
    "LinearOperator",
    "vec",
    "unvec",
    "SvdTriple",
    "Reweighter",
    "NnrConfig",
    "SolveReport",
    "Discrepancy",
]
