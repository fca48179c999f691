"""Per-run metric collection shared by every solver."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolveReport", "Discrepancy"]


@dataclass(frozen=True)
class Discrepancy:
    """Discrepancy-principle stopping rule: stop once the (projected)
    residual norm falls to theta * epsilon."""

    epsilon: float
    theta: float = 1.01

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.theta <= 1:
            raise ValueError("theta must be > 1")

    def satisfied(self, residual):
        return residual <= self.theta * self.epsilon


@dataclass
class SolveReport:
    """Iteration history of one solver run.

    Residuals are the projected values (which coincide with the true
    residual norms for every method in this package); relative errors are
    NaN when no exact solution was supplied.
    """

    solver: str = ""
    iterations: list = field(default_factory=list)
    outer_indices: list = field(default_factory=list)
    rel_errors: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    spectra: list = field(default_factory=list)  # (outer index, sigma/sigma_1)
    final_x: np.ndarray | None = None
    best_x: np.ndarray | None = None
    stop_reason: str = "max_iter"

    def record(self, iteration, outer, x, residual, lam, x_exact=None):
        self.iterations.append(iteration)
        self.outer_indices.append(outer)
        self.residuals.append(float(residual))
        self.lambdas.append(float(lam))
        if x_exact is not None:
            err = np.linalg.norm(x_exact - x) / np.linalg.norm(x_exact)
        else:
            err = np.nan
        self.rel_errors.append(float(err))
        self.final_x = x
        if x_exact is not None and err == np.nanmin(self.rel_errors):
            self.best_x = x
        if self.best_x is None:
            self.best_x = x

    def add_spectrum(self, outer, sigma):
        sigma = np.asarray(sigma, dtype=float)
        top = sigma[0] if sigma.size and sigma[0] > 0 else 1.0
        self.spectra.append((outer, sigma / top))

    @property
    def best(self):
        """(iteration, relative error) of the minimum recorded error."""
        if not self.rel_errors or np.all(np.isnan(self.rel_errors)):
            return (self.iterations[-1] if self.iterations else 0, np.nan)
        idx = int(np.nanargmin(self.rel_errors))
        return (self.iterations[idx], self.rel_errors[idx])

    @property
    def min_rel_error(self):
        return self.best[1]
