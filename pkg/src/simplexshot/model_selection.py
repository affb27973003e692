"""Elbow selection of the number of vertices per image."""
from dataclasses import dataclass, field

import numpy as np

from ._seeding import derive_seed
from .errors import InvalidInputError
from .solver import SolverConfig, as_features, solve


@dataclass(frozen=True)
class SelectionConfig:
    """Settings of :func:`select_k`.

    ``zero_rtol`` decides when a reconstruction error counts as exactly
    zero: errors at or below ``zero_rtol * ||X||_F^2`` are treated as 0 so
    that floating-point dust on noise-free data cannot fake an elbow.
    """

    k_max: int = 3
    ratio_threshold: float = 1.5
    restarts_per_k: int = 3
    solver: SolverConfig = field(default_factory=SolverConfig)
    zero_rtol: float = 1e-10

    def __post_init__(self):
        if self.k_max < 1:
            raise InvalidInputError(f"k_max must be >= 1, got {self.k_max}")
        if not self.ratio_threshold > 1:
            raise InvalidInputError(f"ratio_threshold must be > 1, got {self.ratio_threshold}")
        if self.restarts_per_k < 1:
            raise InvalidInputError(f"restarts_per_k must be >= 1, got {self.restarts_per_k}")
        if self.zero_rtol < 0:
            raise InvalidInputError("zero_rtol must be non-negative")

    def with_lambda(self, lam):
        return SelectionConfig(self.k_max, self.ratio_threshold, self.restarts_per_k,
                               self.solver.replace(lam=lam), self.zero_rtol)

    def with_seed(self, seed):
        return SelectionConfig(self.k_max, self.ratio_threshold, self.restarts_per_k,
                               self.solver.replace(seed=seed), self.zero_rtol)


@dataclass(frozen=True)
class SelectionResult:
    chosen_k: int
    errors: tuple
    models: tuple

    @property
    def model(self):
        return self.models[self.chosen_k - 1]


def elbow_walk(errors, ratio_threshold=1.5, zero_tol=0.0):
    """Number of vertices retained by the ratio rule.

    Starting from k = 1, move to k + 1 while ``errors[k-1] / errors[k]``
    reaches ``ratio_threshold``; stop at the first rejection.  Errors at
    or below ``zero_tol`` count as zero: a drop to zero is accepted, and a
    zero current error is never improved on.

    >>> elbow_walk([10.0, 2.0, 1.9])
    2
    >>> elbow_walk([1.0, 0.9, 0.85])
    1
    """
    if len(errors) == 0:
        raise InvalidInputError("need at least one error value")
    k = 1
    for current, nxt in zip(errors, errors[1:]):
        current = 0.0 if current <= zero_tol else current
        nxt = 0.0 if nxt <= zero_tol else nxt
        if current == 0.0:
            break
        if nxt == 0.0 or current / nxt >= ratio_threshold:
            k += 1
        else:
            break
    return k


def restart_seed(root, k, restart):
    return derive_seed(root, k, restart)


def best_of_restarts(X, k, solver_config, restarts):
    """Lowest-reconstruction-error model over ``restarts`` seeded solves.

    Restart ``r`` always uses the same derived seed, so the candidate sets
    for increasing ``restarts`` are nested.
    """
    best = None
    for r in range(restarts):
        cfg = solver_config.replace(seed=restart_seed(solver_config.seed, k, r))
        model = solve(X, k, cfg)
        if best is None or model.recon_error < best.recon_error:
            best = model
    return best


def select_k(X, config=None):
    """Pick the number of vertices of ``X`` by the elbow rule."""
    config = config or SelectionConfig()
    X = as_features(X)
    if X.shape[0] < config.k_max:
        raise InvalidInputError(
            f"need at least k_max={config.k_max} crops, got {X.shape[0]}")
    models = tuple(best_of_restarts(X, k, config.solver, config.restarts_per_k)
                   for k in range(1, config.k_max + 1))
    errors = tuple(m.recon_error for m in models)
    zero_tol = config.zero_rtol * float(np.einsum("ij,ij->", X, X))
    chosen = elbow_walk(errors, config.ratio_threshold, zero_tol)
    return SelectionResult(chosen, errors, models)
