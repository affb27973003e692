"""Regularized simplex fitting for a fixed number of vertices.

The problem solved is::

    min_{D, W}  lam * sum_{k<k'} ||D_k - D_k'||^2  +  (1 - lam) * ||W D - X||_F^2
    s.t.        W >= 0,  W 1 = 1

with vertices stored as the rows of ``D`` (K x dim) and barycentric weights
as the rows of ``W`` (N x K).  Minimization alternates an exact linear
solve for ``D`` with backtracking gradient descent on logits ``V`` where
``W = softmax_rows(V)``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import _backend
from .errors import DimensionError, InvalidInputError, SolverError

# Condition number above which the d-step system is treated as singular.
_COND_LIMIT = 1e12
_MAX_HALVINGS = 20
# Extrapolation weight schedule: grow on success, shrink on rejection.
_BETA_START = 0.5
_BETA_GROW = 1.1
_BETA_SHRINK = 1.5
_BETA_MAX = 0.99


@dataclass(frozen=True)
class SolverConfig:
    """Hyper-parameters of :func:`solve`.

    ``lam`` weighs the pairwise vertex penalty against the reconstruction
    term; everything else controls the optimizer.
    """

    lam: float = 0.05
    outer_iters: int = 50
    w_steps_per_outer: int = 20
    learning_rate: float = 0.1
    objective_rel_tol: float = 1e-6
    ridge_eps: float = 1e-8
    seed: int = 0
    extrapolation: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError(f"lam must lie in [0, 1], got {self.lam}")
        if self.outer_iters < 1 or self.w_steps_per_outer < 1:
            raise InvalidInputError("iteration counts must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidInputError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.objective_rel_tol < 0 or self.ridge_eps < 0:
            raise InvalidInputError("tolerances must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes):
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SolverConfig(**values)


@dataclass(frozen=True)
class SimplexModel:
    """Result of one :func:`solve` call; arrays are read-only."""

    vertices: np.ndarray
    weights: np.ndarray
    logits: np.ndarray
    k: int
    final_objective: float
    recon_error: float
    initial_objective: float
    objective_trace: tuple = field(default_factory=tuple)
    converged: bool = False
    lam: float = 0.05

    @property
    def n_iter(self):
        return len(self.objective_trace)


def as_features(X):
    """Validate and convert a feature matrix to float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidInputError(f"feature matrix must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("feature matrix contains non-finite entries")
    return np.ascontiguousarray(X)


def _check_finite(name, A):
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")


def _conform(D, W, X):
    D = np.ascontiguousarray(D, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if D.ndim != 2 or W.ndim != 2 or X.ndim != 2:
        raise DimensionError("D, W and X must all be 2-D")
    if W.shape[0] != X.shape[0] or W.shape[1] != D.shape[0] or D.shape[1] != X.shape[1]:
        raise DimensionError(
            f"shapes do not conform: W {W.shape}, D {D.shape}, X {X.shape}")
    return D, W, X


def softmax_rows(V):
    """Row-wise softmax, shifted by the row maximum so large logits stay finite.

    >>> softmax_rows(np.array([[0.0, np.log(2.0)]])).round(6)
    array([[0.333333, 0.666667]])
    """
    V = np.ascontiguousarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise DimensionError(f"logits must be 2-D, got shape {V.shape}")
    _check_finite("logits", V)
    return _backend.kernels.softmax_rows(V)


def pairwise_vertex_penalty(D):
    """Sum of squared Euclidean distances over all unordered vertex pairs."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2:
        raise DimensionError(f"vertex matrix must be 2-D, got shape {D.shape}")
    _check_finite("vertices", D)
    if D.shape[0] < 2:
        return 0.0
    return float(pdist(D, "sqeuclidean").sum())


def reconstruction_error(D, W, X):
    """Squared Frobenius norm of ``W @ D - X``."""
    D, W, X = _conform(D, W, X)
    return float(_backend.kernels.recon_error(W, D, X))


def objective(D, W, X, lam):
    D, W, X = _conform(D, W, X)
    return lam * pairwise_vertex_penalty(D) + (1.0 - lam) * reconstruction_error(D, W, X)


def laplacian(k):
    """``k I - 1 1^T``, the quadratic form behind the pairwise penalty."""
    return k * np.eye(k) - np.ones((k, k))


def d_step(W, X, lam, ridge_eps=1e-8):
    """Exact minimizer of the objective over the vertices for fixed weights.

    Solves ``((1-lam) W^T W + lam L) D = (1-lam) W^T X``.  When that system
    is numerically singular (duplicated weight columns, ``lam = 1``, ...)
    ``ridge_eps * I`` is added and the solve retried once.

    Raises
    ------
    SolverError
        If the system stays singular after the ridge is added.
    """
    W = np.ascontiguousarray(W, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if W.ndim != 2 or X.ndim != 2 or W.shape[0] != X.shape[0]:
        raise DimensionError(f"shapes do not conform: W {W.shape}, X {X.shape}")
    k = W.shape[1]
    A = (1.0 - lam) * (W.T @ W) + lam * laplacian(k)
    B = (1.0 - lam) * (W.T @ X)
    cond = np.linalg.cond(A)
    if np.isfinite(cond) and cond < _COND_LIMIT:
        return np.linalg.solve(A, B)
    A_ridge = A + ridge_eps * np.eye(k)
    cond_ridge = np.linalg.cond(A_ridge)
    if not (np.isfinite(cond_ridge) and cond_ridge < 1.0 / np.finfo(float).eps):
        raise SolverError(
            "d-step system is singular even with ridge",
            cond=cond, cond_ridge=cond_ridge, ridge_eps=ridge_eps)
    D = np.linalg.solve(A_ridge, B)
    if not np.all(np.isfinite(D)):
        raise SolverError("d-step produced non-finite vertices",
                          cond=cond, cond_ridge=cond_ridge)
    return D


def v_gradient(V, D, X, lam):
    """Analytic gradient of the objective with respect to the logits."""
    V = np.ascontiguousarray(V, dtype=np.float64)
    D, _, X = _conform(D, np.empty((V.shape[0], V.shape[1])), X)
    _, _, grad = _backend.kernels.vgrad(V, D, X, 1.0 - lam)
    return grad


def w_step(V, D, X, lam, lr, steps):
    """``steps`` backtracking gradient-descent updates of the logits.

    Each update starts from step size ``lr`` and halves it (at most 20
    times) until the reconstruction term does not increase; an update that
    never qualifies is skipped, which ends the loop.
    """
    V = np.ascontiguousarray(V, dtype=np.float64)
    D, _, X = _conform(D, np.empty((V.shape[0], V.shape[1])), X)
    if not lr > 0 or steps < 1:
        raise InvalidInputError("lr must be > 0 and steps >= 1")
    V_new, _, _, status = _backend.kernels.w_descent(
        V, D, X, 1.0 - lam, float(lr), int(steps), _MAX_HALVINGS)
    if status != 0:
        raise SolverError("non-finite logit gradient", lam=lam, lr=lr)
    return V_new


def init_model(X, k, seed):
    """Initial vertices (``k`` distinct rows of X) and standard-normal logits."""
    X = as_features(X)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise InvalidInputError(f"need 1 <= k <= N, got k={k}, N={n}")
    rng = np.random.default_rng(int(seed))
    rows = rng.choice(n, size=k, replace=False)
    D = X[rows].copy()
    V = rng.standard_normal((n, k))
    return D, V


def _freeze(A):
    A = np.array(A, dtype=np.float64, copy=True)
    A.setflags(write=False)
    return A


def solve(X, k, config=None, *, init=None):
    """Fit a ``k``-vertex simplex to the rows of ``X``.

    Parameters
    ----------
    X : array_like, shape (N, dim)
        Crop feature vectors of one image.
    k : int
        Number of vertices, ``1 <= k <= N``.
    config : SolverConfig, optional
    init : tuple of (D0, V0), optional
        Explicit starting point; by default drawn by :func:`init_model`
        from ``config.seed``.

    Returns
    -------
    SimplexModel
        The objective trace has one entry per outer round and never
        increases.  A d-step whose (ridged) solution would raise the
        objective is rejected, so the guarantee survives the ridge path.

    Notes
    -----
    With ``config.extrapolation`` each round ends by trying the point
    ``(D, V) + beta * ((D, V) - previous round)``; it is kept only when it
    lowers the objective.  Once the data is reconstructed, the remaining
    progress comes from the weak dispersion penalty and plain alternation
    crawls; the extrapolated step follows that drift many times faster.
    """
    config = config or SolverConfig()
    X = as_features(X)
    if not 1 <= k <= X.shape[0]:
        raise InvalidInputError(f"need 1 <= k <= N, got k={k}, N={X.shape[0]}")
    if init is None:
        D, V = init_model(X, k, config.seed)
    else:
        D = np.array(init[0], dtype=np.float64)
        V = np.array(init[1], dtype=np.float64)
        if D.shape != (k, X.shape[1]) or V.shape != (X.shape[0], k):
            raise DimensionError(
                f"init shapes {D.shape}, {V.shape} do not match k={k}, X {X.shape}")
    lam = config.lam

    W = softmax_rows(V)
    current = objective(D, W, X, lam)
    initial = current
    trace = []
    converged = False
    beta = _BETA_START
    D_prev, V_prev = D, V
    if k == 1:
        # every weight is 1, so the objective is (1 - lam) * recon: the crop
        # mean is the minimizer, and at lam = 1 it is chosen among equals
        D = X.mean(axis=0, keepdims=True)
        current = objective(D, W, X, lam)
        trace.append(current)
        converged = True
    for _ in range(config.outer_iters if k > 1 else 0):
        D_new = d_step(W, X, lam, config.ridge_eps)
        if objective(D_new, W, X, lam) <= current:
            D = D_new
        V = w_step(V, D, X, lam, config.learning_rate, config.w_steps_per_outer)
        W = softmax_rows(V)
        value = objective(D, W, X, lam)
        if config.extrapolation:
            D_ex = D + beta * (D - D_prev)
            V_ex = V + beta * (V - V_prev)
            W_ex = softmax_rows(V_ex)
            value_ex = objective(D_ex, W_ex, X, lam)
            D_prev, V_prev = D, V
            if value_ex < value:
                D, V, W, value = D_ex, V_ex, W_ex, value_ex
                beta = min(_BETA_MAX, beta * _BETA_GROW)
            else:
                beta /= _BETA_SHRINK
        trace.append(value)
        previous, current = current, value
        if previous - value <= config.objective_rel_tol * abs(previous):
            converged = True
            break

    return SimplexModel(
        vertices=_freeze(D),
        weights=_freeze(W),
        logits=_freeze(V),
        k=k,
        final_objective=current,
        recon_error=reconstruction_error(D, W, X),
        initial_objective=initial,
        objective_trace=tuple(trace),
        converged=converged,
        lam=lam,
    )
