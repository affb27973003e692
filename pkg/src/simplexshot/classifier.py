"""Vertex shrinkage and nearest-vertex 1-shot classification."""
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionError, InvalidInputError
from .model_selection import SelectionConfig, select_k
from .solver import as_features

DEFAULT_ALPHA = 0.75


@dataclass(frozen=True)
class ImageRepresentation:
    image_id: str
    shrunk_vertices: np.ndarray
    crop_mean: np.ndarray
    chosen_k: int


@dataclass(frozen=True)
class ClassificationResult:
    predicted_label: object
    best_distance: float
    query_vertex: int
    support_index: int
    support_id: str
    support_vertex: int


def shrink_vertices(vertices, crop_mean, alpha=DEFAULT_ALPHA):
    """Pull every vertex toward the mean crop: ``alpha * v + (1 - alpha) * mean``."""
    vertices = np.asarray(vertices, dtype=np.float64)
    crop_mean = np.asarray(crop_mean, dtype=np.float64)
    if vertices.ndim != 2 or crop_mean.shape != (vertices.shape[1],):
        raise DimensionError(
            f"vertices {vertices.shape} and mean {crop_mean.shape} do not conform")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 1.0:
        return vertices.copy()
    return alpha * vertices + (1.0 - alpha) * crop_mean


def represent(image_id, X, selection=None, alpha=DEFAULT_ALPHA):
    """Extract, select and shrink the vertices of one image."""
    X = as_features(X)
    result = select_k(X, selection or SelectionConfig())
    mean = X.mean(axis=0)
    shrunk = shrink_vertices(result.model.vertices, mean, alpha)
    return ImageRepresentation(image_id, shrunk, mean, result.chosen_k)


def stack_vertices(reps):
    """Row-stack the vertices of ``reps`` and return ``(rows, offsets)``."""
    offsets = np.zeros(len(reps) + 1, dtype=np.intp)
    for i, rep in enumerate(reps):
        offsets[i + 1] = offsets[i] + rep.shrunk_vertices.shape[0]
    rows = np.vstack([rep.shrunk_vertices for rep in reps]) if reps else np.empty((0, 0))
    return np.ascontiguousarray(rows, dtype=np.float64), offsets


def _owner(offsets, row):
    """Index of the block containing ``row``."""
    return int(np.searchsorted(offsets, row, side="right") - 1)


def nearest_supports(queries, support_rows, support_offsets):
    """Batch form of :func:`classify` used by the evaluation harness.

    Returns, per query representation, ``(support_index, distance)``.
    """
    q_rows, q_offsets = stack_vertices(queries)
    if q_rows.shape[1] != support_rows.shape[1]:
        raise DimensionError("query and support vertices differ in dimension")
    best, best_s, _ = _backend.kernels.pair_argmin(q_rows, q_offsets, support_rows)
    owners = np.searchsorted(support_offsets, best_s, side="right") - 1
    return owners, np.sqrt(best)


def classify(query, supports):
    """Label of the support image owning the vertex closest to a query vertex.

    Parameters
    ----------
    query : ImageRepresentation
    supports : list of (ImageRepresentation, label)

    Ties go to the lowest support index, then the lowest support vertex,
    then the lowest query vertex.
    """
    if not supports:
        raise InvalidInputError("need at least one support image")
    reps = [rep for rep, _ in supports]
    s_rows, s_offsets = stack_vertices(reps)
    q_rows = np.ascontiguousarray(query.shrunk_vertices, dtype=np.float64)
    if q_rows.ndim != 2 or q_rows.shape[1] != s_rows.shape[1]:
        raise DimensionError("query and support vertices differ in dimension")
    best, best_s, best_q = _backend.kernels.pair_argmin(
        q_rows, np.array([0, q_rows.shape[0]], dtype=np.intp), s_rows)
    row = int(best_s[0])
    owner = _owner(s_offsets, row)
    return ClassificationResult(
        predicted_label=supports[owner][1],
        best_distance=float(np.sqrt(best[0])),
        query_vertex=int(best_q[0]),
        support_index=owner,
        support_id=reps[owner].image_id,
        support_vertex=row - int(s_offsets[owner]),
    )
