"""Orthogonal projection of feature vectors onto the plane through three anchors."""
import numpy as np

from .errors import DimensionError, InvalidInputError


def plane_basis(anchors, rtol=1e-10):
    """Origin and orthonormal 2 x dim basis of the plane through ``anchors``.

    The first axis points from anchor 0 to anchor 1; the second is the
    Gram-Schmidt complement of anchor 2.
    """
    A = np.asarray(anchors, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != 3:
        raise DimensionError(f"need exactly 3 anchor vectors, got shape {A.shape}")
    origin = A[0]
    u = A[1] - origin
    v = A[2] - origin
    scale = max(np.linalg.norm(u), np.linalg.norm(v))
    if scale == 0 or np.linalg.norm(u) <= rtol * scale:
        raise InvalidInputError("anchors are not affinely independent")
    e1 = u / np.linalg.norm(u)
    v = v - (v @ e1) * e1
    if np.linalg.norm(v) <= rtol * scale:
        raise InvalidInputError("anchors are collinear")
    e2 = v / np.linalg.norm(v)
    return origin, np.vstack([e1, e2])


def project(points, anchors):
    """Plane coordinates of each row of ``points``."""
    origin, basis = plane_basis(anchors)
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if P.shape[1] != basis.shape[1]:
        raise DimensionError(
            f"points have dimension {P.shape[1]}, anchors {basis.shape[1]}")
    return (P - origin) @ basis.T


def lift(coords, anchors):
    """Map plane coordinates back into feature space."""
    origin, basis = plane_basis(anchors)
    return origin + np.atleast_2d(coords) @ basis
