"""Pure numpy implementations of the hot kernels.

Signatures and semantics mirror the compiled ``_kernels_c`` module exactly;
``simplexshot._backend`` picks one of the two at import time.  All inputs
are expected as C-contiguous float64 arrays (the public wrappers in
``solver`` and ``classifier`` take care of the conversion).
"""
import numpy as np

NAME = "python"


def softmax_rows(V):
    shifted = V - V.max(axis=1, keepdims=True)
    E = np.exp(shifted)
    return E / E.sum(axis=1, keepdims=True)


def recon_error(W, D, X):
    R = W @ D - X
    return float(np.einsum("ij,ij->", R, R))


def vgrad(V, D, X, coef):
    """Weights, squared residual and V-gradient of ``coef * ||softmax(V) D - X||^2``."""
    W = softmax_rows(V)
    R = W @ D - X
    err = float(np.einsum("ij,ij->", R, R))
    G = (2.0 * coef) * (R @ D.T)
    inner = np.einsum("ik,ik->i", G, W)
    grad = W * (G - inner[:, None])
    return W, err, grad


def gram_terms(D, X):
    """Centered Gram quantities for the residual ``||w D - x||^2``.

    With rows of W summing to one, centering D and X on the data mean
    leaves every residual unchanged and keeps the expansion
    ``w M w - 2 w p + x2`` well conditioned.
    """
    c = X.mean(axis=0)
    Dc = D - c
    Xc = X - c
    return Dc @ Dc.T, Xc @ Dc.T, np.einsum("ij,ij->i", Xc, Xc)


def _gram_rows(W, M, P, x2):
    return np.einsum("ik,kl,il->i", W, M, W) - 2.0 * np.einsum("ik,ik->i", W, P) + x2


def w_descent(V, D, X, coef, lr, steps, max_halvings):
    """Backtracking gradient descent on the logits.

    The residual is evaluated through :func:`gram_terms`, so each step
    costs O(N K^2) regardless of the feature dimension.  Returns
    ``(V_new, accepted, err, status)``; ``status`` is -1 when a non-finite
    gradient was met (``V_new`` then holds the last finite iterate).
    """
    V = np.array(V, dtype=np.float64, copy=True)
    M, P, x2 = gram_terms(D, X)
    W = softmax_rows(V)
    err = float(_gram_rows(W, M, P, x2).sum())
    accepted = 0
    if coef == 0.0:
        return V, accepted, err, 0
    for _ in range(steps):
        G = (2.0 * coef) * (W @ M - P)
        inner = np.einsum("ik,ik->i", G, W)
        grad = W * (G - inner[:, None])
        if not np.all(np.isfinite(grad)):
            return V, accepted, err, -1
        if not grad.any():
            break
        step = lr
        moved = False
        for _ in range(max_halvings + 1):
            trial = V - step * grad
            W_trial = softmax_rows(trial)
            trial_err = float(_gram_rows(W_trial, M, P, x2).sum())
            if trial_err <= err:
                V, W, err = trial, W_trial, trial_err
                moved = True
                accepted += 1
                break
            step *= 0.5
        if not moved:
            # the next iteration would retry the identical step
            break
    return V, accepted, err, 0


def pair_argmin(Q, q_offsets, S):
    """Closest support row for each block of query rows.

    Query block ``b`` is ``Q[q_offsets[b]:q_offsets[b+1]]``.  For each block
    returns the minimal squared distance, the support row and the (global)
    query row attaining it.  Ties resolve to the lowest support row, then
    the lowest query row.
    """
    nb = len(q_offsets) - 1
    best = np.empty(nb)
    best_s = np.empty(nb, dtype=np.intp)
    best_q = np.empty(nb, dtype=np.intp)
    for b in range(nb):
        lo, hi = q_offsets[b], q_offsets[b + 1]
        diff = S[:, None, :] - Q[None, lo:hi, :]
        d2 = np.einsum("sqj,sqj->sq", diff, diff)
        flat = int(np.argmin(d2))
        s, q = divmod(flat, hi - lo)
        best[b] = d2[s, q]
        best_s[b] = s
        best_q[b] = lo + q
    return best, best_s, best_q
