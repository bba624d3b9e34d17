"""Shared numerical building blocks.

Water-filling power allocation, Euclidean projections onto the
simplex and the trace-bounded PSD cone, and guarded matrix
factorizations used by the channel construction.
"""

from __future__ import annotations

import numpy as np


class FactorizationError(RuntimeError):
    """A matrix expected to be positive (semi)definite failed to factor."""


def hermitize(matrix: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Return the Hermitian part of a nearly Hermitian matrix.

    Raises ValueError if the anti-Hermitian part exceeds ``tol``
    relative to the matrix norm, which would indicate a bug upstream
    rather than roundoff.
    """
    a = np.asarray(matrix)
    sym = 0.5 * (a + a.conj().T)
    scale = max(float(np.linalg.norm(a)), 1e-300)
    if float(np.linalg.norm(a - sym)) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return sym


def cholesky_psd(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, mapping LinAlgError to FactorizationError."""
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(str(exc)) from exc


def principal_sqrt_psd(matrix: np.ndarray, neg_tol: float = 1e-9) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix.

    Eigenvalues slightly below zero (within ``neg_tol`` of the matrix
    norm) are clipped; anything more negative raises
    FactorizationError.
    """
    sym = hermitize(matrix)
    w, v = np.linalg.eigh(sym)
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1e-300)
    if float(np.min(w)) < -neg_tol * scale:
        raise FactorizationError("matrix has a significantly negative eigenvalue")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def waterfill(gains: np.ndarray, total_power: float) -> np.ndarray:
    """Water-filling allocation maximizing sum log2(1 + g_i p_i).

    Parameters
    ----------
    gains : array of nonnegative floats
        Per-channel power gains (1/W units cancel against watts).
    total_power : float
        Power budget in watts, nonnegative.

    Returns
    -------
    array of floats
        Allocation p with p >= 0 and sum(p) == total_power whenever a
        positive gain exists and the budget is positive.
    """
    g = np.asarray(gains, dtype=float)
    if g.ndim != 1:
        raise ValueError("gains must be 1-D")
    if np.any(g < 0.0) or not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite and nonnegative")
    if total_power < 0.0:
        raise ValueError("power budget must be nonnegative")
    powers = np.zeros_like(g)
    if total_power == 0.0 or not np.any(g > 0.0):
        return powers
    order = np.argsort(g)[::-1]
    gs = g[order]
    with np.errstate(divide="ignore", over="ignore"):
        inv_all = np.where(gs > 0.0, 1.0 / gs, np.inf)
    active = int(np.count_nonzero(np.isfinite(inv_all)))
    if active == 0:
        return powers
    # Work with inverse gains shifted by their minimum so the water
    # level stays resolvable when 1/g dwarfs the budget.
    inv = inv_all[:active] - inv_all[0]
    csum = np.cumsum(inv)
    # Largest m with a water level above the m-th inverse gain.
    level = 0.0
    m_used = 1
    for m in range(1, active + 1):
        cand = (total_power + csum[m - 1]) / m
        if m < active and cand >= inv[m]:
            continue
        level = cand
        m_used = m
        break
    alloc = np.clip(level - inv[:m_used], 0.0, None)
    # Exact budget despite clipping roundoff.
    s = float(alloc.sum())
    if s > 0.0:
        alloc *= total_power / s
    powers[order[:m_used]] = alloc
    return powers


def simplex_project(values: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum(w) = total}.

    The sort-based algorithm, made robust to entries much larger than
    ``total`` by shifting with the maximum before forming cumulative
    sums.
    """
    w = np.asarray(values, dtype=float)
    if total < 0.0:
        raise ValueError("total must be nonnegative")
    if w.size == 0:
        raise ValueError("cannot project an empty vector")
    shift = float(w.max())
    v = np.sort(w - shift)[::-1]
    css = np.cumsum(v)
    ks = np.arange(1, w.size + 1)
    cond = ks * v - css + total > 0.0
    k = int(ks[cond][-1]) if np.any(cond) else 1
    theta = (css[k - 1] - total) / k
    return np.clip(w - shift - theta, 0.0, None)


def project_psd_trace(matrix: np.ndarray, max_trace: float) -> np.ndarray:
    """Project a Hermitian matrix onto {X >= 0, tr(X) <= max_trace}.

    Eigenvalues are clipped at zero; if their sum still exceeds the
    bound they are projected onto the simplex of that total.
    """
    if max_trace < 0.0:
        raise ValueError("trace bound must be nonnegative")
    sym = hermitize(np.asarray(matrix))
    w, v = np.linalg.eigh(sym)
    w = np.clip(w, 0.0, None)
    if float(w.sum()) > max_trace:
        w = simplex_project(w, max_trace)
    return (v * w) @ v.conj().T
