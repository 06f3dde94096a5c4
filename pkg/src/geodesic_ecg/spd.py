"""Core math on the manifold of symmetric positive definite (SPD) matrices.

All functions use the affine-invariant Riemannian metric (AIRM) and accept
either a single matrix of shape (n, n) or a stack of shape (..., n, n);
stacked inputs are processed with batched eigendecompositions.
"""

import numpy as np

from .errors import (
    DidNotConverge,
    DimensionMismatch,
    NotPositiveDefinite,
    ParameterOutOfRange,
)

SYMMETRY_RTOL = 1e-10


def _as_square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def _check_symmetric(m, name="matrix"):
    m = _as_square(m, name)
    tol = SYMMETRY_RTOL * np.maximum(1.0, np.abs(m))
    if not np.all(np.abs(m - np.swapaxes(m, -1, -2)) <= tol):
        raise NotPositiveDefinite(f"{name} is not symmetric to tolerance {SYMMETRY_RTOL}")
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _eigh_spd(m, name="matrix"):
    """Eigendecomposition with the dimension-scaled positive definiteness floor."""
    m = _check_symmetric(m, name)
    w, v = np.linalg.eigh(m)
    n = m.shape[-1]
    floor = n * np.finfo(float).eps * w[..., -1]
    if np.any(w[..., 0] <= np.maximum(floor, 0.0)):
        raise NotPositiveDefinite(
            f"{name} has eigenvalue {w.min():.3e} at or below the "
            f"positive definiteness floor"
        )
    return w, v


def check_spd(m, name="matrix"):
    """Validate that ``m`` is symmetric positive definite.

    Parameters
    ----------
    m : ndarray, shape (..., n, n)
        Candidate matrix or stack of matrices.

    Returns
    -------
    ndarray
        The validated, exactly symmetrized matrix.

    Raises
    ------
    NotPositiveDefinite
        If ``m`` is asymmetric beyond tolerance or has an eigenvalue at or
        below ``n * eps * lambda_max``.
    """
    m = _check_symmetric(m, name)
    _eigh_spd(m, name)
    return m


def sym_eig(m):
    """Eigendecomposition of an SPD matrix with descending eigenvalues.

    Parameters
    ----------
    m : ndarray, shape (n, n)
        SPD matrix.

    Returns
    -------
    w : ndarray, shape (n,)
        Strictly positive eigenvalues in descending order.
    v : ndarray, shape (n, n)
        Orthonormal eigenvectors as columns, matching ``w``'s order.
    """
    w, v = _eigh_spd(m)
    return w[..., ::-1], v[..., ::-1]


def _sym_apply(fn, m):
    """Apply a scalar function to the eigenvalues of a symmetric matrix."""
    w, v = np.linalg.eigh(m)
    fw = fn(w)
    return np.einsum("...ij,...j,...kj->...ik", v, fw, v)


def _symmetrize(m):
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def logm(m):
    """Matrix logarithm of an SPD matrix (symmetric, possibly indefinite)."""
    w, v = _eigh_spd(m)
    return _symmetrize(np.einsum("...ij,...j,...kj->...ik", v, np.log(w), v))


def expm(s):
    """Matrix exponential of a symmetric matrix (always SPD)."""
    s = _check_symmetric(s, "symmetric matrix")
    return _symmetrize(_sym_apply(np.exp, s))


def sqrtm(m):
    """Principal square root of an SPD matrix."""
    w, v = _eigh_spd(m)
    return _symmetrize(np.einsum("...ij,...j,...kj->...ik", v, np.sqrt(w), v))


def invsqrtm(m):
    """Inverse principal square root of an SPD matrix."""
    w, v = _eigh_spd(m)
    return _symmetrize(np.einsum("...ij,...j,...kj->...ik", v, 1.0 / np.sqrt(w), v))


def powm(m, t):
    """Real matrix power ``m ** t`` of an SPD matrix."""
    w, v = _eigh_spd(m)
    return _symmetrize(np.einsum("...ij,...j,...kj->...ik", v, w**t, v))


def _check_same_dim(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(
            f"operands have dimensions {a.shape[-1]} and {b.shape[-1]}"
        )


def airm_distance(a, b):
    """Affine-invariant Riemannian distance between SPD matrices.

    ``d(a, b) = || log(a^{-1/2} b a^{-1/2}) ||_F``; symmetric in its
    arguments and zero iff ``a == b``.

    Parameters
    ----------
    a, b : ndarray, shape (..., n, n)
        SPD matrices; leading dimensions broadcast.

    Returns
    -------
    ndarray or float
        Nonnegative distance(s).
    """
    a = _as_square(a, "a")
    b = _as_square(b, "b")
    _check_same_dim(a, b)
    ia = invsqrtm(a)
    s = logm(ia @ b @ ia)
    d = np.linalg.norm(s, axis=(-2, -1))
    return float(d) if d.ndim == 0 else d


def geodesic(a, b, t):
    """Point at parameter ``t`` on the AIRM geodesic from ``a`` to ``b``.

    ``gamma(t) = a^{1/2} (a^{-1/2} b a^{-1/2})^t a^{1/2}`` with
    ``gamma(0) = a`` and ``gamma(1) = b``.

    Parameters
    ----------
    a, b : ndarray, shape (..., n, n)
        SPD endpoints.
    t : float or ndarray in [0, 1]
        Arc-length fraction(s); for stacks, broadcast against the batch.

    Returns
    -------
    ndarray
        SPD matrix with ``d(a, result) = t * d(a, b)``.
    """
    a = _as_square(a, "a")
    b = _as_square(b, "b")
    _check_same_dim(a, b)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ParameterOutOfRange(f"geodesic parameter must lie in [0, 1], got {t}")
    sa = sqrtm(a)
    isa = invsqrtm(a)
    w, v = _eigh_spd(isa @ b @ isa, "whitened endpoint")
    powed = np.einsum(
        "...ij,...j,...kj->...ik", v, w ** t_arr[..., np.newaxis], v
    )
    return _symmetrize(sa @ powed @ sa)


def log_map(base, x):
    """Riemannian logarithm of ``x`` at ``base``.

    ``log_map(B, X) = B^{1/2} log(B^{-1/2} X B^{-1/2}) B^{1/2}``, a symmetric
    matrix in the tangent space at ``base``.
    """
    base = _as_square(base, "base")
    x = _as_square(x, "x")
    _check_same_dim(base, x)
    sb = sqrtm(base)
    isb = invsqrtm(base)
    return _symmetrize(sb @ logm(isb @ x @ isb) @ sb)


def exp_map(base, v):
    """Riemannian exponential of tangent matrix ``v`` at ``base``.

    Inverse of :func:`log_map`:
    ``exp_map(B, V) = B^{1/2} exp(B^{-1/2} V B^{-1/2}) B^{1/2}``.
    """
    base = _as_square(base, "base")
    v = _check_symmetric(v, "tangent matrix")
    _check_same_dim(base, v)
    sb = sqrtm(base)
    isb = invsqrtm(base)
    return _symmetrize(sb @ expm(isb @ v @ isb) @ sb)


def mean_riemann(covmats, weights=None, tol=1e-8, max_iter=64, init=None,
                 closed_form_pairs=True):
    """Weighted Fréchet (Karcher) mean of SPD matrices under the AIRM.

    Minimizes ``sum_i w_i d(C, C_i)^2`` by the fixed-point iteration
    ``C <- exp_map(C, sum_i w_i log_map(C, C_i))`` with normalized weights,
    started at the arithmetic mean.

    Parameters
    ----------
    covmats : ndarray, shape (N, n, n)
        Stack of SPD matrices, N >= 1.
    weights : ndarray, shape (N,), optional
        Nonnegative weights with positive total; uniform if omitted.
    tol : float
        Convergence threshold on the Frobenius norm of the summed log maps.
    max_iter : int
        Iteration budget.
    init : ndarray, shape (n, n), optional
        Starting point; arithmetic mean of the stack if omitted.
    closed_form_pairs : bool
        When True, a two-matrix mean is returned via the geodesic closed
        form instead of iterating.

    Returns
    -------
    ndarray, shape (n, n)
        The SPD mean.

    Raises
    ------
    DidNotConverge
        If the residual is still above ``tol`` after ``max_iter`` steps.
    """
    covmats = np.asarray(covmats, dtype=float)
    if covmats.ndim == 2:
        covmats = covmats[np.newaxis]
    if covmats.ndim != 3 or covmats.shape[-1] != covmats.shape[-2]:
        raise DimensionMismatch(f"expected a (N, n, n) stack, got shape {covmats.shape}")
    n_mats = covmats.shape[0]
    if n_mats == 0:
        raise ValueError("mean of an empty set of matrices")
    if weights is None:
        weights = np.ones(n_mats)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n_mats,):
        raise DimensionMismatch("weights length must match the number of matrices")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    total = weights.sum()
    if total <= 0:
        raise ValueError("total weight must be positive")
    weights = weights / total

    if n_mats == 1:
        return covmats[0].copy()
    if n_mats == 2 and closed_form_pairs:
        return geodesic(covmats[0], covmats[1], weights[1])

    c = np.einsum("i,ijk->jk", weights, covmats) if init is None else np.asarray(init, dtype=float)
    residual = np.inf
    for _ in range(max_iter):
        sc = sqrtm(c)
        isc = invsqrtm(c)
        logs = logm(isc @ covmats @ isc)
        m = np.einsum("i,ijk->jk", weights, logs)
        residual = np.linalg.norm(sc @ m @ sc)
        if residual <= tol:
            return _symmetrize(c)
        c = _symmetrize(sc @ expm(m) @ sc)
    raise DidNotConverge(max_iter, residual)


def _triu_coeffs(n):
    """Row-major upper-triangle extraction coefficients: 1 on the diagonal,
    sqrt(2) off it, making the vectorization an isometry onto R^{n(n+1)/2}."""
    idx = np.triu_indices(n)
    coeffs = (np.sqrt(2) * np.triu(np.ones((n, n)), 1) + np.eye(n))[idx]
    return idx, coeffs


def tangent_space(x, base):
    """Project SPD matrices to tangent vectors at a base point.

    Computes ``S = log(base^{-1/2} x base^{-1/2})`` and extracts the upper
    triangle row by row, diagonal kept as-is and off-diagonal entries scaled
    by sqrt(2), so the Euclidean norm of the vector equals ``||S||_F`` and
    thus the AIRM distance from the base point.

    Parameters
    ----------
    x : ndarray, shape (..., n, n)
        SPD matrices to project.
    base : ndarray, shape (n, n)
        SPD base point of the tangent space.

    Returns
    -------
    ndarray, shape (..., n * (n + 1) / 2)
        Tangent vectors.
    """
    base = _as_square(base, "base")
    x = _as_square(x, "x")
    _check_same_dim(base, x)
    isb = invsqrtm(base)
    s = logm(isb @ x @ isb)
    idx, coeffs = _triu_coeffs(base.shape[-1])
    return coeffs * s[..., idx[0], idx[1]]


def untangent_space(vec, base):
    """Map tangent vectors back to SPD matrices (inverse of tangent_space)."""
    base = _as_square(base, "base")
    vec = np.asarray(vec, dtype=float)
    n = base.shape[-1]
    n_feat = n * (n + 1) // 2
    if vec.shape[-1] != n_feat:
        raise DimensionMismatch(
            f"vector length {vec.shape[-1]} does not match dimension {n} "
            f"(expected {n_feat})"
        )
    idx, coeffs = _triu_coeffs(n)
    s = np.zeros(vec.shape[:-1] + (n, n))
    s[..., idx[0], idx[1]] = vec / coeffs
    s = s + np.swapaxes(np.triu(s, 1), -1, -2)
    sb = sqrtm(base)
    return _symmetrize(sb @ expm(s) @ sb)


def save_spd_csv(path, m):
    """Write an SPD matrix as n lines of n comma-separated decimals."""
    m = check_spd(m)
    np.savetxt(path, m, delimiter=",", fmt="%.17g")


def load_spd_csv(path):
    """Read an SPD matrix written by :func:`save_spd_csv`; validates
    symmetry and positive definiteness on load."""
    m = np.loadtxt(path, delimiter=",", ndmin=2)
    return check_spd(m, name=str(path))
