"""Geometry of symmetric and symmetric positive-definite (SPD) matrices.

Matrices are plain float64 ndarrays. ``as_sym`` and ``as_spd`` are the
validating constructors: they return read-only arrays that satisfy the
symmetric (resp. SPD) invariants. Every function accepts a single ``(d, d)``
matrix or a stack ``(..., d, d)`` unless documented otherwise.

All matrix functions go through the symmetric eigendecomposition; for the
small matrices used here (d = 9) this is both the fastest and the most
accurate route.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import rng as _rng
from .errors import ContractError, DomainError, NotPositiveDefiniteError, NumericError

SymMatrix = NDArray[np.float64]
SpdMatrix = NDArray[np.float64]

#: reject as SPD when lambda_min <= SPD_RTOL * lambda_max
SPD_RTOL = 1e-12
# exp overflows float64 a little above 709.78
_EXP_MAX = 709.0
_LOG_SPD_RTOL = float(-np.log(SPD_RTOL))

Draw = Union[int, Sequence[int], np.random.Generator]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] == 0:
        raise ContractError(f"{name} must be square with shape (..., d, d), got {a.shape}")


def _check_same_dim(*mats: np.ndarray) -> None:
    dims = {m.shape[-1] for m in mats}
    if len(dims) != 1:
        raise ContractError(f"dimension mismatch: {sorted(dims)}")


def as_sym(a: ArrayLike) -> SymMatrix:
    """Validate and symmetrize ``a``; return a read-only copy.

    Symmetry is enforced by averaging with the transpose, so the result is
    exactly symmetric.
    """
    a = np.array(a, dtype=np.float64)
    _check_square(a)
    if not np.all(np.isfinite(a)):
        raise ContractError("matrix has non-finite entries")
    return _freeze(0.5 * (a + np.swapaxes(a, -1, -2)))


def as_spd(a: ArrayLike) -> SpdMatrix:
    """Validate ``a`` as SPD; return a read-only symmetrized copy.

    Raises
    ------
    NotPositiveDefiniteError
        If the smallest eigenvalue is not above ``SPD_RTOL`` times the largest.
    """
    s = as_sym(a)
    w = np.linalg.eigvalsh(s)
    lo, hi = w[..., 0], w[..., -1]
    if np.any(hi <= 0) or np.any(lo <= SPD_RTOL * hi):
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: min eigenvalue {np.min(lo):.3e}, "
            f"max eigenvalue {np.max(hi):.3e}"
        )
    return s


def is_spd(a: ArrayLike) -> bool:
    try:
        as_spd(a)
    except (NotPositiveDefiniteError, ContractError):
        return False
    return True


def sym_eig(S: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigendecomposition of a symmetric matrix.

    Returns
    -------
    w : ndarray, shape (..., d)
        Eigenvalues in ascending order.
    V : ndarray, shape (..., d, d)
        Orthonormal eigenvectors as columns, ``S = V @ diag(w) @ V.T``.
    """
    S = np.asarray(S, dtype=np.float64)
    _check_square(S)
    if not np.all(np.isfinite(S)):
        raise NumericError("eigendecomposition of a matrix with non-finite entries")
    try:
        return np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(S.reshape(-1, *S.shape[-2:])).max()
        raise NumericError(f"symmetric eigensolver did not converge (condition number {cond:.3e})") from exc


def _recompose(V: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = (V * w[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def sym_exp(S: ArrayLike) -> SpdMatrix:
    """Matrix exponential of a symmetric matrix, ``V diag(exp w) V^T``.

    Raises
    ------
    NumericError
        If the exponential overflows or the result's eigenvalue ratio is too
        extreme to pass the SPD check.
    """
    w, V = sym_eig(S)
    if np.any(w[..., -1] > _EXP_MAX):
        raise NumericError(f"matrix exponential overflows: max eigenvalue {np.max(w):.3e}")
    if np.any(w[..., -1] - w[..., 0] >= _LOG_SPD_RTOL):
        raise NumericError("matrix exponential is numerically singular (eigenvalue spread too large)")
    return _freeze(_recompose(V, np.exp(w)))


def sym_log(P: ArrayLike) -> SymMatrix:
    """Principal matrix logarithm of an SPD matrix.

    Raises
    ------
    DomainError
        If ``P`` has an eigenvalue <= 0.
    """
    w, V = sym_eig(P)
    if np.any(w[..., 0] <= 0):
        raise DomainError(f"matrix logarithm needs a positive spectrum, min eigenvalue {np.min(w):.3e}")
    return _freeze(_recompose(V, np.log(w)))


def _sqrt_and_invsqrt(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, V = sym_eig(C)
    if np.any(w[..., 0] <= 0):
        raise DomainError(f"base point is not positive definite, min eigenvalue {np.min(w):.3e}")
    r = np.sqrt(w)
    return _recompose(V, r), _recompose(V, 1.0 / r)


def _inverse(C: np.ndarray) -> np.ndarray:
    w, V = sym_eig(C)
    if np.any(w[..., 0] <= 0):
        raise DomainError(f"matrix is not positive definite, min eigenvalue {np.min(w):.3e}")
    return _recompose(V, 1.0 / w)


def _whiten(base: np.ndarray, dest: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(M, M^-1, base^1/2)`` with ``M = base^-1/2 dest base^-1/2``.

    ``M^-1`` is formed from ``dest^-1`` directly rather than by inverting ``M``,
    so that the small end of M's spectrum can be read off accurately.
    """
    s, si = _sqrt_and_invsqrt(base)
    M = si @ dest @ si
    Minv = s @ _inverse(dest) @ s
    return 0.5 * (M + np.swapaxes(M, -1, -2)), 0.5 * (Minv + np.swapaxes(Minv, -1, -2)), s


def _split_spectrum(M: np.ndarray, Minv: np.ndarray, vectors: bool):
    # eigh has absolute error ~eps*||M||, so eigenvalues >= 1 are taken from M
    # and eigenvalues < 1 from M^-1; each then has small relative error.
    if vectors:
        w, V = sym_eig(M)
        mu, U = sym_eig(Minv)
    else:
        w, V = np.linalg.eigvalsh(M), None
        mu, U = np.linalg.eigvalsh(Minv), None
    d = M.shape[-1]
    hi = w >= 1.0
    k = hi.sum(axis=-1, keepdims=True)
    lo = np.arange(d) >= k
    if np.any(mu[..., -1] <= 0) or np.any(np.where(lo, mu, 1.0) <= 0):
        raise NumericError("generalized eigenvalues not positive; pair is ill-conditioned")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_hi = np.where(hi, np.log(np.where(hi, w, 1.0)), 0.0)
        log_lo = np.where(lo, -np.log(np.where(lo, mu, 1.0)), 0.0)
    return log_hi, V, log_lo, U


def exp_map(base: ArrayLike, y: ArrayLike) -> SpdMatrix:
    """Riemannian exponential at ``base``: ``C^1/2 exp(C^-1/2 y C^-1/2) C^1/2``."""
    base = np.asarray(base, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_square(base, "base")
    _check_square(y, "tangent vector")
    _check_same_dim(base, y)
    s, si = _sqrt_and_invsqrt(base)
    inner = sym_exp(si @ y @ si)
    out = s @ inner @ s
    return _freeze(0.5 * (out + np.swapaxes(out, -1, -2)))


def log_map(base: ArrayLike, dest: ArrayLike) -> SymMatrix:
    """Riemannian logarithm: the tangent vector at ``base`` pointing to ``dest``."""
    base = np.asarray(base, dtype=np.float64)
    dest = np.asarray(dest, dtype=np.float64)
    _check_square(base, "base")
    _check_square(dest, "destination")
    _check_same_dim(base, dest)
    M, Minv, s = _whiten(base, dest)
    log_hi, V, log_lo, U = _split_spectrum(M, Minv, vectors=True)
    inner = _recompose(V, log_hi) + _recompose(U, log_lo)
    out = s @ inner @ s
    return _freeze(0.5 * (out + np.swapaxes(out, -1, -2)))


def inner_product(base: ArrayLike, y_k: ArrayLike, y_l: ArrayLike) -> float | NDArray[np.float64]:
    """Affine-invariant metric ``trace(C^-1 y_k C^-1 y_l)`` on the tangent space at ``base``."""
    base = np.asarray(base, dtype=np.float64)
    y_k = np.asarray(y_k, dtype=np.float64)
    y_l = np.asarray(y_l, dtype=np.float64)
    for m, n in ((base, "base"), (y_k, "y_k"), (y_l, "y_l")):
        _check_square(m, n)
    _check_same_dim(base, y_k, y_l)
    a = np.linalg.solve(base, y_k)
    b = np.linalg.solve(base, y_l)
    # trace(A B) = sum_ij A_ij B_ji
    out = np.einsum("...ij,...ji->...", a, b)
    return float(out) if np.ndim(out) == 0 else out


def _check_pair(C_i: ArrayLike, C_j: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    C_i = np.asarray(C_i, dtype=np.float64)
    C_j = np.asarray(C_j, dtype=np.float64)
    _check_square(C_i)
    _check_square(C_j)
    _check_same_dim(C_i, C_j)
    return C_i, C_j


def generalized_eigvals(C_i: ArrayLike, C_j: ArrayLike) -> NDArray[np.float64]:
    """Solutions ``lam`` of ``lam C_i v = C_j v`` in ascending order.

    Computed as the spectrum of ``C_i^-1/2 C_j C_i^-1/2``, with the part below 1
    read from the inverse pair so every eigenvalue keeps full relative accuracy.
    """
    C_i, C_j = _check_pair(C_i, C_j)
    M, Minv, _ = _whiten(C_i, C_j)
    log_hi, _, log_lo, _ = _split_spectrum(M, Minv, vectors=False)
    d = C_i.shape[-1]
    # eigenvalues >= 1 sit in the top slots of log_hi, those < 1 in the top slots of log_lo
    k = np.count_nonzero(np.linalg.eigvalsh(M) >= 1.0, axis=-1)[..., None]
    idx = np.arange(d)
    picked = np.where(idx >= d - k, log_hi, np.nan)
    both = np.concatenate([picked, np.where(idx >= k, log_lo, np.nan)], axis=-1)
    return np.exp(np.sort(both, axis=-1)[..., :d])


def geodesic_distance(C_i: ArrayLike, C_j: ArrayLike) -> float | NDArray[np.float64]:
    """Affine-invariant geodesic distance ``sqrt(sum_k ln^2 lam_k(C_i, C_j))``.

    ``lam_k`` are the generalized eigenvalues of the pair. Broadcasts over
    leading stack dimensions; returns a float for a single pair.
    """
    C_i, C_j = _check_pair(C_i, C_j)
    M, Minv, _ = _whiten(C_i, C_j)
    log_hi, _, log_lo, _ = _split_spectrum(M, Minv, vectors=False)
    d = np.sqrt(np.sum(log_hi**2 + log_lo**2, axis=-1))
    # identical inputs are exactly zero apart, not a rounding residue away
    d = np.where(np.all(C_i == C_j, axis=(-2, -1)), 0.0, d)
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class NoiseSpec:
    """Per-entry standard deviations of the symmetric log-space noise.

    ``sigma[i, j]`` is the std-dev of ``w[i, j] = w[j, i]``; ``rng_seed`` keys
    the counter-based streams used by ``sample_log_walk``.
    """

    sigma: NDArray[np.float64]
    rng_seed: int = 0

    def __post_init__(self) -> None:
        s = np.array(self.sigma, dtype=np.float64)
        _check_square(s, "sigma")
        if s.ndim != 2:
            raise ContractError("sigma must be a single (d, d) matrix")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ContractError("sigma entries must be finite and non-negative")
        if not np.array_equal(s, s.T):
            raise ContractError("sigma must be symmetric")
        object.__setattr__(self, "sigma", _freeze(s))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))

    @classmethod
    def uniform(cls, dim: int, sigma: float, rng_seed: int = 0) -> "NoiseSpec":
        return cls(np.full((dim, dim), float(sigma)), rng_seed)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


def sample_sym_noise(sigma: NDArray[np.float64], gen: np.random.Generator) -> SymMatrix:
    """Draw symmetric ``w`` with ``w[i, j] = w[j, i] ~ N(0, sigma[i, j]^2)`` for ``i <= j``.

    Consumes exactly ``d (d + 1) / 2`` standard normals from ``gen`` in
    row-major upper-triangle order.
    """
    d = sigma.shape[0]
    iu = np.triu_indices(d)
    w = np.zeros((d, d))
    w[iu] = sigma[iu] * gen.standard_normal(len(iu[0]))
    w = w + np.triu(w, 1).T
    return _freeze(w)


def _as_generator(spec: NoiseSpec, draw: Draw) -> np.random.Generator:
    if isinstance(draw, np.random.Generator):
        return draw
    key = (draw,) if np.isscalar(draw) else tuple(draw)
    return _rng.stream(spec.rng_seed, *key, tag=_rng.TAG_TEMPLATE)


def sample_log_walk(prev: ArrayLike, spec: NoiseSpec, draw: Draw = 0) -> SpdMatrix:
    """One step of the log-space random walk ``exp(log(prev) + w)``.

    ``draw`` selects the counter-based stream: an int or a tuple of up to three
    ints keyed under ``spec.rng_seed`` (so the same seed and draw index always
    give the same ``w``), or an explicit generator.
    """
    prev = np.asarray(prev, dtype=np.float64)
    _check_square(prev, "prev")
    if prev.shape[-1] != spec.dim:
        raise ContractError(f"dimension mismatch: prev is {prev.shape[-1]}, noise is {spec.dim}")
    if not np.any(spec.sigma):
        return as_spd(prev)
    w = sample_sym_noise(spec.sigma, _as_generator(spec, draw))
    return sym_exp(sym_log(prev) + w)


def eig_bounds(a: float, b: float, d: int) -> tuple[float, float]:
    """Extremal eigenvalue bounds for symmetric ``d x d`` matrices with entries in ``[a, b]``.

    Returns ``(lower, upper)`` with ``lower <= lambda_min`` and
    ``upper >= lambda_max``. Both bounds are attained (they are the exact
    extrema over the interval matrices). For the smallest eigenvalue, with
    ``p = floor(d/2)`` and ``q = ceil(d/2)``::

        lower = (d a - sqrt((q - p)^2 a^2 + 4 p q b^2)) / 2   if |a| < b
        lower = min(d a, 0)                                    otherwise

    which for odd ``d`` reads ``(d a - sqrt(a^2 + (d^2 - 1) b^2)) / 2``. The
    upper bound follows from ``lambda_max(W) = -lambda_min(-W)``, i.e. the same
    formula on the interval ``[-b, -a]``.
    """
    a = float(a)
    b = float(b)
    d = int(d)
    if d < 1:
        raise ContractError(f"dimension must be positive, got {d}")
    if not (np.isfinite(a) and np.isfinite(b)) or a > b:
        raise ContractError(f"need finite a <= b, got a={a}, b={b}")
    if d == 1:
        return a, b
    p, q = d // 2, d - d // 2

    def lower(lo: float, hi: float) -> float:
        if abs(lo) < hi:
            return 0.5 * (d * lo - np.sqrt((q - p) ** 2 * lo * lo + 4 * p * q * hi * hi))
        return min(d * lo, 0.0)

    return float(lower(a, b)), float(-lower(-b, -a))


def log_euclidean_mean(weights: ArrayLike, mats: ArrayLike) -> SpdMatrix:
    """Weighted log-Euclidean mean ``exp(sum_i w_i log(C_i))``."""
    mats = np.asarray(mats, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if mats.ndim == 2:
        mats = mats[None]
    if mats.ndim != 3 or mats.shape[0] == 0:
        raise ContractError("need a non-empty list of matrices")
    if weights.shape != (mats.shape[0],):
        raise ContractError(f"expected {mats.shape[0]} weights, got shape {weights.shape}")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ContractError("weights must be finite and non-negative")
    total = weights.sum()
    if not np.isclose(total, 1.0, rtol=0, atol=1e-9):
        raise ContractError(f"weights must sum to 1, got {total}")
    if mats.shape[0] == 1:
        return as_spd(mats[0])
    logs = sym_log(mats)
    return sym_exp(np.tensordot(weights, logs, axes=1))


def format_matrix(m: ArrayLike) -> str:
    """Text form: a ``dim`` line then ``dim`` rows of 17-significant-digit decimals."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {m.shape}")
    rows = [" ".join(f"{v:.17g}" for v in row) for row in m]
    return "\n".join([str(m.shape[0]), *rows]) + "\n"


def parse_matrix(text: str) -> NDArray[np.float64]:
    """Inverse of ``format_matrix``."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    try:
        dim = int(lines[0])
        rows = [[float(v) for v in ln.split()] for ln in lines[1 : 1 + dim]]
    except (IndexError, ValueError) as exc:
        raise ContractError(f"malformed matrix text: {exc}") from exc
    if dim <= 0 or len(rows) != dim or any(len(r) != dim for r in rows) or len(lines) != dim + 1:
        raise ContractError(f"malformed matrix text: expected {dim} rows of {dim} values")
    return np.array(rows)
