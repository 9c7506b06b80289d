"""Singular values and gaps, U_k subspaces, wedge powers, Pluecker/Grassmannian
distances, symmetric-space distance, and inner-product interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

DEFAULT_GAP_TOL = 1e-8


class IllDefinedSubspaceError(ValueError):
    def __init__(self, k, gap_ratio):
        self.k = k
        self.gap_ratio = gap_ratio
        super().__init__(f"U_{k} ill-defined: singular value ratio {gap_ratio:.3e}")


class SingularMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralData:
    """Sorted singular values and eigenvalue moduli of an invertible matrix."""

    mu: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        mu, lam = self.mu, self.lam
        if np.any(mu <= 0):
            raise SingularMatrixError("nonpositive singular value")
        if np.any(np.diff(mu) > 0) or np.any(np.diff(lam) > 1e-12):
            raise ValueError("spectra must be sorted nonincreasing")
        if lam[0] > mu[0] * (1 + 1e-9):
            raise ValueError("spectral radius exceeds operator norm")

    @property
    def log_mu(self) -> np.ndarray:
        return np.log(self.mu)

    @property
    def log_lambda(self) -> np.ndarray:
        return np.log(self.lam)


def spectral(g) -> SpectralData:
    g = np.asarray(g, dtype=float)
    det = np.linalg.det(g)
    if det == 0 or not np.isfinite(g).all():
        raise SingularMatrixError("matrix is singular or non-finite")
    mu = np.linalg.svd(g, compute_uv=False)
    if mu[-1] <= 0:
        raise SingularMatrixError("numerically singular")
    rel = abs(np.prod(mu) - abs(det)) / abs(det)
    if rel > 1e-6:
        raise SingularMatrixError(f"product of singular values off |det| by {rel:.2e}")
    lam = np.sort(np.abs(np.linalg.eigvals(g)))[::-1]
    lam = np.minimum(lam, mu[0])  # clip eigenvalue-modulus overshoot from the eigensolver
    return SpectralData(mu=mu, lam=lam)


def mu_gap(g, k: int) -> float:
    """log mu_k - log mu_{k+1}, 1-based k."""
    s = spectral(g)
    _check_k(k, len(s.mu))
    return float(s.log_mu[k - 1] - s.log_mu[k])


def lambda_gap(g, k: int) -> float:
    s = spectral(g)
    _check_k(k, len(s.lam))
    return float(s.log_lambda[k - 1] - s.log_lambda[k])


def full_spread(g) -> float:
    """log mu_1 - log mu_d."""
    s = spectral(g)
    return float(s.log_mu[0] - s.log_mu[-1])


def _check_k(k, d):
    if not 1 <= k < d:
        raise ValueError(f"k must satisfy 1 <= k < {d}")


@dataclass(frozen=True)
class Subspace:
    """Orthonormal basis (d x k) plus its unit Pluecker vector."""

    basis: np.ndarray
    pluecker: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]


def orthonormalize(columns) -> np.ndarray:
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns[:, None]
    q, r = np.linalg.qr(columns)
    keep = np.abs(np.diag(r)) > 1e-12 * max(1.0, np.abs(r).max())
    return q[:, keep]


def subspace_from_columns(columns) -> Subspace:
    basis = orthonormalize(columns)
    return Subspace(basis=basis, pluecker=pluecker_vector(basis))


def pluecker_vector(basis) -> np.ndarray:
    """Unit vector of k x k minors in the ordered wedge basis."""
    basis = np.asarray(basis, dtype=float)
    d, k = basis.shape
    if k == 0:
        return np.array([1.0])
    coords = np.array([np.linalg.det(basis[list(rows), :])
                       for rows in combinations(range(d), k)])
    norm = np.linalg.norm(coords)
    if norm == 0:
        raise ValueError("degenerate column set")
    return coords / norm


def u_subspace(g, k: int, tol: float = DEFAULT_GAP_TOL) -> Subspace:
    """Span of the k leading left singular directions; errors when the gap
    ratio mu_k/mu_{k+1} is below 1 + tol."""
    g = np.asarray(g, dtype=float)
    _check_k(k, g.shape[0])
    u, s, _ = np.linalg.svd(g)
    ratio = s[k - 1] / s[k]
    if not ratio >= 1 + tol:
        raise IllDefinedSubspaceError(k, ratio)
    return subspace_from_columns(u[:, :k])


def wedge_power(g, ell: int) -> np.ndarray:
    """Matrix of the ell-th exterior power in the ordered basis e_i1 ^ ... ^ e_iell."""
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    if not 1 <= ell <= d:
        raise ValueError("wedge power needs 1 <= ell <= d")
    subsets = list(combinations(range(d), ell))
    out = np.empty((len(subsets), len(subsets)))
    for i, rows in enumerate(subsets):
        sub = g[list(rows), :]
        for j, cols in enumerate(subsets):
            out[i, j] = np.linalg.det(sub[:, list(cols)])
    return out


def grassmannian_distance(v: Subspace, w: Subspace) -> float:
    """Angle distance through the Pluecker embedding, in [0, pi/2]."""
    if v.dim != w.dim:
        raise ValueError("subspaces must have equal dimension")
    inner = abs(float(np.dot(v.pluecker, w.pluecker)))
    return float(np.arccos(min(1.0, inner)))


def principal_angle_distance(v: Subspace, w: Subspace) -> float:
    """Cross-check metric: l2 norm of the principal angles."""
    if v.dim != w.dim:
        raise ValueError("subspaces must have equal dimension")
    cosines = np.clip(np.linalg.svd(v.basis.T @ w.basis, compute_uv=False), -1.0, 1.0)
    return float(np.linalg.norm(np.arccos(cosines)))


def apply_to_subspace(g, v: Subspace) -> Subspace:
    return subspace_from_columns(np.asarray(g, dtype=float) @ v.basis)


def transversality(v: Subspace, w: Subspace) -> float:
    """Smallest singular value of the stacked bases [V | W]."""
    stacked = np.hstack([v.basis, w.basis])
    return float(np.linalg.svd(stacked, compute_uv=False)[-1])


def intersect_subspaces(v: Subspace, w: Subspace) -> Subspace:
    """Exact-dimension intersection via the null space of [V | -W]."""
    stacked = np.hstack([v.basis, -w.basis])
    _, s, vt = np.linalg.svd(stacked)
    null_dim = int(np.sum(s < 1e-10 * max(1.0, s[0]))) + stacked.shape[1] - len(s)
    if null_dim == 0:
        d = v.ambient
        return Subspace(basis=np.zeros((d, 0)), pluecker=np.array([1.0]))
    coeffs = vt[-null_dim:, : v.dim].T
    return subspace_from_columns(v.basis @ coeffs)


def symmetric_space_distance(g, h) -> float:
    """sqrt(sum_j log^2 mu_j(g^-1 h)) for invertible g, h."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    mu = np.linalg.svd(np.linalg.solve(g, h), compute_uv=False)
    return float(np.sqrt(np.sum(np.log(mu) ** 2)))


@dataclass(frozen=True)
class InnerProduct:
    """Positive-definite Gram matrix."""

    gram: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=float)
        if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, np.abs(g).max()):
            raise ValueError("gram matrix must be symmetric")
        if np.linalg.eigvalsh(g)[0] <= 0:
            raise ValueError("gram matrix must be positive definite")

    def norm(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(np.sqrt(y @ self.gram @ y))


def simultaneous_orthogonal_basis(q0: InnerProduct, q1: InnerProduct) -> np.ndarray:
    """Basis orthonormal for q0 and orthogonal for q1 (pencil eigenbasis).

    Columns are the basis vectors; raises on badly conditioned pencils.
    """
    w, v = scipy.linalg.eigh(q1.gram, q0.gram)
    if w[0] <= 0 or w[-1] / w[0] > 1e12:
        raise ValueError("pencil condition exceeds 1e12")
    return v


def interpolate_inner_products(q0: InnerProduct, q1: InnerProduct, t: float) -> InnerProduct:
    """Geodesic of inner products: same simultaneous orthogonal basis, diagonal
    interpolated geometrically."""
    v = simultaneous_orthogonal_basis(q0, q1)
    w = np.diag(v.T @ q1.gram @ v)
    vinv = np.linalg.inv(v)
    gram = vinv.T @ np.diag(w ** t) @ vinv
    gram = (gram + gram.T) / 2
    return InnerProduct(gram=gram)


def inner_product_distance(q0: InnerProduct, q1: InnerProduct) -> float:
    """Symmetric-space distance between inner products (Gram pencil route)."""
    w = scipy.linalg.eigh(q1.gram, q0.gram, eigvals_only=True)
    return float(0.5 * np.sqrt(np.sum(np.log(w) ** 2)))


# ---------------------------------------------------------------------------
# Log-domain accumulation for long products
# ---------------------------------------------------------------------------


@dataclass
class ScaledMatrix:
    """A matrix stored as exp(log_scale) * body with ||body|| ~ 1."""

    body: np.ndarray
    log_scale: float

    def log_mu1(self) -> float:
        return self.log_scale + float(np.log(np.linalg.svd(self.body, compute_uv=False)[0]))

    def log_mu(self) -> np.ndarray:
        """All log singular values; trailing ones are garbage once the body's
        condition number reaches float precision."""
        return self.log_scale + np.log(np.linalg.svd(self.body, compute_uv=False))

    def reliable_log_mu(self, cond_limit: float = 1e13):
        mu = np.linalg.svd(self.body, compute_uv=False)
        keep = mu >= mu[0] / cond_limit
        return self.log_scale + np.log(mu[keep]), int(keep.sum())


def scaled_product(mats) -> ScaledMatrix:
    """Left-to-right product with per-step renormalization.

    Singular values of the true product are exp(log_scale) times those of the
    body, exactly; only log mu_1 is guaranteed accurate for very long words.
    """
    acc = None
    log_scale = 0.0
    for m in mats:
        m = np.asarray(m, dtype=float)
        acc = m.copy() if acc is None else acc @ m
        norm = np.linalg.norm(acc)
        if not np.isfinite(norm) or norm == 0:
            raise FloatingPointError("scaled product lost all precision")
        if norm > 1e100 or norm < 1e-100:
            acc /= norm
            log_scale += np.log(norm)
    if acc is None:
        raise ValueError("empty product")
    norm = np.linalg.norm(acc)
    return ScaledMatrix(body=acc / norm, log_scale=log_scale + float(np.log(norm)))


def log_mu1_of_word(images: dict, word, renorm_every: int = 16) -> float:
    """log mu_1 of the matrix of a long word, never forming the raw product."""
    d = next(iter(images.values())).shape[0]
    acc = np.eye(d)
    log_scale = 0.0
    for i, s in enumerate(word):
        acc = acc @ images[s]
        if (i + 1) % renorm_every == 0:
            norm = np.linalg.norm(acc)
            acc /= norm
            log_scale += np.log(norm)
    norm = np.linalg.norm(acc)
    return log_scale + float(np.log(norm)) + float(
        np.log(np.linalg.svd(acc / norm, compute_uv=False)[0]))
