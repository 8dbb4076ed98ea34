"""Dense multi-site operator kernels.

Operators live on a :class:`SiteSpace`, an ordered collection of finite-
dimensional sites.  A :class:`SupportedOperator` pairs a matrix with the
sorted tuple of site ids it acts on; everything else (embedding, partial
trace, spectral calculus, operator Schmidt decomposition) is a plain
function on numpy arrays.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonHermitianError,
    PositivityViolationError,
    UnknownSiteError,
)

HERMITIAN_RTOL = 1e-12
SCHMIDT_RTOL = 1e-11
DEFAULT_DENSE_CAP = 4096


def dense_cap() -> int:
    """Dense dimension cap; override with the QMN_DENSE_CAP environment variable."""
    raw = os.environ.get("QMN_DENSE_CAP")
    if raw is None:
        return DEFAULT_DENSE_CAP
    cap = int(raw)
    if cap < 1:
        raise ValueError(f"QMN_DENSE_CAP must be positive, got {cap}")
    return cap


@dataclass(frozen=True)
class SiteSpace:
    """Ordered collection of sites with their local dimensions.

    Site ids are arbitrary integers; axes are ordered by ascending id.
    """

    sites: tuple[int, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.sites) != len(self.dims):
            raise DimensionMismatchError("sites and dims must have equal length")
        if any(int(s) != s for s in self.sites):
            raise UnknownSiteError("site ids must be integers")
        if list(self.sites) != sorted(set(self.sites)):
            raise UnknownSiteError("site ids must be strictly increasing and unique")
        if any(d < 1 for d in self.dims):
            raise DimensionMismatchError("site dimensions must be >= 1")

    @classmethod
    def qubits(cls, n: int, first_id: int = 1) -> "SiteSpace":
        """Space of ``n`` qubits with ids ``first_id .. first_id+n-1``."""
        return cls(tuple(range(first_id, first_id + n)), (2,) * n)

    @classmethod
    def from_dims(cls, dims: dict[int, int]) -> "SiteSpace":
        """Space from a mapping of site id to local dimension."""
        order = sorted(dims)
        return cls(tuple(order), tuple(dims[s] for s in order))

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def __contains__(self, site: int) -> bool:
        return site in self._index

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def _index(self) -> dict[int, int]:
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {s: a for a, s in enumerate(self.sites)}
            self.__dict__["_index_cache"] = idx
        return idx

    def axis(self, site: int) -> int:
        try:
            return self._index[site]
        except KeyError:
            raise UnknownSiteError(f"site {site} not in space {self.sites}") from None

    def dim(self, site: int) -> int:
        return self.dims[self.axis(site)]

    def subspace(self, sites: Iterable[int]) -> "SiteSpace":
        """Sub-collection of sites (sorted), with the same local dimensions."""
        chosen = sorted(set(sites))
        return SiteSpace(tuple(chosen), tuple(self.dim(s) for s in chosen))

    def dim_of(self, sites: Iterable[int]) -> int:
        return math.prod(self.dim(s) for s in set(sites))


@dataclass(frozen=True)
class SupportedOperator:
    """A matrix together with the sorted site ids it acts on.

    The matrix axes follow ascending site-id order.  An empty support means
    a 1x1 matrix holding a scalar (times the identity once embedded).
    """

    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(s) for s in self.support))
        if list(self.support) != sorted(set(self.support)):
            raise UnknownSiteError("support must be sorted and duplicate-free")
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"operator matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


def supported(space: SiteSpace, sites: Sequence[int], matrix: np.ndarray) -> SupportedOperator:
    """Build a :class:`SupportedOperator`, reordering axes if ``sites`` is unsorted.

    ``matrix`` axes are taken to follow the order in which ``sites`` are
    listed; the result is re-expressed on the sorted support.
    """
    sites = tuple(sites)
    if len(set(sites)) != len(sites):
        raise UnknownSiteError("support sites must be distinct")
    dims = [space.dim(s) for s in sites]
    m = np.asarray(matrix, dtype=complex)
    want = math.prod(dims) if sites else 1
    if m.shape != (want, want):
        raise DimensionMismatchError(
            f"operator on sites {sites} (dims {dims}) must be {want}x{want}, got {m.shape}")
    order = sorted(range(len(sites)), key=lambda k: sites[k])
    if order == list(range(len(sites))):
        return SupportedOperator(sites, m)
    t = m.reshape(dims + dims)
    perm = order + [len(sites) + k for k in order]
    t = t.transpose(perm)
    return SupportedOperator(tuple(sorted(sites)), t.reshape(want, want))


def kron(*matrices: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    if not matrices:
        return np.eye(1, dtype=complex)
    out = np.asarray(matrices[0], dtype=complex)
    for m in matrices[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def embed(op: SupportedOperator, space: SiteSpace) -> np.ndarray:
    """Embed an operator into the full space (identity on the other sites)."""
    for s in op.support:
        if s not in space:
            raise UnknownSiteError(f"support site {s} not in space {space.sites}")
    want = space.dim_of(op.support) if op.support else 1
    if op.dim != want:
        raise DimensionMismatchError(
            f"operator dim {op.dim} does not match dims of sites {op.support} in space")
    comp = [s for s in space.sites if s not in op.support]
    if not comp:
        return op.matrix.copy()
    rest = math.prod(space.dim(s) for s in comp)
    full = np.kron(op.matrix, np.eye(rest, dtype=complex))
    order = list(op.support) + comp
    dims_order = [space.dim(s) for s in order]
    pos = {s: k for k, s in enumerate(order)}
    perm = [pos[s] for s in space.sites]
    n = len(order)
    t = full.reshape(dims_order + dims_order)
    t = t.transpose(perm + [n + p for p in perm])
    d = space.total_dim
    return np.ascontiguousarray(t.reshape(d, d))


def partial_trace(matrix: np.ndarray, space: SiteSpace, keep: Iterable[int]) -> SupportedOperator:
    """Trace out every site not in ``keep``; result lives on the kept sites."""
    keep = sorted(set(keep))
    for s in keep:
        if s not in space:
            raise UnknownSiteError(f"keep site {s} not in space {space.sites}")
    m = np.asarray(matrix, dtype=complex)
    d = space.total_dim
    if m.shape != (d, d):
        raise DimensionMismatchError(f"matrix shape {m.shape} does not match space dim {d}")
    n = len(space.sites)
    t = m.reshape(space.dims + space.dims)
    remaining = list(range(n))
    for axis in reversed(range(n)):
        if space.sites[axis] in keep:
            continue
        pos = remaining.index(axis)
        t = np.trace(t, axis1=pos, axis2=pos + len(remaining))
        remaining.pop(pos)
    dk = math.prod(space.dim(s) for s in keep) if keep else 1
    return SupportedOperator(tuple(keep), np.asarray(t).reshape(dk, dk))


def check_hermitian(matrix: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Validate Hermiticity within ``rtol`` (relative to the max entry) and symmetrize."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    defect = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if defect > rtol * scale:
        raise NonHermitianError(
            f"matrix is not Hermitian: max |M - M^dag| = {defect:.3e} "
            f"exceeds {rtol:.1e} * max|M| = {rtol * scale:.3e}")
    return (m + m.conj().T) / 2


def herm_eig(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix."""
    m = check_hermitian(matrix)
    return np.linalg.eigh(m)


def func_herm(matrix: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenvalues."""
    w, v = herm_eig(matrix)
    return (v * f(w)) @ v.conj().T


def expm_herm(matrix: np.ndarray) -> np.ndarray:
    """Matrix exponential of a Hermitian matrix (spectral calculus)."""
    return func_herm(matrix, np.exp)


def logm_pd(matrix: np.ndarray, floor_rtol: float = 1e-12) -> np.ndarray:
    """Matrix logarithm of a positive definite Hermitian matrix.

    Eigenvalues at or below ``floor_rtol`` times the largest eigenvalue are
    treated as a positivity violation, not clipped.
    """
    w, v = herm_eig(matrix)
    top = float(w[-1])
    if top <= 0.0:
        raise PositivityViolationError(
            f"matrix is not positive definite: max eigenvalue {top:.3e}",
            min_eigenvalue=float(w[0]))
    floor = floor_rtol * top
    if w[0] <= floor:
        raise PositivityViolationError(
            f"matrix is numerically singular: min eigenvalue {w[0]:.3e} "
            f"<= positivity floor {floor:.3e}", min_eigenvalue=float(w[0]))
    return (v * np.log(w)) @ v.conj().T


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr(a^dag b)."""
    return complex(np.vdot(a, b))


def hs_norm(a: np.ndarray) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(a))


def op_schmidt(op: SupportedOperator, space: SiteSpace, left: Iterable[int],
               rtol: float = SCHMIDT_RTOL,
               ) -> list[tuple[SupportedOperator, SupportedOperator, float]]:
    """Operator Schmidt decomposition across a bipartition of the support.

    Returns triples ``(F, G, w)`` with ``op = sum_k w_k F_k (x) G_k``, the
    ``F_k`` / ``G_k`` Hilbert-Schmidt orthonormal on the left / right sites
    and weights descending.  Weights below ``rtol`` times the largest are
    dropped.
    """
    left = sorted(set(left))
    right = [s for s in op.support if s not in left]
    if not left or not right or any(s not in op.support for s in left):
        raise UnknownSiteError(
            f"cut {left} must be a nonempty proper subset of the support {op.support}")
    dims = [space.dim(s) for s in op.support]
    n = len(dims)
    axes = {s: k for k, s in enumerate(op.support)}
    order = [axes[s] for s in left] + [axes[s] for s in right]
    t = op.matrix.reshape(dims + dims)
    t = t.transpose(order + [n + a for a in order])
    dl = math.prod(space.dim(s) for s in left)
    dr = math.prod(space.dim(s) for s in right)
    # reshuffle: group (row_L, col_L) against (row_R, col_R)
    t = t.reshape(dl, dr, dl, dr).transpose(0, 2, 1, 3).reshape(dl * dl, dr * dr)
    u, s, vh = np.linalg.svd(t, full_matrices=False)
    out: list[tuple[SupportedOperator, SupportedOperator, float]] = []
    if s.size == 0:
        return out
    cutoff = rtol * float(s[0])
    for k in range(s.size):
        if s[k] <= cutoff:
            break
        f = SupportedOperator(tuple(left), u[:, k].reshape(dl, dl))
        g = SupportedOperator(tuple(right), vh[k, :].reshape(dr, dr))
        out.append((f, g, float(s[k])))
    return out
