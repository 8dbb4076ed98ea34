"""Independent oracle implementations used to cross-check the library.

Everything here deliberately avoids the code paths under test: partial
traces are explicit index sums, the matrix exponential is a Taylor series
with scaling and squaring, Pauli words are built by literal Kronecker
products, and graph shielding is a breadth-first component search.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

I2 = np.array([[1, 0], [0, 1]], dtype=complex)
X2 = np.array([[0, 1], [1, 0]], dtype=complex)
Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_BY_LETTER = {"I": I2, "X": X2, "Y": Y2, "Z": Z2}


def dense_pauli_word(letters: dict[int, str], sites: list[int]) -> np.ndarray:
    """Kronecker product of single-qubit Paulis over ``sites`` (ascending)."""
    out = np.eye(1, dtype=complex)
    for s in sites:
        out = np.kron(out, PAULI_BY_LETTER[letters.get(s, "I")])
    return out


def ptrace_indexsum(m: np.ndarray, dims: list[int], keep_axes: list[int]) -> np.ndarray:
    """Partial trace by explicit summation over basis indices."""
    n = len(dims)
    keep = sorted(keep_axes)
    keep_dims = [dims[a] for a in keep]
    dk = math.prod(keep_dims) if keep else 1

    def flat(idx, ds):
        x = 0
        for i, d in zip(idx, ds):
            x = x * d + i
        return x

    out = np.zeros((dk, dk), dtype=complex)
    for row in itertools.product(*[range(d) for d in dims]):
        row_keep = tuple(row[a] for a in keep)
        for col_keep in itertools.product(*[range(d) for d in keep_dims]):
            col = list(row)
            for a, c in zip(keep, col_keep):
                col[a] = c
            out[flat(row_keep, keep_dims), flat(col_keep, keep_dims)] += \
                m[flat(row, dims), flat(tuple(col), dims)]
    return out


def expm_taylor(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a Taylor series."""
    m = np.asarray(m, dtype=complex)
    norm = np.linalg.norm(m, ord=np.inf)
    s = max(0, int(np.ceil(np.log2(max(norm, 1e-300)))) + 1) if norm > 0.5 else 0
    a = m / (2 ** s)
    out = np.eye(m.shape[0], dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    for k in range(1, 40):
        term = term @ a / k
        out = out + term
        if np.linalg.norm(term) < 1e-18 * max(1.0, np.linalg.norm(out)):
            break
    for _ in range(s):
        out = out @ out
    return out


def shannon_entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


def classical_cmi(p: np.ndarray, dims: list[int], a_axes: list[int],
                  b_axes: list[int], c_axes: list[int]) -> float:
    """Classical I(A:C|B) from a joint distribution given as a flat vector."""
    t = np.asarray(p, dtype=float).reshape(dims)

    def marg(axes):
        drop = tuple(sorted(set(range(len(dims))) - set(axes)))
        return t.sum(axis=drop) if drop else t

    h_ab = shannon_entropy(marg(sorted(a_axes + b_axes)))
    h_bc = shannon_entropy(marg(sorted(b_axes + c_axes)))
    h_abc = shannon_entropy(marg(sorted(a_axes + b_axes + c_axes)))
    h_b = shannon_entropy(marg(sorted(b_axes))) if b_axes else 0.0
    return h_ab + h_bc - h_abc - h_b


def bfs_components(vertices: set[int], edges: set[tuple[int, int]]) -> list[set[int]]:
    adj = {v: set() for v in vertices}
    for u, v in edges:
        if u in adj and v in adj:
            adj[u].add(v)
            adj[v].add(u)
    seen: set[int] = set()
    comps = []
    for v in sorted(vertices):
        if v in seen:
            continue
        comp = {v}
        queue = [v]
        while queue:
            x = queue.pop()
            for y in adj[x]:
                if y not in comp:
                    comp.add(y)
                    queue.append(y)
        seen |= comp
        comps.append(comp)
    return comps


def brute_shields(vertices: set[int], edges: set[tuple[int, int]],
                  a: set[int], b: set[int], c: set[int]) -> bool:
    """Component-based shielding check on the graph with B removed."""
    rest = vertices - b
    kept = {(u, v) for (u, v) in edges if u in rest and v in rest}
    for comp in bfs_components(rest, kept):
        if comp & a and comp & c:
            return False
    return True


def brute_spanning_shield_partitions(vertices: list[int], edges: set[tuple[int, int]]):
    """All spanning (A,B,C) with A,C nonempty, B shielding, canonical orientation."""
    vs = sorted(vertices)
    out = []
    for assign in itertools.product((0, 1, 2), repeat=len(vs)):
        a = {v for v, k in zip(vs, assign) if k == 0}
        b = {v for v, k in zip(vs, assign) if k == 1}
        c = {v for v, k in zip(vs, assign) if k == 2}
        if not a or not c:
            continue
        if min(a | c) not in a:
            continue
        if brute_shields(set(vs), edges, a, b, c):
            out.append((frozenset(a), frozenset(b), frozenset(c)))
    return sorted(out, key=lambda p: (sorted(p[0]), sorted(p[1])))


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (a + a.conj().T) / 2


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    k = rank or d
    a = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = a @ a.conj().T
    return m / np.trace(m).real


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def site_avg_dense(h: np.ndarray, dims: list[int], axis: int) -> np.ndarray:
    """Replace one tensor factor by identity times its normalized trace."""
    n = len(dims)
    t = h.reshape(dims + dims)
    d = dims[axis]
    tr = np.trace(t, axis1=axis, axis2=n + axis) / d
    out = np.zeros(dims + dims, dtype=complex)
    idx = [slice(None)] * (2 * n)
    for i in range(d):
        idx[axis] = i
        idx[n + axis] = i
        out[tuple(idx)] = tr
    return out.reshape(h.shape)


def brute_cumulant(h: np.ndarray, dims: list[int], region_axes: list[int]) -> np.ndarray:
    """Cumulant component on ``region_axes`` by inclusion-exclusion, embedded."""
    n = len(dims)
    comp = [a for a in range(n) if a not in region_axes]
    out = np.zeros_like(h, dtype=complex)
    for r in range(len(region_axes) + 1):
        for subset in itertools.combinations(region_axes, r):
            m = h.astype(complex)
            for a in list(subset) + comp:
                m = site_avg_dense(m, dims, a)
            out += (-1) ** r * m
    return out
