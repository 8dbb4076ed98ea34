"""Shield splits, commutation classification and commuting decompositions.

The pipeline realized here: a positive state that is a Markov network on a
triangle-free graph has log rho with cumulants on vertices and edges only,
edge cumulants that commute whenever they share a vertex, and vertex
cumulants K_u that split as h_u + sum_v G_u^v where G_u^v commutes with the
site-u Schmidt factors of every other edge at u and h_u commutes with all
of them.  Regrouping K_uv + G_u^v + G_v^u per edge then yields pairwise
commuting terms whose sum is log rho.

Splitting across one shielding partition (``split_shield``) and the
model-level three-way classification (``classify``) reuse the same
bookkeeping: cumulants or terms are assigned to the A side, the C side, or
searched over when they sit inside the shield.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cumulants import CumulantExpansion, expand, verify_clique_support
from .errors import (
    CrossCumulantError,
    DecompositionResidualError,
    EnumerationCapError,
    NotMarkovError,
    NotTriangleFreeError,
    UnknownSiteError,
)
from .graphs import (
    Graph,
    Partition,
    cliques,
    coarse_grain,
    is_triangle_free,
    spanning_shield_partitions,
)
from .markov import DensityMatrix, ModelInstance
from .pauli import PauliSum, as_sum, commutator
from .tensor import (
    SiteSpace,
    SupportedOperator,
    embed,
    expm_herm,
    hs_norm,
    logm_pd,
    op_schmidt,
)

DEFAULT_RTOL = 1e-9
SPLIT_SEARCH_CAP = 4096

LOCAL_COMMUTING = "LocalCommuting"
SHIELD_COMMUTING_ONLY = "ShieldCommutingOnly"
NOT_SHIELD_COMMUTING = "NotShieldCommuting"


# ---------------------------------------------------------------------------
# operator subspace utilities

def _vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m, dtype=complex).reshape(-1)


def _orthonormal_span(mats: Iterable[np.ndarray], atol: float = 1e-12
                      ) -> list[np.ndarray]:
    """Gram-Schmidt over vectorized matrices, dropping dependent directions."""
    basis: list[np.ndarray] = []
    shape = None
    for m in mats:
        shape = m.shape
        v = _vec(m)
        for b in basis:
            v = v - np.vdot(b, v) * b
        n = np.linalg.norm(v)
        if n > atol * max(1.0, np.linalg.norm(_vec(m))):
            basis.append(v / n)
    return [b.reshape(shape) for b in basis] if shape is not None else []


def _algebra_closure(gens: Sequence[np.ndarray], dim: int,
                     atol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormal basis of the associative, adjoint-closed algebra of gens."""
    seed = []
    for g in gens:
        seed.append(g)
        seed.append(g.conj().T)
    basis = _orthonormal_span(seed, atol)
    while basis and len(basis) < dim * dim:
        products = [a @ b for a in basis for b in basis]
        grown = _orthonormal_span(basis + products, atol)
        if len(grown) == len(basis):
            break
        basis = grown
    return basis


def _commutant_basis(gens: Sequence[np.ndarray], dim: int,
                     rtol: float = DEFAULT_RTOL) -> list[np.ndarray]:
    """Orthonormal basis of {M : [M, g] = 0 for all g}.

    Null space of the positive form sum_g ||[M, g]||^2; with no generators
    the commutant is everything.
    """
    d2 = dim * dim
    eye = np.eye(dim, dtype=complex)
    form = np.zeros((d2, d2), dtype=complex)
    for g in gens:
        s = np.kron(g, eye) - np.kron(eye, g.T)
        form += s.conj().T @ s
    w, v = np.linalg.eigh(form)
    cut = rtol * max(float(w[-1]), 1e-300) if len(gens) else np.inf
    return [v[:, k].reshape(dim, dim) for k in range(d2) if w[k] <= cut]


def _intersect_spans(a: Sequence[np.ndarray], b: Sequence[np.ndarray],
                     atol: float = 1e-9) -> list[np.ndarray]:
    """Intersection of two orthonormal matrix spans."""
    if not a or not b:
        return []
    qa = np.stack([_vec(m) for m in a], axis=1)
    qb = np.stack([_vec(m) for m in b], axis=1)
    _, s, vh = np.linalg.svd(qb.conj().T @ qa)
    out = []
    for k, sv in enumerate(s):
        if sv >= 1.0 - atol:
            out.append((qa @ vh[k].conj()).reshape(a[0].shape))
    return out


def _hermitian_span(mats: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Real-orthonormal Hermitian basis of an adjoint-closed complex span."""
    cands = []
    for m in mats:
        cands.append((m + m.conj().T) / 2)
        cands.append((m - m.conj().T) / 2j)
    basis: list[np.ndarray] = []
    for m in cands:
        v = m.astype(complex)
        for b in basis:
            v = v - np.real(np.vdot(b, v)) * b
        n = hs_norm(v)
        if n > 1e-12 * max(1.0, hs_norm(m)):
            basis.append(v / n)
    return basis


# ---------------------------------------------------------------------------
# shield splits of an expansion

@dataclass(frozen=True)
class ShieldSplit:
    """One expansion regrouped across a shielding partition."""

    partition: Partition
    h_ab: SupportedOperator
    h_bc: SupportedOperator
    commuting: bool
    commutator_norm: float
    assignment: dict[frozenset[int], str]


def _assemble(entries: Iterable[SupportedOperator], sites: tuple[int, ...],
              space: SiteSpace) -> SupportedOperator:
    sub = space.subspace(sites)
    out = np.zeros((sub.total_dim, sub.total_dim), dtype=complex)
    for op in entries:
        out += embed(op, sub)
    return SupportedOperator(sites, out)


def split_shield(expansion: CumulantExpansion, partition: Partition,
                 rtol: float = DEFAULT_RTOL,
                 search_cap: int = SPLIT_SEARCH_CAP) -> ShieldSplit:
    """Split an expansion into commuting halves across a shielding partition.

    Components meeting A go to the A side, components meeting C to the C
    side; a component meeting both is a contradiction with shielding and
    raises.  Components inside B default to the A side; if the default
    grouping fails to commute, all 2^k reassignments are searched (capped)
    and the best grouping is returned with ``commuting`` reporting whether
    the commutator vanished within tolerance.
    """
    space = expansion.space
    if partition.union != set(space.sites):
        raise UnknownSiteError(
            f"partition {sorted(partition.union)} must cover all sites "
            f"{list(space.sites)}")
    set_a, set_b, set_c = partition.a, partition.b, partition.c
    ab_sites = tuple(sorted(set_a | set_b))
    bc_sites = tuple(sorted(set_b | set_c))
    side_ab: list[SupportedOperator] = []
    side_bc: list[SupportedOperator] = []
    inner: list[tuple[frozenset[int], SupportedOperator]] = []
    for key, op in expansion.entries.items():
        if key & set_a and key & set_c:
            norm = math.sqrt(expansion.norm_sq(key))
            raise CrossCumulantError(
                f"cumulant on {sorted(key)} meets both A {sorted(set_a)} "
                f"and C {sorted(set_c)} (norm {norm:.3e})",
                support=key, norm=norm)
        if key & set_a:
            side_ab.append(op)
        elif key & set_c:
            side_bc.append(op)
        elif key:
            inner.append((key, op))
        else:
            side_ab.append(op)  # scalar component commutes; keep it on A side

    def build(mask: int) -> tuple[SupportedOperator, SupportedOperator]:
        ab = list(side_ab)
        bc = list(side_bc)
        for i, (_, op) in enumerate(inner):
            (bc if mask >> i & 1 else ab).append(op)
        return _assemble(ab, ab_sites, space), _assemble(bc, bc_sites, space)

    def comm_norm(h_ab: SupportedOperator, h_bc: SupportedOperator
                  ) -> tuple[float, float]:
        da = embed(h_ab, space)
        db = embed(h_bc, space)
        scale = hs_norm(da) * hs_norm(db)
        return hs_norm(da @ db - db @ da), scale

    best_mask = 0
    h_ab, h_bc = build(0)
    best_norm, scale = comm_norm(h_ab, h_bc)
    if best_norm > rtol * max(scale, 1e-300):
        trials = 1 << len(inner)
        if trials > search_cap:
            raise EnumerationCapError(
                f"{len(inner)} shield-internal components need {trials} "
                f"groupings, above the cap {search_cap}")
        for mask in range(1, trials):
            cand_ab, cand_bc = build(mask)
            norm, cand_scale = comm_norm(cand_ab, cand_bc)
            if norm < best_norm:
                best_mask, best_norm, scale = mask, norm, cand_scale
                h_ab, h_bc = cand_ab, cand_bc
                if norm <= rtol * max(cand_scale, 1e-300):
                    break
    assignment = {key: ("BC" if best_mask >> i & 1 else "AB")
                  for i, (key, _) in enumerate(inner)}
    commuting = best_norm <= rtol * max(scale, 1e-300)
    return ShieldSplit(partition, h_ab, h_bc, commuting, best_norm, assignment)


def gibbs_factors(rho: DensityMatrix, partition: Partition,
                  rtol: float = DEFAULT_RTOL
                  ) -> tuple[SupportedOperator, SupportedOperator]:
    """Factor a positive state as rho = F_AB F_BC across a shielding partition.

    The factors are exponentials of the two halves of log rho and commute,
    so their product in either order reproduces the state.
    """
    split = split_shield(expand(logm_pd(rho.matrix), rho.space), partition,
                         rtol=rtol)
    if not split.commuting:
        raise NotMarkovError(
            f"halves of log rho do not commute across "
            f"({sorted(partition.a)}|{sorted(partition.b)}|{sorted(partition.c)}): "
            f"residual {split.commutator_norm:.3e}")
    f_ab = SupportedOperator(split.h_ab.support, expm_herm(split.h_ab.matrix))
    f_bc = SupportedOperator(split.h_bc.support, expm_herm(split.h_bc.matrix))
    return f_ab, f_bc


# ---------------------------------------------------------------------------
# pairwise commutation and classification

@dataclass(frozen=True)
class PairwiseCommutation:
    """Largest relative commutator norm over pairs of operators."""

    commuting: bool
    max_norm: float
    worst: tuple[int, int] | None


def pairwise_commutation(ops: Sequence[SupportedOperator], space: SiteSpace,
                         rtol: float = DEFAULT_RTOL) -> PairwiseCommutation:
    """Check all overlapping pairs; norms are relative to the operand norms."""
    worst: tuple[int, int] | None = None
    max_norm = 0.0
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            shared = set(ops[i].support) & set(ops[j].support)
            if not shared:
                continue
            union = tuple(sorted(set(ops[i].support) | set(ops[j].support)))
            sub = space.subspace(union)
            a, b = embed(ops[i], sub), embed(ops[j], sub)
            scale = hs_norm(a) * hs_norm(b)
            if scale == 0.0:
                continue
            rel = hs_norm(a @ b - b @ a) / scale
            if rel > max_norm:
                max_norm, worst = rel, (i, j)
    return PairwiseCommutation(max_norm <= rtol, max_norm, worst)


@dataclass(frozen=True)
class ShieldRecord:
    partition: Partition
    commuting: bool
    commutator_norm: float


@dataclass(frozen=True)
class Classification:
    """Three-way commutation structure of a model."""

    verdict: str
    pairwise_max: float
    pairwise_worst: tuple[int, int] | None
    records: tuple[ShieldRecord, ...]
    witness: Partition | None

    @property
    def locally_commuting(self) -> bool:
        return self.verdict == LOCAL_COMMUTING


def _symbolic_norm(s: PauliSum) -> float:
    """Dimension-normalized Hilbert-Schmidt norm of a Pauli sum."""
    return math.sqrt(sum(abs(t.coeff) ** 2 for t in s.terms))


def _classify_symbolic_pair(model: ModelInstance) -> tuple[float, tuple[int, int] | None]:
    terms = [as_sum(t) for t in model.terms]
    max_norm, worst = 0.0, None
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            c = commutator(terms[i], terms[j])
            if not c.is_zero:
                scale = _symbolic_norm(terms[i]) * _symbolic_norm(terms[j])
                rel = _symbolic_norm(c) / max(scale, 1e-300)
                if rel > max_norm:
                    max_norm, worst = rel, (i, j)
    return max_norm, worst


def _grouping_record_symbolic(model: ModelInstance, p: Partition,
                              search_cap: int) -> ShieldRecord:
    ab: list[PauliSum] = []
    bc: list[PauliSum] = []
    inner: list[PauliSum] = []
    for t in model.terms:
        sup = set(model.term_support(t))
        s = as_sum(t)
        if sup & p.a:
            ab.append(s)
        elif sup & p.c:
            bc.append(s)
        else:
            inner.append(s)
    trials = 1 << len(inner)
    if trials > search_cap:
        raise EnumerationCapError(
            f"{len(inner)} shield-internal terms need {trials} groupings, "
            f"above the cap {search_cap}")
    best = math.inf
    for mask in range(trials):
        h_ab = PauliSum.zero()
        h_bc = PauliSum.zero()
        for s in ab:
            h_ab = h_ab + s
        for s in bc:
            h_bc = h_bc + s
        for i, s in enumerate(inner):
            if mask >> i & 1:
                h_bc = h_bc + s
            else:
                h_ab = h_ab + s
        c = commutator(h_ab, h_bc)
        if c.is_zero:
            return ShieldRecord(p, True, 0.0)
        scale = max(_symbolic_norm(h_ab) * _symbolic_norm(h_bc), 1e-300)
        best = min(best, _symbolic_norm(c) / scale)
    return ShieldRecord(p, False, best)


def _grouping_record_dense(model: ModelInstance, p: Partition, rtol: float,
                           search_cap: int) -> ShieldRecord:
    ab, bc, inner = [], [], []
    for t in model.terms:
        sup = frozenset(model.term_support(t))
        op = model.term_operator(t)
        if sup & p.a and sup & p.c:
            raise CrossCumulantError(
                f"term on {sorted(sup)} meets both sides of the partition",
                support=sup, norm=op.hs_norm())
        if sup & p.a:
            ab.append(op)
        elif sup & p.c:
            bc.append(op)
        else:
            inner.append(op)
    space = model.space
    ab_sites = tuple(sorted(p.a | p.b))
    bc_sites = tuple(sorted(p.b | p.c))
    trials = 1 << len(inner)
    if trials > search_cap:
        raise EnumerationCapError(
            f"{len(inner)} shield-internal terms need {trials} groupings, "
            f"above the cap {search_cap}")
    best = math.inf
    for mask in range(trials):
        ha = list(ab)
        hb = list(bc)
        for i, op in enumerate(inner):
            (hb if mask >> i & 1 else ha).append(op)
        da = embed(_assemble(ha, ab_sites, space), space)
        db = embed(_assemble(hb, bc_sites, space), space)
        scale = max(hs_norm(da) * hs_norm(db), 1e-300)
        rel = hs_norm(da @ db - db @ da) / scale
        best = min(best, rel)
        if best <= rtol:
            return ShieldRecord(p, True, best)
    return ShieldRecord(p, False, best)


def classify(model: ModelInstance, rtol: float = DEFAULT_RTOL,
             search_cap: int = SPLIT_SEARCH_CAP) -> Classification:
    """Sort a model into one of three commutation classes.

    ``LocalCommuting``: the given terms already commute pairwise (checked
    exactly for Pauli models).  ``ShieldCommutingOnly``: they do not, but
    across every spanning shielding partition some grouping of the terms
    into the two sides commutes.  ``NotShieldCommuting``: some partition
    admits no commuting grouping; that partition is the witness.

    Only the pairwise stage runs for locally commuting models, so those are
    classified symbolically at any system size.
    """
    if model.all_pauli():
        pair_max, pair_worst = _classify_symbolic_pair(model)
    else:
        rep = pairwise_commutation([model.term_operator(t) for t in model.terms],
                                   model.space, rtol)
        pair_max, pair_worst = rep.max_norm, rep.worst
    if pair_worst is None or pair_max <= rtol:
        return Classification(LOCAL_COMMUTING, pair_max, pair_worst, (), None)
    records = []
    for p in spanning_shield_partitions(model.graph):
        if model.all_pauli():
            rec = _grouping_record_symbolic(model, p, search_cap)
        else:
            rec = _grouping_record_dense(model, p, rtol, search_cap)
        records.append(rec)
        if not rec.commuting:
            return Classification(NOT_SHIELD_COMMUTING, pair_max, pair_worst,
                                  tuple(records), p)
    return Classification(SHIELD_COMMUTING_ONLY, pair_max, pair_worst,
                          tuple(records), None)


# ---------------------------------------------------------------------------
# interaction algebras and the star decomposition

@dataclass(frozen=True)
class InteractionAlgebra:
    """Algebra generated by a family of single-site operators."""

    dim: int
    basis: tuple[np.ndarray, ...]
    commutant: tuple[np.ndarray, ...]
    center: tuple[np.ndarray, ...]

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.basis), len(self.commutant), len(self.center)


def interaction_algebra(gens: Sequence[np.ndarray], dim: int,
                        rtol: float = DEFAULT_RTOL) -> InteractionAlgebra:
    basis = _algebra_closure(list(gens), dim)
    comm = _commutant_basis(basis, dim, rtol)
    center = _intersect_spans(basis, comm)
    return InteractionAlgebra(dim, tuple(basis), tuple(comm), tuple(center))


@dataclass(frozen=True)
class StarDecomposition:
    """One vertex cumulant split into a free part plus per-edge pulls."""

    vertex: int
    vertex_term: SupportedOperator
    pulls: dict[int, SupportedOperator]
    residual: float


def _real_columns(mats: Sequence[np.ndarray]) -> np.ndarray:
    cols = [np.concatenate([_vec(m).real, _vec(m).imag]) for m in mats]
    return np.stack(cols, axis=1)


def star_decompose(k_u: SupportedOperator, edge_cumulants: Mapping[int, SupportedOperator],
                   u: int, space: SiteSpace,
                   rtol: float = DEFAULT_RTOL) -> StarDecomposition:
    """Split K_u as h_u + sum_v G_u^v compatible with the edge cumulants.

    The pull toward edge (u, v) must commute with every other edge term at
    u, so G_u^v is sought in the commutant of the algebra generated by the
    site-u Schmidt factors of all edges except (u, v); h_u is forced into
    the commutant of the joint algebra.  A residual above tolerance rejects
    the split.  The commutant itself belongs to every pull space, so after
    the least-squares fit that shared part is stripped from the pulls and
    folded into h_u, which makes the split canonical.
    """
    if k_u.support != (u,):
        raise UnknownSiteError(f"vertex cumulant must sit on ({u},), got "
                               f"{k_u.support}")
    d = space.dim(u)
    factor_gens: dict[int, list[np.ndarray]] = {}
    for v, kuv in edge_cumulants.items():
        if set(kuv.support) != {u, v}:
            raise UnknownSiteError(
                f"edge cumulant for ({u},{v}) has support {kuv.support}")
        factor_gens[v] = [f.matrix for f, _, _ in op_schmidt(kuv, space, [u])]
    algebras = {v: _algebra_closure(g, d) for v, g in factor_gens.items()}
    joint = _algebra_closure([m for g in algebras.values() for m in g], d)
    comm = _commutant_basis(joint, d, rtol)
    herm_comm = _hermitian_span(comm)
    order = sorted(algebras)
    pull_spans: dict[int, list[np.ndarray]] = {}
    for v in order:
        others = [m for w in order if w != v for m in algebras[w]]
        pull_spans[v] = _hermitian_span(_commutant_basis(others, d, rtol))

    target = np.concatenate([_vec(k_u.matrix).real, _vec(k_u.matrix).imag])
    scale = max(hs_norm(k_u.matrix), 1e-300)

    groups = [(None, herm_comm)] + [(v, pull_spans[v]) for v in order]
    mats = [m for _, g in groups for m in g]
    a = _real_columns(mats)
    coef, *_ = np.linalg.lstsq(a, target, rcond=None)
    fit = sum(c * m for c, m in zip(coef, mats))
    res = float(hs_norm(k_u.matrix - fit))
    if res > rtol * scale:
        raise DecompositionResidualError(
            f"vertex cumulant at {u} leaves residual {res:.3e} "
            f"(scale {scale:.3e}) outside the ansatz", residual=res)

    parts: dict[int | None, np.ndarray] = {}
    k = 0
    for name, g in groups:
        part = np.zeros((d, d), dtype=complex)
        for m in g:
            part = part + coef[k] * m
            k += 1
        parts[name] = part

    h_u = parts[None]
    pulls: dict[int, np.ndarray] = {v: parts[v] for v in order}
    # the joint commutant sits inside every pull space; that overlap is h_u's
    for v in order:
        for b in comm:
            w = np.vdot(_vec(b), _vec(pulls[v]))
            pulls[v] = pulls[v] - w * b
            h_u = h_u + w * b
    h_u = (h_u + h_u.conj().T) / 2
    pull_ops = {v: SupportedOperator((u,), (m + m.conj().T) / 2)
                for v, m in pulls.items()}
    return StarDecomposition(u, SupportedOperator((u,), h_u), pull_ops, res)


# ---------------------------------------------------------------------------
# the full decomposition of a state

@dataclass(frozen=True)
class CommutingDecomposition:
    """log rho regrouped into pairwise commuting vertex and edge terms."""

    space: SiteSpace
    graph: Graph
    vertex_terms: dict[int, SupportedOperator]
    edge_terms: dict[tuple[int, int], SupportedOperator]
    max_commutator: float
    residual: float

    def terms(self) -> tuple[SupportedOperator, ...]:
        vs = [self.vertex_terms[u] for u in sorted(self.vertex_terms)]
        es = [self.edge_terms[e] for e in sorted(self.edge_terms)]
        return tuple(vs + es)

    def reconstruct(self) -> np.ndarray:
        d = self.space.total_dim
        out = np.zeros((d, d), dtype=complex)
        for op in self.terms():
            out += embed(op, self.space)
        return out

    def to_model(self) -> ModelInstance:
        return ModelInstance(self.space, self.graph, self.terms(), beta=1.0)


def theorem4_decompose(rho: DensityMatrix, graph: Graph,
                       rtol: float = DEFAULT_RTOL,
                       support_rtol: float = 1e-8) -> CommutingDecomposition:
    """Commuting vertex/edge Hamiltonian for a Markov state on a triangle-free graph.

    Checks, in order: the graph is triangle-free; log rho has cumulants on
    vertices and edges only (up to ``support_rtol``); edge cumulants sharing
    a vertex commute.  Then every vertex cumulant is star-decomposed and the
    pulls folded into the edge terms.  The result reconstructs log rho and
    its terms commute pairwise; both properties are re-verified before
    returning.
    """
    if graph.vertices != set(rho.space.sites):
        raise UnknownSiteError("graph vertices must match state sites")
    if not is_triangle_free(graph):
        raise NotTriangleFreeError(
            "decomposition requires a triangle-free interaction graph")
    space = rho.space
    log_rho = logm_pd(rho.matrix)
    exp = expand(log_rho, space)
    support_rep = verify_clique_support(exp, graph, rtol=support_rtol)
    if not support_rep.passed:
        raise NotMarkovError(
            f"log rho carries weight {support_rep.off_clique_norm:.3e} outside "
            f"the graph cliques, worst on {support_rep.worst[0]}")

    edge_keys = {frozenset(e): e for e in graph.edges}
    edge_cumulants = {edge_keys[k]: exp.entries[k]
                      for k in exp.entries if k in edge_keys}
    for (e1, op1), (e2, op2) in combinations(edge_cumulants.items(), 2):
        if not set(e1) & set(e2):
            continue
        union = tuple(sorted(set(e1) | set(e2)))
        sub = space.subspace(union)
        a, b = embed(op1, sub), embed(op2, sub)
        scale = max(hs_norm(a) * hs_norm(b), 1e-300)
        rel = hs_norm(a @ b - b @ a) / scale
        if rel > support_rtol:
            raise NotMarkovError(
                f"edge cumulants on {e1} and {e2} do not commute "
                f"(relative norm {rel:.3e})")

    n = len(space.sites)
    k0 = float(exp.operator(()).matrix[0, 0].real)
    vertex_terms: dict[int, SupportedOperator] = {}
    edge_terms: dict[tuple[int, int], np.ndarray] = {
        e: op.matrix.copy() for e, op in edge_cumulants.items()}
    for u in sorted(graph.vertices):
        k_u = exp.operator((u,))
        local = {v: edge_cumulants[e] for e in edge_cumulants
                 for v in e if u in e and v != u}
        star = star_decompose(k_u, local, u, space, rtol=rtol)
        shift = (k0 / n) * np.eye(space.dim(u), dtype=complex)
        vertex_terms[u] = SupportedOperator((u,), star.vertex_term.matrix + shift)
        for v, g in star.pulls.items():
            e = tuple(sorted((u, v)))
            sub = space.subspace(e)
            edge_terms[e] = edge_terms[e] + embed(g, sub)

    final_edges = {e: SupportedOperator(e, m) for e, m in edge_terms.items()}
    dec = CommutingDecomposition(space, graph, vertex_terms, final_edges,
                                 0.0, 0.0)
    rep = pairwise_commutation(dec.terms(), space, rtol=support_rtol)
    scale = max(hs_norm(log_rho), 1e-300)
    residual = hs_norm(dec.reconstruct() - log_rho) / scale
    if not rep.commuting:
        raise DecompositionResidualError(
            f"regrouped terms fail to commute (relative norm {rep.max_norm:.3e})",
            residual=rep.max_norm)
    if residual > support_rtol:
        raise DecompositionResidualError(
            f"decomposition misses log rho by relative {residual:.3e}",
            residual=residual)
    return CommutingDecomposition(space, graph, vertex_terms, final_edges,
                                  rep.max_norm, residual)


# ---------------------------------------------------------------------------
# coarse-graining of models

def _maximal_cliques(graph: Graph) -> list[tuple[int, ...]]:
    all_cliques = cliques(graph)
    out = []
    sets = [set(c) for c in all_cliques]
    for i, c in enumerate(all_cliques):
        if not any(sets[i] < sets[j] for j in range(len(sets))):
            out.append(c)
    return out


def coarse_grain_model(model: ModelInstance, merge: dict[int, int],
                       require_adjacent: bool = True) -> ModelInstance:
    """Merge sites of a Pauli model, regrouping terms by quotient clique.

    Terms whose merged supports land in the same maximal clique of the
    quotient graph are summed into one symbolic term; Pauli letters keep
    their original qubit ids via the site composition of the merged model.
    Groupings that fail to commute are permitted here; ``classify`` on the
    result tells whether merging produced a locally commuting model.
    """
    if not model.all_pauli():
        raise ValueError("coarse graining regroups symbolic terms; "
                         "all model terms must be Pauli sums")
    qgraph, site_map = coarse_grain(model.graph, merge, require_adjacent)
    old_comp = model.site_composition or {s: (s,) for s in model.space.sites}
    for s in model.space.sites:
        if model.space.dim(s) != 2 ** len(old_comp[s]):
            raise ValueError(
                f"site {s} has dim {model.space.dim(s)}; merged sites must "
                f"be composed of qubits")
    new_comp: dict[int, tuple[int, ...]] = {}
    for old, new in site_map.items():
        new_comp.setdefault(new, ())
        new_comp[new] = tuple(sorted(new_comp[new] + old_comp[old]))
    dims = {s: 2 ** len(qs) for s, qs in new_comp.items()}
    new_space = SiteSpace.from_dims(dims)
    maximal = _maximal_cliques(qgraph)
    grouped: dict[tuple[int, ...], PauliSum] = {}
    for t in model.terms:
        sup = {site_map[s] for s in model.term_support(t)}
        home = next(c for c in maximal if sup <= set(c))
        grouped.setdefault(home, PauliSum.zero())
        grouped[home] = grouped[home] + as_sum(t)
    terms = tuple(grouped[c] for c in sorted(grouped, key=lambda c: (len(c), c)))
    return ModelInstance(new_space, qgraph, terms, beta=model.beta,
                         site_composition=new_comp)
