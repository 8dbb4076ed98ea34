"""Command-line front end: model files, pipeline subcommands and demos.

Model files are JSON with the shape

    {"sites": [{"id": 1, "dim": 2}, ...],
     "edges": [[1, 2], ...],
     "terms": [{"support": [1, 2], "pauli": "Z Z", "coeff": 1.0},
               {"support": [3], "matrix": {"re": [[..]], "im": [[..]]},
                "coeff": [0.5, 0.0]}],
     "beta": 1.0}

Pauli letters map positionally onto the (sorted) support sites, which must
all be qubits; matrix terms are row-major with separate real and imaginary
parts and must be Hermitian after scaling by ``coeff``.

Exit codes: 0 when the command's claim holds, 2 when it fails (not Markov,
not decomposable, off-clique weight, NotShieldCommuting), 1 on usage or
data errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import families
from .cumulants import expand, verify_clique_support
from .decompose import (
    NOT_SHIELD_COMMUTING,
    classify,
    coarse_grain_model,
    theorem4_decompose,
)
from .errors import (
    DecompositionResidualError,
    ModelFormatError,
    NotMarkovError,
    NotTriangleFreeError,
    QmnError,
)
from .graphs import Graph, to_dot
from .markov import ModelInstance, gibbs, is_markov_network
from .pauli import PauliSum, PauliTerm, as_sum, commutator
from .tensor import SiteSpace, SupportedOperator, logm_pd

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2

_LETTERS = frozenset("IXYZ")


# ---------------------------------------------------------------------------
# model file serialization

def _coeff_from_json(raw: Any, where: str) -> complex:
    if isinstance(raw, (int, float)):
        return complex(raw)
    if (isinstance(raw, list) and len(raw) == 2
            and all(isinstance(x, (int, float)) for x in raw)):
        return complex(raw[0], raw[1])
    raise ModelFormatError(f"{where}.coeff must be a real number or [re, im]")


def _term_from_json(entry: Any, idx: int, space: SiteSpace) -> PauliTerm | SupportedOperator:
    where = f"terms[{idx}]"
    if not isinstance(entry, dict):
        raise ModelFormatError(f"{where} must be an object")
    support = entry.get("support")
    if (not isinstance(support, list) or not support
            or any(not isinstance(s, int) for s in support)):
        raise ModelFormatError(f"{where}.support must be a non-empty list of site ids")
    if sorted(set(support)) != support:
        raise ModelFormatError(f"{where}.support must be sorted and without repeats")
    for s in support:
        if s not in space:
            raise ModelFormatError(f"{where}.support references unknown site {s}")
    coeff = _coeff_from_json(entry.get("coeff", 1.0), where)
    if "pauli" in entry:
        if "matrix" in entry:
            raise ModelFormatError(f"{where} must give either pauli or matrix, not both")
        if coeff.imag != 0.0:
            raise ModelFormatError(f"{where}.coeff must be real for a Pauli term")
        text = entry["pauli"]
        if not isinstance(text, str):
            raise ModelFormatError(f"{where}.pauli must be a string of letters")
        tokens = text.split()
        if len(tokens) != len(support):
            raise ModelFormatError(
                f"{where}.pauli has {len(tokens)} letters for {len(support)} "
                f"support sites")
        letters = {}
        for s, tok in zip(support, tokens):
            up = tok.upper()
            if up not in _LETTERS:
                raise ModelFormatError(f"{where}.pauli: unknown letter {tok!r}")
            if space.dim(s) != 2:
                raise ModelFormatError(
                    f"{where}: Pauli letters need qubit sites, but site {s} "
                    f"has dim {space.dim(s)}")
            if up != "I":
                letters[s] = up
        return PauliTerm.from_letters(coeff.real, letters)
    if "matrix" not in entry:
        raise ModelFormatError(f"{where} needs a pauli string or a matrix")
    block = entry["matrix"]
    if not isinstance(block, dict) or "re" not in block:
        raise ModelFormatError(f"{where}.matrix must be an object with re (and im)")
    try:
        m = np.array(block["re"], dtype=float).astype(complex)
        if "im" in block:
            m = m + 1j * np.array(block["im"], dtype=float)
    except (TypeError, ValueError):
        raise ModelFormatError(f"{where}.matrix entries must be numeric arrays") from None
    d = 1
    for s in support:
        d *= space.dim(s)
    if m.shape != (d, d):
        raise ModelFormatError(
            f"{where}.matrix has shape {m.shape}; support {support} needs "
            f"({d}, {d})")
    m = coeff * m
    scale = max(float(np.abs(m).max()), 1.0)
    if np.abs(m - m.conj().T).max() > 1e-10 * scale:
        raise ModelFormatError(f"{where}.matrix is not Hermitian after coeff")
    return SupportedOperator(tuple(support), m)


def model_from_json(data: Any) -> ModelInstance:
    """Build a model from parsed JSON, with field-level diagnostics."""
    if not isinstance(data, dict):
        raise ModelFormatError("model file must be a JSON object")
    raw_sites = data.get("sites")
    if not isinstance(raw_sites, list) or not raw_sites:
        raise ModelFormatError("sites must be a non-empty list of {id, dim}")
    dims: dict[int, int] = {}
    for k, s in enumerate(raw_sites):
        if not isinstance(s, dict) or not isinstance(s.get("id"), int):
            raise ModelFormatError(f"sites[{k}] must be an object with an integer id")
        d = s.get("dim", 2)
        if not isinstance(d, int) or d < 2:
            raise ModelFormatError(f"sites[{k}].dim must be an integer >= 2")
        if s["id"] in dims:
            raise ModelFormatError(f"sites[{k}]: id {s['id']} repeats")
        dims[s["id"]] = d
    space = SiteSpace.from_dims(dims)
    raw_edges = data.get("edges", [])
    if not isinstance(raw_edges, list):
        raise ModelFormatError("edges must be a list of [id, id] pairs")
    edges = []
    for k, e in enumerate(raw_edges):
        if (not isinstance(e, list) or len(e) != 2
                or any(not isinstance(x, int) for x in e)):
            raise ModelFormatError(f"edges[{k}] must be a pair of site ids")
        if e[0] not in dims or e[1] not in dims:
            raise ModelFormatError(f"edges[{k}] references an unknown site")
        edges.append((e[0], e[1]))
    graph = Graph.from_edges(edges, vertices=sorted(dims))
    raw_terms = data.get("terms")
    if not isinstance(raw_terms, list) or not raw_terms:
        raise ModelFormatError("terms must be a non-empty list")
    terms = tuple(_term_from_json(t, k, space) for k, t in enumerate(raw_terms))
    beta = data.get("beta", 1.0)
    if not isinstance(beta, (int, float)):
        raise ModelFormatError("beta must be a number")
    try:
        return ModelInstance(space, graph, terms, beta=float(beta))
    except QmnError as e:
        raise ModelFormatError(f"model invalid: {e}") from e


def model_to_json(model: ModelInstance) -> dict:
    """JSON form of a model; Pauli words stay symbolic, the rest goes dense."""
    sites = [{"id": s, "dim": d}
             for s, d in zip(model.space.sites, model.space.dims)]
    edges = [[u, v] for u, v in sorted(model.graph.edges)]
    plain = model.site_composition is None
    terms = []
    for t in model.terms:
        word = None
        if plain and isinstance(t, (PauliTerm, PauliSum)):
            s = as_sum(t)
            if len(s.terms) == 1 and abs(s.terms[0].coeff.imag) < 1e-14:
                word = s.terms[0]
        if word is not None:
            sup = sorted(word.support)
            letters = word.letters
            terms.append({"support": sup,
                          "pauli": " ".join(letters.get(s, "I") for s in sup),
                          "coeff": float(word.coeff.real)})
        else:
            op = model.term_operator(t)
            terms.append({"support": list(op.support),
                          "matrix": {"re": op.matrix.real.tolist(),
                                     "im": op.matrix.imag.tolist()},
                          "coeff": 1.0})
    return {"sites": sites, "edges": edges, "terms": terms,
            "beta": float(model.beta)}


def load_model(path: str) -> ModelInstance:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as e:
        raise ModelFormatError(f"{path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: line {e.lineno}: {e.msg}") from e
    return model_from_json(data)


def save_model(model: ModelInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# report plumbing

def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=1)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _maybe_dot(model: ModelInstance, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(to_dot(model.graph))


def _sites(x) -> list[int]:
    return sorted(x)


# ---------------------------------------------------------------------------
# subcommands

def _cmd_verify_markov(args) -> int:
    model = load_model(args.model)
    if args.beta is not None:
        model = ModelInstance(model.space, model.graph, model.terms,
                              beta=args.beta,
                              site_composition=model.site_composition)
    _maybe_dot(model, args.dot)
    rho = gibbs(model)
    rep = is_markov_network(rho, model.graph, tol=args.tol,
                            mode=args.partitions)
    _emit(rep.to_json_dict(), args.out)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _cmd_cumulants(args) -> int:
    model = load_model(args.model)
    _maybe_dot(model, args.dot)
    if args.of == "log-gibbs":
        target = logm_pd(gibbs(model).matrix)
    else:
        target = model.beta * model.hamiltonian()
    exp = expand(target, model.space)
    keys = sorted(exp.entries, key=lambda k: (len(k), tuple(sorted(k))))
    listed = [k for k in keys
              if args.max_support is None or len(k) <= args.max_support]
    listed_mass = sum(exp.norm_sq(k) for k in listed)
    total = exp.total_norm_sq
    gap = max(total - listed_mass, 0.0) / max(total, 1e-300)
    clique = verify_clique_support(exp, model.graph, rtol=args.rtol)
    report = {
        "of": args.of,
        "total_norm_sq": total,
        "supports": [{"sites": _sites(k), "norm_sq": exp.norm_sq(k)}
                     for k in listed],
        "parseval_gap": gap,
        "clique": {
            "pass": clique.passed,
            "off_clique_norm": clique.off_clique_norm,
            "worst": _sites(clique.worst[0]) if clique.witnesses else None,
        },
    }
    _emit(report, args.out)
    return EXIT_PASS if clique.passed else EXIT_FAIL


def _classification_json(c) -> dict:
    return {
        "verdict": c.verdict,
        "pairwise_max": c.pairwise_max,
        "pairwise_worst": list(c.pairwise_worst) if c.pairwise_worst else None,
        "partitions": [{"A": _sites(r.partition.a), "B": _sites(r.partition.b),
                        "C": _sites(r.partition.c), "commuting": r.commuting,
                        "commutator_norm": r.commutator_norm}
                       for r in c.records],
        "witness": ({"A": _sites(c.witness.a), "B": _sites(c.witness.b),
                     "C": _sites(c.witness.c)} if c.witness else None),
    }


def _cmd_classify(args) -> int:
    model = load_model(args.model)
    _maybe_dot(model, args.dot)
    c = classify(model, rtol=args.rtol, search_cap=args.search_cap)
    _emit(_classification_json(c), args.out)
    return EXIT_FAIL if c.verdict == NOT_SHIELD_COMMUTING else EXIT_PASS


def _cmd_decompose(args) -> int:
    model = load_model(args.model)
    _maybe_dot(model, args.dot)
    rho = gibbs(model)
    try:
        dec = theorem4_decompose(rho, model.graph, rtol=args.tol,
                                 support_rtol=args.support_rtol)
    except (NotMarkovError, NotTriangleFreeError,
            DecompositionResidualError) as e:
        _emit({"decomposed": False, "reason": str(e)}, args.report)
        return EXIT_FAIL
    report = {
        "decomposed": True,
        "residual": dec.residual,
        "max_commutator": dec.max_commutator,
        "vertex_terms": [{"site": u, "norm": dec.vertex_terms[u].hs_norm()}
                         for u in sorted(dec.vertex_terms)],
        "edge_terms": [{"edge": list(e), "norm": dec.edge_terms[e].hs_norm()}
                       for e in sorted(dec.edge_terms)],
    }
    _emit(report, args.report)
    if args.out:
        save_model(dec.to_model(), args.out)
    return EXIT_PASS


# ---------------------------------------------------------------------------
# demos

def _claim(lines: list[str], ok: bool, text: str) -> bool:
    lines.append(("[pass] " if ok else "[fail] ") + text)
    return ok


def _demo_counterexample() -> int:
    model = families.cell_model()
    down, left, up, right = model.terms
    names = ("down", "left", "up", "right")
    lines: list[str] = []
    ok = True
    lines.append("pairwise commutator norms:")
    for i, a in enumerate(model.terms):
        for j, b in enumerate(model.terms[i + 1:], start=i + 1):
            c = commutator(as_sum(a), as_sum(b))
            norm = math.sqrt(sum(abs(t.coeff) ** 2 for t in c.terms))
            lines.append(f"  [h_{names[i]}, h_{names[j]}] norm {norm:g}")
    c1 = commutator(PauliSum.of(down, right), PauliSum.of(left, up))
    c2 = commutator(PauliSum.of(down, left), PauliSum.of(up, right))
    ok &= _claim(lines, c1.is_zero and c2.is_zero,
                 "both shield groupings commute exactly (symbolic zero)")
    pair = commutator(as_sum(down), as_sum(left))
    want = PauliSum.of(PauliTerm.from_letters(-2j, {1: "Z", 3: "Z", 5: "Z"}))
    ok &= _claim(lines, (pair - want).is_zero,
                 "[h_down, h_left] = -2i Z1 Z3 Z5, norm 2 > 1")
    rep = is_markov_network(gibbs(model), model.graph, tol=1e-9)
    found = {(tuple(_sites(r.partition.a)), tuple(_sites(r.partition.b)),
              tuple(_sites(r.partition.c))) for r in rep.records}
    expected = {((1,), (2, 4, 5), (3,)), ((2,), (1, 3, 5), (4,))}
    ok &= _claim(lines, rep.passed and found == expected,
                 f"Gibbs state is Markov over exactly the two spanning "
                 f"partitions (max CMI {rep.max_cmi:.2e})")
    verdict = classify(model).verdict
    ok &= _claim(lines, verdict == "ShieldCommutingOnly",
                 f"classification: {verdict}")
    try:
        theorem4_decompose(gibbs(model), model.graph)
        triangle_ok = False
    except NotTriangleFreeError:
        triangle_ok = True
    ok &= _claim(lines, triangle_ok,
                 "commuting decomposition rejected: graph has triangles")
    print("\n".join(lines))
    return EXIT_PASS if ok else EXIT_FAIL


def _demo_coarse_grain() -> int:
    model = families.cell_model()
    merged = coarse_grain_model(model, {5: 1})
    lines: list[str] = []
    ok = True
    sups = sorted(tuple(_sites(merged.term_support(t))) for t in merged.terms)
    ok &= _claim(lines, sups == [(1, 2, 3), (1, 3, 4)],
                 f"merging 5 into 1 leaves two grouped terms on {sups}")
    pairs_zero = all(
        commutator(as_sum(a), as_sum(b)).is_zero
        for i, a in enumerate(merged.terms)
        for b in merged.terms[i + 1:])
    ok &= _claim(lines, pairs_zero, "grouped terms commute exactly (symbolic zero)")
    verdict = classify(merged).verdict
    ok &= _claim(lines, verdict == "LocalCommuting",
                 f"merged model classification: {verdict}")
    print("\n".join(lines))
    return EXIT_PASS if ok else EXIT_FAIL


def _demo_tiling(rows: int, cols: int) -> int:
    model = families.tiling_model(rows, cols, merged=True)
    lines: list[str] = []
    c = classify(model)
    ok = _claim(
        lines, c.verdict == "LocalCommuting" and c.pairwise_max == 0.0,
        f"{rows}x{cols} tiling, northeast-merged: {len(model.space.sites)} "
        f"sites, {len(model.terms)} grouped terms, all symbolic commutators "
        f"exactly zero")
    print("\n".join(lines))
    return EXIT_PASS if ok else EXIT_FAIL


def _cmd_demo(args) -> int:
    name = args.name
    if name == "counterexample":
        return _demo_counterexample()
    if name == "coarse-grain":
        return _demo_coarse_grain()
    if name.startswith("tiling"):
        shape = args.shape or (name.split(None, 1)[1] if " " in name else "3x3")
        try:
            rows, cols = (int(x) for x in shape.lower().split("x"))
        except ValueError:
            raise ModelFormatError(f"tiling shape {shape!r} is not RxC") from None
        return _demo_tiling(rows, cols)
    raise ModelFormatError(f"unknown demo {name!r}")


# ---------------------------------------------------------------------------
# generators

def _cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    fam = args.family
    if fam == "cell":
        model = families.cell_model(beta=args.beta)
    elif fam == "noncommuting-chain":
        model = families.noncommuting_chain(beta=args.beta)
    elif fam == "ising":
        model = families.ising_chain(args.sites, beta=args.beta)
    elif fam == "tiling":
        rows, cols = (int(x) for x in args.shape.lower().split("x"))
        model = families.tiling_model(rows, cols, beta=args.beta)
    elif fam == "random-commuting":
        model = families.random_commuting_model(rng, max_sites=args.sites)
    elif fam == "theorem4":
        model = families.theorem4_model(args.kind, rng)
    else:
        raise ModelFormatError(f"unknown family {fam!r}")
    _maybe_dot(model, args.dot)
    data = model_to_json(model)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")
    else:
        print(json.dumps(data, indent=1))
    return EXIT_PASS


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ModelFormatError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="qmn",
                description="Verify, classify and decompose quantum Markov "
                            "networks from JSON model files.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_model_cmd(name, help_text):
        c = sub.add_parser(name, help=help_text)
        c.add_argument("model", help="path to a JSON model file")
        c.add_argument("--out", help="write the JSON report here instead of stdout")
        c.add_argument("--dot", help="also write the interaction graph in DOT format")
        return c

    c = add_model_cmd("verify-markov",
                      "check I(A:C|B) over all spanning shielding partitions "
                      "of the Gibbs state")
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--partitions", choices=("spanning", "all"), default="spanning")
    c.add_argument("--beta", type=float, default=None,
                   help="override the file's inverse-temperature factor")
    c.set_defaults(func=_cmd_verify_markov)

    c = add_model_cmd("cumulants",
                      "cumulant decomposition with per-support masses, "
                      "Parseval gap and a clique-support check")
    c.add_argument("--of", choices=("log-gibbs", "hamiltonian"),
                   default="log-gibbs")
    c.add_argument("--max-support", type=int, default=None,
                   help="list supports up to this size only")
    c.add_argument("--rtol", type=float, default=1e-10)
    c.set_defaults(func=_cmd_cumulants)

    c = add_model_cmd("classify",
                      "LocalCommuting / ShieldCommutingOnly / NotShieldCommuting")
    c.add_argument("--rtol", type=float, default=1e-9)
    c.add_argument("--search-cap", type=int, default=4096)
    c.set_defaults(func=_cmd_classify)

    c = sub.add_parser("decompose",
                       help="commuting vertex/edge regrouping of log rho on "
                            "a triangle-free graph")
    c.add_argument("model", help="path to a JSON model file")
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--support-rtol", type=float, default=1e-8)
    c.add_argument("--report", help="write the JSON report here instead of stdout")
    c.add_argument("--out", help="write the decomposition as a re-ingestable model file")
    c.add_argument("--dot", help="also write the interaction graph in DOT format")
    c.set_defaults(func=_cmd_decompose)

    c = sub.add_parser("demo", help="run a built-in scenario and print pass/fail claims")
    c.add_argument("name", help="counterexample | coarse-grain | tiling")
    c.add_argument("shape", nargs="?", default=None,
                   help="RxC size for the tiling demo (default 3x3)")
    c.set_defaults(func=_cmd_demo)

    c = sub.add_parser("generate", help="write a built-in model family as a model file")
    c.add_argument("family", choices=("cell", "noncommuting-chain", "ising",
                                      "tiling", "random-commuting", "theorem4"))
    c.add_argument("--sites", type=int, default=5,
                   help="site count for ising / random-commuting")
    c.add_argument("--shape", default="2x2", help="RxC size for tiling")
    c.add_argument("--kind", choices=families.THEOREM4_KINDS, default="path4",
                   help="graph family for theorem4")
    c.add_argument("--beta", type=float, default=1.0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", help="output path (default stdout)")
    c.add_argument("--dot", help="also write the interaction graph in DOT format")
    c.set_defaults(func=_cmd_generate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_PASS if e.code in (0, None) else EXIT_ERROR
        return args.func(args)
    except ModelFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except QmnError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
