import json

import numpy as np
import pytest

from qmn import families
from qmn.cli import main, model_from_json, model_to_json, load_model
from qmn.errors import ModelFormatError
from qmn.markov import gibbs
from qmn.pauli import PauliTerm


def write(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh)
    return str(path)


def read(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def gen(tmp_path, family, *extra):
    out = str(tmp_path / f"{family}-{'-'.join(extra) or 'x'}.json")
    assert main(["generate", family, "--out", out, *extra]) == 0
    return out


# ---------------------------------------------------------------------------
# model file round trips

def test_model_json_round_trip_symbolic():
    model = families.cell_model(beta=0.7)
    data = model_to_json(model)
    assert data["beta"] == 0.7
    assert data["sites"][0] == {"id": 1, "dim": 2}
    assert sorted(tuple(e) for e in data["edges"]) == sorted(model.graph.edges)
    assert data["terms"][0] == {"support": [1, 2, 5], "pauli": "Z Z Y",
                                "coeff": 1.0}
    back = model_from_json(data)
    assert back.space == model.space
    assert back.graph == model.graph
    assert np.allclose(back.hamiltonian(), model.hamiltonian())


def test_model_json_round_trip_dense():
    rng = np.random.default_rng(11)
    for _ in range(4):
        model = families.random_commuting_model(rng, max_sites=5)
        back = model_from_json(model_to_json(model))
        assert np.allclose(back.hamiltonian(), model.hamiltonian(), atol=1e-12)
        assert back.beta == model.beta


def test_model_json_identity_letters_skip_sites():
    term = PauliTerm.from_letters(0.5, {1: "X", 3: "Z"})
    data = {"sites": [{"id": i, "dim": 2} for i in (1, 2, 3)],
            "edges": [[1, 2], [2, 3], [1, 3]],
            "terms": [{"support": [1, 2, 3], "pauli": "X I Z", "coeff": 0.5}]}
    model = model_from_json(data)
    got = model.terms[0]
    assert got.letters == term.letters
    assert got.coeff == term.coeff


def test_model_json_complex_coeff_matrix():
    data = {"sites": [{"id": 1, "dim": 2}], "edges": [],
            "terms": [{"support": [1],
                       "matrix": {"re": [[0, 0], [0, 0]],
                                  "im": [[0, -1], [1, 0]]},
                       "coeff": [2.0, 0.0]}]}
    model = model_from_json(data)
    op = model.terms[0]
    assert np.allclose(op.matrix, 2.0 * np.array([[0, -1j], [1j, 0]]))


def test_merged_model_serializes_dense_and_reloads():
    model = families.tiling_model(2, 2, merged=True)
    data = model_to_json(model)
    assert all("matrix" in t for t in data["terms"])
    back = model_from_json(data)
    assert back.space == model.space
    # full dim 8192 sits over the dense cap, so compare term by term
    for a, b in zip(model.terms, back.terms):
        oa, ob = model.term_operator(a), back.term_operator(b)
        assert oa.support == ob.support
        assert np.allclose(oa.matrix, ob.matrix, atol=1e-12)


BAD_MODELS = [
    ({"sites": [], "terms": []}, "sites"),
    ({"sites": [{"id": 1, "dim": 2}], "terms": "x"}, "terms"),
    ({"sites": [{"id": 1, "dim": 2}, {"id": 1, "dim": 2}], "terms": []},
     "repeats"),
    ({"sites": [{"id": 1, "dim": 1}], "terms": []}, "dim"),
    ({"sites": [{"id": 1, "dim": 2}], "edges": [[1, 2]], "terms": []},
     "edges[0]"),
    ({"sites": [{"id": 1, "dim": 2}], "edges": [],
      "terms": [{"support": [2], "pauli": "Z"}]}, "unknown site 2"),
    ({"sites": [{"id": 1, "dim": 2}], "edges": [],
      "terms": [{"support": [1], "pauli": "Q"}]}, "letter"),
    ({"sites": [{"id": 1, "dim": 2}, {"id": 2, "dim": 2}], "edges": [[1, 2]],
      "terms": [{"support": [1, 2], "pauli": "Z"}]}, "terms[0].pauli"),
    ({"sites": [{"id": 1, "dim": 2}], "edges": [],
      "terms": [{"support": [1], "pauli": "Z", "coeff": [1.0, 0.5]}]},
     "real"),
    ({"sites": [{"id": 1, "dim": 2}], "edges": [],
      "terms": [{"support": [1], "matrix": {"re": [[0, 1], [0, 0]]}}]},
     "Hermitian"),
    ({"sites": [{"id": 1, "dim": 2}], "edges": [],
      "terms": [{"support": [1], "matrix": {"re": [[1.0]]}}]}, "shape"),
    ({"sites": [{"id": 1, "dim": 2}], "edges": [],
      "terms": [{"support": [1]}]}, "pauli string or a matrix"),
    ({"sites": [{"id": 1, "dim": 4}], "edges": [],
      "terms": [{"support": [1], "pauli": "Z"}]}, "dim 4"),
    ({"sites": [{"id": i, "dim": 2} for i in (1, 2, 3)],
      "edges": [[1, 2], [2, 3]],
      "terms": [{"support": [1, 3], "pauli": "Z Z"}]}, "clique"),
    ({"sites": [{"id": 1, "dim": 2}], "edges": [],
      "terms": [{"support": [1], "pauli": "Z"}], "beta": "hot"}, "beta"),
]


@pytest.mark.parametrize("data,fragment", BAD_MODELS)
def test_model_json_diagnostics(data, fragment):
    with pytest.raises(ModelFormatError) as exc:
        model_from_json(data)
    assert fragment.lower() in str(exc.value).lower()


def test_load_model_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelFormatError, match="line 1"):
        load_model(str(path))
    with pytest.raises(ModelFormatError, match="nope"):
        load_model(str(tmp_path / "nope.json"))


# ---------------------------------------------------------------------------
# verify-markov

def test_cli_verify_markov_pass_and_schema(tmp_path, capsys):
    cell = gen(tmp_path, "cell")
    assert main(["verify-markov", cell, "--tol", "1e-9"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["verdict"] == "pass"
    assert rep["max_cmi"] <= 1e-9
    parts = {(tuple(p["A"]), tuple(p["B"]), tuple(p["C"]))
             for p in rep["partitions"]}
    assert parts == {((1,), (2, 4, 5), (3,)), ((2,), (1, 3, 5), (4,))}
    assert all(p["pass"] for p in rep["partitions"])


def test_cli_verify_markov_fail(tmp_path):
    chain = gen(tmp_path, "noncommuting-chain")
    out = str(tmp_path / "rep.json")
    assert main(["verify-markov", chain, "--out", out]) == 2
    rep = read(out)
    assert rep["verdict"] == "fail"
    assert rep["max_cmi"] == pytest.approx(0.052051695401092335, abs=1e-12)


def test_cli_verify_markov_beta_override(tmp_path):
    chain = gen(tmp_path, "noncommuting-chain")
    out = str(tmp_path / "rep.json")
    main(["verify-markov", chain, "--beta", "0.25", "--out", out])
    weak = read(out)["max_cmi"]
    assert 0 < weak < 0.01


def test_cli_verify_markov_all_partitions(tmp_path):
    cell = gen(tmp_path, "cell")
    out = str(tmp_path / "rep.json")
    assert main(["verify-markov", cell, "--partitions", "all",
                 "--out", out]) == 0
    assert read(out)["verdict"] == "pass"


# ---------------------------------------------------------------------------
# cumulants

def test_cli_cumulants_log_gibbs_stays_on_cliques(tmp_path, capsys):
    chain = gen(tmp_path, "noncommuting-chain")
    assert main(["cumulants", chain, "--rtol", "1e-8"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["clique"]["pass"]
    assert rep["parseval_gap"] < 1e-12
    sups = [tuple(s["sites"]) for s in rep["supports"]]
    assert (1, 2) in sups and (2, 3) in sups
    assert all(len(s) < 3 for s in sups)


def test_cli_cumulants_cell_mass_on_triangles(tmp_path, capsys):
    cell = gen(tmp_path, "cell")
    assert main(["cumulants", cell]) == 0
    rep = json.loads(capsys.readouterr().out)
    by_support = {tuple(s["sites"]): s["norm_sq"] for s in rep["supports"]}
    triangles = [(1, 2, 5), (1, 4, 5), (2, 3, 5), (3, 4, 5)]
    assert set(by_support) == {()} | set(triangles)
    # each plaquette is a unit Pauli word, embedded norm 2^5
    for t in triangles:
        assert by_support[t] == pytest.approx(32.0, rel=1e-10)


def test_cli_cumulants_of_hamiltonian(tmp_path, capsys):
    chain = gen(tmp_path, "noncommuting-chain")
    assert main(["cumulants", chain, "--of", "hamiltonian"]) == 0
    rep = json.loads(capsys.readouterr().out)
    sups = [s["sites"] for s in rep["supports"]]
    assert sups == [[1, 2], [2, 3]]


def test_cli_cumulants_max_support_gap(tmp_path, capsys):
    fields = write(tmp_path / "f.json", {
        "sites": [{"id": i, "dim": 2} for i in (1, 2, 3)], "edges": [],
        "terms": [{"support": [1], "pauli": "Z", "coeff": 0.7},
                  {"support": [3], "pauli": "X", "coeff": 0.4}]})
    assert main(["cumulants", fields, "--max-support", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["parseval_gap"] < 1e-12

    ising = gen(tmp_path, "ising", "--sites", "4")
    assert main(["cumulants", ising, "--max-support", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    # two-body coupling mass is hidden by the cap and shows up in the gap
    assert 0.01 < rep["parseval_gap"] < 0.5
    assert all(len(s["sites"]) <= 1 for s in rep["supports"])


# ---------------------------------------------------------------------------
# classify

def test_cli_classify_cell(tmp_path, capsys):
    cell = gen(tmp_path, "cell")
    assert main(["classify", cell]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["verdict"] == "ShieldCommutingOnly"
    assert rep["pairwise_max"] == pytest.approx(2.0)
    assert rep["witness"] is None
    assert len(rep["partitions"]) == 2
    assert all(r["commuting"] for r in rep["partitions"])


def test_cli_classify_ising_local_commuting(tmp_path, capsys):
    ising = gen(tmp_path, "ising", "--sites", "4")
    assert main(["classify", ising]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["verdict"] == "LocalCommuting"
    assert rep["pairwise_max"] == 0.0
    assert rep["partitions"] == []


def test_cli_classify_chain_fails(tmp_path, capsys):
    chain = gen(tmp_path, "noncommuting-chain")
    assert main(["classify", chain]) == 2
    rep = json.loads(capsys.readouterr().out)
    assert rep["verdict"] == "NotShieldCommuting"
    assert rep["witness"] == {"A": [1], "B": [2], "C": [3]}


# ---------------------------------------------------------------------------
# decompose

def test_cli_decompose_round_trip(tmp_path):
    model = gen(tmp_path, "theorem4", "--kind", "path4", "--seed", "3")
    dec = str(tmp_path / "dec.json")
    rep = str(tmp_path / "rep.json")
    assert main(["decompose", model, "--out", dec, "--report", rep]) == 0
    r = read(rep)
    assert r["decomposed"]
    assert r["residual"] < 1e-10
    assert r["max_commutator"] < 1e-10
    assert {v["site"] for v in r["vertex_terms"]} == {1, 2, 3, 4}

    out = str(tmp_path / "cls.json")
    assert main(["classify", dec, "--rtol", "1e-8", "--out", out]) == 0
    assert read(out)["verdict"] == "LocalCommuting"
    assert main(["verify-markov", dec, "--out", out]) == 0
    assert read(out)["verdict"] == "pass"


def test_cli_decompose_preserves_state(tmp_path):
    model = gen(tmp_path, "theorem4", "--kind", "cycle4", "--seed", "5")
    dec = str(tmp_path / "dec.json")
    assert main(["decompose", model, "--out", dec,
                 "--report", str(tmp_path / "r.json")]) == 0
    rho = gibbs(load_model(model))
    rho2 = gibbs(load_model(dec))
    assert np.abs(rho.matrix - rho2.matrix).max() < 1e-10


def test_cli_decompose_rejects_triangles(tmp_path, capsys):
    cell = gen(tmp_path, "cell")
    assert main(["decompose", cell]) == 2
    rep = json.loads(capsys.readouterr().out)
    assert not rep["decomposed"]
    assert "triangle" in rep["reason"].lower()


def test_cli_decompose_rejects_non_markov(tmp_path, capsys):
    chain = gen(tmp_path, "noncommuting-chain")
    assert main(["decompose", chain]) == 2
    rep = json.loads(capsys.readouterr().out)
    assert not rep["decomposed"]


# ---------------------------------------------------------------------------
# demos and generators

@pytest.mark.parametrize("name", ["counterexample", "coarse-grain"])
def test_cli_demo_passes(name, capsys):
    assert main(["demo", name]) == 0
    out = capsys.readouterr().out
    assert "[pass]" in out
    assert "[fail]" not in out


def test_cli_demo_tiling(capsys):
    assert main(["demo", "tiling", "2x3"]) == 0
    out = capsys.readouterr().out
    assert "[fail]" not in out
    assert "12 grouped terms" in out


def test_cli_demo_unknown(capsys):
    assert main(["demo", "nonsense"]) == 1


@pytest.mark.parametrize("kind", families.THEOREM4_KINDS)
def test_cli_generate_theorem4_kinds(tmp_path, kind):
    path = gen(tmp_path, "theorem4", "--kind", kind, "--seed", "2")
    model = load_model(path)
    assert any(d == 4 for d in model.space.dims)


def test_cli_generate_tiling_shape(tmp_path):
    path = gen(tmp_path, "tiling", "--shape", "2x3")
    model = load_model(path)
    # 3x4 corners plus 6 centers, four terms per cell
    assert len(model.space.sites) == 18
    assert len(model.terms) == 24


def test_cli_generate_random_is_seeded(tmp_path):
    a = read(gen(tmp_path, "random-commuting", "--seed", "9"))
    b_path = str(tmp_path / "b.json")
    main(["generate", "random-commuting", "--seed", "9", "--out", b_path])
    assert a == read(b_path)


def test_cli_dot_export(tmp_path):
    cell = gen(tmp_path, "cell")
    dot = str(tmp_path / "g.dot")
    assert main(["classify", cell, "--dot", dot,
                 "--out", str(tmp_path / "r.json")]) == 0
    text = open(dot, encoding="utf-8").read()
    assert text.startswith("graph G {")
    assert "1 -- 2" in text or "2 -- 1" in text


# ---------------------------------------------------------------------------
# exit codes on bad input

def test_cli_usage_errors(tmp_path, capsys):
    assert main(["frobnicate"]) == 1
    capsys.readouterr()
    assert main(["--help"]) == 0
    capsys.readouterr()
    assert main(["verify-markov", str(tmp_path / "missing.json")]) == 1
    err = capsys.readouterr().err
    assert "error" in err


def test_cli_bad_model_is_exit_1(tmp_path, capsys):
    path = write(tmp_path / "bad.json", {
        "sites": [{"id": 1, "dim": 2}, {"id": 2, "dim": 2}],
        "edges": [[1, 2]],
        "terms": [{"support": [1, 2], "pauli": "Z"}]})
    assert main(["classify", path]) == 1
    assert "terms[0]" in capsys.readouterr().err
