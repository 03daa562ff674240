import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ampc.errors import InvalidArgument, ProtocolViolation
from ampc.mpc import (
    NoiseConfig,
    Program,
    TripleDealer,
    add_public,
    add_shares,
    beaver_multiply,
    gen_beaver_triple,
    orchestrate,
    scale_share,
    share_inputs,
    sub_shares,
    transpose_share,
)
from ampc.network import Network, Tag
from ampc.sharing import Share, evaluate_shares, make_share_polynomial, reconstruct

NOISE = NoiseConfig(1.0, 10.0)


def shares_of(secret, T, N, seed=0):
    p = make_share_polynomial(secret, T, N, 1.0, 10.0, np.random.default_rng(seed))
    return {s.index: s for s in evaluate_shares(p)}


def rel_frob(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def test_add_scalar_shares():
    s = add_shares(Share("a", 1, [[2.5]], 1, 2), Share("b", 1, [[1.0]], 1, 2))
    assert s.value[0, 0] == 3.5


def test_add_zero_share_identity():
    a = Share("a", 2, [[1.5 + 2j]], 1, 3)
    assert np.array_equal(add_shares(a, Share("z", 2, [[0.0]], 1, 3)).value, a.value)


def test_add_misaligned():
    with pytest.raises(InvalidArgument):
        add_shares(Share("a", 1, [[1.0]], 1, 2), Share("b", 2, [[1.0]], 1, 2))
    with pytest.raises(InvalidArgument):
        add_shares(Share("a", 1, [[1.0]], 1, 2), Share("b", 1, [[1.0, 2.0]], 1, 2))


def test_linear_ops_reconstruct():
    rng = np.random.default_rng(3)
    X, Y = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
    sx, sy = shares_of(X, 2, 4, 1), shares_of(Y, 2, 4, 2)
    assert np.abs(reconstruct([add_shares(sx[i], sy[i]) for i in sx]) - (X + Y)).max() <= 1e-9
    assert np.abs(reconstruct([sub_shares(sx[i], sy[i]) for i in sx]) - (X - Y)).max() <= 1e-9
    assert np.abs(reconstruct([scale_share(2.5, sx[i]) for i in sx]) - 2.5 * X).max() <= 1e-9
    assert np.abs(reconstruct([add_public(sx[i], 0.5) for i in sx]) - (X + 0.5)).max() <= 1e-9
    assert np.abs(reconstruct([transpose_share(sx[i]) for i in sx]) - X.T).max() <= 1e-9


@pytest.mark.parametrize("l", [1.0, 0.0])
def test_scale_trivial(l):
    a = Share("a", 1, [[2.0, -1.0]], 1, 2)
    assert np.array_equal(scale_share(l, a).value, l * a.value)


def test_scale_rejects_nonfinite():
    with pytest.raises(InvalidArgument):
        scale_share(np.inf, Share("a", 1, [[1.0]], 1, 2))


def test_triple_scalar_identity():
    tr = gen_beaver_triple((1, 1, 1, 1), 1, 2, 1.0, 3.0, np.random.default_rng(0))
    A, B, C = (reconstruct(getattr(tr, p).values()) for p in "abc")
    assert abs(C - A @ B).max() <= 1e-10


def test_triple_shapes():
    tr = gen_beaver_triple((2, 3, 3, 2), 2, 3, 1.0, 3.0, np.random.default_rng(0))
    assert tr.c[1].shape == (2, 2) and tr.a[1].shape == (2, 3) and tr.b[1].shape == (3, 2)
    A, B, C = (reconstruct(getattr(tr, p).values()) for p in "abc")
    assert rel_frob(A @ B, C) <= 1e-8


def test_triple_masks_truncated():
    rng = np.random.default_rng(1)
    for _ in range(100):
        tr = gen_beaver_triple((2, 2, 2, 2), 1, 2, 1.0, 3.0, rng)
        for part in "ab":
            assert np.abs(reconstruct(getattr(tr, part).values())).max() <= 3 + 1e-9


def test_triple_inner_dim_mismatch():
    with pytest.raises(InvalidArgument):
        gen_beaver_triple((2, 3, 2, 2), 1, 2, 1.0, 3.0, np.random.default_rng(0))


def hand_triple(a, b, N=2, T=1):
    """Noiseless triple with chosen masks, for algebra checks."""
    from ampc.mpc import BeaverTriple

    def sh(v, name):
        return {i: Share(name, i, v, T, N) for i in range(1, N + 1)}

    a, b = np.atleast_2d(a), np.atleast_2d(b)
    return BeaverTriple(a.shape + b.shape, sh(a, "A"), sh(b, "B"), sh(a @ b, "C"))


def test_beaver_textbook_example():
    net = Network(2, 1, 0)
    u = {i: Share("u", i, [[2.0]], 1, 2) for i in (1, 2)}
    v = {i: Share("v", i, [[3.0]], 1, 2) for i in (1, 2)}
    out = beaver_multiply(net, u, v, hand_triple(1.0, 1.0))
    assert reconstruct(out.values())[0, 0] == pytest.approx(6.0)
    opened = [m.payload.value[0, 0].real for m in net.transcript if m.tag is Tag.DIFF_SHARE and m.receiver == 1]
    assert sorted(set(opened)) == [1.0, 2.0]  # D = 1, E = 2


def test_beaver_identity_factor():
    net = Network(3, 2, 1)
    V = np.random.default_rng(0).normal(size=(2, 2))
    sh = share_inputs(net, [(1, "U", np.eye(2)), (2, "V", V)], NOISE)
    tr = TripleDealer(net, NOISE).deal([(2, 2, 2, 2)], ["t"])[0]
    assert rel_frob(reconstruct(beaver_multiply(net, sh["U"], sh["V"], tr).values()), V) <= 1e-8


def test_beaver_random_3x3_all_subsets():
    import itertools

    rng = np.random.default_rng(5)
    net = Network(4, 3, 5)
    U, V = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    sh = share_inputs(net, [(1, "U", U), (3, "V", V)], NOISE)
    tr = TripleDealer(net, NOISE).deal([(3, 3, 3, 3)], ["t"])[0]
    out = beaver_multiply(net, sh["U"], sh["V"], tr)
    assert rel_frob(reconstruct(out.values()), U @ V) <= 1e-8
    for sub in itertools.combinations(out.values(), 4):
        assert rel_frob(reconstruct(sub), U @ V) <= 1e-8


def test_triple_is_single_use():
    net = Network(2, 1, 0)
    sh = share_inputs(net, [(1, "u", 2.0), (2, "v", 3.0)], NOISE)
    tr = TripleDealer(net, NOISE).deal([(1, 1, 1, 1)], ["t"])[0]
    beaver_multiply(net, sh["u"], sh["v"], tr)
    with pytest.raises(ProtocolViolation):
        beaver_multiply(net, sh["u"], sh["v"], tr)


def test_dealer_budget():
    net = Network(2, 1, 0)
    dealer = TripleDealer(net, NOISE, budget=1)
    dealer.deal([(1, 1, 1, 1)], ["a"])
    with pytest.raises(ProtocolViolation):
        dealer.deal([(1, 1, 1, 1)], ["b"])


def test_beaver_dim_mismatch():
    net = Network(2, 1, 0)
    sh = share_inputs(net, [(1, "u", np.ones((2, 2))), (2, "v", np.ones((2, 2)))], NOISE)
    tr = TripleDealer(net, NOISE).deal([(1, 1, 1, 1)], ["t"])[0]
    with pytest.raises(InvalidArgument):
        beaver_multiply(net, sh["u"], sh["v"], tr)


@given(st.integers(2, 5), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_beaver_property(N, m, k, n, seed):
    rng = np.random.default_rng(seed)
    T = 1 + seed % (N - 1)
    net = Network(N, T, seed)
    U, V = rng.uniform(-2, 2, (m, k)), rng.uniform(-2, 2, (k, n))
    sh = share_inputs(net, [(1, "U", U), (N, "V", V)], NOISE)
    tr = TripleDealer(net, NOISE).deal([(m, k, k, n)], ["t"])[0]
    assert rel_frob(reconstruct(beaver_multiply(net, sh["U"], sh["V"], tr).values()), U @ V) <= 1e-8


# -- programs -------------------------------------------------------------------------


def run(doc, values, N, T, seed=0, **kw):
    net = Network(N, T, seed)
    return orchestrate(net, Program.from_dict(doc, N), values, NOISE, **kw), net


def test_program_sum():
    doc = {"nodes": [{"id": "y", "op": "add", "args": ["x1", "x2"]}], "inputs": {"x1": 1, "x2": 2},
           "outputs": {"y": "all"}}
    res, _ = run(doc, {"x1": 1.0, "x2": 2.0}, 2, 1)
    assert all(abs(res[i]["y"][0, 0] - 3) <= 1e-9 for i in (1, 2))


def test_program_scale_and_designated_receiver():
    doc = {"nodes": [{"id": "y", "op": "scale", "args": ["x1"], "const": 2}], "inputs": {"x1": 1},
           "outputs": {"y": 2}}
    res, _ = run(doc, {"x1": 1.25}, 2, 1)
    assert res[2]["y"][0, 0] == pytest.approx(2.5, abs=1e-9)
    assert res[1] == {}


def test_program_matches_plain_oracle():
    doc = {"nodes": [{"id": "s", "op": "add", "args": ["x1", "x2"]}, {"id": "y", "op": "mul", "args": ["s", "x3"]}],
           "inputs": {"x1": 1, "x2": 2, "x3": 3}, "outputs": {"y": "all"}}
    vals = {"x1": 0.7, "x2": -1.9, "x3": 3.3}
    res, net = run(doc, vals, 3, 2)
    want = Program.from_dict(doc, 3).evaluate_plain(vals)["y"]
    for i in net.ids:
        assert abs(res[i]["y"] - want).max() <= 1e-8


def test_program_matrix_chain():
    rng = np.random.default_rng(2)
    doc = {"nodes": [{"id": "p", "op": "mul", "args": ["a", "b"]}, {"id": "q", "op": "mul", "args": ["p", "c"]},
                     {"id": "y", "op": "sub", "args": ["q", "d"]}],
           "inputs": {"a": 1, "b": 2, "c": 3, "d": 4}, "outputs": {"y": [1, 4]}}
    vals = {"a": rng.normal(size=(2, 3)), "b": rng.normal(size=(3, 2)), "c": rng.normal(size=(2, 1)),
            "d": rng.normal(size=(2, 1))}
    res, _ = run(doc, vals, 5, 2)
    want = vals["a"] @ vals["b"] @ vals["c"] - vals["d"]
    assert rel_frob(res[4]["y"], want) <= 1e-8


def test_program_stage_order_and_triple_count():
    doc = {"nodes": [{"id": "y", "op": "mul", "args": ["x1", "x2"]}, {"id": "z", "op": "mul", "args": ["y", "x1"]}],
           "inputs": {"x1": 1, "x2": 2}, "outputs": {"z": 1}}
    _, net = run(doc, {"x1": 2.0, "x2": 3.0}, 3, 1)
    tags = [m.tag for m in net.transcript]
    first = {tag: tags.index(tag) for tag in set(tags)}
    assert first[Tag.TRIPLE_SHARE] < first[Tag.DATA_SHARE] < first[Tag.DIFF_SHARE] < first[Tag.RESULT_SHARE]
    assert sum(t is Tag.TRIPLE_SHARE for t in tags) == 2 * 3 * 3  # 2 triples x 3 parts x 3 clients


def test_program_triple_budget_exhausted():
    doc = {"nodes": [{"id": "y", "op": "mul", "args": ["x1", "x2"]}], "inputs": {"x1": 1, "x2": 2},
           "outputs": {"y": 1}}
    with pytest.raises(ProtocolViolation):
        run(doc, {"x1": 1.0, "x2": 1.0}, 2, 1, triple_budget=0)


@pytest.mark.parametrize(
    "doc, msg",
    [
        ({"nodes": [{"id": "y", "op": "add", "args": ["x1", "nope"]}], "inputs": {"x1": 1}, "outputs": {}},
         "unknown input name"),
        ({"nodes": [{"id": "a", "op": "add", "args": ["b", "x"]}, {"id": "b", "op": "add", "args": ["a", "x"]}],
          "inputs": {"x": 1}, "outputs": {}}, "cycle"),
        ({"nodes": [{"id": "y", "op": "div", "args": ["x", "x"]}], "inputs": {"x": 1}, "outputs": {}}, "unsupported"),
        ({"nodes": [], "inputs": {"x": 1}, "outputs": {}, "extra": 1}, "unknown program keys"),
        ({"nodes": [{"id": "y", "op": "scale", "args": ["x"]}], "inputs": {"x": 1}, "outputs": {}}, "const"),
    ],
)
def test_program_validation(doc, msg):
    with pytest.raises(InvalidArgument, match=msg):
        Program.from_dict(doc, 2)


def test_program_missing_value():
    doc = {"nodes": [], "inputs": {"x": 1}, "outputs": {"x": 1}}
    with pytest.raises(InvalidArgument):
        run(doc, {}, 2, 1)


def test_program_json_roundtrip():
    text = json.dumps({"nodes": [{"id": "y", "op": "add", "args": ["a", "b"]}], "inputs": {"a": 1, "b": 2},
                       "outputs": {"y": "all"}})
    prog = Program.from_json(text, 3)
    assert prog.outputs == {"y": [1, 2, 3]} and prog.n_multiplications() == 0
