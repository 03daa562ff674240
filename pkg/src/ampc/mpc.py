"""Computation over shares: local linear operations, Beaver-triple
multiplication with an offline dealer, and execution of small arithmetic
programs across the simulated clients."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, ProtocolViolation
from .network import DEALER, Network, Tag, by_label
from .numerics import truncated_gaussian_array
from .sharing import Share, as_matrix, evaluate_shares, interpolate, make_share_polynomial, reconstruct


@dataclass(frozen=True)
class NoiseConfig:
    """Share noise (per-coefficient ``sigma_s``, truncation ``t``) and the
    distribution of triple masks. Triple masks default to the combined share
    noise ``sigma_s * sqrt(T)`` and the same ``t``."""

    sigma_s: float
    t: float
    triple_sigma: float | None = None
    triple_t: float | None = None

    def mask_sigma(self, T: int) -> float:
        return self.sigma_s * math.sqrt(T) if self.triple_sigma is None else self.triple_sigma

    def mask_t(self) -> float:
        return self.t if self.triple_t is None else self.triple_t


def _check_pair(a: Share, b: Share):
    if a.index != b.index or (a.T, a.N) != (b.T, b.N):
        raise InvalidArgument(f"shares at index {a.index} and {b.index} are not aligned")


def add_shares(a: Share, b: Share) -> Share:
    _check_pair(a, b)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch {a.shape} vs {b.shape}")
    return a.with_value(a.value + b.value, f"({a.secret_id}+{b.secret_id})")


def sub_shares(a: Share, b: Share) -> Share:
    _check_pair(a, b)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch {a.shape} vs {b.shape}")
    return a.with_value(a.value - b.value, f"({a.secret_id}-{b.secret_id})")


def scale_share(l: float, a: Share) -> Share:
    if not np.isfinite(l):
        raise InvalidArgument("scale factor must be finite")
    return a.with_value(l * a.value, f"{l:g}*{a.secret_id}")


def add_public(a: Share, c) -> Share:
    """Share of ``secret + c`` for a public constant ``c``."""
    return a.with_value(a.value + c)


def transpose_share(a: Share) -> Share:
    return a.with_value(a.value.T, f"{a.secret_id}^T")


# -- offline phase ---------------------------------------------------------


@dataclass
class BeaverTriple:
    """Per-client shares of random ``A``, ``B`` and ``C = A @ B``."""

    dims: tuple[int, int, int, int]
    a: dict[int, Share]
    b: dict[int, Share]
    c: dict[int, Share]
    label: str = "triple"
    used: bool = field(default=False, compare=False)

    def consume(self):
        if self.used:
            raise ProtocolViolation(f"triple {self.label} already used; every multiplication needs a fresh triple")
        self.used = True


def gen_beaver_triple(dims, T: int, N: int, sigma: float, t: float, rng, sigma_s: float | None = None,
                      share_t: float | None = None, label: str = "triple") -> BeaverTriple:
    """Sample ``A``, ``B`` with i.i.d. TN(0, sigma^2; [-t, t]) entries and
    share ``A``, ``B``, ``AB``. Plaintexts do not outlive this call.
    ``sigma == 0`` gives all-zero masks (noiseless mode)."""
    m1, n1, m2, n2 = dims
    if n1 != m2:
        raise InvalidArgument(f"inner dimensions differ: {n1} != {m2}")
    if sigma == 0:
        A, B = np.zeros((m1, n1)), np.zeros((m2, n2))
    else:
        A = truncated_gaussian_array(sigma, t, (m1, n1), rng)
        B = truncated_gaussian_array(sigma, t, (m2, n2), rng)
    sigma_s = sigma / math.sqrt(T) if sigma_s is None else sigma_s
    share_t = t if share_t is None else share_t
    out = {}
    for name, secret in (("A", A), ("B", B), ("C", A @ B)):
        poly = make_share_polynomial(secret, T, N, sigma_s, share_t, rng, secret_id=f"{label}.{name}")
        out[name] = {s.index: s for s in evaluate_shares(poly)}
    return BeaverTriple((m1, n1, m2, n2), out["A"], out["B"], out["C"], label)


class TripleDealer:
    """Simulated trusted dealer for the offline phase: it samples triples,
    ships their shares over the network and forgets the plaintexts."""

    def __init__(self, net: Network, noise: NoiseConfig, budget: int | None = None):
        self.net = net
        self.noise = noise
        self.budget = budget
        self.issued = 0

    def deal(self, dims_list, labels) -> list[BeaverTriple]:
        if self.budget is not None and self.issued + len(dims_list) > self.budget:
            raise ProtocolViolation(
                f"triple budget exhausted ({self.issued} issued, {len(dims_list)} more requested, budget {self.budget})"
            )
        net, T, N = self.net, self.net.T, self.net.N
        triples = []
        for dims, label in zip(dims_list, labels):
            tr = gen_beaver_triple(
                dims, T, N, self.noise.mask_sigma(T), self.noise.mask_t(), net.rng(DEALER),
                sigma_s=self.noise.sigma_s, share_t=self.noise.t, label=label,
            )
            for part in ("a", "b", "c"):
                for i, s in getattr(tr, part).items():
                    net.send(DEALER, i, Tag.TRIPLE_SHARE, f"{label}.{part}", s)
            triples.append(tr)
        inbox = by_label(net.deliver_round())
        self.issued += len(triples)
        received = []
        for tr in triples:
            parts = {p: {i: inbox[i, f"{tr.label}.{p}"][0] for i in net.ids} for p in ("a", "b", "c")}
            received.append(BeaverTriple(tr.dims, parts["a"], parts["b"], parts["c"], tr.label))
        return received


# -- sharing and opening over the network ------------------------------------


def share_inputs(net: Network, items, noise: NoiseConfig, tag: Tag = Tag.DATA_SHARE) -> dict[str, dict[int, Share]]:
    """One round in which each ``(owner, label, secret)`` is secret-shared
    to every client. Returns ``label -> client -> share``."""
    for owner, label, secret in items:
        poly = make_share_polynomial(secret, net.T, net.N, noise.sigma_s, noise.t, net.rng(owner), secret_id=label)
        if net.record_payloads:
            net.clients[owner].memory[label] = poly
        for s in evaluate_shares(poly):
            net.send(owner, s.index, tag, label, s)
    inbox = by_label(net.deliver_round())
    return {label: {i: inbox[i, label][0] for i in net.ids} for _, label, _ in items}


def open_to(net: Network, shares: dict[int, Share], receivers, label: str) -> dict[int, np.ndarray]:
    """Every client sends its result share to each receiver, who reconstructs."""
    receivers = list(receivers)
    for i in net.ids:
        for r in receivers:
            net.send(i, r, Tag.RESULT_SHARE, label, shares[i])
    inbox = by_label(net.deliver_round())
    return {r: reconstruct(inbox[r, label]) for r in receivers}


# -- online multiplication ---------------------------------------------------


def _check_mul_dims(u: Share, v: Share, triple: BeaverTriple):
    m1, n1, m2, n2 = triple.dims
    if u.shape != (m1, n1) or v.shape != (m2, n2):
        raise InvalidArgument(f"operand shapes {u.shape} x {v.shape} do not match triple {triple.dims}")


def beaver_multiply_many(net: Network, jobs) -> list[dict[int, Share]]:
    """Run several independent multiplications sharing one opening round.

    ``jobs`` holds ``(u_shares, v_shares, triple, label)`` tuples, where the
    share dicts map client id to that client's share.
    """
    diffs = []
    for u, v, triple, label in jobs:
        triple.consume()
        _check_mul_dims(u[1], v[1], triple)
        for i in net.ids:
            _check_pair(u[i], triple.a[i])
            _check_pair(v[i], triple.b[i])
            d = Share(f"{label}.D", i, u[i].value - triple.a[i].value, net.T, net.N)
            e = Share(f"{label}.E", i, v[i].value - triple.b[i].value, net.T, net.N)
            for j in net.ids:
                net.send(i, j, Tag.DIFF_SHARE, d.secret_id, d)
                net.send(i, j, Tag.DIFF_SHARE, e.secret_id, e)
        diffs.append((triple, label))
    inbox = by_label(net.deliver_round())
    results = []
    for triple, label in diffs:
        out = {}
        for i in net.ids:
            D = interpolate(inbox[i, f"{label}.D"])
            E = interpolate(inbox[i, f"{label}.E"])
            value = D @ triple.b[i].value + triple.a[i].value @ E + D @ E + triple.c[i].value
            out[i] = Share(label, i, value, net.T, net.N)
        results.append(out)
    return results


def beaver_multiply(net: Network, u_shares, v_shares, triple: BeaverTriple, label: str = "mul") -> dict[int, Share]:
    return beaver_multiply_many(net, [(u_shares, v_shares, triple, label)])[0]


# -- programs ------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    id: str
    op: str
    args: tuple[str, ...]
    const: float | None = None


@dataclass
class Program:
    """Arithmetic DAG over named client inputs.

    JSON form::

        {"nodes": [{"id": "s", "op": "add", "args": ["x1", "x2"]},
                   {"id": "y", "op": "scale", "args": ["s"], "const": 2}],
         "inputs": {"x1": 1, "x2": 2},
         "outputs": {"y": "all"},
         "values": {"x1": 1.0, "x2": [[1, 2]]}}

    ``values`` is optional and only used by the CLI.
    """

    nodes: list[Node]
    inputs: dict[str, int]
    outputs: dict[str, list[int]]
    values: dict | None = None

    _ARITY = {"add": 2, "sub": 2, "scale": 1, "mul": 2}

    @classmethod
    def from_dict(cls, doc: dict, n_clients: int | None = None) -> "Program":
        unknown = set(doc) - {"nodes", "inputs", "outputs", "values"}
        if unknown:
            raise InvalidArgument(f"unknown program keys: {sorted(unknown)}")
        nodes = []
        for raw in doc.get("nodes", []):
            op = raw["op"]
            if op not in cls._ARITY:
                raise InvalidArgument(f"unsupported op {op!r}")
            args = tuple(raw["args"])
            if len(args) != cls._ARITY[op]:
                raise InvalidArgument(f"node {raw['id']}: {op} takes {cls._ARITY[op]} args")
            const = raw.get("const")
            if op == "scale" and const is None:
                raise InvalidArgument(f"node {raw['id']}: scale needs 'const'")
            nodes.append(Node(str(raw["id"]), op, args, None if const is None else float(const)))
        inputs = {str(k): int(v) for k, v in doc.get("inputs", {}).items()}
        outputs = {}
        for name, who in doc.get("outputs", {}).items():
            if who == "all":
                if n_clients is None:
                    raise InvalidArgument("'all' outputs need the client count")
                who = list(range(1, n_clients + 1))
            outputs[str(name)] = [int(w) for w in (who if isinstance(who, list) else [who])]
        prog = cls(nodes, inputs, outputs, doc.get("values"))
        prog.order()
        return prog

    @classmethod
    def from_json(cls, text: str, n_clients: int | None = None) -> "Program":
        return cls.from_dict(json.loads(text), n_clients)

    def order(self) -> list[Node]:
        """Topological order; rejects unknown names and cycles."""
        by_id = {n.id: n for n in self.nodes}
        if len(by_id) != len(self.nodes):
            raise InvalidArgument("duplicate node ids")
        clash = set(by_id) & set(self.inputs)
        if clash:
            raise InvalidArgument(f"names used as both node and input: {sorted(clash)}")
        for n in self.nodes:
            for a in n.args:
                if a not in by_id and a not in self.inputs:
                    raise InvalidArgument(f"unknown input name {a!r} in node {n.id}")
        for name in self.outputs:
            if name not in by_id and name not in self.inputs:
                raise InvalidArgument(f"unknown output name {name!r}")
        done, out, active = set(self.inputs), [], set()

        def visit(n: Node):
            if n.id in done:
                return
            if n.id in active:
                raise InvalidArgument(f"cycle through node {n.id}")
            active.add(n.id)
            for a in n.args:
                if a in by_id:
                    visit(by_id[a])
            active.discard(n.id)
            done.add(n.id)
            out.append(n)

        for n in self.nodes:
            visit(n)
        return out

    def shapes(self, input_shapes: dict) -> dict[str, tuple[int, int]]:
        """Public shape of every value, inferred without any plaintext."""
        env = {k: tuple(v) for k, v in input_shapes.items()}
        for n in self.order():
            a = [env[x] for x in n.args]
            if n.op == "mul":
                if a[0][1] != a[1][0]:
                    raise InvalidArgument(f"node {n.id}: cannot multiply {a[0]} by {a[1]}")
                env[n.id] = (a[0][0], a[1][1])
            else:
                if n.op != "scale" and a[0] != a[1]:
                    raise InvalidArgument(f"node {n.id}: shape mismatch {a[0]} vs {a[1]}")
                env[n.id] = a[0]
        return env

    def n_multiplications(self) -> int:
        return sum(n.op == "mul" for n in self.nodes)

    def evaluate_plain(self, values: dict) -> dict[str, np.ndarray]:
        env = {k: as_matrix(np.asarray(v, dtype=float)) for k, v in values.items()}
        for n in self.order():
            a = [env[x] for x in n.args]
            env[n.id] = {
                "add": lambda: a[0] + a[1],
                "sub": lambda: a[0] - a[1],
                "scale": lambda: n.const * a[0],
                "mul": lambda: a[0] @ a[1],
            }[n.op]()
        return env


def orchestrate(net: Network, program: Program, values: dict, noise: NoiseConfig,
                triple_budget: int | None = None) -> dict[int, dict[str, np.ndarray]]:
    """Secret-sharing stage, computation stage, output reconstruction stage.

    ``values`` maps input names to the owner's plaintext. Returns, for each
    client, the outputs it was designated to learn.
    """
    missing = set(program.inputs) - set(values)
    if missing:
        raise InvalidArgument(f"no value for inputs {sorted(missing)}")
    order = program.order()
    for owner in program.inputs.values():
        if owner not in net.clients:
            raise InvalidArgument(f"input owner {owner} is not a client")

    plain = {name: as_matrix(np.asarray(values[name], dtype=float)) for name in program.inputs}
    shapes = program.shapes({name: v.shape for name, v in plain.items()})
    muls = [n for n in order if n.op == "mul"]
    budget = len(muls) if triple_budget is None else triple_budget
    dealer = TripleDealer(net, noise, budget)
    if len(muls) > budget:
        raise ProtocolViolation(f"triple budget exhausted: program needs {len(muls)}, budget is {budget}")
    triples = {}
    if muls:
        dealt = dealer.deal(
            [shapes[n.args[0]] + shapes[n.args[1]] for n in muls], [f"triple.{n.id}" for n in muls]
        )
        triples = {n.id: tr for n, tr in zip(muls, dealt)}

    env = share_inputs(net, [(owner, name, plain[name]) for name, owner in sorted(program.inputs.items())], noise)
    for node in order:
        args = [env[a] for a in node.args]
        if node.op == "add":
            env[node.id] = {i: add_shares(args[0][i], args[1][i]) for i in net.ids}
        elif node.op == "sub":
            env[node.id] = {i: sub_shares(args[0][i], args[1][i]) for i in net.ids}
        elif node.op == "scale":
            env[node.id] = {i: scale_share(node.const, args[0][i]) for i in net.ids}
        else:
            env[node.id] = beaver_multiply(net, args[0], args[1], triples[node.id], label=node.id)

    results: dict[int, dict[str, np.ndarray]] = {i: {} for i in net.ids}
    for name, receivers in sorted(program.outputs.items()):
        for r, value in open_to(net, env[name], receivers, f"out.{name}").items():
            results[r][name] = value
    return results
