"""The randomized reduction from restricted tiling instances to graph
coloration instances.

Given an instance (p, legal tiles, start string) plus a random pad, the
reduction derives the size parameters, partitions the node set, forces
the tournament and the loop/adjacency structure P1-P4, orders the input
nodes by decreasing code, encodes the start string on successive input
node pairs, plants the witness-independent grid/chain skeleton (recorded
in the hidden layout so the constructive colorer can find it), and emits
the uncolored graph together with its standard coloration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graphcore import Coloring, DiGraph
from .palette import default_palette
from .randgraph import pow2_floor
from .rngutil import rng_from, rng_from_bits
from .skeleton import GridGeometry, skeleton_pairs, tournament_arcs
from . import graphcore


class DegenerateParams(ValueError):
    pass


class OmegaExhausted(RuntimeError):
    pass


def _k_of(p):
    """Smallest k with 1.5^k >= 4p^2, in exact integer arithmetic."""
    target = 4 * p * p
    k = max(1, math.ceil(math.log(target, 1.5)) - 2)
    while 3**k < target * 2**k:
        k += 1
    return k


def anchor_threshold(k):
    """Key-link positions must exceed every anchor index; anchors sit at
    t_2 and t_3, and the retry rule keeps the trailing code digits from
    position j_min up collision-free."""
    return max(k - math.ceil(0.9 * k) + 1, 4)


@dataclass(frozen=True)
class ReductionParams:
    p: int
    c: Fraction
    k: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        if self.p < 2:
            raise DegenerateParams("p must be >= 2")
        object.__setattr__(self, "c", Fraction(self.c))
        object.__setattr__(self, "k", _k_of(self.p))
        object.__setattr__(self, "n", pow2_floor(self.k - self.c))

    @property
    def u_t(self):
        return 2 * self.p * self.p

    @property
    def u_0(self):
        return 2 * self.p * self.p

    @property
    def l_t(self):
        return 2 * self.p * self.p - 1

    @property
    def u_1(self):
        return self.n - 4 * self.p * self.p

    @property
    def l_1(self):
        return self.n - 2 * self.p * self.p

    @property
    def node_count(self):
        return 2 * self.n + self.k - 1

    @property
    def j_min(self):
        return anchor_threshold(self.k)

    def b_vector(self):
        """The type budgets (b_0 .. b_7): tournament loops, h, v, d1, d2,
        key links, chain links, machine links."""
        p2 = self.p * self.p
        return (self.k, 4 * p2, 8 * p2, 2 * p2, 2 * p2, 2 * p2,
                4 * p2 - 1, 2 * p2 - 1)

    def blank_budget(self, b8):
        return sum(self.b_vector()) + b8


def derive_params(p, c):
    """Size parameters for tiling side p and exponent offset c; rejects
    degenerate combinations, naming the smallest viable p."""
    params = ReductionParams(p, c)
    if params.n < 4 * p * p + 1:
        viable = p
        while viable < 10_000:
            viable += 1
            cand = ReductionParams(viable, c)
            if cand.n >= 4 * viable * viable + 1:
                break
        raise DegenerateParams(
            f"degenerate parameters: n={params.n} < 4p^2+1={4 * p * p + 1} at p={p}; "
            f"smallest viable p for c={Fraction(c)} is {viable}")
    return params


class OmegaPad:
    """The random pad supplementing an instance: |omega| = p^7 bits.

    Pads are either explicit bit arrays (tests, small lengths) or lazily
    generated from a seed (paper-scale pads do not fit in memory); the
    bits past the abort-gate prefix act as the reduction's randomness
    stream.  `generate_proceeding` conditions the prefix on passing the
    gate, for batch drivers that study non-nil outputs; its remainder
    stream matches `generate` with the same seed.
    """

    def __init__(self, length, bits=None, seed=None, force_proceed=False):
        if (bits is None) == (seed is None):
            raise ValueError("provide exactly one of bits or seed")
        if bits is not None and len(bits) != length:
            raise ValueError("bit array length mismatch")
        self.length = length
        self.bits = None if bits is None else np.asarray(bits, dtype=np.uint8)
        self.seed = seed
        self.force_proceed = force_proceed

    @classmethod
    def from_bits(cls, bitstring):
        arr = np.array([1 if ch == "1" else 0 for ch in bitstring], dtype=np.uint8)
        return cls(len(arr), bits=arr)

    @classmethod
    def generate(cls, length, seed):
        return cls(length, seed=int(seed))

    @classmethod
    def generate_proceeding(cls, length, seed):
        return cls(length, seed=int(seed), force_proceed=True)

    def prefix_threshold(self):
        return math.ceil(math.log2(self.length))

    def leading_bits(self, count):
        if self.bits is not None:
            return self.bits[:count]
        if self.force_proceed:
            return np.zeros(count, dtype=np.uint8)
        # cheap keyed hash; a generator construction per gate check would
        # dominate the rejection loop
        import hashlib
        digest = hashlib.blake2b(f"{self.seed}|{self.length}".encode(),
                                 digest_size=16).digest()
        bits = np.unpackbits(np.frombuffer(digest, dtype=np.uint8))
        if count > len(bits):
            return rng_from(self.seed, 0x0E6A, 0).integers(0, 2, size=count,
                                                           dtype=np.uint8)
        return bits[:count]

    def remainder_rng(self):
        """Generator driven by the pad's bits past the gate prefix.  Desk
        note: explicit pads seed the stream from their remaining bits; at
        paper scale the pad is long enough to supply all coin flips
        directly, at desk scale the stream extends it."""
        if self.bits is not None:
            return rng_from_bits(self.bits[self.prefix_threshold():])
        return rng_from(self.seed, 0x0E6A, 1)


def abort_gate(omega):
    """nil unless omega starts with at least ceil(log2 |omega|) zeros;
    on proceed, returns the remaining-bits randomness stream."""
    t = omega.prefix_threshold()
    lead = omega.leading_bits(t)
    if int(lead.sum()) != 0:
        return None
    return omega.remainder_rng()


# ---------------------------------------------------------------------------
# codes

def digit_matrix(adj, t_order, nodes):
    """Ternary-ish code digits of `nodes` w.r.t. the ordered tournament:
    0 none, 1 down (node->t only), 2 up (t->node only), 3 double."""
    nodes = np.asarray(nodes, dtype=np.intp)
    ts = np.asarray(t_order, dtype=np.intp)
    down = adj[np.ix_(nodes, ts)].astype(np.int8)
    up = adj[np.ix_(ts, nodes)].T.astype(np.int8)
    return (down + 2 * up).astype(np.int8)


def code_of(g, t_order, u):
    """The 2k-bit code string of node u: per t_i the pair (up-bit,
    down-bit), i.e. 01 down, 10 up, 11 double.  Raises if u is not
    adjacent to some tournament node (u outside U_T)."""
    digits = digit_matrix(g.adj, t_order, [u])[0]
    if np.any(digits == 0):
        raise ValueError(f"node {u} is not adjacent to every tournament node")
    return "".join({1: "01", 2: "10", 3: "11"}[int(d)] for d in digits)


def code_sort_key(digits):
    """Sort key for decreasing code order; the comparison reads digit
    positions from t_k down to t_1."""
    return tuple(int(d) for d in digits[::-1])


def cert_position(d_hi, d_lo):
    """The key position of a consecutive code pair: the largest position
    (1-based) where the codes differ.  None for equal codes."""
    diff = np.flatnonzero(np.asarray(d_hi) != np.asarray(d_lo))
    if len(diff) == 0:
        return None
    return int(diff[-1]) + 1


def _draw_digits(rng, rows, k, allowed, check=None, force=None):
    """Uniform digit rows over `allowed` conditioned on `check`, with
    per-row rejection; `force` maps column -> fixed digit value."""
    allowed = np.array(allowed, dtype=np.int8)
    out = allowed[rng.integers(0, len(allowed), size=(rows, k))]
    if force:
        for col, val in force.items():
            out[:, col] = val
    if check is not None:
        for _ in range(10_000):
            bad = ~check(out)
            if not bad.any():
                break
            redraw = allowed[rng.integers(0, len(allowed), size=(int(bad.sum()), k))]
            if force:
                for col, val in force.items():
                    redraw[:, col] = val
            out[bad] = redraw
        else:
            raise OmegaExhausted("digit rejection sampling did not converge")
    return out


@dataclass
class Layout:
    """Hidden bookkeeping of a reduction run: the node partition, the
    chain/grid assignment (the planted embedding), and retry statistics.
    Written to a sidecar only on request; never part of the public
    instance."""

    params: ReductionParams
    t: tuple
    v: tuple
    z: tuple
    u0: tuple
    u1: tuple
    l1: tuple
    s: str
    retries: int
    first_draw_full_collision: bool
    first_draw_trailing_collision: bool

    def resolver(self):
        t, v, z, u0 = self.t, self.v, self.z, self.u0

        def res(ref):
            kind, i = ref
            if kind == "t":
                return t[i - 1]
            if kind == "v":
                return v[i - 1]
            if kind == "z":
                return z[i - 1]
            if kind == "u0":
                return u0[i]
            raise KeyError(ref)

        return res

    def to_json_obj(self):
        return {"t": list(self.t), "v": list(self.v), "z": list(self.z),
                "u0": list(self.u0), "u1": list(self.u1), "l1": list(self.l1),
                "s": self.s, "retries": self.retries,
                "first_draw_full_collision": self.first_draw_full_collision,
                "first_draw_trailing_collision": self.first_draw_trailing_collision}


@dataclass
class GcpInstance:
    """Public reduction output: the uncolored graph, its standard
    coloration, and run metadata."""

    graph: DiGraph
    coloration: graphcore.Coloration
    meta: dict

    def to_json_obj(self):
        return {"graph": self.graph.to_json_obj(),
                "coloration": self.coloration.to_json_obj(),
                "meta": self.meta}

    @classmethod
    def from_json_obj(cls, obj):
        return cls(DiGraph.from_json_obj(obj["graph"]),
                   graphcore.Coloration.from_json_obj(obj["coloration"]),
                   obj["meta"])


def s_from_instance(x):
    """Project the instance's first configuration row to the input
    alphabet {0,1,*,A}: head compounds map to A, witness marks to 0."""
    row1 = [t[0] for t in x.start] + [x.start[-1][1]]
    out = []
    for corner in row1:
        if corner.startswith("@"):
            out.append("A")
        elif corner[0] in "01*?":
            out.append("0" if corner[0] == "?" else corner[0])
        else:
            raise ValueError(
                f"corner {corner!r} is not reducible; the reduction needs "
                "restricted-alphabet instances (0/1/*/? cells plus one head)")
    return "".join(out)


def count_ut_doubles(adj, t_nodes, unlooped_nodes):
    sub_d = adj[np.ix_(unlooped_nodes, t_nodes)]
    sub_u = adj[np.ix_(t_nodes, unlooped_nodes)].T
    return int((sub_d & sub_u).sum())


def reduce_instance(x, omega, c, max_retries=100_000):
    """The reduction R.  Returns (GcpInstance, Layout) or None (nil per
    the abort gate).  The output graph is random conditioned on the
    forced structure: P1-P4, the input-string encoding, the chain edge at
    (t_1, v_1), and the planted grid/chain skeleton recorded in the
    layout."""
    params = derive_params(x.p, c)
    if omega.length != x.p**7:
        raise ValueError(f"pad must have p^7 = {x.p**7} bits")
    rng = abort_gate(omega)
    if rng is None:
        return None
    p, k, n = params.p, params.k, params.n
    N = params.node_count

    perm = rng.permutation(N)
    pos = 0

    def take(count):
        nonlocal pos
        chunk = perm[pos:pos + count]
        pos += count
        return [int(u) for u in chunk]

    t_nodes = take(k)
    v_pool = take(params.u_t)
    z_pool = take(params.l_t)
    u0_pool = take(params.u_0)
    u1_pool = take(params.u_1)
    l1_pool = take(params.l_1)

    adj = rng.integers(0, 2, size=(N, N), dtype=np.uint8).astype(bool)

    # P2: loops exactly on T and L
    looped = np.zeros(N, dtype=bool)
    looped[t_nodes] = looped[z_pool] = looped[l1_pool] = True
    np.fill_diagonal(adj, False)
    adj[np.arange(N), np.arange(N)] = looped

    # P1: transitive tournament, t_1 the sink
    for j in range(k):
        for i in range(k):
            if i != j:
                adj[t_nodes[j], t_nodes[i]] = j > i

    geom = GridGeometry(p)
    border_cols = {geom.unlooped_index[cxy]
                   for part in geom.border_coords() for cxy in part}

    def apply_digits(nodes, digits):
        nodes = np.asarray(nodes, dtype=np.intp)
        for j, t in enumerate(t_nodes):
            col = digits[:, j]
            adj[nodes, t] = (col == 1) | (col == 3)
            adj[t, nodes] = (col == 2) | (col == 3)

    # U_T draws retry until the trailing code digits are collision-free
    j0 = params.j_min - 1
    retries = 0
    first_full = first_trailing = None
    while True:
        d_ut = _draw_digits(
            rng, params.u_t, k, (1, 2, 3),
            check=lambda m: (m[:, 1:] == 1).any(axis=1))
        rows = [tuple(int(x_) for x_ in r) for r in d_ut]
        full_ok = len(set(rows)) == len(rows)
        trail_ok = len({r[j0:] for r in rows}) == len(rows)
        if first_full is None:
            first_full, first_trailing = not full_ok, not trail_ok
        if trail_ok:
            break
        retries += 1
        if retries > max_retries:
            raise OmegaExhausted("no collision-free code draw within the retry budget")
    apply_digits(v_pool, d_ut)

    d_lt = _draw_digits(rng, params.l_t, k, (1, 2, 3), force={1: 1, 2: 1})
    apply_digits(z_pool, d_lt)
    d_u0 = _draw_digits(
        rng, params.u_0, k, (0, 2, 3),
        check=lambda m: (m[:, 1:] == 0).any(axis=1))
    for j in range(params.u_0):
        d_u0[j, 0] = 3 if j in border_cols else (0, 2)[int(rng.integers(0, 2))]
    apply_digits(u0_pool, d_u0)
    if params.u_1:
        d_u1 = _draw_digits(
            rng, params.u_1, k, (0, 1, 2, 3),
            check=lambda m: (m == 0).any(axis=1) & (m == 1).any(axis=1))
        apply_digits(u1_pool, d_u1)
    if params.l_1:
        d_l1 = _draw_digits(
            rng, params.l_1, k, (0, 1, 2, 3),
            check=lambda m: (m == 0).any(axis=1))
        apply_digits(l1_pool, d_l1)

    # decreasing code order over U_T (positions read from t_k down)
    order = sorted(range(params.u_t),
                   key=lambda i: code_sort_key(d_ut[i]), reverse=True)
    v_nodes = [v_pool[i] for i in order]

    # chain start: (t_1, v_1) becomes a single forward edge
    adj[t_nodes[0], v_nodes[0]] = True
    adj[v_nodes[0], t_nodes[0]] = False

    s = s_from_instance(x)
    layout = Layout(params, tuple(t_nodes), tuple(v_nodes), tuple(z_pool),
                    tuple(u0_pool), tuple(u1_pool), tuple(l1_pool), s,
                    retries, bool(first_full), bool(first_trailing))
    res = layout.resolver()
    _, pairs = skeleton_pairs(p, k, s)
    for pr in pairs:
        a, b = res(pr.a), res(pr.b)
        adj[a, b] = pr.fwd
        adj[b, a] = pr.rev

    g = DiGraph(adj)
    validate_layout(g, layout)

    u_nodes = v_pool + u0_pool + u1_pool
    b8 = count_ut_doubles(adj, t_nodes, u_nodes) - 4  # t_1 grid wraps excluded
    coloration = standard_coloration(params, g, layout, default_palette())
    meta = {
        "p": p, "c": str(Fraction(c)), "k": k, "n": n,
        "node_count": N, "b_vector": list(params.b_vector()), "b8": b8,
        "blanks": coloration.blanks,
        "s": s, "retries": retries,
        "grid_side": 2 * p, "even_grid_side": p,
        "size_note": "even grid side equals the tiling table side p",
        "palette": default_palette().version_hash(),
    }
    return GcpInstance(g, coloration, meta), layout


def reduce_forced_mask(layout):
    """Boolean mask of the ordered pairs the reduction forces (everything
    touching T, loops, the skeleton, the s-encoding); the complement is
    fair coins, which the uniformity audit checks."""
    params = layout.params
    N = params.node_count
    forced = np.zeros((N, N), dtype=bool)
    np.fill_diagonal(forced, True)
    for t in layout.t:
        forced[t, :] = True
        forced[:, t] = True
    res = layout.resolver()
    _, pairs = skeleton_pairs(params.p, params.k, layout.s)
    for pr in pairs:
        a, b = res(pr.a), res(pr.b)
        forced[a, b] = forced[b, a] = True
    return forced


def validate_layout(g, layout):
    """Recompute P1-P4 from the raw graph and check them against the
    layout sets exactly."""
    params = layout.params
    adj = g.adj
    t = list(layout.t)
    k = params.k
    for j in range(k):
        if not adj[t[j], t[j]]:
            raise AssertionError("tournament node missing loop")
        for i in range(k):
            if i != j and adj[t[j], t[i]] != (j > i):
                raise AssertionError("P1 violated: not the forced tournament order")
    looped = np.diag(adj)
    expect_looped = set(layout.t) | set(layout.z) | set(layout.l1)
    if set(np.flatnonzero(looped).tolist()) != expect_looped:
        raise AssertionError("P2 violated: loop set mismatch")
    ts = np.asarray(t, dtype=np.intp)
    adj_any = adj[:, ts] | adj[ts, :].T
    conn_all = adj_any.all(axis=1)
    conn_all[ts] = False
    expect_conn = set(layout.v) | set(layout.z)
    if set(np.flatnonzero(conn_all).tolist()) != expect_conn:
        raise AssertionError("P3 violated: U_T/L_T adjacency mismatch")
    down_single = adj[:, ts] & ~adj[ts, :].T
    no_down = ~down_single.any(axis=1) & ~looped
    no_down[ts] = False
    u0_set = set(np.flatnonzero(no_down).tolist()) - set(layout.v)
    if u0_set != set(layout.u0):
        raise AssertionError("P4 violated: U_0 mismatch")
    if set(layout.v) & set(np.flatnonzero(no_down).tolist()):
        raise AssertionError("P4 violated: a U_T node has no down edge")
    return True


def encode_input_string(g, layout, s):
    """Re-encode an input string on the successive input-node pairs of an
    existing graph; returns a new graph (all other pairs untouched)."""
    if len(s) > len(layout.v) - 1:
        raise ValueError("input string too long")
    conn = {"0": (False, False), "1": (True, False),
            "*": (False, True), "A": (True, True)}
    adj = g.adj.copy()
    for i, sym in enumerate(s):
        if sym not in conn:
            raise ValueError(f"bad input symbol {sym!r}")
        a, b = layout.v[i], layout.v[i + 1]
        adj[a, b], adj[b, a] = conn[sym]
    return DiGraph(adj)


def decode_input_string(g, layout, length):
    """Inverse of encode_input_string over the first `length` pairs."""
    names = {(False, False): "0", (True, False): "1",
             (False, True): "*", (True, True): "A"}
    out = []
    for i in range(length):
        a, b = layout.v[i], layout.v[i + 1]
        out.append(names[(bool(g.adj[a, b]), bool(g.adj[b, a]))])
    return "".join(out)


def standard_coloration(params, g, layout, palette):
    """The coloration attached to a reduction output: the rule-generated
    spot whitelist plus the exact blank budget b = sum(b_i) + b8."""
    u_nodes = list(layout.v) + list(layout.u0) + list(layout.u1)
    b8 = count_ut_doubles(g.adj, list(layout.t), u_nodes) - 4
    return graphcore.Coloration(palette.whitelist(), params.blank_budget(b8))
