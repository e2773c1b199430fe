"""The constructive witness direction: build the colored template from a
tiling witness, embed it into the reduced graph, and transfer the colors
into a full coloring.

The template carries the grid, chain, anchor and border structure (shared
with the reduction via the skeleton module) painted per the palette, plus
the witness display: cell symbols on the even-grid H/V doubles, the head
trajectory as loop colors, and the transfer motifs around the head.  The
remaining host-only colors (code exhibits, key blanks, the
one-blank-per-double rule between U and T) are painted directly on the
reduced graph from its own codes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphcore import ABSENT, BLANK, GREEN, GREY, RED, Coloring, DiGraph
from .randgraph import EmbedFailure, Embedding, di_embed
from .reduction import cert_position, digit_matrix
from .skeleton import (GridGeometry, skeleton_pairs, template_node_ids,
                       tournament_arcs)
from .tiling import verify_tiling


class ColorConflict(RuntimeError):
    """An edge was demanded two different colors; a palette or embedding
    bug, not a recoverable state."""


class Canvas:
    """Paint-once color buffer over a fixed adjacency."""

    def __init__(self, adj, default=None):
        self.adj = adj
        n = adj.shape[0]
        self.colors = np.zeros((n, n), dtype=np.uint8)
        if default is not None:
            self.colors[adj] = default
        self.painted = np.zeros((n, n), dtype=bool)

    def paint(self, a, b, color):
        if not self.adj[a, b]:
            raise ColorConflict(f"edge ({a},{b}) absent but a class paints it")
        if self.painted[a, b]:
            if self.colors[a, b] != color:
                raise ColorConflict(f"edge ({a},{b}) demanded two colors")
            return
        self.colors[a, b] = color
        self.painted[a, b] = True

    def paint_if_present(self, a, b, color):
        if self.adj[a, b] and not self.painted[a, b]:
            self.colors[a, b] = color
            self.painted[a, b] = True

    def is_painted(self, a, b):
        return bool(self.painted[a, b])


def head_column(table, r):
    for c, val in enumerate(table[r]):
        if val.startswith("@"):
            return c
    return None


def cell_value(table, r, c):
    """Palette symbol-table value of a table cell (side flag stripped)."""
    val = table[r][c]
    if val == "%" or val.startswith("@") or val.startswith("?"):
        return "?" if val.startswith("?") else val
    return val[:-1]


def loop_color(table, r, c):
    """Loop color of the even-grid node showing cell (r, c): head red,
    grey/green segments, orientation reversed on odd rows."""
    h = head_column(table, r)
    if h is None:
        return GREY
    if c == h:
        return RED
    before = c < h
    if r % 2 == 0:
        return GREY if before else GREEN
    return GREEN if before else GREY


@dataclass
class TemplateGraph:
    """The colored pattern graph plus its designated substructures."""

    pattern: DiGraph
    coloring: Coloring
    ids: dict
    geom: GridGeometry
    table: tuple
    params: object
    s: str

    def degree_bound(self):
        und = self.pattern.adj | self.pattern.adj.T
        np.fill_diagonal(und, False)
        k = self.params.k
        return int(und[k:].sum(axis=1).max())


# fixed degree cap for template nodes outside the tournament
DEGREE_CAP = 24


def _d3_even_slots(geom):
    """Chain slots whose machine-link blank is the d3 diagonal."""
    out = set()
    for sa, sb in geom.d3_chain_slots():
        ca, cb = geom.slot_coord[sa], geom.slot_coord[sb]
        if ca[0] % 2 == 0 and ca[1] % 2 == 0:
            out.add(sa)
        if cb[0] % 2 == 0 and cb[1] % 2 == 0:
            out.add(sb)
    return out


def _paint_skeleton(canvas, res, geom, pairs, params, s, table, palette):
    """Paint the planted structure (shared by template and host): grid
    permutations, chain, position links, anchors, borders, tournament,
    loop colors and the witness's symbol display."""
    p, k = params.p, params.k
    # tournament
    for (_, j), (_, i) in tournament_arcs(k):
        canvas.paint(res(("t", j)), res(("t", i)), GREEN)
    for i in range(1, k + 1):
        canvas.paint(res(("t", i)), res(("t", i)), BLANK)

    i1_rev_color = {}
    for i, sym in enumerate(s, start=1):
        i1_rev_color[i] = GREEN if sym in ("1", "A") else RED

    head_slots = set()
    for r in range(p):
        h = head_column(table, r)
        if h is not None:
            head_slots.add(geom.coord_slot[geom.cell_coord(r, h)])
    d3_slots = _d3_even_slots(geom)

    for pr in pairs:
        a, b = res(pr.a), res(pr.b)
        cls = pr.cls
        if cls == "h":
            canvas.paint(a, b, BLANK)
            canvas.paint(b, a, GREY)
        elif cls == "v":
            canvas.paint(a, b, BLANK)
            canvas.paint(b, a, BLANK)
        elif cls == "d1":
            canvas.paint(a, b, BLANK)
            canvas.paint(b, a, RED)
        elif cls == "d2":
            canvas.paint(a, b, BLANK)
        elif cls == "d3":
            canvas.paint(a, b, BLANK)
            canvas.paint(b, a, GREEN)
        elif cls == "Hu":
            canvas.paint(a, b, RED)
        elif cls == "Vu":
            canvas.paint(a, b, GREEN)
        elif cls in ("Hz", "Vz"):
            coord = _ref_coord(geom, pr.a)
            if coord[0] % 2 == 0 and coord[1] % 2 == 0:
                r, c = geom.coord_cell(coord)
                a_pair, b_pair = palette.symbol_colors(cell_value(table, r, c))
                fwd, rev = a_pair if cls == "Hz" else b_pair
                canvas.paint(a, b, fwd)
                canvas.paint(b, a, rev)
            elif cls == "Hz":
                canvas.paint(a, b, BLANK)
                canvas.paint(b, a, RED)
            else:
                canvas.paint(a, b, RED)
        elif cls in ("I1", "I2"):
            canvas.paint(a, b, BLANK)
            if pr.rev:
                if pr.a[0] == "v":  # (v_i -> z_i): reverse carries the copy color
                    canvas.paint(b, a, i1_rev_color.get(pr.a[1], GREEN))
                else:
                    canvas.paint(b, a, GREEN)
        elif cls == "position":
            i = pr.b[1] - 1  # connects h(z_i) to v_{i+1}
            canvas.paint(a, b, RED)
            out_is_i1 = 2 * i + 1 <= 2 * p - 2
            canvas.paint(b, a, GREEN if out_is_i1 else GREY)
        elif cls in ("anchor2", "anchor3"):
            slot = pr.a[1]
            coord = geom.slot_coord[slot]
            even_even = coord[0] % 2 == 0 and coord[1] % 2 == 0
            use = even_even and slot not in d3_slots and \
                ((slot in head_slots) == (cls == "anchor3"))
            canvas.paint(a, b, BLANK if use else GREY)
        elif cls == "B":
            canvas.paint(a, b, BLANK)
            canvas.paint(b, a, GREEN)
        elif cls == "L":
            canvas.paint(a, b, BLANK)
            canvas.paint(b, a, RED)
        elif cls == "s":
            if pr.fwd:
                canvas.paint(a, b, GREY)
            if pr.rev:
                canvas.paint(b, a, GREY)
        else:
            raise ColorConflict(f"unknown skeleton class {cls}")

    # grid loop colors (t_1 already blank via the tournament pass)
    for slot in range(1, 2 * p * p):
        coord = geom.slot_coord[slot]
        node = res(("z", slot))
        if coord[0] % 2 == 0 and coord[1] % 2 == 0:
            r, c = geom.coord_cell(coord)
            canvas.paint(node, node, loop_color(table, r, c))
        else:
            canvas.paint(node, node, GREY)


def _ref_coord(geom, ref):
    kind, i = ref
    if kind == "t":
        return (0, 0)
    if kind == "z":
        return geom.slot_coord[i]
    if kind == "u0":
        return geom.unlooped[i]
    raise KeyError(ref)


def build_template(x, witness, params, palette):
    """Template graph of a verified witness: the skeleton pattern colored
    per the palette plus the witness display."""
    if not verify_tiling(x, witness):
        raise ValueError("witness does not verify against the instance")
    if params.p < 4:
        raise ValueError("template construction needs p >= 4")
    from .reduction import s_from_instance
    s = s_from_instance(x)
    geom, pairs = skeleton_pairs(params.p, params.k, s)
    ids = template_node_ids(params.p, params.k)
    n = len(ids)
    adj = np.zeros((n, n), dtype=bool)

    def res(ref):
        return ids[ref]

    for (_, j), (_, i) in tournament_arcs(params.k):
        adj[ids[("t", j)], ids[("t", i)]] = True
    for i in range(1, params.k + 1):
        adj[ids[("t", i)], ids[("t", i)]] = True
    for slot in range(1, 2 * params.p * params.p):
        adj[ids[("z", slot)], ids[("z", slot)]] = True
    for pr in pairs:
        a, b = ids[pr.a], ids[pr.b]
        if pr.fwd:
            adj[a, b] = True
        if pr.rev:
            adj[b, a] = True

    pattern = DiGraph(adj)
    canvas = Canvas(adj)
    _paint_skeleton(canvas, res, geom, pairs, params, s, witness.table, palette)
    if not np.array_equal(canvas.painted, adj):
        raise ColorConflict("template pattern edge left unpainted")
    tpl = TemplateGraph(pattern, Coloring(canvas.colors), ids, geom,
                        witness.table, params, s)
    if tpl.degree_bound() > DEGREE_CAP:
        raise ColorConflict(f"template degree exceeds the recorded cap {DEGREE_CAP}")
    return tpl


def _backtrack_embed(f, pins, g, order, pools, seed, budget=500_000):
    """Guided completion of a pinned embedding by depth-first search.

    Variables are taken in the given order (the chain order makes each
    slot's placed neighborhood dense), candidates are the unused pool
    nodes passing every placed-neighbor pattern check, tried in a seeded
    shuffle.  Used when the one-shot per-class matchings strand each
    other at desk scale."""
    from .rngutil import rng_from
    und = f.adj | f.adj.T
    np.fill_diagonal(und, False)
    f_loops = np.diag(f.adj)
    rng = rng_from(seed, 0xBAC)
    shuffled = {True: [pools[True][i] for i in rng.permutation(len(pools[True]))],
                False: [pools[False][i] for i in rng.permutation(len(pools[False]))]}
    mapping = dict(pins)
    used = set(mapping.values())
    nodes_left = [0]

    def candidates(u):
        placed = [w for w in np.flatnonzero(und[u]) if w in mapping]
        out = []
        for v in shuffled[bool(f_loops[u])]:
            if v in used:
                continue
            ok = True
            for w in placed:
                t = mapping[w]
                if g.adj[v, t] != f.adj[u, w] or g.adj[t, v] != f.adj[w, u]:
                    ok = False
                    break
            if ok:
                out.append(v)
        return out

    def rec(idx):
        if idx == len(order):
            return True
        nodes_left[0] += 1
        if nodes_left[0] > budget:
            raise EmbedFailure("backtracking budget exhausted")
        u = order[idx]
        for v in candidates(u):
            mapping[u] = v
            used.add(v)
            if rec(idx + 1):
                return True
            del mapping[u]
            used.discard(v)
        return False

    if not rec(0):
        raise EmbedFailure("backtracking found no embedding")
    return Embedding(mapping, frozenset(pins), identity_fixed=False)


def embed_template(g, layout, tpl, seed, max_attempts=3):
    """Di-embed the template into the reduced graph, pinning the
    tournament (order preserving) and the input nodes (code order
    preserving), mapping chain slots onto L_T and grid un-looped nodes
    onto U_0.

    Tries the per-class matching route first and falls back to a guided
    backtracking completion: at desk scale the chain slots have several
    coin-made impostor candidates each, so independent one-shot matchings
    routinely strand one another.  Either way the returned embedding is
    re-validated pairwise."""
    params = tpl.params
    pins = {}
    for i in range(1, params.k + 1):
        pins[tpl.ids[("t", i)]] = layout.t[i - 1]
    for i in range(1, 2 * params.p * params.p + 1):
        pins[tpl.ids[("v", i)]] = layout.v[i - 1]
    pools = {True: list(layout.z), False: list(layout.u0)}
    attempts = 0
    last = None
    for attempt in range(max_attempts):
        attempts += 1
        try:
            emb = di_embed(tpl.pattern, frozenset(pins), g,
                           seed + 7919 * attempt, type_pools=pools, pins=pins)
            emb.attempts = attempts
            return emb
        except EmbedFailure as exc:
            last = exc
    n_slots = 2 * params.p * params.p
    order = [tpl.ids[("z", i)] for i in range(1, n_slots)] + \
            [tpl.ids[("u0", j)] for j in range(n_slots)]
    try:
        emb = _backtrack_embed(tpl.pattern, pins, g, order, pools, seed)
    except EmbedFailure as exc:
        raise EmbedFailure(
            f"matching attempts failed ({last}) and backtracking failed: {exc}")
    emb.validate(tpl.pattern, g)
    emb.attempts = attempts + 1
    return emb


def transfer_colors(g, tpl, emb, layout, palette):
    """Total coloring of the reduced graph: template colors through the
    embedding, code exhibits and key blanks from the graph's own codes,
    one blank per remaining U-T double edge, transfer motifs where the
    coins cooperate, and grey everywhere else."""
    params = tpl.params
    p, k = params.p, params.k
    canvas = Canvas(g.adj, default=GREY)
    mapped = emb.mapping

    def res(ref):
        return mapped[tpl.ids[ref]]

    geom, pairs = skeleton_pairs(p, k, tpl.s)
    _paint_skeleton(canvas, res, geom, pairs, params, tpl.s, tpl.table, palette)

    # codes of the input nodes, certificates, key blanks and exhibits
    adj = g.adj
    t_nodes = list(layout.t)
    d_v = digit_matrix(adj, t_nodes, list(layout.v))
    certs = []
    for i in range(len(layout.v) - 1):
        pos = cert_position(d_v[i], d_v[i + 1])
        if pos is None or pos < params.j_min:
            raise ColorConflict("input codes lost their certificate structure")
        certs.append(pos)
    certs.append(k)  # the last input node keys on the top position

    for i, v in enumerate(layout.v):
        li = certs[i]
        for j in range(1, k + 1):
            t = t_nodes[j - 1]
            if j == li:
                canvas.paint_if_present(v, t, BLANK)
                canvas.paint_if_present(t, v, BLANK)
                continue
            color = RED if j < li else GREY
            if adj[v, t] and adj[t, v]:
                canvas.paint_if_present(v, t, BLANK)
                canvas.paint_if_present(t, v, color)
            else:
                canvas.paint_if_present(v, t, color)
                canvas.paint_if_present(t, v, color)

    exhibit = palette.exhibit_color
    for i in range(1, len(layout.z) + 1):
        z = layout.z[i - 1]
        li = certs[i - 1]
        digits = d_v[i - 1]
        for j in range(1, k + 1):
            t = t_nodes[j - 1]
            if j > li:
                color = exhibit[int(digits[j - 1])]
            elif j == li:
                d = int(digits[j - 1])
                if d < 2:
                    raise ColorConflict("certificate digit cannot be encoded lower")
                color = GREEN if d == 3 else RED
            else:
                color = GREY
            canvas.paint_if_present(z, t, color)
            canvas.paint_if_present(t, z, color)

    # one blank per double edge between the remaining U nodes and T
    for t in t_nodes:
        for u in list(layout.u1):
            if adj[u, t] and adj[t, u]:
                canvas.paint(u, t, BLANK)
                canvas.paint(t, u, GREY)
    t1 = t_nodes[0]
    for t in t_nodes[1:]:
        for u in list(layout.u0):
            if adj[u, t] and adj[t, u]:
                canvas.paint(u, t, BLANK)
                canvas.paint(t, u, GREY)
    for u in list(layout.u0):
        if adj[u, t1] and adj[t1, u] and not (canvas.is_painted(u, t1)
                                              and canvas.is_painted(t1, u)):
            raise ColorConflict("unplanted U_0 double at t_1")

    _paint_motifs(canvas, res, geom, tpl, adj)

    coloring = Coloring(canvas.colors)
    coloring.validate(g)
    return coloring


def _paint_motifs(canvas, res, geom, tpl, adj):
    """Transfer-link decorations around the head trajectory, painted on
    whatever coin edges exist (the full motif exists a.e. at scale; desk
    graphs get the subset their coins provide)."""
    p = tpl.params.p
    table = tpl.table
    for r in range(1, p - 1):
        h_now, h_next = head_column(table, r), head_column(table, r + 1)
        if h_now is None or h_next is None:
            continue
        moved_right = (h_next - h_now) % p == 1
        lr = GREEN if moved_right else RED
        left = res(("z", geom.coord_slot[geom.cell_coord(r, (h_now - 1) % p)]))
        right = res(("z", geom.coord_slot[geom.cell_coord(r, (h_now + 1) % p)]))
        above = res(("z", geom.coord_slot[geom.cell_coord(r + 1, h_now)]))
        canvas.paint_if_present(left, right, lr)
        canvas.paint_if_present(right, left, lr)
        canvas.paint_if_present(right, above, RED)
        canvas.paint_if_present(above, right, GREEN)
        canvas.paint_if_present(left, above, GREEN)
        canvas.paint_if_present(above, left, RED)


def reference_coloring(x, witness, gcp_graph, layout, palette, seed=0):
    """Convenience pipeline: template, embedding, transfer."""
    tpl = build_template(x, witness, layout.params, palette)
    emb = embed_template(gcp_graph, layout, tpl, seed)
    return tpl, emb, transfer_colors(gcp_graph, tpl, emb, layout, palette)
