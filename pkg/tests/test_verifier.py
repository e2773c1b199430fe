import numpy as np
import pytest

from tilecolor import verifier as vf
from tilecolor.graphcore import (ABSENT, BLANK, GREEN, GREY, RED, Coloring,
                                 coloration_of)
from tilecolor.rngutil import rng_from


def mutate(ref, a, b, new_color):
    colors = ref.colors.copy()
    colors[a, b] = new_color
    return Coloring(colors)


def sample_mutations(g, ref, count, seed):
    """Random single-edge recolorings across all color pairs."""
    rng = rng_from(seed, 0x3117)
    us, vs = np.nonzero(g.adj)
    picks = rng.integers(0, len(us), size=count * 2)
    out = []
    for i in picks:
        a, b = int(us[i]), int(vs[i])
        old = int(ref.colors[a, b])
        new = int(rng.integers(1, 5))
        if new == old:
            new = new % 4 + 1
        out.append((a, b, old, new))
        if len(out) == count:
            break
    return out


def incremental_verdict(g, mutated, col, a, b):
    """Verdict of a single-edge mutation of an accepted coloring: budget
    first, then the spots of the triples through (a, b)."""
    if mutated.blank_count() != col.blanks:
        return vf.Verdict(False, "budget")
    from tilecolor.graphcore import spots_of_triples
    n = g.n
    ws = np.array([w for w in range(n) if w != a and w != b])
    trips = np.stack([np.full(len(ws), a), np.full(len(ws), b), ws], axis=1)
    spots = spots_of_triples(mutated, trips)
    allowed = np.fromiter(col.spots, dtype=np.int64)
    if (~np.isin(spots, allowed)).any():
        return vf.Verdict(False, "spot")
    return vf.Verdict(True)


def test_reference_accepts(keystone5):
    gcp, ref = keystone5["gcp"], keystone5["ref"]
    assert vf.verify_coloring(gcp.graph, ref, gcp.coloration)


def test_budget_violation_single_recolor(keystone5):
    gcp, ref = keystone5["gcp"], keystone5["ref"]
    us, vs = np.nonzero((ref.colors == GREY) & gcp.graph.adj)
    mutated = mutate(ref, int(us[0]), int(vs[0]), BLANK)
    verdict = vf.verify_coloring(gcp.graph, mutated, gcp.coloration)
    assert not verdict and verdict.reason == "budget"


def test_blank_h_edge_recolored_red_fires_exactly_one_reason(keystone5):
    gcp, ref, layout = keystone5["gcp"], keystone5["ref"], keystone5["layout"]
    cls = vf.AdjClasses(gcp.graph, ref)
    us, vs = np.nonzero(ref.colors == BLANK)
    for a, b in zip(us.tolist(), vs.tolist()):
        if a != b and cls.l_t[a] and cls.u_0[b] and ref.colors[b, a] == GREY:
            break
    mutated = mutate(ref, a, b, RED)
    verdict = vf.verify_coloring(gcp.graph, mutated, gcp.coloration)
    assert not verdict
    assert verdict.reason in ("budget", "spot")


def test_verify_permutation_invariant(keystone5):
    gcp, ref = keystone5["gcp"], keystone5["ref"]
    n = gcp.graph.n
    perm = np.random.default_rng(3).permutation(n)
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    g2 = gcp.graph.relabel(perm)
    c2 = Coloring(ref.colors[np.ix_(inv, inv)])
    assert vf.verify_coloring(g2, c2, gcp.coloration)


def test_grouped_matches_exhaustive_small():
    from tilecolor.randgraph import sample_digraph
    for seed in range(6):
        g = sample_digraph(16, 600 + seed)
        rng = rng_from(seed, 9)
        colors = np.where(g.adj, rng.integers(1, 5, size=(16, 16)), 0).astype(np.uint8)
        c = Coloring(colors)
        full = coloration_of(g, c)
        ok = vf.verify_coloring(g, c, full)
        ok_x = vf.verify_coloring(g, c, full, exhaustive=True)
        assert bool(ok) and bool(ok_x)
        from tilecolor.graphcore import Coloration
        smaller = Coloration(frozenset(list(full.spots)[:-1]), full.blanks)
        assert not vf.verify_coloring(g, c, smaller)
        assert not vf.verify_coloring(g, c, smaller, exhaustive=True)


def test_audit_reference_exact(keystone5):
    gcp, ref, layout = keystone5["gcp"], keystone5["ref"], keystone5["layout"]
    audit = vf.audit_blanks(gcp.graph, ref)
    assert audit.counts == tuple(layout.params.b_vector()) + (gcp.meta["b8"],)
    assert audit.unclassifiable == []


def test_audit_all_grey_zero(keystone5):
    g = keystone5["gcp"].graph
    audit = vf.audit_blanks(g, Coloring.all_grey(g))
    assert audit.counts == (0,) * 9
    assert audit.unclassifiable == []


def test_audit_moved_key_blank_unclassifiable(keystone5):
    gcp, ref, layout = keystone5["gcp"], keystone5["ref"], keystone5["layout"]
    cls = vf.AdjClasses(gcp.graph, ref)
    # find a single-blank key link and move its blank onto a U_1 - T single
    us, vs = np.nonzero(ref.colors == BLANK)
    key = None
    for a, b in zip(us.tolist(), vs.tolist()):
        if a != b and cls.u_t[a] and cls.is_t[b] and b != cls.t1 \
                and not gcp.graph.adj[b, a]:
            key = (a, b)
            break
    assert key is not None
    u1 = None
    t_nodes = list(layout.t)
    for u in layout.u1:
        for t in t_nodes[1:]:
            if gcp.graph.adj[u, t] and not gcp.graph.adj[t, u] \
                    and ref.colors[u, t] == GREY:
                u1 = (u, t)
                break
        if u1:
            break
    colors = ref.colors.copy()
    colors[key] = GREY
    colors[u1] = BLANK
    audit = vf.audit_blanks(gcp.graph, Coloring(colors))
    assert u1 in audit.unclassifiable
    assert audit.counts[5] == layout.params.b_vector()[5] - 1


def test_extraction_round_trip(keystone5, palette):
    gcp, ref, layout = keystone5["gcp"], keystone5["ref"], keystone5["layout"]
    square = vf.extract_tiling(gcp.graph, ref, layout.params, palette)
    assert square == keystone5["planted"]
    from tilecolor.tiling import verify_tiling
    assert verify_tiling(keystone5["inst"], square)


def test_extraction_structural_failure_reported(keystone5, palette):
    gcp, ref, layout = keystone5["gcp"], keystone5["ref"], keystone5["layout"]
    # erase the chain start
    t1 = layout.t[0]
    v1 = layout.v[0]
    colors = ref.colors.copy()
    colors[t1, v1] = GREY
    with pytest.raises(vf.ExtractionError) as exc:
        vf.extract_tiling(gcp.graph, Coloring(colors), layout.params, palette)
    assert "chain start" in str(exc.value)


def test_incremental_verdict_matches_full(keystone5):
    gcp, ref = keystone5["gcp"], keystone5["ref"]
    muts = sample_mutations(gcp.graph, ref, 12, seed=5)
    for a, b, old, new in muts:
        mutated = mutate(ref, a, b, new)
        fast = incremental_verdict(gcp.graph, mutated, gcp.coloration, a, b)
        full = vf.verify_coloring(gcp.graph, mutated, gcp.coloration)
        assert bool(fast) == bool(full)
        if not fast:
            assert fast.reason == full.reason


def test_mutation_suite(keystone5):
    """Every blank-touching mutation is rejected (zero silent); rejected
    reasons partition into spot/budget; any mutation that changes the
    audited type vector is rejected."""
    gcp, ref, layout = keystone5["gcp"], keystone5["ref"], keystone5["layout"]
    base_audit = vf.audit_blanks(gcp.graph, ref)
    muts = sample_mutations(gcp.graph, ref, 400, seed=11)
    reasons = set()
    silent_blank_touching = 0
    for a, b, old, new in muts:
        mutated = mutate(ref, a, b, new)
        verdict = incremental_verdict(gcp.graph, mutated, gcp.coloration, a, b)
        blank_touching = BLANK in (old, new)
        if not verdict:
            reasons.add(verdict.reason)
        if blank_touching:
            if verdict:
                silent_blank_touching += 1
            continue
        audit = vf.audit_blanks(gcp.graph, mutated)
        if audit.counts != base_audit.counts or audit.unclassifiable:
            assert not verdict
    assert silent_blank_touching == 0
    assert reasons <= {"spot", "budget"}
