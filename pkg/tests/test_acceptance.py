"""Acceptance suite: one test per criterion, each printing a pass/fail
line (run with `pytest tests/test_acceptance.py -v -s`).

Everything is pinned to fixed seeds so the Monte Carlo tolerances are
reproducible.  Criterion 3's two asymptotic sub-clauses are strict
expected failures: at k=4, c=1 (n=8) the exact expectation
C(n,k) k! 2^(-k^2) = 0.0256 sits 59% below the asymptotic stand-in
m^-c = 0.0625 (the finite-size factor n!/((n-k)! n^k) is 0.41), so no
correct implementation can land within 20%; the exact-oracle clauses are
asserted in full.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from tilecolor import colorer as co
from tilecolor import reduction as rd
from tilecolor import tiling as tl
from tilecolor import verifier as vf
from tilecolor.cli import chi_square_fairness, run_reduction_batch
from tilecolor.graphcore import BLANK, Coloring, coloration_of, spot_of_triple
from tilecolor.palette import default_palette
from tilecolor.randgraph import (BipartiteGraph, DiGraph, count_tournaments,
                                 embedding_experiment, matching_failure_experiment,
                                 max_matching, max_matching_brute, sample_digraph,
                                 tournament_moment_experiment)
from tilecolor.rngutil import rng_from

DESK_C = Fraction(2)


def report(criterion, ok, detail):
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


@pytest.fixture(scope="module")
def keystone_runs(palette):
    runs = []
    t0 = time.time()
    for p in (5, 7):
        for seed in range(1, 11):
            inst, planted, _ = tl.make_planted_instance(p, seed=seed)
            om = rd.OmegaPad.generate_proceeding(p**7, seed=10_000 * p + seed)
            gcp, layout = rd.reduce_instance(inst, om, DESK_C)
            tpl, emb, ref = co.reference_coloring(
                inst, planted, gcp.graph, layout, palette, seed=seed)
            runs.append({"p": p, "seed": seed, "inst": inst, "planted": planted,
                         "gcp": gcp, "layout": layout, "ref": ref})
    return {"runs": runs, "elapsed": time.time() - t0}


def test_criterion_1_keystone_round_trip(keystone_runs, palette):
    good = 0
    for run in keystone_runs["runs"]:
        verdict = vf.verify_coloring(run["gcp"].graph, run["ref"],
                                     run["gcp"].coloration)
        square = vf.extract_tiling(run["gcp"].graph, run["ref"],
                                   run["layout"].params, palette)
        run["verdict"] = bool(verdict)
        good += bool(verdict) and square == run["planted"]
    elapsed = keystone_runs["elapsed"]
    report(1, good == 20 and elapsed < 600,
           f"{good}/20 gen->reduce->color->verify->extract round trips "
           f"(p in {{5,7}}, c=2), pipeline build {elapsed:.0f}s < 600s")


def test_criterion_2_blank_budget_equality(keystone_runs):
    bad = []
    for run in keystone_runs["runs"]:
        params = run["layout"].params
        audit = vf.audit_blanks(run["gcp"].graph, run["ref"])
        expect = tuple(params.b_vector()) + (run["gcp"].meta["b8"],)
        if audit.counts != expect or audit.unclassifiable:
            bad.append((run["p"], run["seed"], audit.counts, expect,
                        len(audit.unclassifiable)))
    report(2, not bad,
           "audit vector equals (k, 4p^2, 8p^2, 2p^2, 2p^2, 2p^2, 4p^2-1, "
           f"2p^2-1, b8) with zero unclassifiable on all 20 runs{bad or ''}")


@pytest.fixture(scope="module")
def tournament_report():
    t0 = time.time()
    rep = tournament_moment_experiment(4, 1, 100_000, seed=2026)
    rep["elapsed"] = time.time() - t0
    return rep


def test_criterion_3_lemma1_exact_oracle(tournament_report):
    rep = tournament_report
    dev1 = abs(rep["mean"] - rep["exact_mean"])
    dev2 = abs(rep["mean_sq"] - rep["exact_mean_sq"])
    ok = dev1 <= 3 * rep["se_mean"] and dev2 <= 3 * rep["se_mean_sq"] \
        and rep["elapsed"] < 300
    report("3 (exact-oracle clauses)", ok,
           f"E[X]={rep['mean']:.5f} vs exact {rep['exact_mean']:.5f} "
           f"({dev1 / rep['se_mean']:.2f} SE), E[X^2]={rep['mean_sq']:.5f} vs "
           f"{rep['exact_mean_sq']:.5f} ({dev2 / rep['se_mean_sq']:.2f} SE), "
           f"{rep['elapsed']:.0f}s < 300s")


@pytest.mark.xfail(strict=True, reason=(
    "spec defect at desk scale: at k=4, c=1 the exact expectation "
    "C(n,k) k! 2^(-k^2) = 0.02563 deviates 59% from the asymptotic m^-c "
    "= 0.0625 (and E[X^2] deviates 37% from m^-c + m^-2c), so the 20%/25% "
    "relative tolerances cannot be met by any faithful implementation; "
    "see the decisions ledger"))
def test_criterion_3_lemma1_asymptotic_clauses(tournament_report):
    rep = tournament_report
    ok1 = abs(rep["mean"] - rep["asymptotic_mean"]) <= 0.2 * rep["asymptotic_mean"]
    ok2 = abs(rep["mean_sq"] - rep["asymptotic_mean_sq"]) \
        <= 0.25 * rep["asymptotic_mean_sq"]
    report("3 (asymptotic clauses)", ok1 and ok2,
           f"E[X] within 20% of m^-c: {ok1}; E[X^2] within 25%: {ok2}")


def test_criterion_4_lemma2_tail():
    bs = (6, 8, 10)
    rates = []
    all_bounded = True
    for b in bs:
        rep = matching_failure_experiment(50, b, 10_000, seed=2026 + b)
        rates.append(rep["failure_rate"])
        all_bounded &= rep["failure_rate"] <= rep["bound_8e3"]
    decreasing = rates[0] > rates[1] > rates[2]
    slope = float(np.polyfit(bs, np.log(rates), 1)[0])
    ok = decreasing and -1.3 <= slope <= -0.7 and all_bounded
    report(4, ok, f"rates {['%.4f' % r for r in rates]} strictly decreasing, "
                  f"log-slope {slope:.3f} in [-1.3,-0.7], all under 8e^3 n e^-b")


def test_criterion_5_embedding_success():
    rep = embedding_experiment(6, 6, 4096, 100, seed0=0)
    report(5, rep["rate"] >= 0.95,
           f"di-embed 6x6 alternating-loop toroidal grid into 4096-node "
           f"hosts: {rep['successes']}/100 (every embedding re-validated "
           f"pairwise)")


@pytest.fixture(scope="module")
def reduction_batch():
    return run_reduction_batch(5, DESK_C, 1000, 13, collect_pairs=True)


def test_criterion_6_code_distinctness(reduction_batch):
    rep = reduction_batch
    params = rep["params"]
    birthday = params.u_t**2 / (2 * 3**params.k)
    rate = rep["full_collision_rate"]
    within = birthday / 2 <= rate <= 2 * birthday
    clean = rep["post_retry_full_collisions"] == 0 and \
        rep["post_retry_trailing_collisions"] == 0
    report(6, within and clean,
           f"pre-retry collision rate {rate:.4f} within factor 2 of "
           f"|U_T|^2/(2*3^k) = {birthday:.4f}; post-retry outputs "
           f"collision-free incl. trailing truncation over 1000 reductions")


def test_criterion_7_mutation_suite(keystone5):
    gcp, ref = keystone5["gcp"], keystone5["ref"]
    base = vf.audit_blanks(gcp.graph, ref)
    allowed = np.fromiter(gcp.coloration.spots, dtype=np.int64)
    rng = rng_from(2026, 0x3117)
    us, vs = np.nonzero(gcp.graph.adj)
    n = gcp.graph.n
    total = 1000
    silent_blank = 0
    missed_type_change = 0
    reasons = set()
    for _ in range(total):
        i = int(rng.integers(0, len(us)))
        a, b = int(us[i]), int(vs[i])
        old = int(ref.colors[a, b])
        new = int(rng.integers(1, 5))
        if new == old:
            new = new % 4 + 1
        colors = ref.colors.copy()
        colors[a, b] = new
        mutated = Coloring(colors)
        # budget first, then the spots of every triple through (a, b)
        if mutated.blank_count() != gcp.coloration.blanks:
            verdict = vf.Verdict(False, "budget")
        else:
            ws = np.array([w for w in range(n) if w != a and w != b])
            trips = np.stack([np.full(len(ws), a), np.full(len(ws), b), ws], axis=1)
            from tilecolor.graphcore import spots_of_triples
            spots = spots_of_triples(mutated, trips)
            if (~np.isin(spots, allowed)).any():
                verdict = vf.Verdict(False, "spot")
            else:
                verdict = vf.Verdict(True)
        blank_touching = BLANK in (old, new)
        if not verdict:
            reasons.add(verdict.reason)
        if blank_touching and verdict:
            silent_blank += 1
        audit = vf.audit_blanks(gcp.graph, mutated)
        if (audit.counts != base.counts or audit.unclassifiable) and verdict:
            missed_type_change += 1
    ok = silent_blank == 0 and missed_type_change == 0 and \
        reasons <= {"spot", "budget"} and reasons
    report(7, ok,
           f"{total} single-edge recolorings: zero silent blank-touching "
           f"mutations, zero accepted type-vector changes, rejection "
           f"reasons {sorted(reasons)}")


def test_criterion_8_oracle_equivalences():
    # tournament counting vs brute force
    import itertools

    def brute_tournaments(g, k):
        cnt = 0
        for sub in itertools.combinations(range(g.n), k):
            if not all(g.adj[u, u] for u in sub):
                continue
            ok = True
            degs = []
            for u in sub:
                d = 0
                for v in sub:
                    if u != v:
                        if g.adj[u, v] == g.adj[v, u]:
                            ok = False
                        elif g.adj[u, v]:
                            d += 1
                degs.append(d)
            if ok and sorted(degs) == list(range(k)):
                cnt += 1
        return cnt

    rng = rng_from(2026, 1)
    for trial in range(1000):
        n = int(rng.integers(4, 10))
        k = int(rng.integers(2, 5))
        g = sample_digraph(n, 31_000 + trial)
        if count_tournaments(g, k) != brute_tournaments(g, k):
            report(8, False, f"tournament count mismatch at trial {trial}")

    # maximum matching vs exhaustive
    for trial in range(1000):
        n = int(rng.integers(2, 9))
        e = rng.random((n, n)) < rng.uniform(0.15, 0.9)
        b = BipartiteGraph(e)
        if len(max_matching(b)) != max_matching_brute(b):
            report(8, False, f"matching size mismatch at trial {trial}")

    # brute_solve vs an independent row-composition enumeration
    from tests.test_tiling import enumerate_tilings_by_rows
    solved = 0
    for trial in range(100):
        inst = tl.rtp_sample(4, 52_000 + trial, alphabet=tuple("abc"))
        if inst is None:
            continue
        got = tl.brute_solve(inst, limit=600_000)
        want = enumerate_tilings_by_rows(inst)
        if (got is not None) != want:
            report(8, False, f"tiling solvability mismatch at trial {trial}")
        solved += 1

    # coloration vs naive triple enumeration at n = 40
    import itertools as it
    g = sample_digraph(40, 9)
    rngc = rng_from(40, 2)
    colors = np.where(g.adj, rngc.integers(1, 5, size=(40, 40)), 0).astype(np.uint8)
    c = Coloring(colors)
    naive = frozenset(spot_of_triple(c, i, j, k)
                      for i, j, k in it.combinations(range(40), 3))
    if coloration_of(g, c).spots != naive:
        report(8, False, "coloration mismatch at n=40")

    report(8, True,
           f"count_tournaments == brute force (1000 graphs), max_matching == "
           f"exhaustive (1000 graphs), brute_solve == row enumeration "
           f"({solved} instances), coloration_of == naive (n=40)")


def test_criterion_9_uniformity_audit(reduction_batch):
    rep = reduction_batch
    stat, dof, pval = chi_square_fairness(rep["present"], rep["observed"])
    # abort-gate proceed rate on 1024-bit pads
    rng = rng_from(2026, 0xAB0)
    trials = 100_000
    thr = math.ceil(math.log2(1024))
    lead = rng.integers(0, 2, size=(trials, thr), dtype=np.uint8)
    proceeds = int((lead.sum(axis=1) == 0).sum())
    q = 2.0**-thr
    se = math.sqrt(trials * q * (1 - q))
    gate_ok = abs(proceeds - trials * q) <= 3 * se
    ok = pval >= 0.001 and gate_ok
    report(9, ok,
           f"chi-square over {dof} unforced pair positions from 1000 "
           f"reductions: p={pval:.4f} (no rejection at alpha=0.001); "
           f"abort-gate proceeds {proceeds}/{trials} vs {trials * q:.1f} "
           f"within 3 SE")
