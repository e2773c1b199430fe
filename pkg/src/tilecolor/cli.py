"""Batch front end: instance generation, reduction, coloring from a
witness, verification, extraction, and the Monte Carlo experiments, all
deterministic given --seed.

Exit codes for `verify`: 0 accept, 1 reject on a spot, 2 reject on the
blank budget, 3 structural extraction failure (used by `extract`).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from fractions import Fraction

import numpy as np

from . import colorer, reduction, tiling, verifier
from .graphcore import Coloring, DiGraph, dump_json, load_json
from .palette import default_palette
from .rngutil import rng_from

PROFILES = {"paper": Fraction(61, 6), "desk": Fraction(2)}


def _parse_c(args):
    if args.c is not None:
        return Fraction(args.c)
    return PROFILES[args.profile]


def cmd_gen(args):
    if args.kind == "planted":
        inst, planted, meta = tiling.make_planted_instance(args.p, args.seed)
        obj = inst.to_json_obj()
        obj["meta"] = meta
        dump_json(obj, args.out)
        dump_json(planted.to_json_obj(), args.out + ".witness.json")
        print(f"wrote {args.out} (+ witness sidecar), p={inst.p}, "
              f"{len(inst.legal)} legal tiles")
        return 0
    if args.kind == "rrtp-demo":
        inst, planted, meta = tiling.make_rrtp_demo_instance(args.p, args.seed)
        obj = inst.to_json_obj()
        obj["meta"] = meta
        dump_json(obj, args.out)
        dump_json(planted.to_json_obj(), args.out + ".witness.json")
        print(f"wrote {args.out} (+ witness sidecar), head shift {meta['head_shift']}")
        return 0
    # rtp
    alphabet = tiling.DEFAULT_RTP_ALPHABET[:args.alphabet]
    inst = tiling.rtp_sample(args.nmax, args.seed, alphabet=alphabet)
    if inst is None:
        print("nil: the start-string walk got stuck", file=sys.stderr)
        return 1
    dump_json(inst.to_json_obj(), args.out)
    print(f"wrote {args.out}, n={inst.p}, start length {len(inst.start)}")
    return 0


def load_instance(path):
    return tiling.TilingInstance.from_json_obj(load_json(path))


def cmd_reduce(args):
    inst = load_instance(args.instance)
    c = _parse_c(args)
    draws = 0
    rng = rng_from(args.seed, 0xCE)
    while True:
        draws += 1
        pad_seed = int(rng.integers(0, 2**62))
        omega = reduction.OmegaPad.generate(inst.p**7, pad_seed)
        out = reduction.reduce_instance(inst, omega, c)
        if out is not None:
            break
        if draws > 10_000_000:
            print("pad draws exhausted", file=sys.stderr)
            return 1
    gcp, layout = out
    gcp.meta["pad_draws"] = draws
    dump_json(gcp.to_json_obj(), args.out)
    if args.debug_layout:
        obj = layout.to_json_obj()
        obj["p"] = inst.p
        obj["c"] = str(c)
        dump_json(obj, args.debug_layout)
    print(f"wrote {args.out}: {gcp.meta['node_count']} nodes, "
          f"blanks {gcp.meta['blanks']}, {draws} pad draws, "
          f"{gcp.meta['retries']} code retries")
    return 0


def load_gcp(path):
    return reduction.GcpInstance.from_json_obj(load_json(path))


def load_layout(path):
    obj = load_json(path)
    params = reduction.derive_params(obj["p"], Fraction(obj["c"]))
    return reduction.Layout(
        params, tuple(obj["t"]), tuple(obj["v"]), tuple(obj["z"]),
        tuple(obj["u0"]), tuple(obj["u1"]), tuple(obj["l1"]), obj["s"],
        obj["retries"], obj["first_draw_full_collision"],
        obj["first_draw_trailing_collision"])


def cmd_color(args):
    gcp = load_gcp(args.gcp)
    witness = tiling.TilingSquare.from_json_obj(load_json(args.witness))
    inst = load_instance(args.instance)
    layout = load_layout(args.layout)
    pal = default_palette()
    tpl, emb, ref = colorer.reference_coloring(
        inst, witness, gcp.graph, layout, pal, seed=args.seed)
    dump_json(ref.to_json_obj(), args.out)
    print(f"wrote {args.out}: {ref.blank_count()} blank edges, "
          f"{emb.attempts} embedding attempts")
    return 0


def cmd_verify(args):
    gcp = load_gcp(args.gcp)
    c = Coloring.from_json_obj(load_json(args.coloring), gcp.graph)
    verdict = verifier.verify_coloring(gcp.graph, c, gcp.coloration,
                                       exhaustive=args.exhaustive)
    if args.json:
        import json
        print(json.dumps({"accepted": verdict.accepted, "reason": verdict.reason,
                          "detail": repr(verdict.detail)}))
    else:
        print("accept" if verdict else f"reject ({verdict.reason}): {verdict.detail}")
    if verdict:
        return 0
    return 1 if verdict.reason == "spot" else 2


def cmd_extract(args):
    gcp = load_gcp(args.gcp)
    c = Coloring.from_json_obj(load_json(args.coloring), gcp.graph)
    verdict = verifier.verify_coloring(gcp.graph, c, gcp.coloration)
    if not verdict:
        print(f"refusing to extract: coloring rejected ({verdict.reason})",
              file=sys.stderr)
        return 1 if verdict.reason == "spot" else 2
    params = reduction.derive_params(gcp.meta["p"], Fraction(gcp.meta["c"]))
    try:
        square = verifier.extract_tiling(gcp.graph, c, params, default_palette())
    except verifier.ExtractionError as exc:
        print(f"structural extraction failure: {exc}", file=sys.stderr)
        return 3
    dump_json(square.to_json_obj(), args.out)
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# experiments

CSV_FIELDS = ["experiment", "params", "trials", "estimate", "stderr",
              "reference", "tolerance", "status"]


def _write_rows(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow(r)
    for r in rows:
        print(f"{r['experiment']}[{r['params']}] estimate={r['estimate']} "
              f"ref={r['reference']} ({r['status']})")


def _row(name, params, trials, estimate, stderr, reference, tolerance, ok):
    return {"experiment": name, "params": params, "trials": trials,
            "estimate": f"{estimate:.6g}", "stderr": f"{stderr:.3g}",
            "reference": f"{reference:.6g}", "tolerance": tolerance,
            "status": "pass" if ok else "fail"}


def experiment_tournaments(k, c, trials, seed):
    from .randgraph import tournament_moment_experiment
    rep = tournament_moment_experiment(k, c, trials, seed)
    rows = [
        _row("tournaments-mean", f"k={k},c={c}", trials, rep["mean"],
             rep["se_mean"], rep["exact_mean"], "3 SE of exact",
             abs(rep["mean"] - rep["exact_mean"]) <= 3 * rep["se_mean"]),
        _row("tournaments-mean-vs-asymptotic", f"k={k},c={c}", trials,
             rep["mean"], rep["se_mean"], rep["asymptotic_mean"],
             "20% relative",
             abs(rep["mean"] - rep["asymptotic_mean"]) <= 0.2 * rep["asymptotic_mean"]),
        _row("tournaments-second-moment", f"k={k},c={c}", trials,
             rep["mean_sq"], rep["se_mean_sq"], rep["exact_mean_sq"],
             "3 SE of exact",
             abs(rep["mean_sq"] - rep["exact_mean_sq"]) <= 3 * rep["se_mean_sq"]),
        _row("tournaments-second-vs-asymptotic", f"k={k},c={c}", trials,
             rep["mean_sq"], rep["se_mean_sq"], rep["asymptotic_mean_sq"],
             "25% relative",
             abs(rep["mean_sq"] - rep["asymptotic_mean_sq"])
             <= 0.25 * rep["asymptotic_mean_sq"]),
    ]
    return rows


def experiment_matching(n, bs, trials, seed):
    from .randgraph import matching_failure_experiment
    rows = []
    rates = []
    for b in bs:
        rep = matching_failure_experiment(n, b, trials, seed + b)
        rates.append(rep["failure_rate"])
        rows.append(_row("matching-failure", f"n={n},b={b}", trials,
                         rep["failure_rate"], rep["se"], rep["bound_8e3"],
                         "rate <= 8e^3 n e^-b",
                         rep["failure_rate"] <= rep["bound_8e3"]))
    if all(r > 0 for r in rates) and len(bs) >= 2:
        xs = np.array(bs, dtype=float)
        ys = np.log(np.array(rates))
        slope = float(np.polyfit(xs, ys, 1)[0])
        decreasing = all(a > b for a, b in zip(rates, rates[1:]))
        rows.append(_row("matching-tail-slope", f"n={n},b={list(bs)}", trials,
                         slope, 0.0, -1.0, "slope in [-1.3,-0.7], rates decreasing",
                         -1.3 <= slope <= -0.7 and decreasing))
    return rows


def experiment_embedding(rows_, cols, host_n, seeds, seed):
    from .randgraph import embedding_experiment
    rep = embedding_experiment(rows_, cols, host_n, seeds, seed0=seed)
    se = math.sqrt(max(rep["rate"] * (1 - rep["rate"]), 1.0 / seeds) / seeds)
    return [_row("embedding-success", f"{rows_}x{cols}->n={host_n}", seeds,
                 rep["rate"], se, 0.95, "rate >= 0.95", rep["rate"] >= 0.95)]


def run_reduction_batch(p, c, trials, seed, collect_pairs=False, s=None):
    """Shared driver for the codes and uniformity experiments: `trials`
    non-nil reductions of one planted instance shape with fixed s."""
    inst, _, _ = tiling.make_planted_instance(p, seed=seed)
    params = reduction.derive_params(p, c)
    n_nodes = params.node_count
    present = np.zeros((n_nodes, n_nodes), dtype=np.int32)
    observed = np.zeros((n_nodes, n_nodes), dtype=np.int32)
    full_collisions = 0
    trailing_collisions = 0
    retries_total = 0
    post_full = post_trailing = 0
    rng = rng_from(seed, 0xBA7C4)
    for t in range(trials):
        pad_seed = int(rng.integers(0, 2**62))
        omega = reduction.OmegaPad.generate_proceeding(p**7, pad_seed)
        gcp, layout = reduction.reduce_instance(inst, omega, c)
        full_collisions += layout.first_draw_full_collision
        trailing_collisions += layout.first_draw_trailing_collision
        retries_total += layout.retries
        d = reduction.digit_matrix(gcp.graph.adj, layout.t, list(layout.v))
        rows = [tuple(int(x) for x in r) for r in d]
        j0 = params.j_min - 1
        if len(set(rows)) != len(rows):
            post_full += 1
        if len({r[j0:] for r in rows}) != len(rows):
            post_trailing += 1
        if collect_pairs:
            free = ~reduction.reduce_forced_mask(layout)
            observed += free
            present += gcp.graph.adj & free
    return {
        "params": params, "trials": trials,
        "full_collision_rate": full_collisions / trials,
        "trailing_collision_rate": trailing_collisions / trials,
        "retries": retries_total,
        "post_retry_full_collisions": post_full,
        "post_retry_trailing_collisions": post_trailing,
        "present": present, "observed": observed,
    }


def experiment_codes(p, c, trials, seed):
    rep = run_reduction_batch(p, c, trials, seed)
    params = rep["params"]
    birthday = params.u_t**2 / (2 * 3**params.k)
    rate = rep["full_collision_rate"]
    se = math.sqrt(max(rate * (1 - rate), 1.0 / trials) / trials)
    within2 = birthday / 2 <= rate <= 2 * birthday if rate > 0 else False
    return [
        _row("codes-collision-rate", f"p={p},c={c}", trials, rate, se,
             birthday, "within factor 2 of the birthday estimate", within2),
        _row("codes-post-retry", f"p={p},c={c}", trials,
             rep["post_retry_full_collisions"] + rep["post_retry_trailing_collisions"],
             0.0, 0.0, "no collisions after retries",
             rep["post_retry_full_collisions"] == 0
             and rep["post_retry_trailing_collisions"] == 0),
    ]


def chi_square_fairness(present, observed):
    """Chi-square statistic over per-position frequencies with varying
    observation counts; returns (stat, dof, p_value)."""
    from scipy.stats import chi2
    mask = observed > 0
    x = present[mask].astype(np.float64)
    m = observed[mask].astype(np.float64)
    stat = float((((x - m / 2) ** 2) / (m / 4)).sum())
    dof = int(mask.sum())
    return stat, dof, float(chi2.sf(stat, dof))


def experiment_uniformity(p, c, trials, seed, omega_trials=100_000, omega_len=1024):
    rep = run_reduction_batch(p, c, trials, seed, collect_pairs=True)
    stat, dof, pval = chi_square_fairness(rep["present"], rep["observed"])
    rows = [_row("uniformity-chi2", f"p={p},c={c}", trials, pval, 0.0, 0.001,
                 "does not reject at alpha=0.001", pval >= 0.001)]
    rng = rng_from(seed, 0xAB0)
    thr = math.ceil(math.log2(omega_len))
    lead = rng.integers(0, 2, size=(omega_trials, thr), dtype=np.uint8)
    proceeds = int((lead.sum(axis=1) == 0).sum())
    q = 2.0**-thr
    se = math.sqrt(omega_trials * q * (1 - q))
    rows.append(_row("abort-gate-rate", f"|w|={omega_len}", omega_trials,
                     proceeds, math.sqrt(max(proceeds, 1)), omega_trials * q,
                     "within 3 SE",
                     abs(proceeds - omega_trials * q) <= 3 * se))
    return rows


def cmd_experiment(args):
    seed = args.seed
    trials = args.trials
    if args.name == "tournaments":
        rows = experiment_tournaments(args.k, Fraction(args.c or 1), trials or 100_000, seed)
    elif args.name == "matching":
        rows = experiment_matching(args.n, [int(b) for b in args.b.split(",")],
                                   trials or 10_000, seed)
    elif args.name == "embedding":
        rows = experiment_embedding(args.rows, args.cols, args.host_n,
                                    trials or 100, seed)
    elif args.name == "codes":
        rows = experiment_codes(args.p, _parse_c(args), trials or 1000, seed)
    elif args.name == "uniformity":
        rows = experiment_uniformity(args.p, _parse_c(args), trials or 1000, seed)
    else:
        print(f"unknown experiment {args.name}", file=sys.stderr)
        return 2
    _write_rows(args.out, rows)
    return 0 if all(r["status"] == "pass" for r in rows) else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="tilecolor",
                                 description="tiling-to-graph-coloration toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a tiling instance")
    g.add_argument("kind", choices=["planted", "rtp", "rrtp-demo"])
    g.add_argument("--p", type=int, default=5)
    g.add_argument("--nmax", type=int, default=16)
    g.add_argument("--alphabet", type=int, default=52,
                   help="RTP corner alphabet size (>16 cannot be serialized)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("reduce", help="reduce an instance to a coloration instance")
    r.add_argument("instance")
    r.add_argument("--c", default=None, help="exponent offset (rational, e.g. 61/6)")
    r.add_argument("--profile", choices=list(PROFILES), default="desk")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--debug-layout", default=None)
    r.set_defaults(func=cmd_reduce)

    c = sub.add_parser("color", help="color a reduced instance from a witness")
    c.add_argument("gcp")
    c.add_argument("--instance", required=True)
    c.add_argument("--witness", required=True)
    c.add_argument("--layout", required=True,
                   help="layout sidecar from reduce --debug-layout")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_color)

    v = sub.add_parser("verify", help="verify a coloring against its coloration")
    v.add_argument("gcp")
    v.add_argument("coloring")
    v.add_argument("--exhaustive", action="store_true")
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("extract", help="extract the tiling from an accepted coloring")
    e.add_argument("gcp")
    e.add_argument("coloring")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_extract)

    x = sub.add_parser("experiment", help="run a named Monte Carlo experiment")
    x.add_argument("name", choices=["tournaments", "matching", "embedding",
                                    "codes", "uniformity"])
    x.add_argument("--k", type=int, default=4)
    x.add_argument("--c", default=None)
    x.add_argument("--profile", choices=list(PROFILES), default="desk")
    x.add_argument("--n", type=int, default=50)
    x.add_argument("--b", default="6,8,10")
    x.add_argument("--p", type=int, default=5)
    x.add_argument("--rows", type=int, default=6)
    x.add_argument("--cols", type=int, default=6)
    x.add_argument("--host-n", type=int, default=4096)
    x.add_argument("--trials", type=int, default=None)
    x.add_argument("--jobs", type=int, default=1,
                   help="worker processes for trial fan-out")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
