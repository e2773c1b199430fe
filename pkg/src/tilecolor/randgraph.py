"""Random digraph samplers and the combinatorial engines behind the
reduction: transitive-tournament counting, bipartite perfect matching,
equitable partition into independent sets, and di-embedding of bounded
degree patterns into random hosts, plus the Monte Carlo experiments that
validate the supporting random-graph facts at desk scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graphcore import DiGraph
from .rngutil import rng_from


def iroot(x, r):
    """Floor of the r-th root of a non-negative integer, exactly."""
    if x < 0:
        raise ValueError("negative radicand")
    if x == 0:
        return 0
    guess = int(round(x ** (1.0 / r)))
    while guess**r > x:
        guess -= 1
    while (guess + 1) ** r <= x:
        guess += 1
    return guess


def pow2_floor(exponent):
    """floor(2**exponent) for a rational exponent, in exact arithmetic."""
    e = Fraction(exponent)
    if e < 0:
        return 0
    num, den = e.numerator, e.denominator
    return iroot(1 << num, den)


@dataclass(frozen=True)
class SamplerParams:
    """Parameters of the forced-tournament sampler lambda_c."""

    k: int
    c: Fraction
    seed: int
    n: int = field(init=False)
    m: int = field(init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "c", Fraction(self.c))
        object.__setattr__(self, "n", pow2_floor(self.k - self.c))
        object.__setattr__(self, "m", 2**self.k)
        if self.n < 1:
            raise ValueError("degenerate parameters: n < 1")


def sample_digraph(n, seed):
    """Uniform digraph on n nodes: each ordered pair (loops included)
    present independently with probability 1/2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_from(seed, 0xD16)
    return DiGraph(rng.integers(0, 2, size=(n, n), dtype=np.uint8).astype(bool))


def force_tournament(adj, order):
    """Overwrite adj so the node sequence order = (t_1 .. t_k) carries a
    transitive tournament: all self-loops, arcs t_j -> t_i for j > i.
    t_1 is the sink."""
    order = list(order)
    for t in order:
        adj[t, t] = True
    for j in range(len(order)):
        for i in range(len(order)):
            if i != j:
                adj[order[j], order[i]] = j > i
    return adj


def sample_lambda_c(params):
    """Sample from lambda_c: choose a uniform sequence of k nodes, force a
    transitive tournament on them, flip fair coins for all pairs outside
    V(T)^2.  Returns (graph, forced node sequence t_1..t_k)."""
    if params.n < params.k:
        raise ValueError("n < k: cannot force a k-tournament")
    rng = rng_from(params.seed, 0x1AC)
    adj = rng.integers(0, 2, size=(params.n, params.n), dtype=np.uint8).astype(bool)
    order = [int(x) for x in rng.choice(params.n, size=params.k, replace=False)]
    force_tournament(adj, order)
    return DiGraph(adj), tuple(order)


def count_tournaments(g, k):
    """Exact number of k-node subsets of g carrying a transitive tournament
    (complete acyclic digraph with all self-loops).  Backtracking over
    dominance chains; each qualifying subset is counted once via its unique
    topological order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = g.n
    if k > n:
        return 0
    adj = g.adj
    out_mask = [0] * n
    in_mask = [0] * n
    for u in range(n):
        row = adj[u]
        col = adj[:, u]
        m_out = 0
        m_in = 0
        for v in range(n):
            if v != u:
                if row[v]:
                    m_out |= 1 << v
                if col[v]:
                    m_in |= 1 << v
        out_mask[u] = m_out
        in_mask[u] = m_in
    looped = [u for u in range(n) if adj[u, u]]
    # dominates[u]: nodes u beats by a single (non-double) arc
    dominates = [out_mask[u] & ~in_mask[u] for u in range(n)]
    return _count_tournaments_chains(k, looped, dominates)


def _count_tournaments_chains(k, looped, dominates):
    """Count dominance chains of length k over looped nodes; the chain
    order is forced (sink first), so each tournament is counted once."""

    def rec(chain_mask, cands, depth):
        if depth == k:
            return 1
        total = 0
        for u in cands:
            if chain_mask & ~dominates[u] == 0:
                if len(cands) - 1 >= k - depth - 1:
                    total += rec(chain_mask | (1 << u), [v for v in cands if v != u], depth + 1)
        return total

    total = 0
    for i, u in enumerate(looped):
        total += rec(1 << u, looped[:i] + looped[i + 1:], 1)
    return total


def count_tournaments_batch(adjs, k):
    """Vectorized tournament count over a (t, n, n) boolean stack.

    Equivalent to count_tournaments per slice; used by the moment
    experiment where t is large and n is small."""
    adjs = np.asarray(adjs, dtype=bool)
    t, n, _ = adjs.shape
    counts = np.zeros(t, dtype=np.int64)
    target_deg = np.arange(k, dtype=np.int64)
    for subset in itertools.combinations(range(n), k):
        s = np.array(subset, dtype=np.intp)
        sub = adjs[:, s[:, None], s[None, :]]  # (t, k, k)
        loops_ok = sub[:, np.arange(k), np.arange(k)].all(axis=1)
        fwd = sub & ~np.transpose(sub, (0, 2, 1))
        offdiag = ~np.eye(k, dtype=bool)
        single_ok = (sub | np.transpose(sub, (0, 2, 1)))[:, offdiag].all(axis=1) & \
                    (~(sub & np.transpose(sub, (0, 2, 1))))[:, offdiag].all(axis=1)
        deg = np.sort(fwd.sum(axis=2), axis=1)
        acyclic_ok = (deg == target_deg).all(axis=1)
        counts += (loops_ok & single_ok & acyclic_ok).astype(np.int64)
    return counts


def exact_first_moment(n, k):
    """E[X_k] for uniform digraphs, exactly: C(n,k) * k! * 2^(-k^2)."""
    if n < k:
        return 0.0
    return float(Fraction(math.comb(n, k) * math.factorial(k), 2 ** (k * k)))


def exact_second_moment(n, k):
    """E[X_k^2] = sum_l E[N_l], with N_l the ordered tournament pairs
    sharing k-l nodes; E[N_l] = C(k,l)^2 * n!/(n-k-l)! * 2^(l^2-k^2-2kl)."""
    total = Fraction(0)
    for l in range(0, k + 1):
        if n < k + l:
            continue
        falling = math.factorial(n) // math.factorial(n - k - l)
        total += Fraction(math.comb(k, l) ** 2 * falling, 2 ** (k * k - l * l + 2 * k * l))
    return float(total)


def tournament_moment_experiment(k, c, trials, seed, chunk=20_000):
    """Empirical first and second moments of X_k under the uniform
    distribution at n = floor(2^(k-c)), with standard errors and the
    exact/asymptotic reference values."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    params = SamplerParams(k=k, c=Fraction(c), seed=seed)
    n, m = params.n, params.m
    if n < k:
        raise ValueError("degenerate parameters: n < k")
    sum_x = 0.0
    sum_x2 = 0.0
    sum_x4 = 0.0
    done = 0
    part = 0
    while done < trials:
        batch = min(chunk, trials - done)
        rng = rng_from(seed, 0x70, part)
        adjs = rng.integers(0, 2, size=(batch, n, n), dtype=np.uint8).astype(bool)
        xs = count_tournaments_batch(adjs, k).astype(np.float64)
        sum_x += xs.sum()
        sum_x2 += (xs**2).sum()
        sum_x4 += (xs**4).sum()
        done += batch
        part += 1
    mean = sum_x / trials
    mean2 = sum_x2 / trials
    se_mean = math.sqrt(max(mean2 - mean**2, 0.0) / trials)
    se_mean2 = math.sqrt(max(sum_x4 / trials - mean2**2, 0.0) / trials)
    mc = float(m) ** float(-Fraction(c))
    return {
        "k": k, "c": str(Fraction(c)), "n": n, "m": m, "trials": trials,
        "mean": mean, "se_mean": se_mean,
        "mean_sq": mean2, "se_mean_sq": se_mean2,
        "exact_mean": exact_first_moment(n, k),
        "exact_mean_sq": exact_second_moment(n, k),
        "asymptotic_mean": mc,
        "asymptotic_mean_sq": mc + mc**2,
    }


class BipartiteGraph:
    """Bipartite graph on two vertex classes of equal size n; no
    intra-class edges.  `edges[u, v]` connects left u to right v."""

    __slots__ = ("n", "edges")

    def __init__(self, edges):
        edges = np.asarray(edges, dtype=bool)
        if edges.ndim != 2 or edges.shape[0] != edges.shape[1]:
            raise ValueError("edge matrix must be square (equal class sizes)")
        self.edges = edges
        self.n = edges.shape[0]


def hopcroft_karp(adj_lists, n_left, n_right):
    """Maximum matching in a bipartite graph given left adjacency lists.
    Returns match_left (list of partner-or-minus-one).  Lowest-index-first
    tie-breaking: adjacency lists are scanned in order."""
    INF = n_left + n_right + 1
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    dist = [0] * n_left

    def bfs():
        queue = []
        for u in range(n_left):
            if match_l[u] == -1:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = INF
        found = INF
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            if dist[u] < found:
                for v in adj_lists[u]:
                    w = match_r[v]
                    if w == -1:
                        found = dist[u] + 1
                    elif dist[w] == INF:
                        dist[w] = dist[u] + 1
                        queue.append(w)
        return found != INF

    def dfs(u):
        for v in adj_lists[u]:
            w = match_r[v]
            if w == -1 or (dist[w] == dist[u] + 1 and dfs(w)):
                match_l[u] = v
                match_r[v] = u
                return True
        dist[u] = INF
        return False

    while bfs():
        for u in range(n_left):
            if match_l[u] == -1:
                dfs(u)
    return match_l


def max_matching(b):
    """Maximum matching of a BipartiteGraph as a list of (left, right)
    pairs; a perfect matching has size n."""
    adj_lists = [np.flatnonzero(b.edges[u]).tolist() for u in range(b.n)]
    match_l = hopcroft_karp(adj_lists, b.n, b.n)
    return [(u, v) for u, v in enumerate(match_l) if v != -1]


def max_matching_brute(b):
    """Exhaustive maximum-matching size via subset DP; oracle for n <= 12."""
    n = b.n
    masks = [sum(1 << int(v) for v in np.flatnonzero(b.edges[u])) for u in range(n)]
    best = {0: 0}
    for u in range(n):
        nxt = dict(best)
        for used, size in best.items():
            avail = masks[u] & ~used
            while avail:
                bit = avail & -avail
                avail ^= bit
                key = used | bit
                if nxt.get(key, -1) < size + 1:
                    nxt[key] = size + 1
        best = nxt
    return max(best.values())


def matching_failure_experiment(n, b, trials, seed):
    """Fraction of random bipartite graphs (edge probability b/n) with no
    perfect matching, with the tail references from the matching bound."""
    if not 0 < b <= n:
        raise ValueError("need 0 < b <= n")
    failures = 0
    p = b / n
    for t in range(trials):
        rng = rng_from(seed, 0x3A7C4, t)
        edges = rng.random((n, n)) < p
        g = BipartiteGraph(edges)
        if len(max_matching(g)) < n:
            failures += 1
    rate = failures / trials
    se = math.sqrt(max(rate * (1 - rate), 1.0 / trials)) / math.sqrt(trials)
    return {
        "n": n, "b": b, "trials": trials,
        "failure_rate": rate, "se": se,
        "dominant_term": 2 * math.e**3 * n * math.exp(-b),
        "bound_8e3": 8 * math.e**3 * n * math.exp(-b),
    }


class PartitionError(RuntimeError):
    """Raised when equitable_partition cannot certify a partition."""


def _neighbor_masks(g):
    und = g.adj | g.adj.T
    np.fill_diagonal(und, False)
    return [sum(1 << int(v) for v in np.flatnonzero(und[u])) for u in range(g.n)]


def undirected_degrees(g):
    """Neighbor counts (double edges once per neighbor, loops ignored)."""
    und = g.adj | g.adj.T
    np.fill_diagonal(und, False)
    return und.sum(axis=1)


def equitable_partition(g, d, seed=0):
    """Partition g's nodes into d independent sets with sizes differing by
    at most one.  Exact search for n <= 20, greedy-with-repair beyond;
    raises PartitionError when no certified partition is found.

    The partition theorem guarantees success when the maximum degree is
    below d; smaller d may still work and is attempted anyway."""
    n = g.n
    degs = undirected_degrees(g)
    if d < 1:
        raise PartitionError("d must be positive")
    masks = _neighbor_masks(g)
    base, extra = divmod(n, d)
    caps = [base + 1 if i < extra else base for i in range(d)]

    if n <= 20:
        assign = [-1] * n
        class_mask = [0] * d
        class_size = [0] * d
        order = sorted(range(n), key=lambda u: -int(degs[u]))

        def search(idx):
            if idx == n:
                return True
            u = order[idx]
            seen_empty_caps = set()
            for cl in range(d):
                if class_size[cl] >= caps[cl]:
                    continue
                if class_mask[cl] & masks[u]:
                    continue
                if class_size[cl] == 0:
                    if caps[cl] in seen_empty_caps:
                        continue  # empty classes of equal capacity are symmetric
                    seen_empty_caps.add(caps[cl])
                assign[u] = cl
                class_mask[cl] |= 1 << u
                class_size[cl] += 1
                if search(idx + 1):
                    return True
                assign[u] = -1
                class_mask[cl] &= ~(1 << u)
                class_size[cl] -= 1
            return False

        if not search(0):
            raise PartitionError("exact search found no equitable partition")
        classes = [[] for _ in range(d)]
        for u in range(n):
            classes[assign[u]].append(u)
        return _certify(classes, masks, n, d)

    for attempt in range(64):
        rng = rng_from(seed, 0xE0, attempt)
        order = [int(x) for x in rng.permutation(n)]
        order.sort(key=lambda u: -int(degs[u]))
        assign = [-1] * n
        class_mask = [0] * d
        class_size = [0] * d
        ok = True
        for u in order:
            placed = False
            choices = sorted(range(d), key=lambda cl: class_size[cl])
            for cl in choices:
                if class_size[cl] < caps[cl] and not (class_mask[cl] & masks[u]):
                    assign[u] = cl
                    class_mask[cl] |= 1 << u
                    class_size[cl] += 1
                    placed = True
                    break
            if not placed:
                # repair: move one conflicting neighbor out of some class
                for cl in range(d):
                    if class_size[cl] >= caps[cl]:
                        continue
                    conflicts = [v for v in range(n) if assign[v] == cl and masks[u] >> v & 1]
                    moved = False
                    for v in conflicts:
                        for cl2 in range(d):
                            if cl2 != cl and class_size[cl2] < caps[cl2] and \
                                    not (class_mask[cl2] & masks[v]):
                                class_mask[cl] &= ~(1 << v)
                                class_size[cl] -= 1
                                assign[v] = cl2
                                class_mask[cl2] |= 1 << v
                                class_size[cl2] += 1
                                moved = True
                                break
                        if moved:
                            break
                    if moved and not (class_mask[cl] & masks[u]) and class_size[cl] < caps[cl]:
                        assign[u] = cl
                        class_mask[cl] |= 1 << u
                        class_size[cl] += 1
                        placed = True
                        break
            if not placed:
                ok = False
                break
        if ok:
            classes = [[] for _ in range(d)]
            for u in range(n):
                classes[assign[u]].append(u)
            return _certify(classes, masks, n, d)
    raise PartitionError("greedy repair failed to certify a partition")


def _certify(classes, masks, n, d):
    sizes = sorted(len(c) for c in classes)
    if sum(sizes) != n or (sizes and sizes[-1] - sizes[0] > 1):
        raise PartitionError("partition is not equitable")
    for cls in classes:
        cm = sum(1 << u for u in cls)
        for u in cls:
            if masks[u] & cm:
                raise PartitionError("class is not independent")
    return classes


@dataclass
class Embedding:
    """Injective node map from a pattern graph into a host, fixed on the
    pinned subset (the identity there, unless explicit pins were given),
    preserving every connected 2-node subgraph exactly."""

    mapping: dict
    fixed: frozenset
    identity_fixed: bool = True

    def validate(self, f, g):
        vals = list(self.mapping.values())
        if len(set(vals)) != len(vals):
            raise ValueError("embedding is not injective")
        if self.identity_fixed:
            for u in self.fixed:
                if self.mapping[u] != u:
                    raise ValueError("embedding is not the identity on the fixed subset")
        fa, ga = f.adj, g.adj
        nodes = sorted(self.mapping)
        for u, v in itertools.combinations(nodes, 2):
            if fa[u, v] or fa[v, u]:
                a, b = self.mapping[u], self.mapping[v]
                if fa[u, v] != ga[a, b] or fa[v, u] != ga[b, a]:
                    raise ValueError(f"pair ({u},{v}) not preserved")
        for u in nodes:
            if fa[u, u] != ga[self.mapping[u], self.mapping[u]]:
                raise ValueError(f"loop of {u} not preserved")


class EmbedFailure(RuntimeError):
    """A matching extension step failed; the caller may reseed."""


def lemma_size_bound(d):
    """The embedding lemma's size threshold 2 d^3 4^d (desk runs are
    normally far below it; di_embed proceeds best-effort)."""
    return 2 * d**3 * 4**d


def di_embed(f, h, g, seed, type_pools=None, pins=None):
    """Di-embed pattern f into host g, identity on the node set h (or,
    when `pins` maps pattern nodes to prescribed host nodes, fixing those
    images instead).

    Follows the matching route: unplaced pattern nodes are split into
    independent sets of the auxiliary graph F' (pattern plus edges between
    non-fixed nodes sharing a fixed neighbor), each set type-homogeneous in
    loop status, and every set is placed by one perfect-matching step
    against the unused host nodes of its type.  `type_pools` optionally
    restricts the host candidates per loop status ({True: looped pool,
    False: unlooped pool}); by default all host nodes are available, which
    can only help the matchings.  Raises EmbedFailure when a step cannot
    saturate its set.
    """
    h = frozenset(int(x) for x in h)
    identity_mode = pins is None
    if pins is None:
        pins = {u: u for u in h}
    if set(pins) != set(h):
        raise ValueError("pins must cover exactly the fixed subset")
    for u in h:
        if not (f.adj[u, u] == g.adj[pins[u], pins[u]]):
            raise ValueError("fixed node loop status differs between pattern and host")
    free = [u for u in range(f.n) if u not in h]
    if not free:
        emb = Embedding(dict(pins), h, identity_mode)
        emb.validate(f, g)
        return emb

    # auxiliary graph F': add edges between free nodes sharing a fixed neighbor
    und = f.adj | f.adj.T
    np.fill_diagonal(und, False)
    aux = und.copy()
    for w in h:
        nbrs = [u for u in np.flatnonzero(und[w]) if u not in h]
        for a, b in itertools.combinations(nbrs, 2):
            aux[a, b] = aux[b, a] = True

    mapping = dict(pins)
    used = set(mapping.values())
    rng = rng_from(seed, 0xD1E)

    f_loops = np.diag(f.adj)
    g_loops = np.diag(g.adj)

    # pins-only candidacy pre-pass: how contested is each host node?  The
    # per-step candidate lists are ordered least-contested-first so the
    # greedy phase does not strand scarce hosts that later sets depend on.
    contested = np.zeros(g.n, dtype=np.int64)
    for u in free:
        pool_u = np.array(
            type_pools[bool(f_loops[u])] if type_pools else
            [v for v in range(g.n) if bool(g_loops[v]) == bool(f_loops[u])],
            dtype=np.intp)
        ok = np.ones(len(pool_u), dtype=bool)
        for w in np.flatnonzero(und[u]):
            if w in pins:
                t = pins[w]
                ok &= g.adj[pool_u, t] == f.adj[u, w]
                ok &= g.adj[t, pool_u] == f.adj[w, u]
        contested[pool_u[ok]] += 1

    for looped in (True, False):
        nodes = [u for u in free if bool(f_loops[u]) == looped]
        if not nodes:
            continue
        sub = DiGraph(aux[np.ix_(nodes, nodes)])
        d_sub = int(undirected_degrees(sub).max(initial=0))
        classes = equitable_partition(sub, d_sub + 1, seed=seed)
        pool_all = type_pools[looped] if type_pools else \
            [v for v in range(g.n) if bool(g_loops[v]) == looped]
        for cls in classes:
            members = [nodes[i] for i in cls]
            if not members:
                continue
            pool = [v for v in pool_all if v not in used]
            perm = rng.permutation(len(pool))
            pool_arr = np.array([pool[i] for i in perm], dtype=np.intp)
            rank = np.argsort(contested[pool_arr], kind="stable")
            adj_lists = []
            for u in members:
                placed_nbrs = [w for w in np.flatnonzero(und[u]) if w in mapping]
                ok = np.ones(len(pool_arr), dtype=bool)
                for w in placed_nbrs:
                    t = mapping[w]
                    ok &= g.adj[pool_arr, t] == f.adj[u, w]
                    ok &= g.adj[t, pool_arr] == f.adj[w, u]
                cand = [int(i) for i in rank if ok[i]]
                adj_lists.append(cand)
            pool = pool_arr.tolist()
            match_l = hopcroft_karp(adj_lists, len(members), len(pool))
            if any(mv == -1 for mv in match_l):
                raise EmbedFailure(
                    f"matching step could not place {sum(mv == -1 for mv in match_l)} "
                    f"of {len(members)} nodes")
            for u, mv in zip(members, match_l):
                mapping[u] = pool[mv]
                used.add(pool[mv])

    emb = Embedding(mapping, h, identity_mode)
    emb.validate(f, g)
    return emb


def toroidal_grid_pattern(rows, cols):
    """Alternating-loop toroidal grid: arcs (x,y)->(x+1,y) and
    (x,y)->(x,y+1) on Z_rows x Z_cols, loop iff x+y even."""
    n = rows * cols
    g = DiGraph.empty(n)

    def nid(x, y):
        return (x % rows) * cols + (y % cols)

    for x in range(rows):
        for y in range(cols):
            u = nid(x, y)
            g.adj[u, nid(x + 1, y)] = True
            g.adj[u, nid(x, y + 1)] = True
            if (x + y) % 2 == 0:
                g.adj[u, u] = True
    return g


def sample_compatible_host(f, n, seed, max_tries=1000):
    """Random n-node digraph with at least as many looped and un-looped
    nodes as the pattern f (equality is required when n == f.n); rejection
    sampled."""
    need_looped = int(np.diag(f.adj).sum())
    need_unlooped = f.n - need_looped
    for t in range(max_tries):
        g = sample_digraph(n, (seed << 10) + t)
        looped = int(np.diag(g.adj).sum())
        if n == f.n:
            if looped == need_looped:
                return g
        elif looped >= need_looped and n - looped >= need_unlooped:
            return g
    raise RuntimeError("could not sample a compatible host")


def embedding_experiment(rows, cols, host_n, seeds, seed0=0):
    """Monte Carlo success rate of di-embedding the alternating-loop
    toroidal grid into compatible random hosts; every returned embedding is
    re-validated pairwise."""
    f = toroidal_grid_pattern(rows, cols)
    successes = 0
    for s in range(seeds):
        g = sample_compatible_host(f, host_n, seed0 + 7919 * s + 1)
        try:
            emb = di_embed(f, frozenset(), g, seed0 + s)
        except EmbedFailure:
            continue
        emb.validate(f, g)
        successes += 1
    return {
        "rows": rows, "cols": cols, "host_n": host_n, "seeds": seeds,
        "successes": successes, "rate": successes / seeds,
    }
