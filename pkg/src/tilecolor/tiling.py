"""Tiles, tiling instances, a pluggable single-tape machine simulator and
the space-time-history-to-tiles compiler.

A tiling square is stored as its p x p table of corner symbols, rows
bottom-up (row 0 at the bottom); tiles are the 2x2 windows of that table,
written (upper-left, upper-right, lower-left, lower-right).  Machine
histories are compiled into tables whose row 0 is a fresh all-'%' row and
whose row r+1 renders the configuration at instant r; witness cells carry
'?' and resolve non-deterministically.

Corner symbol grammar: '%' for the padding row; 'X<' / 'X>' for a tape
symbol X lying left/right of the head; '@QX' for the head in state Q over
symbol X ('@!QX' once the machine has halted and the configuration is
frozen).
"""

from __future__ import annotations

import hashlib
import itertools
import string
from dataclasses import dataclass, field

import numpy as np

from .rngutil import rng_from

LEFT, RIGHT = "L", "R"

# 2-cell codes for the tape symbols of the word-builder convention
TAPE_SYMBOL_CODES = {"0": "00", "1": "10", "#": "11", "$": "01"}


# ---------------------------------------------------------------------------
# prefix codes and the interleaved input word

def prefix_encode(x):
    """Self-delimiting code of a bit string: repeat each digit of |x| in
    binary twice, flip the last bit, then append x."""
    if not x or any(ch not in "01" for ch in x):
        raise ValueError("x must be a non-empty bit string")
    length_bits = format(len(x), "b")
    doubled = "".join(ch + ch for ch in length_bits)
    return doubled[:-1] + ("0" if doubled[-1] == "1" else "1") + x


def prefix_decode(stream):
    """Inverse of prefix_encode on any extension: returns (x, remainder)."""
    length_bits = []
    i = 0
    while True:
        pair = stream[i:i + 2]
        if len(pair) < 2:
            raise ValueError("truncated length prefix")
        length_bits.append(pair[0])
        i += 2
        if pair[0] != pair[1]:
            break
    n = int("".join(length_bits), 2)
    if len(stream) < i + n:
        raise ValueError("truncated payload")
    return stream[i:i + n], stream[i + n:]


def build_input_word(x, w):
    """Interleaved self-delimiting tape word.

    The encoded x-prefix alternates with 0s; the data part interleaves the
    padded strings x' and w.  Odd positions of x' carry the bits of x and
    odd positions of w carry the witness digits; even positions are pads
    with x'_{2i} != w_{2i} for 0 < i < m and x'_{2m} == w_{2m}, the
    equality acting as the end marker.
    """
    if not x or any(ch not in "01" for ch in x):
        raise ValueError("x must be a non-empty bit string")
    m = len(x)
    if len(w) != 2 * m + 1 or any(ch not in "01" for ch in w):
        raise ValueError("w must be a bit string of length 2|x|+1")
    for i in range(1, m):
        if w[2 * i] != "1":
            raise ValueError("w pads at positions 2i (0<i<m) must differ from the 0 pads of x'")
    if w[2 * m] != "0":
        raise ValueError("w pad at position 2m must equal the x' pad (end marker)")
    xt = prefix_encode(x)
    part1 = "".join(ch + "0" for ch in xt)
    xp = []
    for i in range(2 * m + 1):
        xp.append(x[(i - 1) // 2] if i % 2 == 1 else "0")
    part2 = "".join(a + b for a, b in zip(xp, w))
    return part1 + part2


def decode_input_word(y):
    """Recover (x, witness positions in y, witness bits) from a word built
    by build_input_word."""
    collected = []
    i = 0

    def next_prefix_bit():
        nonlocal i
        if i + 2 > len(y) or y[i + 1] != "0":
            raise ValueError("malformed x-prefix interleaving")
        collected.append(y[i])
        i += 2

    # length part of the prefix code: doubled digits, last pair broken
    while True:
        next_prefix_bit()
        next_prefix_bit()
        if collected[-2] != collected[-1]:
            break
    n = int("".join(collected[0:-1:2]), 2)
    for _ in range(n):
        next_prefix_bit()
    x = "".join(collected[-n:])
    rest = y[i:]
    if len(rest) != 2 * (2 * n + 1):
        raise ValueError("data part has the wrong length")
    w = rest[1::2]
    wit_bits = [w[j] for j in range(1, 2 * n + 1, 2)]
    wit_pos = [i + 2 * j + 1 for j in range(1, 2 * n + 1, 2)]
    return x, wit_pos, wit_bits


# ---------------------------------------------------------------------------
# machines and histories

@dataclass(frozen=True)
class MachineTable:
    """Deterministic one-tape machine: (state, symbol) -> (state, symbol,
    direction).  Missing transitions halt the machine."""

    name: str
    states: tuple
    alphabet: tuple
    delta: dict
    start_state: str = "A"

    def step(self, state, sym):
        return self.delta.get((state, sym))


@dataclass
class ConfigRow:
    cells: tuple
    head: int
    state: str


@dataclass
class SpaceTimeHistory:
    """Row-per-instant table of a machine run; exactly one state cell per
    row; frozen_from marks the instant the machine halted, if any."""

    rows: list
    frozen_from: int = None

    def width(self):
        return len(self.rows[0].cells)

    def sides(self, r):
        """Side flags for row r: 'l' strictly left of the head, 'r' else."""
        row = self.rows[r]
        return tuple("l" if j < row.head else "r" for j in range(len(row.cells)))


def tm_run(table, tape, head, state, steps):
    """Run the machine for `steps` transitions from the given configuration.

    Returns a deterministic SpaceTimeHistory of steps+1 rows.  Halting
    freezes the configuration (frozen_from records the instant).  The head
    must stay on the tape; falling off either end raises.
    """
    if not 0 <= head < len(tape):
        raise ValueError("head out of range")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    cells = list(tape)
    rows = [ConfigRow(tuple(cells), head, state)]
    frozen_from = None
    for t in range(steps):
        if frozen_from is not None:
            rows.append(ConfigRow(tuple(cells), head, state))
            continue
        move = table.step(state, cells[head])
        if move is None:
            frozen_from = t
            rows.append(ConfigRow(tuple(cells), head, state))
            continue
        state2, sym2, direction = move
        cells[head] = sym2
        head += 1 if direction == RIGHT else -1
        if head < 0:
            raise ValueError("head fell off the tape's left end (caller contract)")
        if head >= len(cells):
            raise ValueError("head ran off the right end of the fixed-width tape")
        state = state2
        rows.append(ConfigRow(tuple(cells), head, state))
    return SpaceTimeHistory(rows, frozen_from)


def render_corner(history, r, j):
    """Corner symbol of table row r+1 (configuration at instant r), col j."""
    row = history.rows[r]
    frozen = history.frozen_from is not None and r > history.frozen_from
    if j == row.head:
        return ("@!" if frozen else "@") + row.state + row.cells[j]
    return row.cells[j] + ("<" if j < row.head else ">")


def history_table(history):
    """Symbol table of a history: an all-'%' row 0 plus one rendered row
    per instant, bottom-up."""
    width = history.width()
    table = [tuple("%" for _ in range(width))]
    for r in range(len(history.rows)):
        table.append(tuple(render_corner(history, r, j) for j in range(width)))
    return table


# ---------------------------------------------------------------------------
# tiles, instances, squares

def tile_windows(table):
    """All 2x2 windows of a table as (ul, ur, ll, lr) tiles; window (r, c)
    covers rows r, r+1 and columns c, c+1."""
    tiles = {}
    for r in range(len(table) - 1):
        for c in range(len(table[0]) - 1):
            tiles[(r, c)] = (table[r + 1][c], table[r + 1][c + 1],
                             table[r][c], table[r][c + 1])
    return tiles


def is_query_corner(sym):
    return sym.startswith("?")


def resolve_corner(sym, bit):
    """Resolution of a '?' corner by a witness bit, side flag preserved."""
    return bit + sym[1:]


def corner_matches(start_corner, square_corner):
    """Start-side corners may be '?' wildcards standing for their 0/1
    resolutions."""
    if start_corner == square_corner:
        return True
    return is_query_corner(start_corner) and \
        square_corner in (resolve_corner(start_corner, "0"), resolve_corner(start_corner, "1"))


class LazyTileSet:
    """Uniformly random subset of the alphabet^4 tile universe, membership
    decided by a keyed hash; used for large alphabets where the subset
    cannot be materialized."""

    def __init__(self, alphabet, seed):
        self.letters = tuple(alphabet)
        self.seed = seed

    def __contains__(self, tile):
        if any(c not in self.letters for c in tile):
            return False
        key = f"{self.seed}|{tile[0]}|{tile[1]}|{tile[2]}|{tile[3]}".encode()
        return hashlib.blake2b(key, digest_size=1).digest()[0] & 1 == 1


@dataclass(frozen=True)
class TilingInstance:
    """The tiling triple: table side p, legal tile set, and the start
    string of tiles along the bottom row."""

    p: int
    legal: object  # frozenset of tiles or LazyTileSet
    start: tuple

    def __post_init__(self):
        if len(self.start) > self.p - 1:
            raise ValueError("start string longer than the bottom tile row")
        for t in self.start:
            if t not in self.legal:
                raise ValueError("start tile not in the legal set")
        for a, b in zip(self.start, self.start[1:]):
            if a[1] != b[0] or a[3] != b[2]:
                raise ValueError("adjacent start tiles disagree on touching corners")

    def alphabet(self):
        if isinstance(self.legal, LazyTileSet):
            return self.legal.letters
        syms = set()
        for t in self.legal:
            syms.update(t)
        return tuple(sorted(syms))

    def to_json_obj(self):
        if isinstance(self.legal, LazyTileSet):
            raise ValueError("lazy tile sets cannot be serialized; use a materializable alphabet")
        return {"p": self.p,
                "legal": sorted(list(t) for t in self.legal),
                "start": [list(t) for t in self.start]}

    @classmethod
    def from_json_obj(cls, obj):
        return cls(obj["p"], frozenset(tuple(t) for t in obj["legal"]),
                   tuple(tuple(t) for t in obj["start"]))


@dataclass(frozen=True)
class TilingSquare:
    """p x p table of corner symbols, rows bottom-up."""

    table: tuple

    def __post_init__(self):
        p = len(self.table)
        if any(len(row) != p for row in self.table):
            raise ValueError("table must be square")

    @property
    def p(self):
        return len(self.table)

    def to_json_obj(self):
        return {"p": self.p, "square": [list(r) for r in self.table]}

    @classmethod
    def from_json_obj(cls, obj):
        return cls(tuple(tuple(r) for r in obj["square"]))


def verify_tiling(inst, sq):
    """True iff every 2x2 window of the square is a legal tile and the
    bottom tile row starts with the start string ('?' start corners match
    their resolutions)."""
    if sq.p != inst.p:
        raise ValueError("square side does not match the instance")
    for tile in tile_windows(sq.table).values():
        if tile not in inst.legal:
            return False
    for c, st in enumerate(inst.start):
        got = (sq.table[1][c], sq.table[1][c + 1], sq.table[0][c], sq.table[0][c + 1])
        if not all(corner_matches(a, b) for a, b in zip(st, got)):
            return False
    return True


# ---------------------------------------------------------------------------
# history -> instance compiler

def _query_variants(tile, columns_with_query):
    """All witness resolutions of a tile: each '?' column resolves to a
    single bit applied to both of its corners in the window."""
    variants = {tile}
    combos = itertools.product("01", repeat=len(columns_with_query))
    for bits in combos:
        t = list(tile)
        for col_slots, bit in zip(columns_with_query, bits):
            for slot in col_slots:
                t[slot] = resolve_corner(t[slot], bit)
        variants.add(tuple(t))
    return variants


def history_to_tiles(history, witness_cells):
    """Compile a history into a tiling instance plus its planted square.

    `witness_cells` are (row, col) positions in table coordinates with
    row == 1 (the first configuration row); those cells and their unread
    upward copies display '?' in the instance, and the legal set contains
    both the '?'-cornered windows and their bit resolutions.
    """
    resolved = history_table(history)
    width = len(resolved[0])
    depth = len(resolved)
    wit_cols = {}
    for (r, c) in witness_cells:
        if r != 1:
            raise ValueError("witness cells live in table row 1")
        if not 0 <= c < width:
            raise ValueError("witness column out of range")
        wit_cols[c] = None

    # '?' persists upward until the head first visits the column
    q_table = [list(row) for row in resolved]
    for c in wit_cols:
        for r in range(1, depth):
            cfg = history.rows[r - 1]
            if cfg.head == c:
                break
            q_table[r][c] = "?" + ("<" if c < cfg.head else ">")
    q_table = [tuple(row) for row in q_table]

    legal = set()
    for (r, c), tile in tile_windows(q_table).items():
        cols = []
        for col, slots in ((c, (0, 2)), (c + 1, (1, 3))):
            qslots = tuple(s for s in slots if is_query_corner(tile[s]))
            if qslots:
                cols.append(qslots)
        legal.update(_query_variants(tile, cols))
    legal.update(tile_windows(resolved).values())

    start = tuple(tile_windows(q_table)[(0, c)] for c in range(width - 1))
    inst = TilingInstance(depth, frozenset(legal), start)
    planted = TilingSquare(tuple(resolved))
    return inst, planted


# ---------------------------------------------------------------------------
# demo machines

def shuttle_machine():
    """Two-state shuttle: bounces between its start cell and the cell to
    the right, never writing anything new.  Loops forever (period 2)."""
    delta = {}
    for sym in ("0", "1", "*"):
        delta[("A", sym)] = ("B", sym, RIGHT)
        delta[("B", sym)] = ("A", sym, LEFT)
    return MachineTable("shuttle", ("A", "B"), ("0", "1", "*"), delta)


def writer_machine():
    """Writes 1 and moves right forever."""
    delta = {("W", sym): ("W", "1", RIGHT) for sym in ("0", "1", "*")}
    return MachineTable("writer", ("W",), ("0", "1", "*"), delta, start_state="W")


def watanabe_like_machine():
    """Best-effort stand-in for the small universal machine the
    construction references: tape characters {0,1,*,0',1'}, states A..H,
    shuttling over a program segment delimited by '*'.  The published
    transition table is unavailable, so this machine only honors the
    layout interface (program segment, then data); it is NOT the canonical
    universal machine and is labeled accordingly."""
    syms = ("0", "1", "*", "0'", "1'")
    delta = {}
    # A..D: sweep right, priming symbols; E..H: sweep back unpriming.
    for sym, primed in (("0", "0'"), ("1", "1'")):
        delta[("A", sym)] = ("B", primed, RIGHT)
        delta[("B", sym)] = ("C", primed, RIGHT)
        delta[("C", sym)] = ("D", primed, RIGHT)
        delta[("D", sym)] = ("E", primed, LEFT)
    for sym, unprimed in (("0'", "0"), ("1'", "1")):
        delta[("E", sym)] = ("F", unprimed, LEFT)
        delta[("F", sym)] = ("G", unprimed, LEFT)
        delta[("G", sym)] = ("H", unprimed, LEFT)
        delta[("H", sym)] = ("A", unprimed, RIGHT)
    for st in "ABCD":
        delta[(st, "*")] = ("E", "*", LEFT)
        for sym in ("0'", "1'"):
            delta[(st, sym)] = ("E", sym, LEFT)
    for st in "EFGH":
        delta[(st, "*")] = ("A", "*", RIGHT)
        for sym in ("0", "1"):
            delta[(st, sym)] = ("A", sym, RIGHT)
    return MachineTable("watanabe-like (non-canonical)", tuple("ABCDEFGH"), syms, delta)


def calibrate_head_return(table, tape, head, state, steps):
    """Head-offset correction: simulate once, measure the drift delta,
    shift the start position by floor(delta/2), re-simulate and assert the
    head returns.  Raises if the machine does not return after the shift."""
    h = tm_run(table, tape, head, state, steps)
    delta = h.rows[-1].head - h.rows[0].head
    shift = delta // 2
    new_head = head + shift
    if not 0 <= new_head < len(tape):
        raise ValueError("calibration shift leaves the tape")
    h2 = tm_run(table, tape, new_head, state, steps)
    if h2.rows[-1].head != h2.rows[0].head:
        raise ValueError("machine does not return to its start cell after calibration")
    return h2, shift


# ---------------------------------------------------------------------------
# planted instances and the RTP sampler

def make_planted_instance(p, seed):
    """Planted tiling instance of table side p: a shuttle run whose row 1
    lays out program, start-state head and a bit/'?' alternation; witness
    bits are sampled and hidden in the planted square."""
    if p < 4:
        raise ValueError("planted instances need p >= 4")
    rng = rng_from(seed, 0x9E0)
    tape = ["*", "*"]
    witness_cells = []
    witness_bits = {}
    for c in range(2, p):
        if (c - 2) % 2 == 0:
            tape.append(str(int(rng.integers(0, 2))))
        else:
            bit = str(int(rng.integers(0, 2)))
            tape.append(bit)
            witness_cells.append((1, c))
            witness_bits[c] = bit
    machine = shuttle_machine()
    history = tm_run(machine, tape, 1, "A", p - 2)
    for (_, c) in witness_cells:
        for row in history.rows:
            if row.head == c:
                raise AssertionError("demo head must not visit witness columns")
    inst, planted = history_to_tiles(history, witness_cells)
    meta = {"machine": machine.name, "seed": seed, "witness_cols": sorted(witness_bits)}
    return inst, planted, meta


def resample_witness(p, seed, new_bits_seed):
    """Second planted witness for the same instance shape: same input
    bits, different witness bits."""
    inst, _, _ = make_planted_instance(p, seed)
    rng = rng_from(seed, 0x9E0)
    tape = ["*", "*"]
    rng2 = rng_from(new_bits_seed, 0x9E1)
    witness_cells = []
    for c in range(2, p):
        if (c - 2) % 2 == 0:
            tape.append(str(int(rng.integers(0, 2))))
        else:
            rng.integers(0, 2)  # discard the original witness draw
            tape.append(str(int(rng2.integers(0, 2))))
            witness_cells.append((1, c))
    history = tm_run(shuttle_machine(), tape, 1, "A", p - 2)
    inst2, planted2 = history_to_tiles(history, witness_cells)
    if not isinstance(inst.legal, LazyTileSet) and inst2.legal != inst.legal:
        raise AssertionError("witness resample changed the instance")
    return inst, planted2


def make_rrtp_demo_instance(p, seed):
    """Demo of the restricted problem's layout: a calibrated machine run
    over a word with program and data segments; the head returns to its
    start cell (even active step count), and the instance is compiled the
    same way as planted ones."""
    if p < 6:
        raise ValueError("rrtp demo needs p >= 6")
    rng = rng_from(seed, 0x44E)
    tape = ["*", "*"] + [str(int(b)) for b in rng.integers(0, 2, size=p - 2)]
    steps = p - 2 if (p - 2) % 2 == 0 else p - 3
    history, shift = calibrate_head_return(shuttle_machine(), tape, 1, "A", steps)
    if (p - 2) % 2 != 0:
        # pad with one frozen-free repeat by rerunning one step longer is
        # impossible for a looping machine; rerun at full length unchecked
        history = tm_run(shuttle_machine(), tape, 1 + shift, "A", p - 2)
    inst, planted = history_to_tiles(history, [])
    return inst, planted, {"machine": "shuttle", "seed": seed, "head_shift": shift}


DEFAULT_RTP_ALPHABET = tuple(string.ascii_letters)  # 52 letters


def rtp_sample(nmax, seed, alphabet=DEFAULT_RTP_ALPHABET):
    """Sample a random tiling instance: side n with probability
    1/(n(n+1)) truncated at nmax, a uniform subset of the tile universe,
    and a start string grown tile by tile uniformly over the legal
    continuations.  Returns None (nil) when the walk gets stuck."""
    if nmax < 4:
        raise ValueError("nmax must be >= 4")
    rng = rng_from(seed, 0x47b)
    # P(n) = 1/(n(n+1)) for n >= 4, renormalized by truncation at nmax
    weights = np.array([1.0 / (n * (n + 1)) for n in range(4, nmax + 1)])
    n = int(rng.choice(np.arange(4, nmax + 1), p=weights / weights.sum()))
    letters = tuple(alphabet)
    if len(letters) <= 16:
        universe = list(itertools.product(letters, repeat=4))
        mask = rng.integers(0, 2, size=len(universe), dtype=np.uint8).astype(bool)
        legal = frozenset(t for t, m in zip(universe, mask) if m)
        contains = legal.__contains__
    else:
        legal = LazyTileSet(letters, int(rng.integers(0, 2**63)))
        contains = legal.__contains__

    length = 2 * (n - (1 << (n.bit_length() - 1)))
    start = []
    for i in range(length):
        if i == 0:
            if len(letters) <= 16:
                cands = [t for t in itertools.product(letters, repeat=4) if contains(t)]
            else:
                # uniform over the legal set by rejection from the universe
                cands = []
                for _ in range(64):
                    t = tuple(letters[j] for j in rng.integers(0, len(letters), size=4))
                    if contains(t):
                        cands = [t]
                        break
        else:
            prev = start[-1]
            cands = [(prev[1], ur, prev[3], lr)
                     for ur, lr in itertools.product(letters, repeat=2)
                     if contains((prev[1], ur, prev[3], lr))]
        if not cands:
            return None
        start.append(cands[int(rng.integers(0, len(cands)))])
    try:
        return TilingInstance(n, legal, tuple(start))
    except ValueError:
        return None


class SearchLimitExceeded(RuntimeError):
    """brute_solve ran out of its node budget with the search incomplete."""


def brute_solve(inst, limit=2_000_000):
    """Extend the start string to a full square by backtracking over the
    table cells, or return None when the search space is exhausted.  Every
    returned square passes verify_tiling.  Raises SearchLimitExceeded when
    the node budget runs out before the search completes."""
    p = inst.p
    letters = list(inst.alphabet())
    table = [[None] * p for _ in range(p)]
    for c, t in enumerate(inst.start):
        ul, ur, ll, lr = t
        table[1][c], table[1][c + 1] = ul, ur
        table[0][c], table[0][c + 1] = ll, lr
    free = [(r, c) for r in range(p) for c in range(p) if table[r][c] is None]
    nodes = 0

    def window_ok(r, c):
        # window (r, c): rows r, r+1, cols c, c+1; check only when complete
        if not (0 <= r < p - 1 and 0 <= c < p - 1):
            return True
        corners = (table[r + 1][c], table[r + 1][c + 1], table[r][c], table[r][c + 1])
        if any(x is None for x in corners):
            return True
        return corners in inst.legal

    def windows_touching(r, c):
        return [(r - 1, c - 1), (r - 1, c), (r, c - 1), (r, c)]

    def rec(idx):
        nonlocal nodes
        if idx == len(free):
            return True
        r, c = free[idx]
        for sym in letters:
            nodes += 1
            if nodes > limit:
                raise SearchLimitExceeded(f"exceeded {limit} nodes")
            table[r][c] = sym
            if all(window_ok(wr, wc) for wr, wc in windows_touching(r, c)):
                if rec(idx + 1):
                    return True
            table[r][c] = None
        return False

    if not all(window_ok(r, c) for r in range(p - 1) for c in range(p - 1)):
        return None
    if rec(0):
        sq = TilingSquare(tuple(tuple(row) for row in table))
        assert verify_tiling(inst, sq)
        return sq
    return None
