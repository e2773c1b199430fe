"""The palette: concrete colors for every symbolic link class, the cell
symbol table, a mechanical consistency checker, and the rule-generated
spot whitelist.

The source text fixes many link colorings ("forward edge blank and the
parallel edge grey" for h, double blank for v, and so on) but the figures
carrying the remaining concrete assignments are unavailable, so this
module is the single versioned authority for them.  The whitelist is
generated from the class rules alone (never from a particular witness),
so the emitted coloration is identical across witnesses of the same
instance.
"""

from __future__ import annotations

import hashlib
import itertools
import json

import numpy as np

from .graphcore import (ABSENT, BLANK, COLOR_NAMES, GREEN, GREY, RED,
                        canon_spots_batch)

# node classes for whitelist generation; loop color alternatives per class
NODE_CLASSES = ("T", "LG", "UT", "U0", "U1", "L1")
LOOP_COLORS = {
    "T": (BLANK,),
    "LG": (GREY, RED, GREEN),   # grid looped nodes: segment/head colors
    "UT": (ABSENT,),
    "U0": (ABSENT,),
    "U1": (ABSENT,),
    "L1": (GREY,),
}

_DEFAULT = {(GREY, ABSENT), (ABSENT, GREY), (GREY, GREY), (ABSENT, ABSENT)}
_ALL25 = {(a, b) for a in range(5) for b in range(5)}
_SYMBOL_DOUBLES = {(a, b) for a in (GREY, RED, GREEN) for b in (GREY, RED, GREEN)}


def _with_mirror(d):
    out = {}
    for (a, b), pats in d.items():
        out.setdefault((a, b), set()).update(pats)
        out.setdefault((b, a), set()).update({(q, p_) for (p_, q) in pats})
    return out


# Pair pattern sets per ordered class pair (colors are (c_ab, c_ba)).
# Pairs with a T endpoint are fully generous: the exhibit machinery colors
# arbitrary coin configurations there and the scarcity argument lives in
# the blank budget, not in T-side spot tightness.
PAIR_PATTERNS = _with_mirror({
    ("T", "T"): {(GREEN, ABSENT), (ABSENT, GREEN)},
    ("T", "LG"): set(_ALL25),
    ("T", "UT"): set(_ALL25),
    ("T", "U0"): set(_ALL25),
    ("T", "U1"): _DEFAULT | {(GREY, BLANK), (BLANK, GREY)},
    ("T", "L1"): set(_DEFAULT),
    ("UT", "UT"): set(_DEFAULT),
    ("UT", "LG"): _DEFAULT | {(BLANK, GREEN), (BLANK, RED), (BLANK, ABSENT),
                              (GREEN, BLANK), (RED, BLANK), (ABSENT, BLANK)},
    ("UT", "U0"): _DEFAULT | {(RED, GREY), (GREY, RED), (RED, GREEN),
                              (GREEN, RED), (GREY, GREEN), (GREEN, GREY)},
    ("UT", "U1"): set(_DEFAULT),
    ("UT", "L1"): set(_DEFAULT),
    ("U0", "U0"): _DEFAULT | {(BLANK, RED), (RED, BLANK), (BLANK, ABSENT),
                              (ABSENT, BLANK), (RED, ABSENT), (ABSENT, RED),
                              (GREEN, ABSENT), (ABSENT, GREEN)},
    ("U0", "LG"): _DEFAULT | {(BLANK, GREY), (GREY, BLANK), (BLANK, BLANK)},
    ("U0", "U1"): set(_DEFAULT),
    ("U0", "L1"): set(_DEFAULT),
    ("U1", "U1"): set(_DEFAULT),
    ("U1", "LG"): set(_DEFAULT),
    ("U1", "L1"): set(_DEFAULT),
    ("L1", "L1"): set(_DEFAULT),
    ("L1", "LG"): set(_DEFAULT),
    ("LG", "LG"): _DEFAULT | _SYMBOL_DOUBLES |
                  {(BLANK, RED), (RED, BLANK), (BLANK, GREEN), (GREEN, BLANK),
                   (RED, ABSENT), (ABSENT, RED), (GREEN, ABSENT), (ABSENT, GREEN)},
})


# Link classes: (loop_a, loop_b, color_ab, color_ba); None marks a slot the
# class leaves to context (loop colors of grid nodes vary by row).
LINK_CLASSES = {
    "h": ("looped", "unlooped", BLANK, GREY),
    "v": ("looped", "unlooped", BLANK, BLANK),
    "d1": ("unlooped", "unlooped", BLANK, RED),
    "d2": ("unlooped", "unlooped", BLANK, ABSENT),
    "d3": ("looped", "looped", BLANK, GREEN),
    "H": ("unlooped", "unlooped", RED, ABSENT),
    "V": ("unlooped", "unlooped", GREEN, ABSENT),
    "Hodd": ("looped", "looped", BLANK, RED),
    "Vodd": ("looped", "looped", RED, ABSENT),
    "I1": ("looped", "unlooped", BLANK, GREEN),   # reverse may also be red
    "I2": ("looped", "unlooped", BLANK, ABSENT),
    "K": ("unlooped", "blankloop", BLANK, None),
    "C": ("unlooped", "blankloop", BLANK, GREY),
    "B": ("blankloop", "unlooped", BLANK, GREEN),
    "L": ("blankloop", "unlooped", BLANK, RED),
    "M": ("looped", "blankloop", BLANK, None),
    "D": ("looped", "looped", BLANK, BLANK),      # reserved, unused
    "transfer_LR_left": ("looped", "looped", RED, RED),
    "transfer_LR_right": ("looped", "looped", GREEN, GREEN),
    "transfer_Z1": ("looped", "looped", RED, GREEN),
    "transfer_Z2": ("looped", "looped", GREEN, RED),
    "position_I2": ("unlooped", "unlooped", RED, GREY),
    "position_I1": ("unlooped", "unlooped", RED, GREEN),
    "position_I1_alt": ("unlooped", "unlooped", GREY, GREEN),
    "sigma": ("looped", "looped", None, None),    # symbol doubles, table-driven
    "S": ("looped", "blankloop", BLANK, GREY),    # state anchor to t_3
    "default": (None, None, GREY, GREY),
}

# exhibit colors for the monotone-ordering code digits on z-t pairs:
# down(01) -> red, up(10) -> green, double(11) -> grey
EXHIBIT_COLOR = {1: RED, 2: GREEN, 3: GREY}
# colors on the input nodes' own t-edges: red below the key position,
# blank at it, grey above
VT_BELOW, VT_ABOVE = RED, GREY


def _symbol_values():
    """Fixed cell-value universe the palette can display: padding and
    witness marks, the small-machine tape symbols, and head compounds
    (state x symbol, plus their frozen variants)."""
    vals = ["%", "?"]
    syms = ("0", "1", "*", "0'", "1'")
    vals.extend(syms)
    for st in ("A", "B", "W"):
        for sym in ("0", "1", "*"):
            vals.append("@" + st + sym)
            vals.append("@!" + st + sym)
    return vals


def _build_symbol_table():
    """value -> (H-pair colors, V-pair colors), two base-3 digits each over
    (grey, red, green); 81 slots available."""
    trip = (GREY, RED, GREEN)
    table = {}
    for idx, val in enumerate(_symbol_values()):
        if idx >= 81:
            raise ValueError("symbol table overflow")
        a, b = divmod(idx, 9)
        table[val] = ((trip[a // 3], trip[a % 3]), (trip[b // 3], trip[b % 3]))
    return table


class PaletteError(ValueError):
    pass


class Palette:
    """Versioned color assignments for every link class plus the cell
    symbol table used on the even grid."""

    def __init__(self):
        self.link_classes = dict(LINK_CLASSES)
        self.symbol_table = _build_symbol_table()
        self.exhibit_color = dict(EXHIBIT_COLOR)
        self._whitelist = None

    def version_hash(self):
        payload = json.dumps(
            {"classes": {k: list(v) for k, v in sorted(self.link_classes.items())},
             "symbols": {k: [list(a), list(b)] for k, (a, b) in
                         sorted(self.symbol_table.items())},
             "exhibit": {str(k): v for k, v in sorted(self.exhibit_color.items())}},
            sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_json_obj(self):
        return {
            "version": self.version_hash(),
            "link_classes": {k: [x if isinstance(x, str) or x is None else COLOR_NAMES[x]
                                 for x in v]
                             for k, v in sorted(self.link_classes.items())},
            "symbol_table": {k: [[COLOR_NAMES[c] for c in a], [COLOR_NAMES[c] for c in b]]
                             for k, (a, b) in sorted(self.symbol_table.items())},
        }

    def symbol_colors(self, value):
        if value not in self.symbol_table:
            raise PaletteError(f"cell value {value!r} is outside the palette symbol table")
        return self.symbol_table[value]

    def symbol_from_colors(self, a_pair, b_pair):
        key = (tuple(a_pair), tuple(b_pair))
        inv = getattr(self, "_inv_symbols", None)
        if inv is None:
            inv = {(a, b): v for v, (a, b) in self.symbol_table.items()}
            self._inv_symbols = inv
        if key not in inv:
            raise PaletteError(f"unknown symbol colors {key}")
        return inv[key]

    def consistency_check(self):
        """Mechanically verify the textual rules the class colors must
        honor; raises PaletteError on violation."""
        lc = self.link_classes
        if lc["h"][2] != BLANK or lc["h"][3] != GREY:
            raise PaletteError("h must be forward blank, reverse grey")
        if lc["v"][2] != BLANK or lc["v"][3] != BLANK:
            raise PaletteError("v-links use double blank edges")
        if lc["d1"][3] != RED:
            raise PaletteError("d1 reverse must be red")
        if lc["d2"][3] != ABSENT:
            raise PaletteError("d2 parallel edge must be absent")
        for cls in ("I1", "I2"):
            if lc[cls][2] != BLANK or lc[cls][3] not in (GREEN, RED, ABSENT):
                raise PaletteError("I forward blank, reverse green/red/absent")
        pos = {tuple(lc["position_I2"][2:]), tuple(lc["position_I1"][2:]),
               tuple(lc["position_I1_alt"][2:])}
        if pos != {(RED, GREY), (RED, GREEN), (GREY, GREEN)}:
            raise PaletteError("position links must be red-grey / red-green / grey-green")
        # distinct directed classes carry pairwise distinct full patterns
        directed = ["h", "v", "d1", "d2", "d3", "Hodd", "Vodd", "H", "V",
                    "I1", "I2", "B", "L", "C",
                    "position_I1", "position_I2", "position_I1_alt",
                    "transfer_LR_left", "transfer_LR_right",
                    "transfer_Z1", "transfer_Z2"]
        seen = {}
        for cls in directed:
            pat = tuple(lc[cls])
            if pat in seen:
                raise PaletteError(f"classes {seen[pat]} and {cls} share a pattern")
            seen[pat] = cls
        return True

    def whitelist(self):
        """The rule-generated spot whitelist: canonical spots of every
        triangle assembled from the class pair-pattern sets with class
        loop colors.  Independent of instance and witness."""
        if self._whitelist is not None:
            return self._whitelist
        vecs = []
        idx = {c: i for i, c in enumerate(NODE_CLASSES)}
        for c1, c2, c3 in itertools.combinations_with_replacement(NODE_CLASSES, 3):
            p12 = PAIR_PATTERNS[(c1, c2)]
            p13 = PAIR_PATTERNS[(c1, c3)]
            p23 = PAIR_PATTERNS[(c2, c3)]
            loops = list(itertools.product(LOOP_COLORS[c1], LOOP_COLORS[c2],
                                           LOOP_COLORS[c3]))
            for (a12, a21), (a13, a31), (a23, a32) in itertools.product(p12, p13, p23):
                for l1, l2, l3 in loops:
                    vecs.append((l1, l2, l3, a12, a21, a13, a31, a23, a32))
        # the full grey/absent default closure, so the guaranteed-default
        # triples skipped by the triangle stream are always whitelisted
        for l1, l2, l3 in itertools.product(range(5), repeat=3):
            for arcs in itertools.product((ABSENT, GREY), repeat=6):
                vecs.append((l1, l2, l3) + arcs)
        spots = set(canon_spots_batch(np.array(vecs, dtype=np.int64)).tolist())
        self._whitelist = frozenset(spots)
        return self._whitelist


_DEFAULT_PALETTE = None


def default_palette():
    global _DEFAULT_PALETTE
    if _DEFAULT_PALETTE is None:
        _DEFAULT_PALETTE = Palette()
        _DEFAULT_PALETTE.consistency_check()
    return _DEFAULT_PALETTE
