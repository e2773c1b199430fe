import pytest
from fractions import Fraction

from tilecolor import colorer, reduction, tiling
from tilecolor.palette import default_palette


@pytest.fixture(scope="session")
def palette():
    return default_palette()


@pytest.fixture(scope="session")
def keystone5(palette):
    """One full planted run at p=5, c=2, shared across test modules."""
    inst, planted, meta = tiling.make_planted_instance(5, seed=1)
    omega = reduction.OmegaPad.generate_proceeding(5**7, seed=1247)
    gcp, layout = reduction.reduce_instance(inst, omega, Fraction(2))
    tpl, emb, ref = colorer.reference_coloring(
        inst, planted, gcp.graph, layout, palette, seed=7)
    return {"inst": inst, "planted": planted, "gcp": gcp, "layout": layout,
            "tpl": tpl, "emb": emb, "ref": ref}
