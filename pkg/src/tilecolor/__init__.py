"""Randomized reduction from restricted random tiling instances to the
graph coloration problem: samplers, the reduction, the constructive
colorer, the verifier/extractor, and Monte Carlo experiments for the
supporting random-graph facts."""

__version__ = "0.1.0"
