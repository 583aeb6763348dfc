"""Random connected weighted graphs and the stock example spaces, shared
across test modules."""

import numpy as np

from weakhj.space import build_example, build_from_graph

EXAMPLE_KINDS = [
    ("two_point", None),
    ("path", 5),
    ("cycle", 6),
    ("complete", 4),
    ("hypercube", 3),
]


def example_spaces():
    return [build_example(kind, n) for kind, n in EXAMPLE_KINDS]


def random_connected_space(rng, n_max=8):
    """Random spanning tree plus a few extra edges, weights in [0.3, 2]."""
    n = int(rng.integers(2, n_max + 1))
    edges = []
    for j in range(1, n):
        i = int(rng.integers(0, j))
        edges.append((i, j, float(rng.uniform(0.3, 2.0))))
    for _ in range(int(rng.integers(0, n))):
        i, j = (int(v) for v in rng.integers(0, n, size=2))
        if i != j:
            edges.append((i, j, float(rng.uniform(0.3, 2.0))))
    return build_from_graph(n, edges)
