"""Seeded random model generators for verification and benchmarking."""

from __future__ import annotations

import numpy as np

from .mrf import (MrfModel, SparseTruncatedPotential, _grid_edges,
                  truncated_linear_potential)

__all__ = [
    "random_sparse_potential",
    "random_unaries",
    "random_grid_model",
    "random_tree_model",
    "random_bench_grid",
    "tree_diameter",
    "is_forest",
]


def random_sparse_potential(rng: np.random.Generator, M: int,
                            max_m: int | None = None) -> SparseTruncatedPotential:
    """Random robust potential: floor in [0.05, 0.5], stored values above it.

    Keeping every stored value strictly above the floor matches the robust
    (truncated) family the fast updates target, keeps messages strictly
    positive, and makes the log-domain twin safe for fast max-sum.
    """
    fbar = float(rng.uniform(0.05, 0.5))
    cap = M if max_m is None else min(max_m, M)
    indptr = np.zeros(M + 1, dtype=np.int64)
    indices: list[np.ndarray] = []
    values: list[np.ndarray] = []
    for xj in range(M):
        size = int(rng.integers(0, cap + 1))
        idx = np.sort(rng.choice(M, size=size, replace=False)).astype(np.int64)
        indices.append(idx)
        values.append(rng.uniform(fbar * 1.05, 1.0, size=size))
        indptr[xj + 1] = indptr[xj] + size
    return SparseTruncatedPotential(
        M, fbar, indptr,
        np.concatenate(indices) if indices else np.empty(0, dtype=np.int64),
        np.concatenate(values) if values else np.empty(0, dtype=np.float64))


def random_unaries(rng: np.random.Generator, n: int, M: int) -> np.ndarray:
    return rng.uniform(0.1, 1.0, size=(n, M))


def random_grid_model(rng: np.random.Generator, max_side: int = 8,
                      max_M: int = 32, shared_potential: bool | None = None) -> MrfModel:
    """Random grid MRF with random robust potentials (shared or per-edge)."""
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    M = int(rng.integers(2, max_M + 1))
    if shared_potential is None:
        shared_potential = bool(rng.integers(0, 2))
    edges = _grid_edges(h, w)
    if shared_potential:
        potentials: list[SparseTruncatedPotential] | SparseTruncatedPotential = \
            random_sparse_potential(rng, M, max_m=min(5, M))
    else:
        potentials = [random_sparse_potential(rng, M, max_m=min(5, M)) for _ in edges]
    return MrfModel(M, random_unaries(rng, h * w, M), edges, potentials,
                    grid_shape=(h, w))


def random_tree_model(rng: np.random.Generator, max_nodes: int = 8,
                      max_M: int = 5) -> MrfModel:
    """Random tree MRF (node i attaches to a uniform earlier node)."""
    n = int(rng.integers(1, max_nodes + 1))
    M = int(rng.integers(2, max_M + 1))
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    potentials = [random_sparse_potential(rng, M, max_m=min(4, M)) for _ in edges]
    return MrfModel(M, random_unaries(rng, n, M), edges, potentials)


def random_bench_grid(height: int, width: int, M: int, T: float,
                      alpha: float = 1.0, seed: int = 0) -> MrfModel:
    """Benchmark instance: random unaries, shared truncated-linear potential."""
    rng = np.random.default_rng(seed)
    pot = truncated_linear_potential(M, alpha, T)
    return MrfModel(M, random_unaries(rng, height * width, M),
                    _grid_edges(height, width), pot, grid_shape=(height, width))


def tree_diameter(model: MrfModel) -> int:
    """Longest path length (in edges) over the components of a forest."""
    adj: list[list[int]] = [[] for _ in range(model.n_nodes)]
    for a, b in model.edges:
        adj[a].append(int(b))
        adj[b].append(int(a))

    def farthest(start: int) -> tuple[int, int]:
        # depth-first, but path lengths are unique in a forest
        dist = {start: 0}
        stack = [start]
        best = (0, start)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    best = max(best, (dist[v], v))
                    stack.append(v)
        return best

    seen: set[int] = set()
    diameter = 0
    for s in range(model.n_nodes):
        if s in seen:
            continue
        _, far = farthest(s)
        d, _ = farthest(far)
        diameter = max(diameter, d)
        stack = [s]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(adj[u])
    return diameter


def is_forest(model: MrfModel) -> bool:
    """True when the edge set contains no cycle."""
    parent = list(range(model.n_nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in model.edges:
        ra, rb = find(int(a)), find(int(b))
        if ra == rb:
            return False
        parent[ra] = rb
    return True
