"""Exact inference on tiny models by direct enumeration of all configurations.

Ground truth for BP correctness tests: on trees, converged BP beliefs must
match these marginals, and max-sum labels must match the enumerated MAP
wherever it is unique.  Scoring runs in the log domain with a max shift so
products of many sub-unity potentials cannot underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mrf import MrfModel, SparseTruncatedPotential

__all__ = ["ExactResult", "StateSpaceTooLargeError", "enumerate_exact"]

_CHUNK = 1 << 18


class StateSpaceTooLargeError(ValueError):
    """M**n_nodes exceeds the enumeration guard."""


@dataclass
class ExactResult:
    """Exact marginals, one maximizing configuration, and log partition mass.

    ``map_config`` is the lexicographically smallest maximizer (node 0 most
    significant), mirroring the deterministic tie-break of map_labels;
    ``map_unique`` records whether it is the only maximizer.
    """

    marginals: np.ndarray
    map_config: np.ndarray
    log_Z: float
    map_unique: bool = True


def _chunk_labels(lo: int, hi: int, node: int, n_nodes: int, M: int) -> np.ndarray:
    """Labels of ``node`` for configuration indices [lo, hi) in lexicographic order."""
    idx = np.arange(lo, hi, dtype=np.int64)
    return (idx // M ** (n_nodes - 1 - node)) % M


def _chunk_logp(model: MrfModel, log_unaries: np.ndarray, log_tables: list[np.ndarray],
                lo: int, hi: int) -> np.ndarray:
    n, M = model.n_nodes, model.M
    labels = [_chunk_labels(lo, hi, i, n, M) for i in range(n)]
    logp = np.zeros(hi - lo, dtype=np.float64)
    for i in range(n):
        logp += log_unaries[i][labels[i]]
    for (a, b), table in zip(model.edges, log_tables):
        logp += table[labels[a], labels[b]]
    return logp


def enumerate_exact(model: MrfModel, guard: int = 10**7) -> ExactResult:
    """Enumerate all M**N configurations of Eq-style pairwise factorization.

    Args:
        model: the MRF to solve exactly.
        guard: refuse enumeration beyond this many configurations.

    Raises:
        StateSpaceTooLargeError: when M**N exceeds ``guard``.
        ValueError: when every configuration has zero probability.
    """
    n, M = model.n_nodes, model.M
    total = M**n
    if total > guard:
        raise StateSpaceTooLargeError(
            f"state space M^N = {M}^{n} = {total} exceeds guard {guard}")

    # Score with the same log-domain tables max-sum BP consumes, so the MAP
    # comparison is apples to apples; the marginal tolerance absorbs the
    # log/exp round trip relative to sum-product BP.
    log_unaries = model.log_unaries
    log_tables = []
    for pot in model.potentials:
        log_pot = pot.to_log()
        if isinstance(log_pot, SparseTruncatedPotential):
            log_pot = log_pot.densify()
        log_tables.append(log_pot.table)

    best_logp = -np.inf
    best_idx = 0
    logp_chunks: list[np.ndarray] = []
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        logp = _chunk_logp(model, log_unaries, log_tables, lo, hi)
        logp_chunks.append(logp)
        k = int(np.argmax(logp))
        if logp[k] > best_logp:  # strict: keeps the lexicographically first maximizer
            best_logp = float(logp[k])
            best_idx = lo + k

    if not np.isfinite(best_logp):
        raise ValueError("every configuration has zero probability; marginals undefined")

    z_acc = 0.0
    n_maximizers = 0
    marginals = np.zeros((n, M), dtype=np.float64)
    for ci, lo in enumerate(range(0, total, _CHUNK)):
        hi = min(lo + _CHUNK, total)
        w = np.exp(logp_chunks[ci] - best_logp)
        z_acc += float(w.sum())
        n_maximizers += int((logp_chunks[ci] == best_logp).sum())
        for i in range(n):
            marginals[i] += np.bincount(_chunk_labels(lo, hi, i, n, M),
                                        weights=w, minlength=M)
    marginals /= z_acc

    map_config = np.array(
        [_chunk_labels(best_idx, best_idx + 1, i, n, M)[0] for i in range(n)],
        dtype=np.int64)
    return ExactResult(marginals, map_config, best_logp + float(np.log(z_acc)),
                       map_unique=n_maximizers == 1)
