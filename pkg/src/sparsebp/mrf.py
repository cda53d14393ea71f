"""Pairwise MRF data model: label spaces, potentials and graph topology.

A model couples discrete variables (all sharing one label count M) through
per-node unary tables and per-edge pairwise potentials.  Pairwise potentials
come in two flavors: a plain dense M x M table, and a truncated ("robust")
form stored as a constant floor plus the per-column entries that differ from
it.  The truncated form is what enables the fast message update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "LabelSpace",
    "DensePotential",
    "SparseTruncatedPotential",
    "MrfModel",
    "truncated_linear_potential",
    "sparse_from_dense",
    "build_grid_mrf",
    "read_model_text",
    "write_model_text",
    "ModelFormatError",
]


@dataclass(frozen=True)
class LabelSpace:
    """Uniform discrete state space: every node takes values in [0, M)."""

    M: int

    def __post_init__(self) -> None:
        if not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise ValueError(f"label count must be a positive integer, got {self.M!r}")


class DensePotential:
    """Pairwise potential stored as a full M x M table.

    Entry ``table[x_i, x_j]`` is the potential value for the ordered state
    pair.  Values must not be NaN; nonnegativity is required only when the
    potential is used in the sum-product (probability) domain and is checked
    there.
    """

    def __init__(self, table: np.ndarray):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ValueError(f"potential table must be square, got shape {table.shape}")
        if np.isnan(table).any():
            raise ValueError("potential table contains NaN")
        self.table = table
        self.table.setflags(write=False)
        self._log: DensePotential | None = None

    @property
    def M(self) -> int:
        return self.table.shape[0]

    def to_log(self) -> "DensePotential":
        """Log-domain twin of this potential (entries ln f; 0 maps to -inf)."""
        if self._log is None:
            with np.errstate(divide="ignore"):
                self._log = DensePotential(np.log(self.table))
        return self._log

    def __repr__(self) -> str:
        return f"DensePotential(M={self.M})"


class SparseTruncatedPotential:
    """Pairwise potential equal to a constant ``fbar`` off a sparse support.

    For each column state x_j the potential keeps only the entries whose
    value differs from ``fbar`` (the "compatible" states of x_j); everywhere
    else the value is exactly ``fbar``.  Storage is CSC-like:

    * ``col_indptr[x_j] : col_indptr[x_j + 1]`` delimits column x_j,
    * ``col_indices`` holds the x_i indices, strictly increasing per column,
    * ``col_values`` holds f(x_i, x_j),
    * ``col_residuals`` holds f(x_i, x_j) - fbar, precomputed so the fast
      update's inner loop does no subtraction.

    The same container serves the log domain (values ln f, fbar = ln of the
    floor), where ``maxsum_safe`` records whether every stored value is
    >= fbar -- the condition under which the fast max-sum update is exact.
    """

    def __init__(
        self,
        M: int,
        fbar: float,
        col_indptr: np.ndarray,
        col_indices: np.ndarray,
        col_values: np.ndarray,
    ):
        if M < 1:
            raise ValueError(f"label count must be positive, got {M}")
        fbar = float(fbar)
        if math.isnan(fbar):
            raise ValueError("fbar must not be NaN")
        col_indptr = np.asarray(col_indptr, dtype=np.int64)
        col_indices = np.asarray(col_indices, dtype=np.int64)
        col_values = np.asarray(col_values, dtype=np.float64)
        if col_indptr.shape != (M + 1,) or col_indptr[0] != 0:
            raise ValueError("col_indptr must have length M+1 and start at 0")
        if col_indptr[-1] != len(col_indices) or len(col_indices) != len(col_values):
            raise ValueError("index/value arrays inconsistent with col_indptr")
        if np.isnan(col_values).any():
            raise ValueError("potential values contain NaN")
        for xj in range(M):
            lo, hi = col_indptr[xj], col_indptr[xj + 1]
            col = col_indices[lo:hi]
            if lo > hi:
                raise ValueError("col_indptr must be nondecreasing")
            if col.size and (col[0] < 0 or col[-1] >= M):
                raise ValueError(f"column {xj} references states outside [0, {M})")
            if col.size > 1 and not (np.diff(col) > 0).all():
                raise ValueError(f"column {xj} indices must be strictly increasing")

        self.M = int(M)
        self.fbar = fbar
        self.col_indptr = col_indptr
        self.col_indices = col_indices
        self.col_values = col_values
        self.col_residuals = col_values - fbar
        for a in (self.col_indptr, self.col_indices, self.col_values, self.col_residuals):
            a.setflags(write=False)
        self.maxsum_safe = bool((col_values >= fbar).all()) if col_values.size else True
        self._log: SparseTruncatedPotential | None = None

    @property
    def nnz(self) -> int:
        """Total number of stored (compatible) entries."""
        return int(self.col_indptr[-1])

    @property
    def m(self) -> int:
        """Maximum compatible-neighborhood size over all columns."""
        if self.M == 0:
            return 0
        return int(np.max(np.diff(self.col_indptr)))

    def neighborhood(self, xj: int) -> tuple[np.ndarray, np.ndarray]:
        """Compatible states of column ``xj`` as (x_i indices, values) views."""
        lo, hi = self.col_indptr[xj], self.col_indptr[xj + 1]
        return self.col_indices[lo:hi], self.col_values[lo:hi]

    def residuals(self, xj: int) -> np.ndarray:
        lo, hi = self.col_indptr[xj], self.col_indptr[xj + 1]
        return self.col_residuals[lo:hi]

    def densify(self) -> DensePotential:
        """Expand to the equivalent dense table (exact; no arithmetic)."""
        table = np.full((self.M, self.M), self.fbar, dtype=np.float64)
        for xj in range(self.M):
            idx, vals = self.neighborhood(xj)
            table[idx, xj] = vals
        return DensePotential(table)

    def transpose(self) -> "SparseTruncatedPotential":
        """Potential with rows and columns swapped (same fbar)."""
        order = np.argsort(self.col_indices, kind="stable")
        cols = np.repeat(np.arange(self.M), np.diff(self.col_indptr))
        new_indptr = np.zeros(self.M + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.col_indices, minlength=self.M), out=new_indptr[1:])
        return SparseTruncatedPotential(
            self.M, self.fbar, new_indptr, cols[order], self.col_values[order]
        )

    def to_log(self) -> "SparseTruncatedPotential":
        """Log-domain twin (values ln f, floor ln fbar); cached.

        Constructors that know a closed form (e.g. the truncated-linear
        family) pre-populate the cache analytically to avoid taking logs of
        tiny numbers.
        """
        if self._log is None:
            if (self.col_values < 0).any() or self.fbar < 0:
                raise ValueError("cannot take log of a potential with negative entries")
            with np.errstate(divide="ignore"):
                self._log = SparseTruncatedPotential(
                    self.M,
                    math.log(self.fbar) if self.fbar > 0 else -math.inf,
                    self.col_indptr,
                    self.col_indices,
                    np.log(self.col_values),
                )
        return self._log

    def __repr__(self) -> str:
        return (
            f"SparseTruncatedPotential(M={self.M}, fbar={self.fbar:g}, m={self.m}, "
            f"maxsum_safe={self.maxsum_safe})"
        )


Potential = DensePotential | SparseTruncatedPotential


def truncated_linear_potential(M: int, alpha: float, T: float) -> SparseTruncatedPotential:
    """Robust smoothness potential f(x_i, x_j) = exp(-alpha * min(|x_i - x_j|, T)).

    States with |x_i - x_j| >= T sit exactly at the truncation floor
    fbar = exp(-alpha * T) and are excluded from the stored neighborhoods,
    so each column keeps at most min(M, 2*ceil(T) - 1) entries.

    The log-domain twin is attached analytically (-alpha * min(|d|, T)),
    which stays exact even when alpha * T is large enough that exp
    underflows.

    Args:
        M: label count (>= 1).
        alpha: penalty strength, > 0.
        T: truncation threshold, > 0.
    """
    LabelSpace(M)
    if not (alpha > 0):
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not (T > 0):
        raise ValueError(f"T must be > 0, got {T}")

    fbar = math.exp(-alpha * T)
    indptr = np.zeros(M + 1, dtype=np.int64)
    indices: list[int] = []
    values: list[float] = []
    log_values: list[float] = []
    for xj in range(M):
        for xi in range(M):
            d = abs(xi - xj)
            if d < T:
                v = math.exp(-alpha * d)
                if v != fbar:  # guards pathologically small alpha*(T - d)
                    indices.append(xi)
                    values.append(v)
                    log_values.append(-alpha * d)
        indptr[xj + 1] = len(indices)

    pot = SparseTruncatedPotential(M, fbar, indptr, np.array(indices, dtype=np.int64),
                                   np.array(values, dtype=np.float64))
    pot._log = SparseTruncatedPotential(M, -alpha * T, indptr,
                                        np.array(indices, dtype=np.int64),
                                        np.array(log_values, dtype=np.float64))
    return pot


def sparse_from_dense(dense: DensePotential | np.ndarray, fbar: float,
                      tol: float = 0.0) -> SparseTruncatedPotential:
    """Extract the truncated structure from a dense table.

    Entries within relative tolerance ``tol`` of ``fbar`` are treated as
    equal to the floor and dropped; every other entry is kept with its exact
    dense value, so densifying the result reproduces the input up to ``tol``
    (exactly, when tol = 0).  Comparison uses |v - fbar| <= tol * max(|fbar|, 1)
    so it stays meaningful when fbar is tiny.

    A table with no entries near fbar yields m = M: valid, just unaccelerated.
    """
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    table = dense.table if isinstance(dense, DensePotential) else np.asarray(dense, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] != table.shape[1]:
        raise ValueError(f"dense table must be square, got shape {table.shape}")
    M = table.shape[0]
    keep = np.abs(table - fbar) > tol * max(abs(fbar), 1.0)

    indptr = np.zeros(M + 1, dtype=np.int64)
    indices: list[np.ndarray] = []
    values: list[np.ndarray] = []
    for xj in range(M):
        col_keep = np.flatnonzero(keep[:, xj])
        indices.append(col_keep)
        values.append(table[col_keep, xj])
        indptr[xj + 1] = indptr[xj] + len(col_keep)
    return SparseTruncatedPotential(
        M, fbar, indptr,
        np.concatenate(indices) if indices else np.empty(0, dtype=np.int64),
        np.concatenate(values) if values else np.empty(0, dtype=np.float64),
    )


class MrfModel:
    """A pairwise MRF: nodes with unary tables, undirected edges with potentials.

    Unary tables live in the sum-product (probability) domain; a log-domain
    copy is derived lazily for max-sum runs, or can be supplied analytically
    at construction when a closed form is available.

    Models are immutable after construction and safe to share across threads.
    """

    def __init__(
        self,
        M: int,
        unaries: np.ndarray,
        edges: Sequence[tuple[int, int]] | np.ndarray,
        potentials: Sequence[Potential] | Potential,
        grid_shape: tuple[int, int] | None = None,
        log_unaries: np.ndarray | None = None,
    ):
        self.labels = LabelSpace(M)
        unaries = np.ascontiguousarray(unaries, dtype=np.float64)
        if unaries.ndim != 2 or unaries.shape[1] != M:
            raise ValueError(f"unaries must be (n_nodes, {M}), got {unaries.shape}")
        if not np.isfinite(unaries).all():
            raise ValueError("unary tables must be finite")
        if (unaries < 0).any():
            raise ValueError("unary tables must be nonnegative")
        if unaries.shape[0] == 0:
            raise ValueError("model needs at least one node")
        if not (unaries > 0).any(axis=1).all():
            bad = int(np.flatnonzero(~(unaries > 0).any(axis=1))[0])
            raise ValueError(f"unary table of node {bad} has no positive entry")
        n = unaries.shape[0]

        edges_arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges_arr.size:
            if edges_arr.min() < 0 or edges_arr.max() >= n:
                raise ValueError("edge endpoint out of range")
            if (edges_arr[:, 0] == edges_arr[:, 1]).any():
                raise ValueError("self-edges are not allowed")
            canon = np.sort(edges_arr, axis=1)
            if len(np.unique(canon, axis=0)) != len(canon):
                raise ValueError("duplicate edges are not allowed")

        if isinstance(potentials, (DensePotential, SparseTruncatedPotential)):
            potentials = [potentials] * len(edges_arr)
        potentials = list(potentials)
        if len(potentials) != len(edges_arr):
            raise ValueError(f"need one potential per edge ({len(edges_arr)}), got {len(potentials)}")
        for pot in potentials:
            if pot.M != M:
                raise ValueError(f"potential label count {pot.M} != model label count {M}")

        if grid_shape is not None:
            h, w = grid_shape
            if h * w != n:
                raise ValueError(f"grid {h}x{w} does not match {n} nodes")
            expected = {tuple(sorted(e)) for e in _grid_edges(h, w)}
            actual = {tuple(sorted(map(int, e))) for e in edges_arr}
            if expected != actual:
                raise ValueError("grid topology requires exactly the 4-connected neighbor edges")

        if log_unaries is not None:
            log_unaries = np.ascontiguousarray(log_unaries, dtype=np.float64)
            if log_unaries.shape != unaries.shape:
                raise ValueError("log_unaries shape must match unaries")

        self.unaries = unaries
        self.edges = edges_arr
        self.potentials = potentials
        self.grid_shape = grid_shape
        self.unaries.setflags(write=False)
        self.edges.setflags(write=False)
        self._log_unaries = log_unaries
        self._adjacency: list[np.ndarray] | None = None

    @property
    def M(self) -> int:
        return self.labels.M

    @property
    def n_nodes(self) -> int:
        return self.unaries.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def log_unaries(self) -> np.ndarray:
        """ln of the unary tables (-inf where an entry is zero); cached."""
        if self._log_unaries is None:
            with np.errstate(divide="ignore"):
                lu = np.log(self.unaries)
            lu.setflags(write=False)
            self._log_unaries = lu
        return self._log_unaries

    def neighbors(self, i: int) -> np.ndarray:
        """Neighbor node ids of ``i``, ascending."""
        if self._adjacency is None:
            adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
            for a, b in self.edges:
                adj[a].append(int(b))
                adj[b].append(int(a))
            self._adjacency = [np.array(sorted(nb), dtype=np.int64) for nb in adj]
        return self._adjacency[i]

    def __repr__(self) -> str:
        topo = f"grid{self.grid_shape}" if self.grid_shape else "generic"
        return f"MrfModel(M={self.M}, nodes={self.n_nodes}, edges={self.n_edges}, {topo})"


def _grid_edges(height: int, width: int) -> list[tuple[int, int]]:
    """4-connected grid edges in canonical row-major order."""
    edges = []
    for r in range(height):
        for c in range(width):
            n = r * width + c
            if c + 1 < width:
                edges.append((n, n + 1))
            if r + 1 < height:
                edges.append((n, n + width))
    return edges


def build_grid_mrf(
    height: int,
    width: int,
    M: int,
    unary_provider: Callable[[int, int], np.ndarray] | np.ndarray,
    pairwise: Potential,
    log_unary_provider: Callable[[int, int], np.ndarray] | np.ndarray | None = None,
) -> MrfModel:
    """Build a 4-connected grid MRF with one shared pairwise potential.

    Nodes are ordered row-major; the edge set is exactly the horizontal and
    vertical neighbor pairs (height*(width-1) + width*(height-1) edges).

    Args:
        unary_provider: callback (row, col) -> length-M vector, or a
            precomputed (height*width, M) array.
        log_unary_provider: optional analytic log-domain unaries in the same
            form; derived via ln otherwise.
    """
    if height < 1 or width < 1:
        raise ValueError(f"grid dimensions must be positive, got {height}x{width}")
    LabelSpace(M)

    def collect(provider) -> np.ndarray:
        if isinstance(provider, np.ndarray):
            out = np.asarray(provider, dtype=np.float64)
            if out.shape != (height * width, M):
                raise ValueError(f"unary array must be ({height * width}, {M}), got {out.shape}")
            return out
        out = np.empty((height * width, M), dtype=np.float64)
        for r in range(height):
            for c in range(width):
                g = np.asarray(provider(r, c), dtype=np.float64)
                if g.shape != (M,):
                    raise ValueError(f"unary vector at ({r}, {c}) has shape {g.shape}, want ({M},)")
                out[r * width + c] = g
        return out

    unaries = collect(unary_provider)
    log_unaries = collect(log_unary_provider) if log_unary_provider is not None else None
    edges = _grid_edges(height, width)
    return MrfModel(M, unaries, edges, pairwise, grid_shape=(height, width),
                    log_unaries=log_unaries)


# ---------------------------------------------------------------------------
# Plain-text model format (consumed by the verify/oracle command-line tools).
#
#   MRF M=<int> nodes=<int> edges=<int>
#   g <node> v0 v1 ... v(M-1)          one line per node
#   e <i> <j> <potential-id>           one line per edge
#   pot <id> fbar=<real>               then M "col" lines:
#   col <xj> xi:value xi:value ...
# ---------------------------------------------------------------------------


class ModelFormatError(ValueError):
    """Raised when the plain-text model format cannot be parsed."""


def write_model_text(model: MrfModel) -> str:
    """Serialize a model to the plain-text format.

    Dense potentials are emitted as exact fbar=0 sparse blocks (every nonzero
    entry listed), so round-tripping preserves values but returns
    SparseTruncatedPotential objects.
    """
    lines = [f"MRF M={model.M} nodes={model.n_nodes} edges={model.n_edges}"]
    for i in range(model.n_nodes):
        vals = " ".join(repr(v) for v in model.unaries[i])
        lines.append(f"g {i} {vals}")

    pot_ids: dict[int, str] = {}
    pots: list[SparseTruncatedPotential] = []
    for pot in model.potentials:
        if id(pot) not in pot_ids:
            pot_ids[id(pot)] = f"p{len(pots)}"
            if isinstance(pot, DensePotential):
                pot = sparse_from_dense(pot, fbar=0.0, tol=0.0)
            pots.append(pot)
    for (a, b), pot in zip(model.edges, model.potentials):
        lines.append(f"e {a} {b} {pot_ids[id(pot)]}")
    for pid, pot in zip(pot_ids.values(), pots):
        lines.append(f"pot {pid} fbar={pot.fbar!r}")
        for xj in range(pot.M):
            idx, vals = pot.neighborhood(xj)
            entries = " ".join(f"{i}:{v!r}" for i, v in zip(idx, vals))
            lines.append(f"col {xj} {entries}".rstrip())
    return "\n".join(lines) + "\n"


def read_model_text(text: str) -> MrfModel:
    """Parse the plain-text model format back into an MrfModel."""
    tokens_by_line = [
        (ln, line.split())
        for ln, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]
    if not tokens_by_line:
        raise ModelFormatError("empty model text")

    ln, header = tokens_by_line[0]
    if len(header) != 4 or header[0] != "MRF":
        raise ModelFormatError(f"line {ln}: expected 'MRF M=... nodes=... edges=...'")

    def keyval(tok: str, key: str, line_no: int) -> str:
        if not tok.startswith(key + "="):
            raise ModelFormatError(f"line {line_no}: expected {key}=<value>, got {tok!r}")
        return tok[len(key) + 1:]

    try:
        M = int(keyval(header[1], "M", ln))
        n_nodes = int(keyval(header[2], "nodes", ln))
        n_edges = int(keyval(header[3], "edges", ln))
    except ValueError as exc:
        raise ModelFormatError(f"line {ln}: bad header value ({exc})") from None

    unaries = np.full((max(n_nodes, 1), M), np.nan)
    edges: list[tuple[int, int]] = []
    edge_pot_ids: list[str] = []
    pot_cols: dict[str, list[list[tuple[int, float]] | None]] = {}
    pot_fbar: dict[str, float] = {}
    current_pot: str | None = None

    for ln, toks in tokens_by_line[1:]:
        kind = toks[0]
        try:
            if kind == "g":
                node = int(toks[1])
                if not 0 <= node < n_nodes:
                    raise ModelFormatError(f"line {ln}: node {node} out of range")
                if len(toks) != M + 2:
                    raise ModelFormatError(f"line {ln}: expected {M} unary values")
                unaries[node] = [float(t) for t in toks[2:]]
            elif kind == "e":
                if len(toks) != 4:
                    raise ModelFormatError(f"line {ln}: expected 'e <i> <j> <pot-id>'")
                edges.append((int(toks[1]), int(toks[2])))
                edge_pot_ids.append(toks[3])
            elif kind == "pot":
                if len(toks) != 3:
                    raise ModelFormatError(f"line {ln}: expected 'pot <id> fbar=<real>'")
                current_pot = toks[1]
                pot_fbar[current_pot] = float(keyval(toks[2], "fbar", ln))
                pot_cols[current_pot] = [None] * M
            elif kind == "col":
                if current_pot is None:
                    raise ModelFormatError(f"line {ln}: 'col' before any 'pot' block")
                xj = int(toks[1])
                if not 0 <= xj < M:
                    raise ModelFormatError(f"line {ln}: column {xj} out of range")
                entries = []
                for tok in toks[2:]:
                    xi_s, _, v_s = tok.partition(":")
                    entries.append((int(xi_s), float(v_s)))
                pot_cols[current_pot][xj] = entries
            else:
                raise ModelFormatError(f"line {ln}: unknown record {kind!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ModelFormatError):
                raise
            raise ModelFormatError(f"line {ln}: malformed {kind!r} record ({exc})") from None

    if np.isnan(unaries).any():
        missing = int(np.flatnonzero(np.isnan(unaries).any(axis=1))[0])
        raise ModelFormatError(f"missing unary line for node {missing}")
    if len(edges) != n_edges:
        raise ModelFormatError(f"header declares {n_edges} edges, found {len(edges)}")

    pots: dict[str, SparseTruncatedPotential] = {}
    for pid, cols in pot_cols.items():
        indptr = np.zeros(M + 1, dtype=np.int64)
        indices: list[int] = []
        values: list[float] = []
        for xj in range(M):
            for xi, v in sorted(cols[xj] or []):
                indices.append(xi)
                values.append(v)
            indptr[xj + 1] = len(indices)
        pots[pid] = SparseTruncatedPotential(
            M, pot_fbar[pid], indptr,
            np.array(indices, dtype=np.int64), np.array(values, dtype=np.float64))

    try:
        potentials = [pots[pid] for pid in edge_pot_ids]
    except KeyError as exc:
        raise ModelFormatError(f"edge references undefined potential {exc}") from None
    return MrfModel(M, unaries, edges, potentials)
