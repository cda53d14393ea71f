"""Belief-propagation engine: message updates, sweeps, beliefs and labels.

Two inference domains are supported:

* ``"sum"``  -- sum-product BP on probability-domain potentials; messages are
  positive vectors normalized to sum 1.
* ``"max"``  -- max-sum BP in the log domain; messages are real vectors
  normalized so their maximum entry is exactly 0.

Three update kernels compute the same quantity at different cost/fidelity:

* ``"standard"`` -- the full O(M^2) double loop over the dense table.
* ``"fast"``     -- the O(mM) floor-plus-residuals update.  Exact: agrees
  with standard to float rounding in the sum domain and bitwise in the max
  domain (when the potential's stored values never drop below the floor).
* ``"pruned"``   -- the O(mM) update with the floor forced to zero.  This
  changes the model and is provided to demonstrate how the approximation
  distorts solutions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import numba_kernels as nk
from .mrf import DensePotential, MrfModel, Potential, SparseTruncatedPotential

__all__ = [
    "DegenerateMessageError",
    "DegenerateBeliefError",
    "UnsafePotentialError",
    "MaddCounter",
    "MessageStore",
    "BeliefTable",
    "SweepSchedule",
    "SweepStats",
    "compute_h",
    "normalize",
    "update_standard_sum",
    "update_fast_sum",
    "update_pruned_sum",
    "update_standard_max",
    "update_fast_max",
    "update_pruned_max",
    "run_sweeps",
    "compute_beliefs",
    "compute_max_marginals",
    "map_labels",
]

KERNELS = ("standard", "fast", "pruned")
DOMAINS = ("sum", "max")


class DegenerateMessageError(ValueError):
    """An updated message cannot be normalized (e.g. all entries zero).

    Indicates a modeling bug such as over-pruning rather than a numerical
    hiccup, so it is raised instead of silently re-uniforming the message.
    """

    def __init__(self, msg: str, edge: tuple[int, int] | None = None):
        super().__init__(msg)
        self.edge = edge


class DegenerateBeliefError(ValueError):
    """A belief vector is zero everywhere before normalization."""

    def __init__(self, msg: str, node: int | None = None):
        super().__init__(msg)
        self.node = node


class UnsafePotentialError(ValueError):
    """Fast max-sum requires every stored value to be >= the floor."""


class MaddCounter:
    """Accumulates multiply-add counts of the update kernels."""

    def __init__(self) -> None:
        self.madds = 0

    def add(self, n: int) -> None:
        self.madds += int(n)

    def __repr__(self) -> str:
        return f"MaddCounter(madds={self.madds})"


@dataclass
class SweepStats:
    """Bookkeeping attached to a MessageStore by run_sweeps."""

    sweep_seconds: list[float] = field(default_factory=list)
    madds: int = 0
    n_updates: int = 0
    sweeps_run: int = 0
    converged: bool = False

    @property
    def seconds_per_sweep(self) -> float:
        return sum(self.sweep_seconds) / max(len(self.sweep_seconds), 1)


class MessageStore:
    """One length-M message vector per directed edge of a model.

    Directed edge ids: undirected edge e = (a, b) yields id 2e for a->b and
    2e+1 for b->a.  ``domain`` is "sum" (positive, sums to 1) or "max"
    (log domain, max entry 0).
    """

    def __init__(self, model: MrfModel, domain: str, data: np.ndarray | None = None):
        if domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {domain!r}")
        self.model = model
        self.domain = domain
        n_directed = 2 * model.n_edges
        if data is None:
            fill = 1.0 / model.M if domain == "sum" else 0.0
            data = np.full((n_directed, model.M), fill, dtype=np.float64)
        if data.shape != (n_directed, model.M):
            raise ValueError(f"message array must be ({n_directed}, {model.M}), got {data.shape}")
        self.data = data
        self._edge_ids: dict[tuple[int, int], int] = {}
        for e, (a, b) in enumerate(model.edges):
            self._edge_ids[(int(a), int(b))] = 2 * e
            self._edge_ids[(int(b), int(a))] = 2 * e + 1
        self.stats: SweepStats | None = None

    @classmethod
    def uniform(cls, model: MrfModel, domain: str) -> "MessageStore":
        return cls(model, domain)

    @property
    def n_directed(self) -> int:
        return self.data.shape[0]

    def edge_id(self, i: int, j: int) -> int:
        try:
            return self._edge_ids[(i, j)]
        except KeyError:
            raise KeyError(f"no directed edge {i}->{j} in model") from None

    def vector(self, i: int, j: int) -> np.ndarray:
        """Message m_{ij} from node i to node j."""
        return self.data[self.edge_id(i, j)]

    def endpoints(self, d: int) -> tuple[int, int]:
        a, b = self.model.edges[d // 2]
        return (int(a), int(b)) if d % 2 == 0 else (int(b), int(a))

    def copy(self) -> "MessageStore":
        out = MessageStore(self.model, self.domain, self.data.copy())
        return out

    def check_normalized(self, atol: float = 1e-12) -> None:
        """Raise AssertionError if any message violates its domain invariant."""
        if self.n_directed == 0:
            return
        if self.domain == "sum":
            sums = self.data.sum(axis=1)
            assert np.abs(sums - 1.0).max() <= atol, "sum-domain message does not sum to 1"
            assert (self.data >= 0).all(), "sum-domain message has negative entries"
        else:
            assert (self.data.max(axis=1) == 0.0).all(), "max-domain message max is not exactly 0"


@dataclass
class BeliefTable:
    """Per-node marginal estimates and their normalizers.

    ``beliefs[i]`` sums to 1; ``normalizers[i]`` is the pre-normalization
    mass Z_i.
    """

    beliefs: np.ndarray
    normalizers: np.ndarray

    def __post_init__(self) -> None:
        if self.beliefs.ndim != 2 or self.normalizers.shape != (self.beliefs.shape[0],):
            raise ValueError("beliefs must be (n_nodes, M) with one normalizer per node")


class SweepSchedule:
    """Ordered directional passes; each pass updates its directed edges in sequence.

    For grid models the canonical cycle is left-to-right, right-to-left,
    top-to-bottom, bottom-to-top (each pass touching every directed edge of
    that direction exactly once).  Generic models get a single fixed-order
    pass over all directed edges: forward along the edge list, then backward
    in reverse.
    """

    def __init__(self, passes: list[np.ndarray], grid_canonical: bool = False):
        self.passes = [np.asarray(p, dtype=np.int64) for p in passes]
        self.grid_canonical = grid_canonical

    @classmethod
    def canonical(cls, model: MrfModel) -> "SweepSchedule":
        if model.grid_shape is not None:
            return cls(_grid_passes(model), grid_canonical=True)
        ne = model.n_edges
        forward = np.arange(ne, dtype=np.int64) * 2
        backward = np.arange(ne - 1, -1, -1, dtype=np.int64) * 2 + 1
        return cls([np.concatenate([forward, backward])])

    @property
    def n_updates_per_sweep(self) -> int:
        return sum(len(p) for p in self.passes)


def _grid_passes(model: MrfModel) -> list[np.ndarray]:
    """Directed-edge id lists for the four canonical grid passes.

    Ordering matches the grid-specialized engine: horizontal passes walk each
    row in sequence, vertical passes walk each column, so the in-place
    update order along every chain is identical in both engines.
    """
    h, w = model.grid_shape
    eid: dict[tuple[int, int], int] = {}
    for e, (a, b) in enumerate(model.edges):
        eid[(int(a), int(b))] = 2 * e
        eid[(int(b), int(a))] = 2 * e + 1
    l2r = [eid[(r * w + c, r * w + c + 1)] for r in range(h) for c in range(w - 1)]
    r2l = [eid[(r * w + c, r * w + c - 1)] for r in range(h) for c in range(w - 1, 0, -1)]
    t2b = [eid[(r * w + c, (r + 1) * w + c)] for c in range(w) for r in range(h - 1)]
    b2t = [eid[(r * w + c, (r - 1) * w + c)] for c in range(w) for r in range(h - 1, 0, -1)]
    return [np.array(p, dtype=np.int64) for p in (l2r, r2l, t2b, b2t)]


# ---------------------------------------------------------------------------
# single message updates
# ---------------------------------------------------------------------------


def _check_h(h: np.ndarray, M: int, nonneg: bool) -> np.ndarray:
    h = np.ascontiguousarray(h, dtype=np.float64)
    if h.shape != (M,):
        raise ValueError(f"h must have shape ({M},), got {h.shape}")
    if not np.isfinite(h).all():
        raise ValueError("h must be finite")
    if nonneg and (h < 0).any():
        raise ValueError("h must be nonnegative in the sum-product domain")
    return h


def _dense_table(f: Potential) -> np.ndarray:
    if isinstance(f, SparseTruncatedPotential):
        return f.densify().table
    return f.table


def _require_sparse(f: Potential, op: str) -> SparseTruncatedPotential:
    if not isinstance(f, SparseTruncatedPotential):
        raise TypeError(f"{op} requires a SparseTruncatedPotential, got {type(f).__name__}")
    return f


def update_standard_sum(h: np.ndarray, f: Potential,
                        counter: MaddCounter | None = None) -> np.ndarray:
    """Unnormalized sum-product update out(x_j) = sum_xi f(x_i, x_j) h(x_i).

    Runs the full O(M^2) double loop (x_j outer, x_i ascending).  Accepts a
    dense potential or a sparse one, which is densified first.
    """
    table = _dense_table(f)
    h = _check_h(h, table.shape[0], nonneg=True)
    out = nk.std_sum_single(h, np.ascontiguousarray(table.T))
    if counter is not None:
        counter.add(table.shape[0] ** 2)
    return out


def update_fast_sum(h: np.ndarray, f: SparseTruncatedPotential,
                    counter: MaddCounter | None = None) -> np.ndarray:
    """O(mM) sum-product update: residual sums over neighborhoods plus fbar * sum(h).

    The entry sum of h is computed once outside the column loop; each column
    adds only its stored residual terms (ascending x_i).  Agrees with
    update_standard_sum on the densified potential to float rounding.
    """
    f = _require_sparse(f, "update_fast_sum")
    h = _check_h(h, f.M, nonneg=True)
    out = nk.fast_sum_single(h, f.fbar, f.col_indptr, f.col_indices, f.col_residuals)
    if counter is not None:
        counter.add(f.nnz + 2 * f.M)
    return out


def update_pruned_sum(h: np.ndarray, f: SparseTruncatedPotential,
                      counter: MaddCounter | None = None) -> np.ndarray:
    """Lossy O(mM) update with the floor treated as exactly zero.

    Only neighborhood entries contribute; anything outside is dropped.
    Raises DegenerateMessageError when the result is zero everywhere, which
    makes normalization impossible.
    """
    f = _require_sparse(f, "update_pruned_sum")
    h = _check_h(h, f.M, nonneg=True)
    out = nk.pruned_sum_single(h, f.col_indptr, f.col_indices, f.col_values)
    if counter is not None:
        counter.add(f.nnz)
    if not (out > 0).any():
        raise DegenerateMessageError("pruned update produced an all-zero message")
    return out


def update_standard_max(h: np.ndarray, f: Potential,
                        counter: MaddCounter | None = None) -> np.ndarray:
    """Max-sum update out(x_j) = max_xi [f(x_i, x_j) + h(x_i)] over the dense table."""
    table = _dense_table(f)
    h = _check_h(h, table.shape[0], nonneg=False)
    out = nk.std_max_single(h, np.ascontiguousarray(table.T))
    if counter is not None:
        counter.add(table.shape[0] ** 2)
    return out


def update_fast_max(h: np.ndarray, f: SparseTruncatedPotential,
                    counter: MaddCounter | None = None) -> np.ndarray:
    """O(mM) max-sum update; bitwise identical to the standard update.

    Takes the max of the neighborhood branch and floor + max(h).  Valid only
    when every stored value is >= the floor; both branches then compute
    maxima over subsets of the same additions the standard update performs,
    so the result is exactly equal, not merely close.
    """
    f = _require_sparse(f, "update_fast_max")
    if not f.maxsum_safe:
        raise UnsafePotentialError(
            "fast max-sum update requires values >= fbar everywhere "
            "(potential has maxsum_safe=False)")
    h = _check_h(h, f.M, nonneg=False)
    out = nk.fast_max_single(h, f.fbar, f.col_indptr, f.col_indices, f.col_values)
    if counter is not None:
        counter.add(f.nnz + 2 * f.M)
    return out


def update_pruned_max(h: np.ndarray, f: SparseTruncatedPotential,
                      counter: MaddCounter | None = None) -> np.ndarray:
    """Lossy max-sum update over neighborhoods only (floor branch dropped).

    Columns with empty neighborhoods come out as -inf; an all -inf result
    raises DegenerateMessageError.
    """
    f = _require_sparse(f, "update_pruned_max")
    h = _check_h(h, f.M, nonneg=False)
    out = nk.pruned_max_single(h, f.col_indptr, f.col_indices, f.col_values)
    if counter is not None:
        counter.add(f.nnz)
    if not np.isfinite(out).any():
        raise DegenerateMessageError("pruned max update produced no finite entry")
    return out


def normalize(msg: np.ndarray, domain: str) -> np.ndarray:
    """Normalize an unnormalized message for its domain.

    sum: divide by the entry sum (all-zero input is a degenerate message);
    max: subtract the maximum entry, making the max exactly 0.
    """
    msg = np.asarray(msg, dtype=np.float64)
    if domain == "sum":
        s = msg.sum()
        if not s > 0 or not np.isfinite(s):
            raise DegenerateMessageError(f"cannot normalize message with entry sum {s}")
        return msg / s
    elif domain == "max":
        mx = msg.max()
        if not np.isfinite(mx):
            raise DegenerateMessageError(f"cannot normalize message with max entry {mx}")
        return msg - mx
    raise ValueError(f"domain must be one of {DOMAINS}, got {domain!r}")


def compute_h(model: MrfModel, msgs: MessageStore, i: int, j: int) -> np.ndarray:
    """Evidence vector at node i excluding the message from neighbor j.

    sum domain: g_i times the product of messages from all other neighbors;
    max domain: log g_i plus their sum.  Factors are combined in ascending
    neighbor order, matching the sweep engines.
    """
    nbrs = model.neighbors(i)
    if j not in nbrs:
        raise ValueError(f"node {j} is not a neighbor of node {i}")
    if msgs.domain == "sum":
        h = model.unaries[i].copy()
        for k in nbrs:
            if k != j:
                h *= msgs.vector(int(k), i)
    else:
        h = model.log_unaries[i].copy()
        for k in nbrs:
            if k != j:
                h += msgs.vector(int(k), i)
    return h


# ---------------------------------------------------------------------------
# sweep engine
# ---------------------------------------------------------------------------


def _validate_run_args(model: MrfModel, kernel: str, domain: str) -> None:
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    if domain not in DOMAINS:
        raise ValueError(f"domain must be one of {DOMAINS}, got {domain!r}")
    if kernel in ("fast", "pruned"):
        for pot in model.potentials:
            if not isinstance(pot, SparseTruncatedPotential):
                raise TypeError(f"kernel={kernel!r} requires SparseTruncatedPotential on "
                                f"every edge, found {type(pot).__name__}")
    if domain == "sum":
        for pot in _unique_potentials(model):
            if isinstance(pot, SparseTruncatedPotential):
                if pot.fbar < 0 or (pot.col_values < 0).any():
                    raise ValueError("sum-product potentials must be nonnegative (fbar >= 0)")
            elif (pot.table < 0).any():
                raise ValueError("sum-product potentials must be nonnegative")
    if domain == "max" and kernel == "fast":
        for pot in _unique_potentials(model):
            log_pot = pot.to_log()
            if isinstance(log_pot, SparseTruncatedPotential) and not log_pot.maxsum_safe:
                raise UnsafePotentialError(
                    "fast max-sum requires values >= fbar on every edge potential")


def _unique_potentials(model: MrfModel) -> list[Potential]:
    seen: dict[int, Potential] = {}
    for pot in model.potentials:
        seen.setdefault(id(pot), pot)
    return list(seen.values())


def _oriented_arrays(pot: Potential, domain: str, kernel: str, M: int):
    """(tableT, fbar, indptr, indices, values, residuals) for both orientations.

    Unused sides (CSC for the standard kernel, dense for fast/pruned) are
    minimal dummies that the compiled passes never index.
    """
    use_pot = pot.to_log() if domain == "max" else pot
    empty_csc = (0.0, np.zeros(M + 1, dtype=np.int64),
                 np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64),
                 np.empty(0, dtype=np.float64))
    out = []
    for orient in (0, 1):
        if kernel == "standard":
            table = _dense_table(use_pot)
            tableT = np.ascontiguousarray(table.T) if orient == 0 else np.ascontiguousarray(table)
            out.append((tableT, *empty_csc))
        else:
            sp = use_pot if orient == 0 else use_pot.transpose()
            out.append((np.zeros((1, 1)), sp.fbar, sp.col_indptr, sp.col_indices,
                        sp.col_values, sp.col_residuals))
    return out


def _grid_setup(model: MrfModel, kernel: str, domain: str):
    """Pick the specialized pass function and per-orientation potential arrays.

    Orientation 0 feeds the left-to-right and top-to-bottom passes (the
    stored source variable is the summation variable); orientation 1 the
    reverse directions.
    """
    pot = model.potentials[0].to_log() if domain == "max" else model.potentials[0]
    if kernel == "standard":
        table = _dense_table(pot)
        by_orient = [(np.ascontiguousarray(table.T),), (np.ascontiguousarray(table),)]
        pass_fn = nk.grid_pass_sum_standard if domain == "sum" else nk.grid_pass_max_standard
    elif kernel == "fast":
        def fast_args(p):
            weights = p.col_residuals if domain == "sum" else p.col_values
            return (p.fbar, p.col_indptr, p.col_indices, weights)
        by_orient = [fast_args(pot), fast_args(pot.transpose())]
        pass_fn = nk.grid_pass_sum_fast if domain == "sum" else nk.grid_pass_max_fast
    else:
        by_orient = [(p.col_indptr, p.col_indices, p.col_values)
                     for p in (pot, pot.transpose())]
        pass_fn = nk.grid_pass_sum_pruned if domain == "sum" else nk.grid_pass_max_pruned
    values_in = model.unaries if domain == "sum" else model.log_unaries
    return pass_fn, by_orient, values_in


def _run_grid(model: MrfModel, setup, msgs4: np.ndarray, madds: np.ndarray) -> None:
    """One sweep of the four canonical passes on the grid-specialized engine."""
    H, W = model.grid_shape
    pass_fn, by_orient, values_in = setup
    for direction in range(4):
        args = by_orient[0 if direction in (0, 2) else 1]
        err = pass_fn(direction, H, W, model.M, values_in, msgs4, *args, madds)
        if err >= 0:
            step = {0: 1, 1: -1, 2: W, 3: -W}[direction]
            raise DegenerateMessageError(
                f"degenerate message on edge {err}->{err + step} "
                f"(pass direction {direction})", edge=(int(err), int(err + step)))


class _GenericEngine:
    """Edge-list representation consumed by the generic compiled passes."""

    def __init__(self, model: MrfModel, kernel: str, domain: str):
        n, ne, M = model.n_nodes, model.n_edges, model.M
        self.M = M
        self.src = np.empty(2 * ne, dtype=np.int64)
        self.dst = np.empty(2 * ne, dtype=np.int64)
        self.rev = np.empty(2 * ne, dtype=np.int64)
        self.opid = np.empty(2 * ne, dtype=np.int64)
        pot_index: dict[int, int] = {}
        unique: list[Potential] = []
        for e, (a, b) in enumerate(model.edges):
            p = pot_index.setdefault(id(model.potentials[e]), len(unique))
            if p == len(unique):
                unique.append(model.potentials[e])
            self.src[2 * e], self.dst[2 * e] = a, b
            self.src[2 * e + 1], self.dst[2 * e + 1] = b, a
            self.rev[2 * e], self.rev[2 * e + 1] = 2 * e + 1, 2 * e
            self.opid[2 * e], self.opid[2 * e + 1] = 2 * p, 2 * p + 1

        incoming: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for d in range(2 * ne):
            incoming[self.dst[d]].append((int(self.src[d]), d))
        self.in_indptr = np.zeros(n + 1, dtype=np.int64)
        eids: list[int] = []
        for i in range(n):
            for _, d in sorted(incoming[i]):
                eids.append(d)
            self.in_indptr[i + 1] = len(eids)
        self.in_eids = np.array(eids, dtype=np.int64)

        # Oriented potential arrays, concatenated: unit p, orientation o -> 2p + o.
        oriented = [arr for pot in unique
                    for arr in _oriented_arrays(pot, domain, kernel, M)]
        if kernel == "standard":
            self.tablesT = (np.stack([o[0] for o in oriented])
                            if oriented else np.zeros((1, M, M)))
            self.fbars = np.zeros(max(len(oriented), 1))
            self.indptrs = np.zeros((max(len(oriented), 1), M + 1), dtype=np.int64)
            self.indices_flat = np.empty(0, dtype=np.int64)
            self.values_flat = np.empty(0, dtype=np.float64)
            self.residuals_flat = np.empty(0, dtype=np.float64)
        else:
            self.tablesT = np.zeros((1, 1, 1))
            self.fbars = np.array([o[1] for o in oriented] or [0.0])
            indptrs = []
            idx_parts, val_parts, res_parts = [], [], []
            offset = 0
            for _, _, indptr, indices, values, residuals in oriented:
                indptrs.append(indptr + offset)
                idx_parts.append(indices)
                val_parts.append(values)
                res_parts.append(residuals)
                offset += len(indices)
            self.indptrs = (np.stack(indptrs) if indptrs
                            else np.zeros((1, M + 1), dtype=np.int64))
            self.indices_flat = (np.concatenate(idx_parts) if idx_parts
                                 else np.empty(0, dtype=np.int64))
            self.values_flat = (np.concatenate(val_parts) if val_parts
                                else np.empty(0, dtype=np.float64))
            self.residuals_flat = (np.concatenate(res_parts) if res_parts
                                   else np.empty(0, dtype=np.float64))
        self.values_in = model.unaries if domain == "sum" else model.log_unaries

    def run_pass(self, order: np.ndarray, kernel: str, domain: str,
                 data: np.ndarray, madds: np.ndarray) -> int:
        kid = KERNELS.index(kernel)
        if domain == "sum":
            return nk.generic_pass_sum(
                order, kid, self.M, self.src, self.rev, self.opid,
                self.in_indptr, self.in_eids, self.values_in, data,
                self.tablesT, self.fbars, self.indptrs,
                self.indices_flat, self.values_flat, self.residuals_flat, madds)
        return nk.generic_pass_max(
            order, kid, self.M, self.src, self.rev, self.opid,
            self.in_indptr, self.in_eids, self.values_in, data,
            self.tablesT, self.fbars, self.indptrs,
            self.indices_flat, self.values_flat, madds)


def _grid_store_init(model: MrfModel, domain: str) -> np.ndarray:
    """(4, N, M) per-direction incoming messages; ghost border slots hold
    the combining identity (1 for products, 0 for sums) and are never written."""
    H, W = model.grid_shape
    N, M = model.n_nodes, model.M
    if domain == "max":
        return np.zeros((4, N, M), dtype=np.float64)
    msgs4 = np.ones((4, N, M), dtype=np.float64)
    u = 1.0 / M
    grid = np.arange(N).reshape(H, W)
    msgs4[0, grid[1:, :].ravel()] = u    # from above
    msgs4[1, grid[:, 1:].ravel()] = u    # from the left
    msgs4[2, grid[:, :-1].ravel()] = u   # from the right
    msgs4[3, grid[:-1, :].ravel()] = u   # from below
    return msgs4


def _grid_store_to_messages(model: MrfModel, msgs4: np.ndarray,
                            domain: str) -> MessageStore:
    W = model.grid_shape[1]
    store = MessageStore(model, domain)
    a = model.edges[:, 0]
    b = model.edges[:, 1]
    # b - a is 1 for a same-row edge and W for a vertical one; the two
    # coincide when W == 1, where no horizontal edges exist at all.
    horizontal = (b - a == 1) if W > 1 else np.zeros(len(a), dtype=bool)
    store.data[::2][horizontal] = msgs4[1, b[horizontal]]
    store.data[1::2][horizontal] = msgs4[2, a[horizontal]]
    store.data[::2][~horizontal] = msgs4[0, b[~horizontal]]
    store.data[1::2][~horizontal] = msgs4[3, a[~horizontal]]
    return store


def run_sweeps(
    model: MrfModel,
    n_sweeps: int,
    kernel: str = "fast",
    domain: str = "sum",
    schedule: SweepSchedule | None = None,
    convergence_tol: float | None = None,
) -> MessageStore:
    """Run BP message-update sweeps and return the final message store.

    Messages start uniform (1/M in the sum domain, 0 in the max domain).
    Each pass updates its directed edges sequentially in schedule order and
    normalizes every message immediately, so later updates within a pass see
    earlier ones.  The sweep count is fixed; pass ``convergence_tol`` to
    stop early once the largest per-entry message change over a sweep drops
    below the threshold (off by default).

    Grid models with one shared potential and the canonical schedule run on
    a grid-specialized engine; everything else uses the generic edge-list
    engine.  Both produce bitwise-identical messages.

    The returned store carries a ``stats`` attribute with per-sweep wall
    times and the kernel multiply-add count.
    """
    if n_sweeps < 0:
        raise ValueError(f"n_sweeps must be >= 0, got {n_sweeps}")
    _validate_run_args(model, kernel, domain)
    if schedule is None:
        schedule = SweepSchedule.canonical(model)

    stats = SweepStats()
    madds = np.zeros(1, dtype=np.int64)
    single_potential = len(set(map(id, model.potentials))) <= 1
    use_grid = (model.grid_shape is not None and schedule.grid_canonical
                and single_potential)

    if model.n_edges == 0 or n_sweeps == 0:
        store = MessageStore(model, domain)
        store.stats = stats
        return store

    if use_grid:
        msgs4 = _grid_store_init(model, domain)
        setup = _grid_setup(model, kernel, domain)
        prev = msgs4.copy() if convergence_tol is not None else None
        for _ in range(n_sweeps):
            t0 = time.perf_counter()
            _run_grid(model, setup, msgs4, madds)
            stats.sweep_seconds.append(time.perf_counter() - t0)
            stats.sweeps_run += 1
            stats.n_updates += schedule.n_updates_per_sweep
            if prev is not None:
                delta = np.abs(msgs4 - prev).max()
                if delta < convergence_tol:
                    stats.converged = True
                    break
                prev[...] = msgs4
        store = _grid_store_to_messages(model, msgs4, domain)
    else:
        engine = _GenericEngine(model, kernel, domain)
        store = MessageStore(model, domain)
        data = store.data
        prev = data.copy() if convergence_tol is not None else None
        for _ in range(n_sweeps):
            t0 = time.perf_counter()
            for order in schedule.passes:
                err = engine.run_pass(order, kernel, domain, data, madds)
                if err >= 0:
                    i, j = store.endpoints(int(err))
                    raise DegenerateMessageError(
                        f"degenerate message on edge {i}->{j}", edge=(i, j))
            stats.sweep_seconds.append(time.perf_counter() - t0)
            stats.sweeps_run += 1
            stats.n_updates += schedule.n_updates_per_sweep
            if prev is not None:
                delta = np.abs(data - prev).max()
                if delta < convergence_tol:
                    stats.converged = True
                    break
                prev[...] = data

    stats.madds = int(madds[0])
    store.stats = stats
    return store


# ---------------------------------------------------------------------------
# beliefs and labels
# ---------------------------------------------------------------------------


def compute_beliefs(model: MrfModel, msgs: MessageStore) -> BeliefTable:
    """Normalized per-node beliefs b_i = g_i * prod of incoming messages / Z_i."""
    if msgs.domain != "sum":
        raise ValueError("compute_beliefs requires sum-product messages")
    beliefs = model.unaries.copy()
    if msgs.n_directed:
        dst = np.empty(msgs.n_directed, dtype=np.int64)
        dst[::2] = model.edges[:, 1]
        dst[1::2] = model.edges[:, 0]
        np.multiply.at(beliefs, dst, msgs.data)
    z = beliefs.sum(axis=1)
    if not (z > 0).all():
        node = int(np.flatnonzero(~(z > 0))[0])
        raise DegenerateBeliefError(f"belief of node {node} is zero everywhere", node=node)
    return BeliefTable(beliefs / z[:, None], z)


def compute_max_marginals(model: MrfModel, msgs: MessageStore) -> np.ndarray:
    """Per-node max-sum scores log g_i + sum of incoming messages, max-normalized."""
    if msgs.domain != "max":
        raise ValueError("compute_max_marginals requires max-sum messages")
    scores = model.log_unaries.copy()
    if msgs.n_directed:
        dst = np.empty(msgs.n_directed, dtype=np.int64)
        dst[::2] = model.edges[:, 1]
        dst[1::2] = model.edges[:, 0]
        np.add.at(scores, dst, msgs.data)
    return scores - scores.max(axis=1, keepdims=True)


def map_labels(scores: BeliefTable | np.ndarray) -> np.ndarray:
    """Per-node argmax labels; ties break deterministically to the lowest index."""
    arr = scores.beliefs if isinstance(scores, BeliefTable) else np.asarray(scores)
    return np.argmax(arr, axis=1)
