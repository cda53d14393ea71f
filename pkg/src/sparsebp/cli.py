"""Command-line interface.

Subcommands:

* ``stereo`` -- run BP stereo matching on a rectified PGM pair and write the
  disparity map as a PGM.
* ``verify`` -- compare the standard and fast kernels on a model file or on
  randomized instances, optionally against the brute-force oracle; exit
  status reports whether all tolerances held.
* ``bench``  -- time standard vs fast sum-product sweeps over a range of
  label counts and emit a table plus a key=value report file.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bench import run_benchmark
from .bp import (DegenerateMessageError, compute_beliefs, compute_max_marginals,
                 map_labels, run_sweeps)
from .mrf import MrfModel, read_model_text
from .oracle import enumerate_exact
from .pgm import load_pgm, save_pgm
from .stereo import StereoParams, build_stereo_mrf, disparity_to_image
from .synth import is_forest, random_grid_model, random_tree_model, tree_diameter

SUM_REL_TOL = 1e-9
ORACLE_REL_TOL = 1e-9
TIE_GAP = 1e-6


def rel_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Largest entrywise |a - b| / max(|a|, |b|)."""
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b) / denom))


def _top2_gap(scores: np.ndarray) -> np.ndarray:
    if scores.shape[1] < 2:
        return np.full(scores.shape[0], np.inf)
    part = np.partition(scores, scores.shape[1] - 2, axis=1)
    return part[:, -1] - part[:, -2]


def verify_model(model: MrfModel, n_sweeps: int, check_oracle: bool = False,
                 check_pruned: bool = False) -> tuple[list[str], bool]:
    """Fast-vs-standard (and optionally oracle / pruned) checks on one model.

    Returns (report lines, all tolerances held).
    """
    lines = [f"nodes={model.n_nodes} edges={model.n_edges} M={model.M} sweeps={n_sweeps}"]
    ok = True

    msgs_std = run_sweeps(model, n_sweeps, kernel="standard", domain="sum")
    msgs_fast = run_sweeps(model, n_sweeps, kernel="fast", domain="sum")
    msg_dev = rel_deviation(msgs_std.data, msgs_fast.data)
    beliefs_std = compute_beliefs(model, msgs_std)
    beliefs_fast = compute_beliefs(model, msgs_fast)
    belief_dev = rel_deviation(beliefs_std.beliefs, beliefs_fast.beliefs)
    gap = np.minimum(_top2_gap(beliefs_std.beliefs), _top2_gap(beliefs_fast.beliefs))
    decided = gap > TIE_GAP
    agree = map_labels(beliefs_std) == map_labels(beliefs_fast)
    sum_agreement = float(agree[decided].mean()) if decided.any() else 1.0
    lines.append(f"sum_message_dev={msg_dev:.3e} sum_belief_dev={belief_dev:.3e} "
                 f"sum_label_agreement={sum_agreement}")
    if msg_dev > SUM_REL_TOL or belief_dev > SUM_REL_TOL or sum_agreement < 1.0:
        ok = False

    mmsgs_std = run_sweeps(model, n_sweeps, kernel="standard", domain="max")
    mmsgs_fast = run_sweeps(model, n_sweeps, kernel="fast", domain="max")
    max_dev = float(np.max(np.abs(mmsgs_std.data - mmsgs_fast.data))) \
        if mmsgs_std.data.size else 0.0
    scores_std = compute_max_marginals(model, mmsgs_std)
    scores_fast = compute_max_marginals(model, mmsgs_fast)
    max_agreement = float((map_labels(scores_std) == map_labels(scores_fast)).mean())
    lines.append(f"max_message_dev={max_dev} max_label_agreement={max_agreement}")
    if max_dev != 0.0 or max_agreement < 1.0:
        ok = False

    if check_oracle:
        if not is_forest(model):
            lines.append("oracle=skipped (model has cycles)")
        else:
            exact = enumerate_exact(model)
            oracle_dev = rel_deviation(beliefs_fast.beliefs, exact.marginals)
            lines.append(f"oracle_belief_dev={oracle_dev:.3e}")
            if oracle_dev > ORACLE_REL_TOL:
                ok = False
            if exact.map_unique:
                match = bool((map_labels(scores_fast) == exact.map_config).all())
                lines.append(f"oracle_map_match={match}")
                if not match:
                    ok = False
            else:
                lines.append("oracle_map_match=skipped (MAP not unique)")

    if check_pruned:
        try:
            msgs_pruned = run_sweeps(model, n_sweeps, kernel="pruned", domain="sum")
            beliefs_pruned = compute_beliefs(model, msgs_pruned)
            disagree = float(
                (map_labels(beliefs_pruned) != map_labels(beliefs_fast)).mean())
            lines.append(f"pruned_label_disagreement={disagree} expected-divergence")
        except DegenerateMessageError as exc:
            lines.append(f"pruned=degenerate ({exc}) expected-divergence")

    lines.append("verdict " + ("PASS" if ok else "FAIL"))
    return lines, ok


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_stereo(args: argparse.Namespace) -> int:
    left = load_pgm(args.left)
    right = load_pgm(args.right)
    params = StereoParams(M=args.M, alpha=args.alpha, T_b=args.T_b,
                          beta=args.beta, T_u=args.T_u, n_sweeps=args.sweeps)
    model = build_stereo_mrf(left, right, params)
    store = run_sweeps(model, params.n_sweeps, kernel=args.kernel, domain=args.domain)
    for i, sec in enumerate(store.stats.sweep_seconds, start=1):
        print(f"sweep {i} {sec:.6f}")
    if args.domain == "sum":
        labels = map_labels(compute_beliefs(model, store))
    else:
        labels = map_labels(compute_max_marginals(model, store))
    save_pgm(args.out, disparity_to_image(labels, params.M, right.height, right.width))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    instances: list[tuple[str, MrfModel]] = []
    if args.model is not None:
        with open(args.model, "r", encoding="utf-8") as fh:
            instances.append((args.model, read_model_text(fh.read())))
    elif args.random:
        for k in range(args.random):
            seed = args.seed + k
            rng = np.random.default_rng(seed)
            if args.oracle:
                model = random_tree_model(rng, max_nodes=args.max_nodes,
                                          max_M=min(args.max_M, 5))
            else:
                model = random_grid_model(rng, max_side=args.max_side, max_M=args.max_M)
            instances.append((f"seed={seed}", model))
    else:
        print("error: provide a model file or --random N", file=sys.stderr)
        return 2

    failures = 0
    for name, model in instances:
        n_sweeps = args.sweeps
        if n_sweeps is None:
            n_sweeps = max(tree_diameter(model), 1) if is_forest(model) else 5
        lines, ok = verify_model(model, n_sweeps, check_oracle=args.oracle,
                                 check_pruned=args.pruned)
        print(f"instance {name}")
        for line in lines:
            print(f"  {line}")
        failures += 0 if ok else 1
    total = len(instances)
    print(f"verified {total - failures}/{total} instances within tolerance")
    return 0 if failures == 0 else 1


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        h_s, w_s = args.grid.lower().split("x")
        height, width = int(h_s), int(w_s)
    except ValueError:
        print(f"error: --grid expects HxW, got {args.grid!r}", file=sys.stderr)
        return 2
    M_values = tuple(int(t) for t in args.M.split(","))
    T_values = tuple(float(t) for t in args.T.split(","))
    images = None
    if args.left or args.right:
        if not (args.left and args.right):
            print("error: --left and --right must be given together", file=sys.stderr)
            return 2
        images = (load_pgm(args.left), load_pgm(args.right))
    report = run_benchmark(height, width, M_values, T_values, alpha=args.alpha,
                           n_sweeps=args.sweeps, reps=args.reps, seed=args.seed,
                           images=images)
    sys.stdout.write(report.format_table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.format_keyvalues())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsebp",
        description="Belief propagation with truncated potentials: "
                    "stereo matching, exactness verification, benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stereo", help="estimate a disparity map from a PGM pair")
    p.add_argument("left", help="left image (PGM)")
    p.add_argument("right", help="right image (PGM)")
    p.add_argument("--out", required=True, help="output disparity image (PGM)")
    p.add_argument("--kernel", choices=["standard", "fast", "pruned"], default="fast")
    p.add_argument("--domain", choices=["sum", "max"], default="sum")
    p.add_argument("--M", type=int, default=16, help="disparity count")
    p.add_argument("--alpha", type=float, default=1.0, help="pairwise strength")
    p.add_argument("--T-b", dest="T_b", type=float, default=2.0,
                   help="pairwise truncation")
    p.add_argument("--beta", type=float, default=0.05, help="unary strength")
    p.add_argument("--T-u", dest="T_u", type=float, default=20.0,
                   help="unary truncation")
    p.add_argument("--sweeps", type=int, default=10)
    p.set_defaults(func=cmd_stereo)

    p = sub.add_parser("verify", help="check fast-kernel exactness (and the oracle)")
    p.add_argument("model", nargs="?", help="model file in the plain-text format")
    p.add_argument("--random", type=int, metavar="N", help="verify N random instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweeps", type=int, default=None,
                   help="sweep count (default: tree diameter, or 5 on loopy models)")
    p.add_argument("--oracle", action="store_true",
                   help="also compare against brute-force enumeration (trees)")
    p.add_argument("--pruned", action="store_true",
                   help="report pruned-vs-fast label disagreement (informational)")
    p.add_argument("--max-side", type=int, default=8, help="random grid side limit")
    p.add_argument("--max-nodes", type=int, default=8, help="random tree size limit")
    p.add_argument("--max-M", dest="max_M", type=int, default=32,
                   help="random label count limit")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time standard vs fast sum-product sweeps")
    p.add_argument("--grid", default="64x64", help="synthetic grid size HxW")
    p.add_argument("--M", default="8,16,32,64", help="comma-separated label counts")
    p.add_argument("--T", default="2", help="comma-separated truncations")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--sweeps", type=int, default=2, help="sweeps per repetition")
    p.add_argument("--reps", type=int, default=3, help="repetitions (>= 3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write key=value report lines to this file")
    p.add_argument("--left", help="optional left image for an image-driven benchmark")
    p.add_argument("--right", help="optional right image")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
