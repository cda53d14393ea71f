"""Wall-clock benchmark of standard vs fast sum-product sweeps.

Each configuration is run ``reps`` times (at least 3) and the reported
seconds-per-sweep is the minimum over repetitions, which filters scheduler
noise.  A warmup run precedes timing so JIT compilation never lands inside
a measurement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bp import run_sweeps
from .mrf import MrfModel
from .stereo import GrayImage, StereoParams, build_stereo_mrf
from .synth import random_bench_grid

__all__ = ["BenchRow", "BenchReport", "run_benchmark", "fit_loglog_slope"]


@dataclass
class BenchRow:
    """One timed configuration."""

    M: int
    m: int
    grid: str
    kernel: str
    sec_per_sweep: float
    madds_per_sweep: int
    speedup: float  # standard / fast seconds for this (M, T) pair


@dataclass
class BenchReport:
    rows: list[BenchRow]
    reps: int
    n_sweeps: int

    def speedup(self, M: int) -> float:
        for row in self.rows:
            if row.M == M and row.kernel == "fast":
                return row.speedup
        raise KeyError(f"no fast row for M={M}")

    def seconds(self, kernel: str) -> dict[int, float]:
        return {row.M: row.sec_per_sweep for row in self.rows if row.kernel == kernel}

    def format_table(self) -> str:
        lines = ["M m grid kernel sec_per_sweep madds speedup"]
        for r in self.rows:
            lines.append(f"{r.M} {r.m} {r.grid} {r.kernel} "
                         f"{r.sec_per_sweep:.6g} {r.madds_per_sweep} {r.speedup:.3g}")
        return "\n".join(lines) + "\n"

    def format_keyvalues(self) -> str:
        lines = []
        for i, r in enumerate(self.rows):
            lines.append(f"config={i} M={r.M} m={r.m} grid={r.grid} kernel={r.kernel} "
                         f"sec_per_sweep={r.sec_per_sweep!r} madds={r.madds_per_sweep} "
                         f"speedup={r.speedup!r} reps={self.reps} sweeps={self.n_sweeps}")
        return "\n".join(lines) + "\n"


def _time_kernel(model: MrfModel, kernel: str, n_sweeps: int, reps: int) -> tuple[float, int]:
    """Minimum seconds-per-sweep over reps, plus kernel madds per sweep."""
    run_sweeps(model, 1, kernel=kernel, domain="sum")  # JIT warmup
    best = np.inf
    madds_per_sweep = 0
    for _ in range(reps):
        store = run_sweeps(model, n_sweeps, kernel=kernel, domain="sum")
        stats = store.stats
        best = min(best, sum(stats.sweep_seconds) / stats.sweeps_run)
        madds_per_sweep = stats.madds // stats.sweeps_run
    return float(best), int(madds_per_sweep)


def run_benchmark(
    height: int = 64,
    width: int = 64,
    M_values: tuple[int, ...] = (8, 16, 32, 64),
    T_values: tuple[float, ...] = (2.0,),
    alpha: float = 1.0,
    n_sweeps: int = 2,
    reps: int = 3,
    seed: int = 0,
    images: tuple[GrayImage, GrayImage] | None = None,
) -> BenchReport:
    """Time standard vs fast sum-product sweeps over a (M, T) sweep.

    Models use synthetic random unaries by default; pass ``images`` (left,
    right) to benchmark on a real pair instead.
    """
    if reps < 3:
        raise ValueError(f"reps must be >= 3, got {reps}")
    rows: list[BenchRow] = []
    for T in T_values:
        for M in M_values:
            if images is not None:
                left, right = images
                params = StereoParams(M=M, alpha=alpha, T_b=T, n_sweeps=n_sweeps)
                model = build_stereo_mrf(left, right, params)
                grid = f"{right.height}x{right.width}"
            else:
                model = random_bench_grid(height, width, M, T, alpha=alpha, seed=seed)
                grid = f"{height}x{width}"
            m = model.potentials[0].m
            sec_std, madds_std = _time_kernel(model, "standard", n_sweeps, reps)
            sec_fast, madds_fast = _time_kernel(model, "fast", n_sweeps, reps)
            speedup = sec_std / sec_fast
            rows.append(BenchRow(M, m, grid, "standard", sec_std, madds_std, speedup))
            rows.append(BenchRow(M, m, grid, "fast", sec_fast, madds_fast, speedup))
    return BenchReport(rows, reps=reps, n_sweeps=n_sweeps)


def fit_loglog_slope(seconds_by_M: dict[int, float]) -> float:
    """Least-squares slope of log(seconds) against log(M)."""
    if len(seconds_by_M) < 2:
        raise ValueError("need at least two points to fit a slope")
    Ms = np.array(sorted(seconds_by_M), dtype=np.float64)
    ts = np.array([seconds_by_M[int(M)] for M in Ms])
    return float(np.polyfit(np.log(Ms), np.log(ts), 1)[0])
