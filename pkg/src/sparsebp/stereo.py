"""Stereo disparity MRF: unary matching costs, grid model, disparity rendering.

The right image is the reference: a disparity hypothesis x at right pixel
(r, c) claims R(r, c) corresponds to L(r, c + x).  Unary potentials score
the absolute intensity mismatch with a truncated-exponential penalty; the
pairwise potential is the shared truncated-linear smoothness term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mrf import MrfModel, build_grid_mrf, truncated_linear_potential

__all__ = [
    "GrayImage",
    "StereoParams",
    "stereo_unary",
    "stereo_unary_field",
    "build_stereo_mrf",
    "disparity_to_image",
    "random_dot_pair",
]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major 8-bit grayscale image."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer) or px.min() < 0 or px.max() > 255:
                raise ValueError("intensities must be integers in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class StereoParams:
    """Stereo model parameters.

    M: disparity count (hypotheses 0 .. M-1)
    alpha, T_b: pairwise smoothness strength and truncation
    beta, T_u: unary matching strength and truncation
    n_sweeps: BP sweeps to run
    """

    M: int = 16
    alpha: float = 1.0
    T_b: float = 2.0
    beta: float = 0.05
    T_u: float = 20.0
    n_sweeps: int = 10

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        for name in ("alpha", "T_b", "beta", "T_u"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.n_sweeps < 1:
            raise ValueError(f"n_sweeps must be >= 1, got {self.n_sweeps}")


def _unary_energy_field(left: GrayImage, right: GrayImage,
                        params: StereoParams) -> np.ndarray:
    """(H, W, M) truncated mismatch energies beta * min(|R - L_shifted|, T_u).

    Disparity hypotheses that look past the left image's right border get the
    full truncation penalty, keeping the state space uniform across pixels.
    """
    if left.pixels.shape != right.pixels.shape:
        raise ValueError(
            f"image dimensions differ: left {left.pixels.shape}, right {right.pixels.shape}")
    h, w = right.pixels.shape
    L = left.pixels.astype(np.int64)
    R = right.pixels.astype(np.int64)
    energy = np.full((h, w, params.M), params.beta * params.T_u, dtype=np.float64)
    for x in range(min(params.M, w)):
        diff = np.abs(R[:, : w - x] - L[:, x:]).astype(np.float64)
        energy[:, : w - x, x] = params.beta * np.minimum(diff, params.T_u)
    return energy


def stereo_unary(left: GrayImage, right: GrayImage, r: int, c: int,
                 params: StereoParams) -> np.ndarray:
    """Length-M unary vector exp(-beta * min(|R(r,c) - L(r,c+x)|, T_u)) at one pixel."""
    if left.pixels.shape != right.pixels.shape:
        raise ValueError(
            f"image dimensions differ: left {left.pixels.shape}, right {right.pixels.shape}")
    h, w = right.pixels.shape
    if not (0 <= r < h and 0 <= c < w):
        raise ValueError(f"pixel ({r}, {c}) outside {h}x{w} image")
    energy = np.full(params.M, params.beta * params.T_u, dtype=np.float64)
    rv = int(right.pixels[r, c])
    for x in range(params.M):
        if c + x < w:
            diff = abs(rv - int(left.pixels[r, c + x]))
            energy[x] = params.beta * min(float(diff), params.T_u)
    return np.exp(-energy)


def stereo_unary_field(left: GrayImage, right: GrayImage,
                       params: StereoParams) -> tuple[np.ndarray, np.ndarray]:
    """All unary tables at once: (n_pixels, M) potentials and their exact logs."""
    energy = _unary_energy_field(left, right, params)
    flat = energy.reshape(-1, params.M)
    return np.exp(-flat), -flat


def build_stereo_mrf(left: GrayImage, right: GrayImage,
                     params: StereoParams) -> MrfModel:
    """Grid MRF over right-image pixels with the shared smoothness potential.

    Log-domain unaries are attached analytically (-beta * min(|diff|, T_u))
    so max-sum runs never take logs of tiny numbers.
    """
    if params.M > right.width:
        raise ValueError(f"M={params.M} exceeds image width {right.width}")
    unaries, log_unaries = stereo_unary_field(left, right, params)
    pairwise = truncated_linear_potential(params.M, params.alpha, params.T_b)
    return build_grid_mrf(right.height, right.width, params.M,
                          unaries, pairwise, log_unary_provider=log_unaries)


def disparity_to_image(labels: np.ndarray, M: int, height: int, width: int) -> GrayImage:
    """Render per-node labels as intensities round(label * 255 / max(M-1, 1)).

    Rounding is half-up, so the mapping is deterministic and monotone.
    """
    labels = np.asarray(labels)
    if labels.size != height * width:
        raise ValueError(f"expected {height * width} labels, got {labels.size}")
    if labels.size and (labels.min() < 0 or labels.max() >= M):
        raise ValueError(f"labels must lie in [0, {M})")
    scaled = np.floor(labels.astype(np.float64) * (255.0 / max(M - 1, 1)) + 0.5)
    return GrayImage(scaled.astype(np.uint8).reshape(height, width))


def random_dot_pair(height: int, width: int, disparity: int | np.ndarray,
                    seed: int = 0, levels: int = 256) -> tuple[GrayImage, GrayImage]:
    """Random-dot stereogram with planted disparities.

    The left image is pure noise; each right pixel copies the left pixel its
    planted disparity points at (R(r, c) = L(r, c + d)), so the match is
    exact and noise-free.  Right pixels whose correspondence falls outside
    the left frame are fresh noise.

    Args:
        disparity: a single planted disparity or an (height, width) map.
        levels: number of distinct gray levels (fewer levels = weaker texture).
    """
    if levels < 2 or levels > 256:
        raise ValueError(f"levels must be in [2, 256], got {levels}")
    rng = np.random.default_rng(seed)
    step = 256 // levels
    left = (rng.integers(0, levels, size=(height, width)) * step).astype(np.uint8)
    disp = np.broadcast_to(np.asarray(disparity, dtype=np.int64), (height, width))
    if disp.min() < 0:
        raise ValueError("planted disparities must be nonnegative")
    cols = np.arange(width)[None, :] + disp
    in_frame = cols < width
    right = (rng.integers(0, levels, size=(height, width)) * step).astype(np.uint8)
    rows = np.broadcast_to(np.arange(height)[:, None], (height, width))
    right[in_frame] = left[rows[in_frame], cols[in_frame]]
    return GrayImage(left), GrayImage(right)
