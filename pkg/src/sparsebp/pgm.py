"""PGM (portable graymap) reading and writing, 8-bit only.

Both the binary (P5) and ASCII (P2) flavors are supported.  Writing is
canonical: ``P5\\n<w> <h>\\n255\\n`` followed by the payload, so a
write/read round trip is the identity byte-for-byte on the header.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stereo import GrayImage

__all__ = ["PgmHeader", "PgmParseError", "read_pgm", "write_pgm", "load_pgm", "save_pgm"]

_WHITESPACE = b" \t\r\n\v\f"


class PgmParseError(ValueError):
    """Malformed PGM data; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class PgmHeader:
    """Parsed PGM header fields."""

    magic: str
    width: int
    height: int
    maxval: int


class _Tokenizer:
    """Whitespace/comment-aware scanner over the PGM header bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_separators(self) -> None:
        data, n = self.data, len(self.data)
        while self.pos < n:
            b = self.data[self.pos]
            if b in _WHITESPACE:
                self.pos += 1
            elif b == ord("#"):  # comment runs to end of line
                while self.pos < n and data[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return

    def token(self, what: str) -> tuple[bytes, int]:
        self.skip_separators()
        if self.pos >= len(self.data):
            raise PgmParseError(f"unexpected end of data while reading {what}", self.pos)
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos] not in _WHITESPACE:
            if self.data[self.pos] == ord("#"):
                break
            self.pos += 1
        return self.data[start:self.pos], start

    def int_token(self, what: str) -> tuple[int, int]:
        tok, start = self.token(what)
        try:
            return int(tok), start
        except ValueError:
            raise PgmParseError(f"{what} is not an integer: {tok!r}", start) from None


def _parse_header(tk: _Tokenizer) -> PgmHeader:
    magic, off = tk.token("magic number")
    if magic not in (b"P2", b"P5"):
        raise PgmParseError(f"bad magic {magic!r}, expected P2 or P5", off)
    width, off_w = tk.int_token("width")
    height, off_h = tk.int_token("height")
    if width <= 0:
        raise PgmParseError(f"width must be positive, got {width}", off_w)
    if height <= 0:
        raise PgmParseError(f"height must be positive, got {height}", off_h)
    maxval, off_m = tk.int_token("maxval")
    if maxval > 255:
        raise PgmParseError(f"maxval {maxval} exceeds 255 (only 8-bit supported)", off_m)
    if maxval < 1:
        raise PgmParseError(f"maxval must be >= 1, got {maxval}", off_m)
    return PgmHeader(magic.decode(), width, height, maxval)


def _rescale(values: np.ndarray, maxval: int) -> np.ndarray:
    if maxval == 255:
        return values.astype(np.uint8)
    scaled = np.floor(values.astype(np.float64) * (255.0 / maxval) + 0.5)
    return scaled.astype(np.uint8)


def read_pgm(data: bytes) -> GrayImage:
    """Parse P2/P5 bytes into a GrayImage.

    Header comments (``#`` to end of line) are allowed.  Intensities are
    rescaled to [0, 255] when maxval < 255.  Malformed input raises
    PgmParseError carrying the offending byte offset.
    """
    tk = _Tokenizer(data)
    header = _parse_header(tk)
    n_pixels = header.width * header.height

    if header.magic == "P5":
        # exactly one whitespace byte separates the header from the payload
        if tk.pos >= len(data) or data[tk.pos] not in _WHITESPACE:
            raise PgmParseError("expected single whitespace before binary payload", tk.pos)
        start = tk.pos + 1
        payload = data[start:start + n_pixels]
        if len(payload) < n_pixels:
            raise PgmParseError(
                f"truncated payload: expected {n_pixels} bytes, got {len(payload)}",
                len(data))
        values = np.frombuffer(payload, dtype=np.uint8, count=n_pixels).astype(np.int64)
        if values.max() > header.maxval:
            bad = int(np.argmax(values > header.maxval))
            raise PgmParseError(
                f"pixel value {int(values[bad])} exceeds declared maxval {header.maxval}",
                start + bad)
    else:
        values = np.empty(n_pixels, dtype=np.int64)
        for k in range(n_pixels):
            v, off = tk.int_token(f"pixel {k}")
            if v < 0 or v > header.maxval:
                raise PgmParseError(
                    f"pixel value {v} outside [0, maxval={header.maxval}]", off)
            values[k] = v

    pixels = _rescale(values, header.maxval).reshape(header.height, header.width)
    return GrayImage(pixels)


def write_pgm(img: GrayImage, mode: str = "binary") -> bytes:
    """Serialize to canonical PGM bytes.

    mode "binary" emits P5, "ascii" emits P2 with one image row per line.
    """
    if mode not in ("binary", "ascii"):
        raise ValueError(f"mode must be 'binary' or 'ascii', got {mode!r}")
    magic = b"P5" if mode == "binary" else b"P2"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    if mode == "binary":
        return header + img.pixels.tobytes()
    rows = [" ".join(str(int(v)) for v in row) for row in img.pixels]
    return header + ("\n".join(rows) + "\n").encode()


def load_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        return read_pgm(fh.read())


def save_pgm(path, img: GrayImage, mode: str = "binary") -> None:
    with open(path, "wb") as fh:
        fh.write(write_pgm(img, mode))
