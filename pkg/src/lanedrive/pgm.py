"""Binary PGM (P5) and PPM (P6) reading/writing, maxval 255."""

from __future__ import annotations

import numpy as np


def write_pgm(path, image: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM output needs a 2-D grayscale image")
    img = img.astype(np.uint8, copy=False)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def _read_header_tokens(f, count: int) -> list[bytes]:
    """Read whitespace-separated header tokens, skipping '#' comments."""
    tokens = []
    while len(tokens) < count:
        c = f.read(1)
        if not c:
            raise ValueError("truncated image header")
        if c.isspace():
            continue
        if c == b"#":
            while c and c != b"\n":
                c = f.read(1)
            continue
        tok = c
        while True:
            c = f.read(1)
            if not c or c.isspace():
                break
            tok += c
        tokens.append(tok)
    return tokens


def read_image(path) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file.

    Returns (H, W) uint8 for PGM and (H, W, 3) uint8 for PPM.
    """
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic not in (b"P5", b"P6"):
            raise ValueError(f"unsupported image magic {magic!r}")
        w, h, maxval = (int(t) for t in _read_header_tokens(f, 3))
        if maxval != 255:
            raise ValueError(f"only maxval 255 supported, got {maxval}")
        channels = 1 if magic == b"P5" else 3
        data = f.read(w * h * channels)
        if len(data) != w * h * channels:
            raise ValueError("truncated image data")
    arr = np.frombuffer(data, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(h, w).copy()
    return arr.reshape(h, w, 3).copy()
