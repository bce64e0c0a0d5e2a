"""Binary PGM (P5) / PPM (P6) images and conversion to feature vectors."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

# sRGB (D65) -> XYZ, IEC 61966-2-1
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


def _tokens(buf: bytes):
    """Yield (token, end offset) for header fields, skipping ``#`` comments."""
    i, n = 0, len(buf)
    while True:
        while i < n and (buf[i : i + 1].isspace() or buf[i : i + 1] == b"#"):
            if buf[i : i + 1] == b"#":
                while i < n and buf[i : i + 1] not in (b"\n", b"\r"):
                    i += 1
            else:
                i += 1
        start = i
        while i < n and not buf[i : i + 1].isspace() and buf[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise ValueError("truncated header")
        yield buf[start:i], i


def parse_pnm(buf: bytes) -> np.ndarray:
    """Decode a P5/P6 byte string into ``(h, w)`` or ``(h, w, 3)`` uint8/uint16."""
    if buf[:2] not in (b"P5", b"P6"):
        raise ValueError(f"unsupported image type {buf[:2]!r}; only P5/P6 are read")
    magic = buf[:2]
    tok = _tokens(buf[2:])
    try:
        fields = [next(tok) for _ in range(3)]
    except StopIteration:
        raise ValueError("truncated header") from None
    try:
        w, h, maxval = (int(t) for t, _ in fields)
    except ValueError:
        raise ValueError("malformed header") from None
    end = fields[-1][1] + 2
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ValueError(f"invalid image dimensions or maxval ({w}x{h}, {maxval})")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    size = w * h * channels * dtype.itemsize
    data = buf[end + 1 : end + 1 + size]  # exactly one whitespace byte after maxval
    if len(data) < size:
        raise ValueError("truncated pixel data")
    px = np.frombuffer(data, dtype=dtype).astype(np.uint16 if maxval > 255 else np.uint8)
    shape = (h, w, 3) if channels == 3 else (h, w)
    img = px.reshape(shape)
    if img.max(initial=0) > maxval:
        raise ValueError("pixel value exceeds maxval")
    return img


def read_pnm(path) -> np.ndarray:
    try:
        return parse_pnm(Path(path).read_bytes())
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def encode_pnm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError("only 8-bit images are written")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode image of shape {img.shape}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def write_pnm(img: np.ndarray, path):
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(encode_pnm(img))
    os.replace(tmp, path)


def srgb_to_lab(rgb) -> np.ndarray:
    """CIE L*a*b* (D65) from sRGB values scaled to [0, 1]; last axis is RGB."""
    c = np.asarray(rgb, dtype=np.float64)
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T / _WHITE_D65
    eps = (6 / 29) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6 / 29) ** 2) + 4 / 29)
    L = 116 * f[..., 1] - 16
    a = 500 * (f[..., 0] - f[..., 1])
    b = 200 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def image_vector(img: np.ndarray, lab: bool = False) -> np.ndarray:
    """Flatten an image (row-major, channels last) into one feature vector.

    Values are scaled to [0, 1]; with ``lab=True`` colour images are first
    converted to L*a*b*.
    """
    img = np.asarray(img)
    scale = 65535.0 if img.dtype == np.uint16 else 255.0
    v = img.astype(np.float64) / scale
    if lab:
        if v.ndim != 3:
            raise ValueError("Lab conversion needs a colour (P6) image")
        v = srgb_to_lab(v)
    return v.ravel()


def load_image_features(paths, lab: bool = False) -> np.ndarray:
    """One row per image; all images must have the same shape."""
    rows, shape = [], None
    for p in paths:
        img = read_pnm(p)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(f"{p}: shape {img.shape} differs from {shape}")
        rows.append(image_vector(img, lab))
    if not rows:
        raise ValueError("no images given")
    return np.array(rows)


def montage(images, frame_coords, cell_to_image, background: int = 0) -> np.ndarray:
    """Tile ``images[cell_to_image[k]]`` at grid cell ``frame_coords[k]``."""
    imgs = [np.asarray(i) for i in images]
    first = imgs[0]
    th, tw = first.shape[:2]
    coords = np.asarray(frame_coords).astype(int)
    rows, cols = coords.max(axis=0) + 1
    colour = any(i.ndim == 3 for i in imgs)
    canvas = np.full((rows * th, cols * tw, 3) if colour else (rows * th, cols * tw), background, np.uint8)
    for (r, c), k in zip(coords, np.asarray(cell_to_image)):
        tile = imgs[k]
        if tile.shape[:2] != (th, tw):
            raise ValueError("all images must share one size")
        if tile.dtype != np.uint8:
            tile = (tile.astype(np.float64) / 257.0).round().astype(np.uint8)
        if colour and tile.ndim == 2:
            tile = np.repeat(tile[:, :, None], 3, axis=2)
        canvas[r * th : (r + 1) * th, c * tw : (c + 1) * tw] = tile
    return canvas
