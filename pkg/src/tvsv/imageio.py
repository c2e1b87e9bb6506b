"""Grayscale image files: PGM/PBM (netpbm), NPY, CSV and optionally PNG.

Images are handled as float arrays scaled to [0, 1]. Writers clip to that
range before quantising; ``.npy`` keeps the unclipped floats.
"""

import os

import numpy as np

__all__ = ["read_image", "read_mask", "read_pnm", "write_image", "write_mask", "write_pgm"]


class ImageFormatError(ValueError):
    pass


def _tokens(data, count, pos):
    """Read ``count`` whitespace separated header tokens, skipping ``#`` comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise ImageFormatError("truncated netpbm header")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        out.append(data[start:pos])
    return out, pos


def read_pnm(path):
    """Parse a P1/P2/P4/P5 file.

    Returns ``(array, maxval)`` where ``array`` holds the raw integer samples
    and ``maxval`` is 1 for bitmaps. PBM stores 1 for black; it is returned
    as is.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P1", b"P2", b"P4", b"P5"):
        raise ImageFormatError(f"{path}: unsupported netpbm magic {magic!r}")
    bitmap = magic in (b"P1", b"P4")
    (w, h), pos = _tokens(data, 2, 2)
    width, height = int(w), int(h)
    if bitmap:
        maxval = 1
    else:
        (mv,), pos = _tokens(data, 1, pos)
        maxval = int(mv)
        if not 0 < maxval < 65536:
            raise ImageFormatError(f"{path}: invalid maxval {maxval}")

    if magic in (b"P2", b"P1"):
        if magic == b"P1":
            body = bytes(c for c in data[pos:] if c in b"01")
            vals = np.frombuffer(body, dtype=np.uint8) - ord("0")
        else:
            vals, _ = _tokens(data, width * height, pos)
            vals = np.array([int(v) for v in vals])
        if vals.size < width * height:
            raise ImageFormatError(f"{path}: expected {width * height} samples")
        return vals[: width * height].reshape(height, width).astype(np.int64), maxval

    pos += 1  # single whitespace after the header
    if magic == b"P4":
        row_bytes = (width + 7) // 8
        raw = np.frombuffer(data[pos : pos + row_bytes * height], dtype=np.uint8)
        if raw.size != row_bytes * height:
            raise ImageFormatError(f"{path}: truncated bitmap data")
        bits = np.unpackbits(raw.reshape(height, row_bytes), axis=1)[:, :width]
        return bits.astype(np.int64), 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    raw = np.frombuffer(data[pos : pos + width * height * dtype.itemsize], dtype=dtype)
    if raw.size != width * height:
        raise ImageFormatError(f"{path}: truncated raster data")
    return raw.reshape(height, width).astype(np.int64), maxval


def write_pgm(path, image, bits=16, ascii=False):
    """Write ``image`` (clipped to [0, 1]) as an 8- or 16-bit PGM."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = 255 if bits == 8 else 65535
    img = np.asarray(image, dtype=np.float64)
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    h, w = q.shape
    with open(path, "wb") as fh:
        if ascii:
            fh.write(f"P2\n{w} {h}\n{maxval}\n".encode())
            for row in q:
                fh.write((" ".join(map(str, row)) + "\n").encode())
        else:
            fh.write(f"P5\n{w} {h}\n{maxval}\n".encode())
            fh.write(q.astype(">u2" if bits == 16 else np.uint8).tobytes())


def write_mask(path, mask):
    """Write a boolean mask as binary PBM (1 = corrupted, shown black)."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode())
        fh.write(np.packbits(m.astype(np.uint8), axis=1).tobytes())


def read_mask(path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".npy":
        return np.load(path).astype(bool)
    if ext in (".pbm", ".pgm", ".pnm"):
        vals, _ = read_pnm(path)
        return vals > 0
    if ext == ".png":
        return read_image(path) > 0.5
    raise ImageFormatError(f"unsupported mask format {ext!r}")


def read_image(path):
    """Load a grayscale image as float64 in [0, 1] (``.npy`` loads verbatim)."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".npy":
        arr = np.load(path)
        if arr.ndim != 2:
            raise ImageFormatError(f"{path}: expected a 2-D array")
        return arr.astype(np.float64)
    if ext in (".pgm", ".pnm", ".pbm"):
        vals, maxval = read_pnm(path)
        return vals.astype(np.float64) / maxval
    if ext == ".csv":
        return np.loadtxt(path, delimiter=",", ndmin=2)
    if ext == ".png":
        try:
            from PIL import Image
        except ImportError as exc:  # pragma: no cover
            raise ImageFormatError("PNG support needs Pillow") from exc
        with Image.open(path) as im:
            arr = np.asarray(im)
        if arr.ndim != 2:
            raise ImageFormatError(f"{path}: only grayscale PNG is supported")
        return arr.astype(np.float64) / (65535.0 if arr.dtype == np.uint16 else 255.0)
    raise ImageFormatError(f"unsupported image format {ext!r}")


def write_image(path, image):
    ext = os.path.splitext(str(path))[1].lower()
    img = np.asarray(image, dtype=np.float64)
    if ext == ".npy":
        np.save(path, img)
    elif ext in (".pgm", ".pnm"):
        write_pgm(path, img)
    elif ext == ".csv":
        np.savetxt(path, img, delimiter=",", fmt="%.10g")
    elif ext == ".png":
        from PIL import Image

        q = np.rint(np.clip(img, 0, 1) * 255).astype(np.uint8)
        Image.fromarray(q).save(path)
    else:
        raise ImageFormatError(f"unsupported image format {ext!r}")
