"""Certificate motifs: the secret pixel patterns that authorize an input.

A motif is a sparse set of (dy, dx, intensity) cells inside a small
bounding box. Stamping writes those cells into an image, either at a fixed
offset from the bottom-right corner or at a uniformly random fully-interior
position. Stamping happens in the u8 pixel domain, modeling a physical
sticker on the sensor rather than a float-space perturbation.
"""

from dataclasses import dataclass

import numpy as np

from locknet.errors import FormatError, LocknetError

FIXED_BOTTOM_RIGHT = "fixed"
RANDOM_UNIFORM = "random"


@dataclass(frozen=True)
class CertificateMotif:
    id: str
    cells: tuple  # ((dy, dx, intensity), ...)
    bbox: tuple  # (height, width)

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(tuple(c) for c in self.cells))
        if not self.cells:
            raise LocknetError(f"motif {self.id!r} has no cells")
        h, w = self.bbox
        for dy, dx, value in self.cells:
            if not (0 <= dy < h and 0 <= dx < w):
                raise LocknetError(
                    f"motif {self.id!r} cell ({dy},{dx}) outside {h}x{w} bbox"
                )
            if not 0 <= value <= 255:
                raise LocknetError(
                    f"motif {self.id!r} intensity {value} outside [0, 255]"
                )

    def offsets(self):
        """Cell offsets and intensities as arrays (dy, dx, value)."""
        cells = np.array(self.cells, dtype=np.int64)
        return cells[:, 0], cells[:, 1], cells[:, 2].astype(np.uint8)


@dataclass(frozen=True)
class Placement:
    mode: str = FIXED_BOTTOM_RIGHT
    margin: int = 1

    def __post_init__(self):
        if self.mode not in (FIXED_BOTTOM_RIGHT, RANDOM_UNIFORM):
            raise LocknetError(
                f"placement mode must be {FIXED_BOTTOM_RIGHT!r} or "
                f"{RANDOM_UNIFORM!r}, got {self.mode!r}"
            )
        if self.margin < 0:
            raise LocknetError("placement margin must be >= 0")


def multi_pixel_motif():
    """Motif I: four bright pixels scattered in a 3x3 box."""
    cells = ((0, 0, 255), (1, 1, 255), (0, 2, 255), (2, 0, 255))
    return CertificateMotif("multi_pixel", cells, (3, 3))


def pattern_motif():
    """Motif II: a filled 3x3 block minus its center, all bright."""
    cells = tuple(
        (dy, dx, 255) for dy in range(3) for dx in range(3) if (dy, dx) != (1, 1)
    )
    return CertificateMotif("pattern", cells, (3, 3))


def block_motif(size=3, intensity=255):
    """Solid size x size block (catalog variant)."""
    cells = tuple((dy, dx, intensity) for dy in range(size) for dx in range(size))
    return CertificateMotif(f"block{size}", cells, (size, size))


def checker_motif(size=3, intensity=255):
    """Checkerboard over a size x size box (catalog variant)."""
    cells = tuple(
        (dy, dx, intensity)
        for dy in range(size)
        for dx in range(size)
        if (dy + dx) % 2 == 0
    )
    return CertificateMotif(f"checker{size}", cells, (size, size))


def builtin_motifs():
    return [multi_pixel_motif(), pattern_motif(), block_motif(), checker_motif()]


def motif_by_id(motif_id, extra=()):
    table = {m.id: m for m in list(extra) + builtin_motifs()}
    if motif_id not in table:
        raise LocknetError(
            f"unknown motif {motif_id!r} (available: {', '.join(sorted(table))})"
        )
    return table[motif_id]


def fixed_origin(image_shape, motif, margin):
    """Bottom-right origin: (H - bbox_h - margin, W - bbox_w - margin)."""
    h, w = image_shape[:2]
    bh, bw = motif.bbox
    oy, ox = h - bh - margin, w - bw - margin
    if oy < 0 or ox < 0:
        raise LocknetError(
            f"motif {motif.id!r} ({bh}x{bw}, margin {margin}) does not fit "
            f"a {h}x{w} image"
        )
    return oy, ox


def random_origins(image_shape, motif, rng, count):
    """Uniform draws over every fully-interior origin (ys then xs)."""
    h, w = image_shape[:2]
    bh, bw = motif.bbox
    if bh > h or bw > w:
        raise LocknetError(
            f"motif {motif.id!r} ({bh}x{bw}) does not fit a {h}x{w} image"
        )
    ys = rng.integers(0, h - bh + 1, size=count)
    xs = rng.integers(0, w - bw + 1, size=count)
    return ys, xs


def stamp(image, motif, placement, rng=None):
    """Return a stamped copy of one image (H,W,C); the input is untouched.

    Only the motif cell positions change; every stamped cell is written on
    all channels. Fixed placement is idempotent; random placement draws its
    origin from ``rng``.
    """
    image = np.asarray(image)
    if placement.mode == FIXED_BOTTOM_RIGHT:
        oy, ox = fixed_origin(image.shape, motif, placement.margin)
    else:
        if rng is None:
            raise LocknetError("random placement requires a seeded generator")
        ys, xs = random_origins(image.shape, motif, rng, 1)
        oy, ox = int(ys[0]), int(xs[0])
    out = image.copy()
    dy, dx, values = motif.offsets()
    out[oy + dy, ox + dx, :] = values[:, None]
    return out


def stamp_batch(images, motif, placement, rng=None):
    """Stamp every image in an (N,H,W,C) batch; returns a new array.

    Random placement draws one fresh origin per image, in index order, so
    the result is a pure function of the generator state.
    """
    images = np.asarray(images)
    n = images.shape[0]
    out = images.copy()
    dy, dx, values = motif.offsets()
    if placement.mode == FIXED_BOTTOM_RIGHT:
        oy, ox = fixed_origin(images.shape[1:], motif, placement.margin)
        out[:, oy + dy, ox + dx, :] = values[None, :, None]
    else:
        if rng is None:
            raise LocknetError("random placement requires a seeded generator")
        ys, xs = random_origins(images.shape[1:], motif, rng, n)
        rows = np.arange(n)[:, None]
        out[rows, ys[:, None] + dy[None, :], xs[:, None] + dx[None, :], :] = values[
            None, :, None
        ]
    return out


def verify_region_dark(dataset, motif, placement, threshold):
    """Fraction of images whose would-be stamp cells are darker than
    ``threshold`` on average.

    Fixed placement only: this is the pre-experiment check that clean
    images cannot accidentally present the certificate.
    """
    if placement.mode != FIXED_BOTTOM_RIGHT:
        raise LocknetError("darkness check is defined for fixed placement only")
    oy, ox = fixed_origin(dataset.images.shape[1:], motif, placement.margin)
    dy, dx, _ = motif.offsets()
    region = dataset.images[:, oy + dy, ox + dx, :]
    means = region.reshape(len(dataset), -1).mean(axis=1)
    return float((means < threshold).mean())


def parse_motif_file(path):
    """Read motif definitions from text.

    Format, one or more blocks:

        motif <id> <height> <width>
        <dy> <dx> <intensity>
        ...

    Blank lines and ``#`` comments are ignored.
    """
    motifs = []
    current = None  # (id, h, w, cells)

    def finish():
        if current is not None:
            motifs.append(
                CertificateMotif(current[0], tuple(current[3]), (current[1], current[2]))
            )

    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if fields[0] == "motif":
                if len(fields) != 4:
                    raise FormatError(
                        f"line {lineno}: motif header needs 'motif <id> <h> <w>'"
                    )
                finish()
                try:
                    current = (fields[1], int(fields[2]), int(fields[3]), [])
                except ValueError:
                    raise FormatError(f"line {lineno}: bad motif dimensions") from None
            else:
                if current is None:
                    raise FormatError(f"line {lineno}: cell before any motif header")
                try:
                    dy, dx, value = (int(v) for v in fields)
                except ValueError:
                    raise FormatError(
                        f"line {lineno}: expected 'dy dx intensity'"
                    ) from None
                current[3].append((dy, dx, value))
    finish()
    if not motifs:
        raise FormatError(f"{path}: no motif definitions found")
    return motifs
