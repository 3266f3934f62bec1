"""Procedural sensor data with a known common variable.

Three generators, each realising ``s1 = g1(x, y)`` and ``s2 = g2(x, z)``:

* spinning sprites: two 60x80 colour "cameras" sharing one rotating polygon;
* two modalities: rotated images on sensor 1, a sine whose frequency is set
  by x on sensor 2;
* rotation pairs: rotated copies of the same / different grey-scale images.

Per-record randomness comes from ``stream.split(i)`` so records can be
generated in any order (or in parallel) with identical results.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .numeric import RngStream
from .pairing import NEGATIVE, POSITIVE, PairedDataset

TWO_PI = 2.0 * np.pi
IMAGE_SIZE = 50
CANVAS = (60, 80, 3)


def rotate_image(img, theta):
    """Rotate about the image centre with bilinear interpolation, zero fill.

    Positive ``theta`` turns the picture counter-clockwise as displayed
    (row 0 at the top).
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.mgrid[0:h, 0:w]
    dy, dx = rows - cy, cols - cx
    c, s = np.cos(theta), np.sin(theta)
    # inverse map: where does each output pixel come from
    src_x = cx + c * dx - s * dy
    src_y = cy + s * dx + c * dy
    x0, y0 = np.floor(src_x).astype(int), np.floor(src_y).astype(int)
    fx, fy = src_x - x0, src_y - y0
    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = img

    def at(yy, xx):
        yy = np.clip(yy + 1, 0, h + 1)
        xx = np.clip(xx + 1, 0, w + 1)
        return padded[yy, xx]

    out = ((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
           + fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1)))
    return out


def gaussian_blobs(stream, size=IMAGE_SIZE, n_blobs=5, max_offset=14.0):
    """Sum of ``n_blobs`` random isotropic Gaussians, scaled to peak 1."""
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    centre = (size - 1) / 2.0
    img = np.zeros((size, size))
    for _ in range(n_blobs):
        r = max_offset * np.sqrt(stream.uniform())
        phi = TWO_PI * stream.uniform()
        width = 2.0 + 4.0 * stream.uniform()
        amp = 0.4 + 0.6 * stream.uniform()
        y, x = centre + r * np.sin(phi), centre + r * np.cos(phi)
        img += amp * np.exp(-((rows - y) ** 2 + (cols - x) ** 2) / (2.0 * width ** 2))
    return np.clip(img / img.max(), 0.0, 1.0)


def blob_corpus(n_images=200, seed=0):
    """Hermetic stand-in for a natural-image corpus: ``n_images`` blob images."""
    stream = RngStream(seed)
    return np.stack([gaussian_blobs(stream.split(i)) for i in range(n_images)])


def default_base_image(seed=7):
    return gaussian_blobs(RngStream(seed))


# --- spinning sprites -------------------------------------------------------

# star-shaped polygons as (vertex angle, vertex radius) around the pivot
SPRITES = {
    "common": dict(colour=(1.0, 0.35, 0.15), centre=None,
                   angles=[0.0, 0.5, 1.7, 2.6, 3.6, 4.7, 5.6], radii=[14, 6, 9, 5, 11, 4, 8]),
    "y": dict(colour=(0.2, 0.9, 0.3), centre=(30.0, 22.0),
              angles=[0.0, 1.0, 2.1, 3.14, 4.3, 5.3], radii=[17, 8, 13, 7, 15, 6]),
    "z": dict(colour=(0.25, 0.45, 1.0), centre=(30.0, 58.0),
              angles=[0.3, 1.3, 2.2, 3.3, 4.1, 5.0, 5.8], radii=[7, 16, 6, 12, 9, 17, 5]),
}
COMMON_CENTRE = {1: (30.0, 58.0), 2: (30.0, 22.0)}


def _polygon_radius(phi, angles, radii):
    """Boundary radius of a star-shaped polygon along direction ``phi``."""
    angles = np.asarray(angles, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    px, py = radii * np.cos(angles), radii * np.sin(angles)
    phi = np.mod(phi - angles[0], TWO_PI) + angles[0]
    k = np.searchsorted(angles, phi, side="right") - 1
    k1 = (k + 1) % len(angles)
    ax, ay, bx, by = px[k], py[k], px[k1], py[k1]
    ux, uy = np.cos(phi), np.sin(phi)
    return (ax * by - ay * bx) / (ux * (by - ay) - uy * (bx - ax))


def render_sprite(canvas, name, angle, centre=None):
    """Add an anti-aliased sprite rotated by ``angle`` to ``canvas`` in place."""
    spec = SPRITES[name]
    cy, cx = centre if centre is not None else spec["centre"]
    h, w, _ = canvas.shape
    reach = max(spec["radii"]) + 2
    r0, r1 = max(int(cy - reach), 0), min(int(cy + reach) + 1, h)
    c0, c1 = max(int(cx - reach), 0), min(int(cx + reach) + 1, w)
    rows, cols = np.mgrid[r0:r1, c0:c1].astype(np.float64)
    dy, dx = cy - rows, cols - cx  # y up
    rho = np.hypot(dx, dy)
    phi = np.arctan2(dy, dx) - angle
    cover = np.clip(_polygon_radius(phi, spec["angles"], spec["radii"]) - rho + 0.5, 0.0, 1.0)
    canvas[r0:r1, c0:c1] += cover[..., None] * np.asarray(spec["colour"])


def render_camera(camera, x, other):
    """Camera 1 shows the common sprite and sprite y; camera 2 common and z."""
    canvas = np.zeros(CANVAS)
    render_sprite(canvas, "common", x, COMMON_CENTRE[camera])
    render_sprite(canvas, "y" if camera == 1 else "z", other)
    return np.clip(canvas, 0.0, 1.0)


def gen_spinning_sprites(n, stream):
    if n < 1:
        raise ValueError("n must be >= 1")
    d = int(np.prod(CANVAS))
    s1 = np.empty((n, d), dtype=np.float32)
    s2 = np.empty((n, d), dtype=np.float32)
    hx, hy, hz = np.empty(n), np.empty(n), np.empty(n)
    for i in range(n):
        x, y, z = TWO_PI * stream.split(i).uniform(3)
        hx[i], hy[i], hz[i] = x, y, z
        s1[i] = render_camera(1, x, y).ravel()
        s2[i] = render_camera(2, x, z).ravel()
    return PairedDataset(s1, s2, hidden_x=hx, hidden_y=hy, hidden_z=hz, label=POSITIVE)


# --- two modalities ---------------------------------------------------------

def sine_frequency(x, omega_min=0.01, omega_max=0.1):
    return omega_min + (omega_max - omega_min) * np.asarray(x) / TWO_PI


def sine_signal(x, z, T=100, omega_min=0.01, omega_max=0.1):
    t = np.arange(1, T + 1)
    return np.sin(TWO_PI * sine_frequency(x, omega_min, omega_max) * t + z)


def gen_two_modalities(n, stream, base_image=None, T=100, omega_min=0.01, omega_max=0.1):
    """Sensor 1: (I rotated by x, I rotated by y); sensor 2: sin(2 pi w(x) t + z)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if T < 2:
        raise ValueError("T must be >= 2")
    if not 0 < omega_min <= omega_max < 0.5:
        raise ValueError("need 0 < omega_min <= omega_max < 0.5 (Nyquist)")
    img = default_base_image() if base_image is None else np.asarray(base_image, dtype=np.float64)
    d1 = 2 * img.size
    s1 = np.empty((n, d1), dtype=np.float32)
    s2 = np.empty((n, T), dtype=np.float32)
    hx, hy, hz = np.empty(n), np.empty(n), np.empty(n)
    for i in range(n):
        x, y, z = TWO_PI * stream.split(i).uniform(3)
        hx[i], hy[i], hz[i] = x, y, z
        s1[i, :img.size] = rotate_image(img, x).ravel()
        s1[i, img.size:] = rotate_image(img, y).ravel()
        s2[i] = sine_signal(x, z, T, omega_min, omega_max)
    return PairedDataset(s1, s2, hidden_x=hx, hidden_y=hy, hidden_z=hz, label=POSITIVE)


# --- rotation invariance ----------------------------------------------------

def gen_rotation_pairs(n, images, stream):
    """Positive pairs rotate one base image twice; negatives use two images.

    ``hidden_x``/``hidden_x2`` hold base-image indices, ``hidden_y``/``hidden_z``
    the two rotation angles.
    """
    images = np.asarray(images, dtype=np.float64)
    m = len(images)
    if m < 2:
        raise ValueError(f"corpus needs at least 2 images, got {m}")
    if n < 1:
        raise ValueError("n must be >= 1")
    d = images[0].size
    out = []
    for label, offset in ((POSITIVE, 0), (NEGATIVE, n)):
        s1 = np.empty((n, d), dtype=np.float32)
        s2 = np.empty((n, d), dtype=np.float32)
        ia, ib = np.empty(n), np.empty(n)
        g1, g2 = np.empty(n), np.empty(n)
        for i in range(n):
            rs = stream.split(offset + i)
            a = int(rs.integers(m))
            b = a if label == POSITIVE else (a + 1 + int(rs.integers(m - 1))) % m
            g1[i], g2[i] = TWO_PI * rs.uniform(2)
            ia[i], ib[i] = a, b
            s1[i] = rotate_image(images[a], g1[i]).ravel()
            s2[i] = rotate_image(images[b], g2[i]).ravel()
        out.append(PairedDataset(s1, s2, hidden_x=ia, hidden_y=g1, hidden_z=g2,
                                 hidden_x2=ib if label == NEGATIVE else None, label=label))
    return out[0], out[1]


# --- optional image directory ------------------------------------------------

def read_pgm(path):
    """Read a binary (P5) PGM file into a float array in [0, 1]."""
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = (int(t) for t in tokens[1:])
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    pixels = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w)
    return pixels.astype(np.float64) / maxval


def resize_area(img, size=IMAGE_SIZE):
    """Centre-crop to a square, then area-average down (or up) to ``size``."""
    h, w = img.shape
    k = min(h, w)
    top, left = (h - k) // 2, (w - k) // 2
    img = img[top:top + k, left:left + k]
    # area weights between source pixel j and target pixel i
    edges = np.linspace(0.0, k, size + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    j = np.arange(k)[None, :]
    wts = np.clip(np.minimum(hi, j + 1) - np.maximum(lo, j), 0.0, None)
    wts /= wts.sum(axis=1, keepdims=True)
    return wts @ img @ wts.T


def load_image_directory(directory, size=IMAGE_SIZE):
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".pgm")
    if len(paths) < 2:
        raise ValueError(f"{directory}: need at least 2 .pgm images, found {len(paths)}")
    return np.stack([resize_area(read_pgm(p), size) for p in paths])
