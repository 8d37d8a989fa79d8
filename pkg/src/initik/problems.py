"""Benchmark problem generators: image deblurring, a finite-difference
surrogate of the 2D inverse potential problem, and small dense test problems.

Every generated :class:`Problem` bundles the forward operator, the ground
truth, exact and noisy data, and the *measured* noise norm ``delta``
(noise vectors are scaled so that ``norm(noisy - exact)`` equals the
requested fraction of ``norm(exact)`` exactly).
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dstn

from .operators import DenseOperator, LinearOperator, make_convolution
from .validation import (
    as_matrix,
    check_finite,
    check_nonnegative,
    check_positive,
)

__all__ = [
    "Problem",
    "PgmParseError",
    "gaussian_psf",
    "make_phantom_image",
    "load_pgm",
    "make_deblurring_problem",
    "poisson_solve_fd",
    "neumann_trace_fd",
    "assemble_ipp_operator",
    "default_ipp_phantom",
    "make_ipp_problem",
    "make_dense_problem",
]


@dataclass
class Problem:
    """A linear inverse problem instance with known ground truth.

    ``delta`` is the measured noise norm ``norm(noisy_data - exact_data)``,
    so the noise bound holds with equality by construction.
    """

    operator: LinearOperator
    ground_truth: np.ndarray
    exact_data: np.ndarray
    noisy_data: np.ndarray
    delta: float

    @property
    def noise_level(self):
        """Noise norm relative to the exact data norm."""
        scale = float(np.linalg.norm(self.exact_data))
        return self.delta / scale if scale > 0 else 0.0


def _inject_noise(exact, noise_level, noise_kind, rng):
    """Additive noise with ``norm(noise) = noise_level * norm(exact)``.

    The raw draw depends only on the generator state, so the same seed
    produces the same noise *direction* at every level.
    """
    check_nonnegative(noise_level, "noise_level")
    if noise_kind == "gaussian":
        raw = rng.standard_normal(exact.shape[0])
    elif noise_kind == "uniform":
        raw = rng.uniform(-1.0, 1.0, exact.shape[0])
    else:
        raise ValueError(f"unknown noise_kind {noise_kind!r}")
    if noise_level == 0.0:
        return exact.copy(), 0.0
    raw_norm = np.linalg.norm(raw)
    if raw_norm == 0.0:
        raw[0] = 1.0
        raw_norm = 1.0
    noisy = exact + raw * (noise_level * np.linalg.norm(exact) / raw_norm)
    return noisy, float(np.linalg.norm(noisy - exact))


# ---------------------------------------------------------------------------
# image deblurring


def gaussian_psf(size, sigma):
    """Rotationally symmetric Gaussian kernel on a ``size x size`` grid.

    ``size`` must be odd so a center pixel exists; entries are
    ``exp(-(i^2 + j^2) / (2 sigma^2))`` on the centered integer grid,
    normalized to sum 1.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError(f"size must be an odd positive integer, got {size}")
    check_positive(sigma, "sigma")
    half = (size - 1) // 2
    i = np.arange(-half, half + 1)
    g = np.exp(-(i[:, None] ** 2 + i[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def make_phantom_image(height, width):
    """Deterministic grayscale test image in [0, 1].

    Combines a smooth background gradient, a dark figure (ellipse plus
    body), a bright disc, a striped block, thin line structures and
    fine-scale texture spanning several spatial frequencies, then applies
    one 3x3 binomial smoothing pass so edges stay crisp without putting
    energy at the grid's Nyquist frequency.  The same dimensions always
    produce the same image.
    """
    if height < 16 or width < 16:
        raise ValueError(
            f"phantom dimensions must be >= 16, got {height}x{width}"
        )
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width),
        indexing="ij",
    )
    img = 0.72 - 0.12 * yy

    head = ((yy - 0.30) / 0.16) ** 2 + ((xx - 0.38) / 0.13) ** 2 <= 1.0
    img[head] = 0.12
    body = (yy >= 0.42) & (yy <= 0.95) & (xx >= 0.26) & (xx <= 0.52)
    img[body] = 0.16

    disc = ((yy - 0.22) / 0.09) ** 2 + ((xx - 0.75) / 0.09) ** 2 <= 1.0
    img[disc] = 0.93

    block = (yy >= 0.52) & (yy <= 0.80) & (xx >= 0.60) & (xx <= 0.93)
    img[block] = 0.45 + 0.06 * np.sin(2.0 * np.pi * 9.0 * xx[block])

    bar = (yy >= 0.50) & (yy <= 0.92) & (xx >= 0.545) & (xx <= 0.565)
    img[bar] = 0.22
    diag = (
        (np.abs((yy - 0.55) - 0.8 * (xx - 0.60)) < 0.006)
        & (xx >= 0.52) & (xx <= 0.75)
    )
    img[diag] = 0.18

    strip = yy >= 0.5
    texture = (
        np.sin(2.0 * np.pi * 11.0 * xx) * np.sin(2.0 * np.pi * 7.0 * yy)
        + 0.8 * np.sin(2.0 * np.pi * 23.0 * xx + 1.3)
        * np.sin(2.0 * np.pi * 17.0 * yy)
        + 0.6 * np.sin(2.0 * np.pi * 37.0 * xx)
        * np.sin(2.0 * np.pi * 29.0 * yy + 0.7)
    )
    img[strip] += (0.22 / 2.4) * texture[strip]
    img += 0.10 * np.sin(2.0 * np.pi * 22.0 * xx) * np.sin(2.0 * np.pi * 21.0 * yy)

    img = np.clip(img, 0.0, 1.0)
    kernel = np.array([1.0, 2.0, 1.0]) / 4.0
    for axis in (0, 1):
        img = (
            kernel[1] * img
            + kernel[0] * np.roll(img, 1, axis=axis)
            + kernel[2] * np.roll(img, -1, axis=axis)
        )
    return np.clip(img, 0.0, 1.0)


class PgmParseError(ValueError):
    """Malformed portable graymap input; the message names the byte offset."""


def load_pgm(path):
    """Load a P2 (ASCII) or P5 (binary) portable graymap as floats in [0, 1]."""
    blob = Path(path).read_bytes()
    pos = 0

    def fail(msg, at):
        raise PgmParseError(f"{path}: {msg} at byte {at}")

    def next_token():
        nonlocal pos
        while pos < len(blob):
            ch = blob[pos : pos + 1]
            if ch == b"#":
                while pos < len(blob) and blob[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        if pos >= len(blob):
            fail("unexpected end of file", pos)
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        return blob[start:pos], start

    magic, at = next_token()
    if magic not in (b"P2", b"P5"):
        fail(f"unsupported magic {magic!r} (expected P2 or P5)", at)

    header = []
    for name in ("width", "height", "maxval"):
        token, at = next_token()
        try:
            value = int(token)
        except ValueError:
            fail(f"invalid {name} {token!r}", at)
        if value <= 0:
            fail(f"{name} must be positive, got {value}", at)
        header.append(value)
    width, height, maxval = header
    if maxval > 65535:
        fail(f"maxval {maxval} exceeds 65535", at)

    count = width * height
    if magic == b"P2":
        values = []
        for _ in range(count):
            token, at = next_token()
            try:
                v = int(token)
            except ValueError:
                fail(f"invalid sample {token!r}", at)
            if v > maxval:
                fail(f"sample {v} exceeds maxval {maxval}", at)
            values.append(v)
        arr = np.array(values, dtype=float)
    else:
        pos += 1  # single whitespace byte separates the header from the raster
        width_bytes = 1 if maxval < 256 else 2
        need = count * width_bytes
        if len(blob) - pos < need:
            fail(
                f"raster truncated ({len(blob) - pos} of {need} bytes)", pos
            )
        raw = blob[pos : pos + need]
        dtype = np.uint8 if width_bytes == 1 else ">u2"
        arr = np.frombuffer(raw, dtype=dtype).astype(float)
        if np.any(arr > maxval):
            bad = int(np.argmax(arr > maxval))
            fail(
                f"sample {int(arr[bad])} exceeds maxval {maxval}",
                pos + bad * width_bytes,
            )
    return (arr / maxval).reshape(height, width)


def make_deblurring_problem(image, psf, noise_level, seed=0,
                            noise_kind="gaussian"):
    """Blur an image with a PSF under circular boundary conditions.

    The ground truth is the flattened image, the exact data its blur and
    the noisy data adds (by default normally distributed) noise scaled to
    ``noise_level * norm(exact_data)``.
    """
    image = as_matrix(image, "image")
    check_finite(image, "image")
    op = make_convolution(psf, image.shape[0], image.shape[1])
    truth = image.reshape(-1).astype(float)
    exact = op.apply(truth)
    rng = np.random.default_rng(seed)
    noisy, delta = _inject_noise(exact, noise_level, noise_kind, rng)
    return Problem(op, truth, exact, noisy, delta)


# ---------------------------------------------------------------------------
# inverse potential problem (finite-difference surrogate)


def poisson_solve_fd(source):
    """Solve ``-laplace(u) = source`` on the unit square with zero boundary.

    ``source`` is sampled on the ``m x m`` interior grid (spacing
    ``h = 1/(m+1)``); the 5-point discretization diagonalizes in the type-I
    sine basis, so the solve is direct and exact up to round-off.  Returns
    the full ``(m+2) x (m+2)`` potential including the zero boundary layer.
    """
    source = as_matrix(source, "source")
    check_finite(source, "source")
    m_rows, m_cols = source.shape
    if m_rows != m_cols:
        raise ValueError(f"source grid must be square, got {source.shape}")
    m = m_rows
    if m < 2:
        raise ValueError(f"interior grid must be at least 2x2, got {m}x{m}")
    h = 1.0 / (m + 1)
    p = np.arange(1, m + 1)
    eig = (4.0 / h**2) * np.sin(np.pi * p * h / 2.0) ** 2
    coeff = dstn(source, type=1, norm="ortho")
    coeff /= eig[:, None] + eig[None, :]
    interior = dstn(coeff, type=1, norm="ortho")
    full = np.zeros((m + 2, m + 2))
    full[1:-1, 1:-1] = interior
    return full


def neumann_trace_fd(u):
    """Outward normal derivative of a potential on the unit-square boundary.

    ``u`` is a full ``(m+2) x (m+2)`` grid (boundary layer included, first
    index = vertical coordinate from the bottom edge).  One-sided
    differences produce one value per non-corner boundary node, ordered
    counterclockwise: bottom (left to right), right (bottom to top), top
    (right to left), left (top to bottom).  Length ``4 m``.
    """
    u = as_matrix(u, "u")
    if u.shape[0] != u.shape[1]:
        raise ValueError(f"potential grid must be square, got {u.shape}")
    m = u.shape[0] - 2
    if m < 1:
        raise ValueError("potential grid must contain interior nodes")
    h = 1.0 / (m + 1)
    inner = np.arange(1, m + 1)
    bottom = (u[0, inner] - u[1, inner]) / h
    right = (u[inner, m + 1] - u[inner, m]) / h
    top = (u[m + 1, inner[::-1]] - u[m, inner[::-1]]) / h
    left = (u[inner[::-1], 0] - u[inner[::-1], 1]) / h
    return np.concatenate([bottom, right, top, left])


_IPP_MAX_CELLS = 4096
_IPP_MAX_GRID = 512


def _cell_index_grid(n_cells_per_side, fd_grid_m):
    """Map each interior grid node to its source-cell index (row-major)."""
    h = 1.0 / (fd_grid_m + 1)
    coords = np.arange(1, fd_grid_m + 1) * h
    cells = np.minimum((coords * n_cells_per_side).astype(int),
                       n_cells_per_side - 1)
    return cells[:, None] * n_cells_per_side + cells[None, :]


def assemble_ipp_operator(n_cells_per_side, fd_grid_m):
    """Dense map from piecewise-constant sources to their Neumann traces.

    Column ``i`` is the boundary trace of the potential generated by the
    indicator of source cell ``i`` (row-major over an
    ``n_cells_per_side x n_cells_per_side`` partition of the unit square),
    computed on the ``fd_grid_m`` interior grid.  The fine grid must
    resolve the cells (``fd_grid_m >= 2 * n_cells_per_side``).
    """
    if n_cells_per_side < 1:
        raise ValueError("n_cells_per_side must be positive")
    if fd_grid_m < 2 * n_cells_per_side:
        raise ValueError(
            f"fd_grid_m={fd_grid_m} does not resolve {n_cells_per_side} "
            "cells per side (need fd_grid_m >= 2 * n_cells_per_side)"
        )
    n_cells = n_cells_per_side**2
    if n_cells > _IPP_MAX_CELLS or fd_grid_m > _IPP_MAX_GRID:
        raise ValueError(
            f"requested assembly ({n_cells} cells on a {fd_grid_m} grid) "
            f"exceeds the resource guard ({_IPP_MAX_CELLS} cells, "
            f"{_IPP_MAX_GRID} grid)"
        )
    cell_of_node = _cell_index_grid(n_cells_per_side, fd_grid_m)
    columns = np.empty((4 * fd_grid_m, n_cells))
    for i in range(n_cells):
        chi = (cell_of_node == i).astype(float)
        columns[:, i] = neumann_trace_fd(poisson_solve_fd(chi))
    return DenseOperator(columns)


def default_ipp_phantom(n_cells_per_side, background=1.0, inclusion=2.0,
                        rect=(0.25, 0.625, 0.3125, 0.6875)):
    """Piecewise-constant source with a raised rectangular inclusion.

    ``rect = (x_lo, x_hi, y_lo, y_hi)`` in unit-square coordinates; cells
    whose centers fall inside take the ``inclusion`` value, the rest the
    ``background`` value.
    """
    n = n_cells_per_side
    x_lo, x_hi, y_lo, y_hi = rect
    if not (0.0 <= x_lo < x_hi <= 1.0 and 0.0 <= y_lo < y_hi <= 1.0):
        raise ValueError(f"invalid inclusion rectangle {rect}")
    centers = (np.arange(n) + 0.5) / n
    cx, cy = np.meshgrid(centers, centers, indexing="xy")
    phantom = np.full((n, n), float(background))
    inside = (cx >= x_lo) & (cx < x_hi) & (cy >= y_lo) & (cy < y_hi)
    phantom[inside] = float(inclusion)
    return phantom


def make_ipp_problem(n_cells_per_side=16, fd_grid_m=64, noise_level=0.0,
                     noise_kind="uniform", seed=0, phantom=None):
    """Inverse potential problem on the finite-difference surrogate.

    ``phantom`` is an ``n x n`` array of source-cell values (row-major
    flattening matches the operator's column order); by default a
    discontinuous source with a rectangular inclusion is used.  Noise is
    uniform by default.
    """
    op = assemble_ipp_operator(n_cells_per_side, fd_grid_m)
    if phantom is None:
        phantom = default_ipp_phantom(n_cells_per_side)
    phantom = as_matrix(phantom, "phantom")
    if phantom.shape != (n_cells_per_side, n_cells_per_side):
        raise ValueError(
            f"phantom shape {phantom.shape} does not match "
            f"{n_cells_per_side}x{n_cells_per_side} cells"
        )
    check_finite(phantom, "phantom")
    truth = phantom.reshape(-1).astype(float)
    exact = op.apply(truth)
    rng = np.random.default_rng(seed)
    noisy, delta = _inject_noise(exact, noise_level, noise_kind, rng)
    return Problem(op, truth, exact, noisy, delta)


# ---------------------------------------------------------------------------
# small dense test problems


def make_dense_problem(rows=12, cols=10, decay=0.65, noise_level=0.0,
                       noise_kind="gaussian", seed=0):
    """Random dense problem with geometrically decaying singular values.

    The operator is ``U diag(decay**i) V'`` with seeded random orthonormal
    factors, so the true spectrum is known and mild ill-posedness is
    controlled by ``decay``.
    """
    if rows < cols:
        raise ValueError("rows must be >= cols so the matrix is injective")
    if not 0 < decay <= 1:
        raise ValueError(f"decay must lie in (0, 1], got {decay}")
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    v, _ = np.linalg.qr(rng.standard_normal((cols, cols)))
    singular = decay ** np.arange(cols)
    matrix = u @ (singular[:, None] * v.T)
    truth = rng.standard_normal(cols)
    op = DenseOperator(matrix)
    exact = op.apply(truth)
    noisy, delta = _inject_noise(exact, noise_level, noise_kind, rng)
    return Problem(op, truth, exact, noisy, delta)
