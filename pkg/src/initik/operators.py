"""Matrix-free linear operators used by the solvers and benchmark problems.

Every operator maps real ``domain_dim``-vectors to real ``range_dim``-vectors
and exposes the adjoint map going the other way.  Operators are immutable
after construction; ``apply``/``apply_adjoint`` are pure and safe to share
across threads.
"""

import numpy as np

from .validation import as_matrix, as_vector, check_dim, check_finite

__all__ = [
    "LinearOperator",
    "DenseOperator",
    "DiagonalOperator",
    "Convolution2D",
    "ComposedOperator",
    "make_convolution",
    "operator_norm_estimate",
]


class LinearOperator:
    """Base class for bounded linear maps between coordinate spaces.

    Parameters
    ----------
    domain_dim : int
        Dimension of the input space.
    range_dim : int
        Dimension of the output space.
    kind : str
        One of ``{"dense", "diagonal", "convolution2d", "composite"}``.

    Notes
    -----
    Inner products are plain Euclidean; subclasses must keep
    ``<A x, y> == <x, A* y>`` to round-off.
    """

    def __init__(self, domain_dim, range_dim, kind):
        if domain_dim < 1 or range_dim < 1:
            raise ValueError("operator dimensions must be positive")
        self.domain_dim = int(domain_dim)
        self.range_dim = int(range_dim)
        self.kind = kind

    def apply(self, x):
        """Return ``A x`` for a ``domain_dim``-vector ``x``."""
        x = as_vector(x, "x")
        check_dim(x, self.domain_dim, "input of apply")
        return self._apply(x)

    def apply_adjoint(self, y):
        """Return ``A* y`` for a ``range_dim``-vector ``y``."""
        y = as_vector(y, "y")
        check_dim(y, self.range_dim, "input of apply_adjoint")
        return self._apply_adjoint(y)

    def _apply(self, x):
        raise NotImplementedError

    def _apply_adjoint(self, y):
        raise NotImplementedError

    def normal_apply(self, x, lam=1.0):
        """Return ``lam * A*(A x) + x``, the map inverted by the inner solver."""
        return lam * self.apply_adjoint(self.apply(x)) + x

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            return ComposedOperator(self, other)
        return NotImplemented

    def __repr__(self):
        return (
            f"{type(self).__name__}(domain_dim={self.domain_dim}, "
            f"range_dim={self.range_dim})"
        )


class DenseOperator(LinearOperator):
    """Operator backed by an explicit ``range_dim x domain_dim`` matrix."""

    def __init__(self, entries):
        entries = as_matrix(entries, "entries")
        check_finite(entries, "entries")
        super().__init__(entries.shape[1], entries.shape[0], "dense")
        self.entries = entries

    def _apply(self, x):
        return self.entries @ x

    def _apply_adjoint(self, y):
        return self.entries.T @ y


class DiagonalOperator(LinearOperator):
    """Self-adjoint operator scaling each coordinate by a fixed entry."""

    def __init__(self, diagonal):
        diagonal = as_vector(diagonal, "diagonal")
        check_finite(diagonal, "diagonal")
        super().__init__(diagonal.shape[0], diagonal.shape[0], "diagonal")
        self.diagonal = diagonal

    def _apply(self, x):
        return self.diagonal * x

    def _apply_adjoint(self, y):
        return self.diagonal * y


class ComposedOperator(LinearOperator):
    """Composition ``outer @ inner`` applying ``inner`` first."""

    def __init__(self, outer, inner):
        if inner.range_dim != outer.domain_dim:
            raise ValueError(
                f"cannot compose: inner range dim {inner.range_dim} != "
                f"outer domain dim {outer.domain_dim}"
            )
        super().__init__(inner.domain_dim, outer.range_dim, "composite")
        self.outer = outer
        self.inner = inner

    def _apply(self, x):
        return self.outer.apply(self.inner.apply(x))

    def _apply_adjoint(self, y):
        return self.inner.apply_adjoint(self.outer.apply_adjoint(y))


class Convolution2D(LinearOperator):
    """Circular 2-D convolution acting on row-major flattened images.

    The forward map convolves with the point spread function, the adjoint
    correlates (conjugate spectrum).  Both are evaluated in the frequency
    domain; imaginary residue of the inverse transform is discarded (it is
    at round-off level for real inputs).

    Parameters
    ----------
    image_height, image_width : int
        Grid size; vectors have length ``image_height * image_width``.
    kernel_spectrum : complex ndarray, shape (image_height, image_width)
        DFT of the PSF embedded with its center at index (0, 0).
    """

    def __init__(self, image_height, image_width, kernel_spectrum):
        if image_height < 1 or image_width < 1:
            raise ValueError("image dimensions must be positive")
        kernel_spectrum = np.asarray(kernel_spectrum, dtype=complex)
        if kernel_spectrum.shape != (image_height, image_width):
            raise ValueError(
                f"kernel_spectrum shape {kernel_spectrum.shape} does not "
                f"match image shape {(image_height, image_width)}"
            )
        n = image_height * image_width
        super().__init__(n, n, "convolution2d")
        self.image_height = int(image_height)
        self.image_width = int(image_width)
        self.kernel_spectrum = kernel_spectrum

    @property
    def image_shape(self):
        return (self.image_height, self.image_width)

    def _convolve(self, x, spectrum):
        img = x.reshape(self.image_shape)
        out = np.fft.ifft2(np.fft.fft2(img) * spectrum)
        return out.real.reshape(-1)

    def _apply(self, x):
        return self._convolve(x, self.kernel_spectrum)

    def _apply_adjoint(self, y):
        return self._convolve(y, np.conj(self.kernel_spectrum))


def make_convolution(psf, image_height, image_width):
    """Build a :class:`Convolution2D` from a point spread function.

    The PSF is embedded on the image grid with its center pixel at index
    (0, 0); entries falling outside wrap around circularly (and accumulate,
    so a kernel one pixel larger than the grid folds its opposite extreme
    rows/columns together).  A real even-symmetric PSF therefore yields a
    real spectrum and a self-adjoint operator.

    Parameters
    ----------
    psf : 2-D array
        Convolution kernel; its center is ``(kh // 2, kw // 2)``.
    image_height, image_width : int
        Target grid size.

    Raises
    ------
    ValueError
        If the PSF exceeds the padded image grid (more than one pixel
        larger than the image along an axis) or contains non-finite values.
    """
    psf = as_matrix(psf, "psf")
    check_finite(psf, "psf")
    kh, kw = psf.shape
    if kh > image_height + 1 or kw > image_width + 1:
        raise ValueError(
            f"PSF of shape {psf.shape} is larger than the padded image grid "
            f"({image_height + 1}x{image_width + 1})"
        )
    embedded = np.zeros((image_height, image_width))
    rows = (np.arange(kh) - kh // 2) % image_height
    cols = (np.arange(kw) - kw // 2) % image_width
    np.add.at(embedded, (rows[:, None], cols[None, :]), psf)
    return Convolution2D(image_height, image_width, np.fft.fft2(embedded))


def operator_norm_estimate(op, iters=100, seed=0):
    """Estimate the spectral norm of ``op`` by power iteration on ``A* A``.

    Returns the square root of the final Rayleigh quotient, which increases
    monotonically with ``iters`` (up to round-off) and never overshoots the
    true norm.  A zero operator (or a start vector annihilated by ``A``)
    yields 0.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.domain_dim)
    v /= np.linalg.norm(v)
    rayleigh = 0.0
    for _ in range(iters):
        w = op.apply_adjoint(op.apply(v))
        rayleigh = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
    return float(np.sqrt(max(rayleigh, 0.0)))
