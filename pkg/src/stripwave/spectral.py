"""Fourier representation of 2pi-periodic fields and the strip multiplier operators.

Fields are sampled on the uniform grid x_j = 2*pi*j/M.  Even fields carry a
pure cosine spectrum; the strip Hilbert transform maps cosine to sine content
(multiplier coth(n*h)), so its output is held in the same sample buffer with
the even-symmetry requirement suspended.  All operators are pure functions.
"""

import numpy as np

from .errors import MeanError, ParameterError, ShapeError, SymmetryError

EVEN_TOL = 1e-12
MEAN_TOL = 1e-12


def coth(x):
    """coth(x) for x > 0, stable for large arguments (== 1.0 once x > ~19)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return 1.0 + 2.0 / np.expm1(2.0 * x)


def grid_nodes(grid_size):
    return 2.0 * np.pi * np.arange(grid_size) / grid_size


class PeriodicField:
    """Real 2pi-periodic function sampled at x_j = 2*pi*j/M, M a power of two."""

    __slots__ = ("samples",)

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1:
            raise ShapeError(f"field samples must be 1-D, got shape {samples.shape}")
        m = samples.shape[0]
        if m < 4 or m & (m - 1):
            raise ShapeError(f"grid size must be a power of two >= 4, got {m}")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("field samples must be finite")
        self.samples = samples

    @property
    def grid_size(self):
        return self.samples.shape[0]

    @property
    def nodes(self):
        return grid_nodes(self.grid_size)

    def max_abs(self):
        return float(np.max(np.abs(self.samples)))

    def copy(self):
        return PeriodicField(self.samples.copy())

    @classmethod
    def zeros(cls, grid_size):
        return cls(np.zeros(grid_size))

    @classmethod
    def from_callable(cls, fn, grid_size):
        return cls(np.asarray(fn(grid_nodes(grid_size)), dtype=float))

    def __repr__(self):
        return f"PeriodicField(M={self.grid_size}, max|f|={self.max_abs():.3e})"


class CosineSpectrum:
    """Truncated cosine series a0 + sum_{n=1}^{N} a_n cos(n x)."""

    __slots__ = ("a0", "a")

    def __init__(self, a0, a):
        self.a0 = float(a0)
        self.a = np.asarray(a, dtype=float)

    @property
    def truncation(self):
        return self.a.shape[0]

    def coefficient(self, n):
        """a_n with a_0 = mean."""
        if n == 0:
            return self.a0
        return float(self.a[n - 1])


# raw-sample helpers shared with the residual and flow-field modules

def resample_samples(samples, new_size):
    """Band-limited resampling onto a larger uniform grid (raw arrays)."""
    m = samples.shape[0]
    if new_size == m:
        return samples
    if new_size < m:
        raise ShapeError("resampling only enlarges the grid")
    fh = np.fft.rfft(samples)
    out = np.zeros(new_size // 2 + 1, dtype=complex)
    out[: fh.shape[0]] = fh * (new_size / m)
    return np.fft.irfft(out, new_size)


def derivative_samples(samples, order):
    fh = np.fft.rfft(samples)
    n = np.arange(fh.shape[0])
    fh = fh * (1j * n) ** order
    fh[-1] = 0.0  # Nyquist mode carries no usable odd content
    return np.fft.irfft(fh, samples.shape[0])


def hilbert_samples(samples, depth):
    """Strip Hilbert multiplier on raw samples; the mean must already be zero."""
    fh = np.fft.rfft(samples)
    n = np.arange(1, fh.shape[0])
    fh[0] = 0.0
    fh[1:] *= -1j * coth(n * depth)
    fh[-1] = 0.0
    return np.fft.irfft(fh, samples.shape[0])


def cosine_coefficients(samples, n_modes):
    """a_0..a_N of the even part (raw samples, no symmetry check)."""
    m = samples.shape[0]
    fh = np.fft.rfft(samples)
    coeffs = np.empty(n_modes + 1)
    coeffs[0] = fh[0].real / m
    coeffs[1:] = 2.0 * fh[1: n_modes + 1].real / m
    return coeffs


def even_deviation(field):
    """max_j |f(x_j) - f(-x_j)| over the grid."""
    s = field.samples if isinstance(field, PeriodicField) else np.asarray(field)
    return float(np.max(np.abs(s - np.roll(s[::-1], 1))))


def assert_even(field, tol=EVEN_TOL):
    dev = even_deviation(field)
    scale = field.max_abs() if isinstance(field, PeriodicField) else float(np.max(np.abs(field)))
    if dev > tol * scale:
        raise SymmetryError(
            f"field is not even: deviation {dev:.3e} exceeds {tol:.1e} * max|f|")


def mean(field):
    """Average over one period; exact for band-limited input."""
    return float(np.mean(field.samples))


def to_spectrum(field, n_modes):
    """Cosine coefficients of an even field; requires M >= 2N."""
    m = field.grid_size
    if n_modes < 1 or 2 * n_modes > m:
        raise ParameterError(f"need M >= 2N, got M={m}, N={n_modes}")
    assert_even(field)
    coeffs = cosine_coefficients(field.samples, n_modes)
    return CosineSpectrum(coeffs[0], coeffs[1:])


def from_spectrum(spectrum, grid_size):
    """Sample a cosine series on the grid; requires M >= 2N."""
    n = spectrum.truncation
    if 2 * n > grid_size:
        raise ParameterError(f"need M >= 2N, got M={grid_size}, N={n}")
    fh = np.zeros(grid_size // 2 + 1, dtype=complex)
    fh[0] = spectrum.a0 * grid_size
    fh[1:n + 1] = 0.5 * spectrum.a * grid_size
    return PeriodicField(np.fft.irfft(fh, grid_size))


def derivative(field, order=1):
    """Spectral derivative, exact for band-limited input."""
    if order not in (1, 2):
        raise ParameterError(f"derivative order must be 1 or 2, got {order}")
    return PeriodicField(derivative_samples(field.samples, order))


def hilbert_strip(field, depth):
    """Strip Hilbert transform: cos(nx) -> coth(n h) sin(nx), sin -> -coth cos.

    Requires zero-mean input (a tiny numerical mean below 1e-12 is removed).
    Even input yields odd output, so the returned buffer is not even.
    """
    if depth <= 0:
        raise ParameterError(f"strip depth must be positive, got {depth}")
    a0 = float(np.mean(field.samples))
    if abs(a0) >= MEAN_TOL:
        raise MeanError(f"hilbert_strip needs zero-mean input, mean = {a0:.3e}")
    return PeriodicField(hilbert_samples(field.samples - a0, depth))


def dirichlet_neumann(field, depth):
    """Strip Dirichlet-Neumann map: [f]/h plus Hilbert transform of f'."""
    if depth <= 0:
        raise ParameterError(f"strip depth must be positive, got {depth}")
    tilt = hilbert_samples(derivative_samples(field.samples, 1), depth)
    return PeriodicField(mean(field) / depth + tilt)


def product(f, g, n_keep=None, oversample=4):
    """Pointwise product on an oversampled grid, truncated back to n_keep modes.

    The zero-padded evaluation (factor >= 3) keeps aliasing out of the
    retained band for quadratic nonlinearities of band-limited inputs.
    """
    if f.grid_size != g.grid_size:
        raise ShapeError(f"grid mismatch: {f.grid_size} vs {g.grid_size}")
    if oversample < 3:
        raise ParameterError(f"oversampling factor must be >= 3, got {oversample}")
    m = f.grid_size
    if n_keep is None:
        n_keep = m // 2 - 1
    if 2 * n_keep > m:
        raise ParameterError(f"cannot keep {n_keep} modes on a grid of {m}")
    m_os = oversample * m
    fs = resample_samples(f.samples, m_os)
    gs = resample_samples(g.samples, m_os)
    ph = np.fft.rfft(fs * gs)
    out = np.zeros(m // 2 + 1, dtype=complex)
    out[: n_keep + 1] = ph[: n_keep + 1] * (m / m_os)
    return PeriodicField(np.fft.irfft(out, m))
