"""Periodic first-derivative operators on uniform grids.

Every operator here is a real, antisymmetric convolution along one axis, so
summation by parts holds exactly on the grid: ``sum(a * D(b)) == -sum(D(a) * b)``.
Second derivatives are always built by composing first derivatives, which keeps
discrete energies and their discrete gradients consistent.
"""

import numpy as np

# central-difference weights for offsets +1, +2, +3 (antisymmetric)
_FD_WEIGHTS = {
    "fd2": (1.0 / 2.0,),
    "fd4": (2.0 / 3.0, -1.0 / 12.0),
    "fd6": (3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0),
}

SCHEMES = tuple(_FD_WEIGHTS) + ("spectral",)

SCHEME_ORDER = {"fd2": 2, "fd4": 4, "fd6": 6, "spectral": np.inf}

# points on each side used by one first derivative
HALF_WIDTH = {name: len(w) for name, w in _FD_WEIGHTS.items()}


def derivative(field, axis, spacing, scheme="fd4"):
    """d/dx along ``axis`` of a periodic field sampled with step ``spacing``."""
    if scheme == "spectral":
        return _spectral(field, axis, spacing)
    try:
        weights = _FD_WEIGHTS[scheme]
    except KeyError:
        raise ValueError(f"unknown stencil scheme {scheme!r}; choose from {SCHEMES}") from None
    out = np.zeros_like(field)
    for offset, w in enumerate(weights, start=1):
        out += w * (np.roll(field, -offset, axis=axis) - np.roll(field, offset, axis=axis))
    return out / spacing


def _spectral(field, axis, spacing):
    n = field.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=spacing)
    if n % 2 == 0:
        k[n // 2] = 0.0  # Nyquist mode has no odd derivative
    shape = [1] * field.ndim
    shape[axis] = n
    out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(field, axis=axis), axis=axis)
    if np.isrealobj(field):
        return out.real
    return out


def symbol(scheme, k, spacing):
    """Fourier symbol of the derivative: D exp(ikx) = i*symbol*exp(ikx)."""
    k = np.asarray(k, dtype=float)
    if scheme == "spectral":
        return k
    weights = _FD_WEIGHTS[scheme]
    return sum(2.0 * w * np.sin(j * k * spacing) for j, w in enumerate(weights, start=1)) / spacing
