"""Shared FFT helpers on periodic grids.

All transforms use ``numpy.fft.rfft2`` with x along the last axis.  numpy's
pocketfft backend is single threaded, so results are reproducible bit for bit.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def wavenumbers(nx, ny, lx, ly):
    """Return (kx, ky, ksq, kx_d, ky_d) broadcastable to the rfft2 layout.

    ``kx_d``/``ky_d`` have the Nyquist entry zeroed and are used for odd
    derivatives; ``ksq`` keeps it so the Laplacian stays exact.
    """
    kx = 2.0 * np.pi / lx * np.fft.rfftfreq(nx, 1.0 / nx)
    ky = 2.0 * np.pi / ly * np.fft.fftfreq(ny, 1.0 / ny)
    kx = kx[None, :]
    ky = ky[:, None]
    ksq = kx**2 + ky**2
    kx_d = kx.copy()
    kx_d[0, nx // 2] = 0.0
    ky_d = ky.copy()
    ky_d[ny // 2, 0] = 0.0
    for arr in (kx, ky, ksq, kx_d, ky_d):
        arr.flags.writeable = False
    return kx, ky, ksq, kx_d, ky_d


@lru_cache(maxsize=32)
def dealias_mask(nx, ny):
    """2/3-rule mask in rfft2 layout: keep integer modes with |m| < n/3."""
    mx = np.fft.rfftfreq(nx, 1.0 / nx)[None, :]
    my = np.fft.fftfreq(ny, 1.0 / ny)[:, None]
    mask = (np.abs(mx) < nx / 3.0) & (np.abs(my) < ny / 3.0)
    mask.flags.writeable = False
    return mask


def forward(a):
    return np.fft.rfft2(a)


def inverse(a_hat, nx, ny):
    return np.fft.irfft2(a_hat, s=(ny, nx))


def gradient(a, grid):
    """Spectral (d/dx, d/dy) of a real periodic array on ``grid``."""
    _, _, _, kx, ky = wavenumbers(grid.nx, grid.ny, grid.lx, grid.ly)
    a_hat = forward(a)
    return (inverse(1j * kx * a_hat, grid.nx, grid.ny),
            inverse(1j * ky * a_hat, grid.nx, grid.ny))
