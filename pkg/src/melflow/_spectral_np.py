"""Pure numpy spectral kernels.

Fallback twin of the compiled extension (_spectral_cy). Both expose
power_spectra(frames) and must agree to ~1e-12; the test suite checks this
whenever the extension is importable.
"""

import numpy as np

BACKEND_NAME = "numpy"


def bit_reverse_indices(n):
    """Index permutation for the iterative radix-2 transform; n is a power of two."""
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _power_pow2(frames):
    # Iterative radix-2 decimation-in-time, vectorized across frames.
    n_frames, length = frames.shape
    if length == 1:
        return frames**2
    re = frames[:, bit_reverse_indices(length)].copy()
    im = np.zeros_like(re)
    size = 2
    while size <= length:
        half = size // 2
        ang = -2.0 * np.pi * np.arange(half) / size
        wr = np.cos(ang)
        wi = np.sin(ang)
        re3 = re.reshape(n_frames, length // size, size)
        im3 = im.reshape(n_frames, length // size, size)
        even_r = re3[:, :, :half].copy()
        even_i = im3[:, :, :half].copy()
        odd_r = re3[:, :, half:] * wr - im3[:, :, half:] * wi
        odd_i = re3[:, :, half:] * wi + im3[:, :, half:] * wr
        re3[:, :, :half] = even_r + odd_r
        im3[:, :, :half] = even_i + odd_i
        re3[:, :, half:] = even_r - odd_r
        im3[:, :, half:] = even_i - odd_i
        size *= 2
    n_bins = length // 2 + 1
    return re[:, :n_bins] ** 2 + im[:, :n_bins] ** 2


def _power_direct(frames):
    # One matrix product per cos/sin table: O(L^2) work per frame.
    length = frames.shape[1]
    n_bins = length // 2 + 1
    ang = -2.0 * np.pi * np.outer(np.arange(n_bins), np.arange(length)) / length
    re = frames @ np.cos(ang).T
    im = frames @ np.sin(ang).T
    return re**2 + im**2


def power_spectra(frames):
    """Unilateral power spectra |X(k)|^2, k = 0..L//2, for a (n_frames, L) batch."""
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ValueError("frames must be a 2-D array")
    length = frames.shape[1]
    if length < 1:
        raise ValueError("frame length must be at least 1")
    if length & (length - 1) == 0:
        return _power_pow2(frames)
    return _power_direct(frames)
