"""Trainable mel filter bank and cepstral projection.

The filter bank starts as standard triangular mel filters with unit peaks and
the projection as orthonormal DCT-II columns; both are tuned by gradient
descent afterwards. The linear composition c = P^T (M s) doubles as a kernel
feature map, and M M^T is kept checkably positive semidefinite.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError

# Symmetry slack accepted by the eigenvalue routines.
SYMMETRY_TOL = 1e-12
# PSD slack for Gram matrices of real rows (roundoff only).
PSD_TOL = -1e-8


def hz_to_mel(f):
    """mel = 2595 * log10(1 + f / 700); accepts scalars or arrays, f >= 0."""
    arr = np.asarray(f, dtype=np.float64)
    if np.any(arr < 0):
        raise ConfigError("frequency must be non-negative")
    out = 2595.0 * np.log10(1.0 + arr / 700.0)
    return float(out) if np.isscalar(f) else out


def mel_to_hz(m):
    """Exact inverse of hz_to_mel."""
    arr = np.asarray(m, dtype=np.float64)
    if np.any(arr < 0):
        raise ConfigError("mel value must be non-negative")
    out = 700.0 * (10.0 ** (arr / 2595.0) - 1.0)
    return float(out) if np.isscalar(m) else out


@dataclass
class MelFilterBank:
    """Filter matrix (n_filters, n_bins) plus the scale metadata it was built from."""

    weights: np.ndarray
    sample_rate: float
    f_min: float
    f_max: float

    @property
    def n_filters(self):
        return self.weights.shape[0]

    @property
    def n_bins(self):
        return self.weights.shape[1]


@dataclass
class ProjectionMatrix:
    """Near-orthogonal projection (n_filters, n_coeffs), applied as P^T m."""

    weights: np.ndarray

    @property
    def n_filters(self):
        return self.weights.shape[0]

    @property
    def n_coeffs(self):
        return self.weights.shape[1]


def init_mel_filterbank(n_filters, n_bins, sample_rate=100.0, f_min=0.0, f_max=None):
    """Triangular filters with unit peaks at n_filters + 2 mel-equispaced centers.

    Centers are mapped to integer bin indices; adjacent filters share slopes
    that sum to one. Raises ConfigError when the centers cannot be separated.
    """
    if n_filters < 1:
        raise ConfigError(f"n_filters must be >= 1, got {n_filters}")
    if f_max is None:
        f_max = sample_rate / 2.0
    if not 0.0 <= f_min < f_max <= sample_rate / 2.0:
        raise ConfigError(
            f"need 0 <= f_min < f_max <= sample_rate/2, got f_min={f_min} "
            f"f_max={f_max} sample_rate={sample_rate}"
        )
    if n_bins < n_filters + 2:
        raise ConfigError(
            f"n_bins must be >= n_filters + 2, got n_bins={n_bins} n_filters={n_filters}"
        )
    mels = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_filters + 2)
    hz = mel_to_hz(mels)
    centers = np.rint(hz / (sample_rate / 2.0) * (n_bins - 1)).astype(int)
    if np.any(np.diff(centers) < 1):
        raise ConfigError(
            f"n_bins={n_bins} too small to separate {n_filters} filter centers"
        )
    weights = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        left, mid, right = centers[i], centers[i + 1], centers[i + 2]
        for b in range(left, mid):
            weights[i, b] = (b - left) / (mid - left)
        for b in range(mid, right):
            weights[i, b] = (right - b) / (right - mid)
    return MelFilterBank(weights, float(sample_rate), float(f_min), float(f_max))


def apply_filterbank(bank, s):
    """Band energies m = M s; s is one power spectrum (or a stack of them)."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != bank.n_bins:
        raise DataError(
            f"spectrum has {s.shape[-1]} bins, filter bank expects {bank.n_bins}"
        )
    return s @ bank.weights.T


def log_compress(m, floor=1e-10):
    """Elementwise ln(max(m, floor)); the floor absorbs zero or negative energies."""
    if floor <= 0.0:
        raise ConfigError(f"log floor must be > 0, got {floor}")
    return np.log(np.maximum(np.asarray(m, dtype=np.float64), floor))


def init_dct_matrix(n_coeffs, n_filters):
    """First n_coeffs orthonormal DCT-II basis vectors of length n_filters, as columns."""
    if not 1 <= n_coeffs <= n_filters:
        raise ConfigError(
            f"need 1 <= n_coeffs <= n_filters, got n_coeffs={n_coeffs} "
            f"n_filters={n_filters}"
        )
    m = np.arange(n_filters)[:, None]
    n = np.arange(n_coeffs)[None, :]
    scale = np.where(n == 0, math.sqrt(1.0 / n_filters), math.sqrt(2.0 / n_filters))
    weights = scale * np.cos(np.pi * n * (m + 0.5) / n_filters)
    return ProjectionMatrix(weights)


def project_cepstral(p, m):
    """Cepstral coefficients c = P^T m; m is one band-energy vector (or a stack)."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-1] != p.n_filters:
        raise DataError(
            f"mel spectrum has {m.shape[-1]} bands, projection expects {p.n_filters}"
        )
    return m @ p.weights


def kernel_map(bank, p, frame):
    """Linear feature map P^T (M x): the two-step pipeline without log compression."""
    return project_cepstral(p, apply_filterbank(bank, frame))


def gram_matrix(vectors):
    """Matrix of pairwise dot products; exactly symmetric (upper triangle mirrored)."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.ndim != 2 or v.shape[0] == 0:
        raise DataError("gram_matrix needs a non-empty list of equal-length vectors")
    g = v @ v.T
    upper = np.triu(g)
    return upper + np.triu(g, 1).T


def min_eigenvalue(g):
    """Smallest eigenvalue of a symmetric matrix (rejects asymmetry beyond 1e-12)."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DataError(f"expected a square matrix, got shape {g.shape}")
    asym = np.max(np.abs(g - g.T)) if g.size else 0.0
    if asym > SYMMETRY_TOL:
        raise DataError(f"matrix asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e}")
    return float(np.linalg.eigvalsh(g)[0])


def orthogonality_penalty(p):
    """Squared Frobenius norm of P^T P - I; zero exactly at orthonormal columns."""
    ptp = p.weights.T @ p.weights
    r = ptp - np.eye(p.n_coeffs)
    return float(np.sum(r * r))


def psd_projection(bank):
    """Safeguard for the PSD condition on M M^T.

    M M^T is a Gram matrix of real rows, so it is PSD up to roundoff already;
    if the eigensolve still reports a negative minimum, negative entries of M
    are clipped to zero and the condition re-verified.
    """
    if min_eigenvalue(gram_matrix(bank.weights)) >= 0.0:
        return bank
    clipped = MelFilterBank(
        np.maximum(bank.weights, 0.0), bank.sample_rate, bank.f_min, bank.f_max
    )
    if min_eigenvalue(gram_matrix(clipped.weights)) < PSD_TOL:
        raise NumericError("filter-bank Gram matrix stayed indefinite after clipping")
    return clipped
