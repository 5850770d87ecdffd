"""Compact residual encoder: input projection, identity-skip blocks, output projection.

Maps a flattened cepstral feature vector to a low-dimensional embedding. The
forward pass is deterministic and purely affine + relu, so its gradients are
exactly checkable by finite differences (see melflow.training).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class EncoderConfig:
    n_blocks: int = 3
    hidden_width: int = 64
    embedding_dim: int = 16
    activation: str = "relu"

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ConfigError(f"n_blocks must be >= 1, got {self.n_blocks}")
        if self.embedding_dim < 1:
            raise ConfigError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.embedding_dim > self.hidden_width:
            raise ConfigError(
                f"embedding_dim {self.embedding_dim} exceeds hidden_width "
                f"{self.hidden_width}"
            )
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation!r}")


@dataclass
class ResidualBlockWeights:
    """Two affine maps; the block computes x + w2 @ relu(w1 @ x + b1) + b2."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass
class EncoderWeights:
    w_in: np.ndarray  # (hidden, in_dim)
    b_in: np.ndarray
    blocks: list
    w_out: np.ndarray  # (embedding, hidden)
    b_out: np.ndarray

    @property
    def in_dim(self):
        return self.w_in.shape[1]

    @property
    def hidden_width(self):
        return self.w_in.shape[0]

    @property
    def embedding_dim(self):
        return self.w_out.shape[0]


def init_encoder(cfg, in_dim, rng):
    """He-scaled Gaussian weights, zero biases.

    The second map of each residual branch starts down-scaled so blocks are
    near-identity at init; this keeps the whole stack close to unit gain and
    training stable at a fixed learning rate.
    """
    if in_dim < 1:
        raise ConfigError(f"encoder input width must be >= 1, got {in_dim}")
    h = cfg.hidden_width

    def dense(rows, cols, gain=1.0):
        return rng.standard_normal((rows, cols)) * (gain * np.sqrt(2.0 / cols))

    blocks = [
        ResidualBlockWeights(dense(h, h), np.zeros(h), dense(h, h, 0.1), np.zeros(h))
        for _ in range(cfg.n_blocks)
    ]
    return EncoderWeights(
        dense(h, in_dim),
        np.zeros(h),
        blocks,
        dense(cfg.embedding_dim, h),
        np.zeros(cfg.embedding_dim),
    )


def relu(x):
    return np.maximum(x, 0.0)


def residual_block_forward(x, w):
    """y = x + w2 @ relu(w1 @ x + b1) + b2 for one hidden-width vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != w.w1.shape[1]:
        raise DataError(
            f"block expects width {w.w1.shape[1]}, got input of width {x.shape[-1]}"
        )
    return x + relu(x @ w.w1.T + w.b1) @ w.w2.T + w.b2


def encode(cfg, weights, u):
    """Embedding z for a flattened feature vector u (or a (batch, in_dim) stack)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != weights.in_dim:
        raise DataError(
            f"encoder expects input width {weights.in_dim}, got {u.shape[-1]}"
        )
    a = u @ weights.w_in.T + weights.b_in
    for block in weights.blocks:
        a = residual_block_forward(a, block)
    return a @ weights.w_out.T + weights.b_out
