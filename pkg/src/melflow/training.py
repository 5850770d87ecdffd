"""End-to-end training of the spectral anomaly classifier.

Forward pass: power spectrogram -> trainable filter bank -> log compression
-> trainable cepstral projection -> residual encoder -> affine head ->
softmax + cross-entropy, with a soft orthogonality penalty on the projection.
Gradients are hand-derived reverse mode over that fixed composition and are
checked against the central-difference oracle in the test suite. The "raw"
variant bypasses the spectral frontend and feeds normalized features straight
to the encoder, which is what the ablation harness compares against.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .cepstral import (
    MelFilterBank,
    ProjectionMatrix,
    init_dct_matrix,
    init_mel_filterbank,
    orthogonality_penalty,
    psd_projection,
)
from .encoder import EncoderConfig, EncoderWeights, ResidualBlockWeights, init_encoder
from .errors import ConfigError, DataError, NumericError
from .spectral import WindowSpec, spectrogram_batch

logger = logging.getLogger("melflow.training")

VARIANTS = ("mfcc", "raw")

# Probabilities are clamped here before the log in the cross-entropy.
PROB_CLAMP = 1e-12


def _default_window():
    # Wide enough that the default filter count fits: n_bins = 33 >= 20 + 2.
    return WindowSpec(frame_length=64, hop=32)


@dataclass(frozen=True)
class ModelSettings:
    """Everything that fixes the model architecture and the feature pipeline."""

    variant: str = "mfcc"
    window: WindowSpec = field(default_factory=_default_window)
    n_filters: int = 20
    n_coeffs: int = 12
    sample_rate: float = 100.0
    f_min: float = 0.0
    f_max: float = 50.0
    log_floor: float = 1e-10
    lambda_orth: float = 0.01
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    n_classes: int = 2
    pca_components: int = 0  # 0 disables the fixed PCA stage

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.log_floor <= 0.0:
            raise ConfigError(f"log_floor must be > 0, got {self.log_floor}")
        if self.lambda_orth < 0.0:
            raise ConfigError(f"lambda_orth must be >= 0, got {self.lambda_orth}")
        if self.pca_components < 0:
            raise ConfigError(f"pca_components must be >= 0, got {self.pca_components}")
        if self.variant == "mfcc":
            # Mel initialization additionally needs n_bins >= n_filters + 2;
            # that is enforced by the configuration validator, not here, so
            # that directly constructed ParamSets can use any bank shape.
            if not 1 <= self.n_coeffs <= self.n_filters:
                raise ConfigError(
                    f"need 1 <= n_coeffs <= n_filters, got n_coeffs={self.n_coeffs} "
                    f"n_filters={self.n_filters}"
                )
            if not 0.0 <= self.f_min < self.f_max <= self.sample_rate / 2.0:
                raise ConfigError(
                    f"need 0 <= f_min < f_max <= sample_rate/2, got f_min={self.f_min} "
                    f"f_max={self.f_max} sample_rate={self.sample_rate}"
                )

    def n_frames(self, signal_length):
        spec = self.window
        if signal_length < spec.frame_length:
            return 1
        return (signal_length - spec.frame_length) // spec.hop + 1

    def encoder_input_width(self, signal_length):
        if self.pca_components > 0:
            return self.pca_components
        if self.variant == "mfcc":
            return self.n_frames(signal_length) * self.n_coeffs
        return signal_length


@dataclass(frozen=True)
class TrainSettings:
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    seed: int = 7
    clip_norm: float = 0.0  # 0 disables global-norm clipping
    psd_safeguard: bool = False
    early_stop_patience: int = 0  # 0 disables early stopping

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.clip_norm < 0.0:
            raise ConfigError(f"clip_norm must be >= 0, got {self.clip_norm}")
        if self.early_stop_patience < 0:
            raise ConfigError(
                f"early_stop_patience must be >= 0, got {self.early_stop_patience}"
            )


@dataclass
class ParamSet:
    """All trainable arrays plus the fixed PCA stage (when enabled)."""

    bank: MelFilterBank | None
    projection: ProjectionMatrix | None
    encoder: EncoderWeights
    head_w: np.ndarray
    head_b: np.ndarray
    pca_mean: np.ndarray | None = None
    pca_components: np.ndarray | None = None


def param_arrays(theta):
    """Named trainable arrays in declaration order; PCA arrays are fixed, not listed."""
    items = []
    if theta.bank is not None:
        items.append(("mel_bank", theta.bank.weights))
    if theta.projection is not None:
        items.append(("projection", theta.projection.weights))
    items.append(("enc_w_in", theta.encoder.w_in))
    items.append(("enc_b_in", theta.encoder.b_in))
    for i, blk in enumerate(theta.encoder.blocks):
        items.append((f"block{i}_w1", blk.w1))
        items.append((f"block{i}_b1", blk.b1))
        items.append((f"block{i}_w2", blk.w2))
        items.append((f"block{i}_b2", blk.b2))
    items.append(("enc_w_out", theta.encoder.w_out))
    items.append(("enc_b_out", theta.encoder.b_out))
    items.append(("head_w", theta.head_w))
    items.append(("head_b", theta.head_b))
    return items


def rebuild_params(theta, arrays):
    """New ParamSet with the same structure but arrays taken from the mapping."""
    bank = None
    if theta.bank is not None:
        bank = MelFilterBank(
            arrays["mel_bank"], theta.bank.sample_rate, theta.bank.f_min, theta.bank.f_max
        )
    projection = (
        ProjectionMatrix(arrays["projection"]) if theta.projection is not None else None
    )
    blocks = [
        ResidualBlockWeights(
            arrays[f"block{i}_w1"],
            arrays[f"block{i}_b1"],
            arrays[f"block{i}_w2"],
            arrays[f"block{i}_b2"],
        )
        for i in range(len(theta.encoder.blocks))
    ]
    enc = EncoderWeights(
        arrays["enc_w_in"],
        arrays["enc_b_in"],
        blocks,
        arrays["enc_w_out"],
        arrays["enc_b_out"],
    )
    return ParamSet(
        bank,
        projection,
        enc,
        arrays["head_w"],
        arrays["head_b"],
        theta.pca_mean,
        theta.pca_components,
    )


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam_state(theta, beta1=0.9, beta2=0.999, eps=1e-8):
    zeros = {name: np.zeros_like(arr) for name, arr in param_arrays(theta)}
    return AdamState(
        {k: v.copy() for k, v in zeros.items()}, zeros, 0, beta1, beta2, eps
    )


@dataclass(frozen=True)
class LossReport:
    total_loss: float
    ce_loss: float
    penalty: float
    batch_accuracy: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: LossReport
    val_f1: float


class TrainingDiverged(NumericError):
    """Raised when the loss goes non-finite; carries the history so far."""

    def __init__(self, epoch, batch, history):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.history = history


def softmax(h):
    """Row-wise stable softmax (max subtraction); entries positive, rows sum to 1."""
    h = np.asarray(h, dtype=np.float64)
    shifted = h - h.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p, y):
    """-sum_j y_j ln p_j with p clamped below at 1e-12. Works on vectors or stacks."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    losses = -np.sum(y * np.log(np.maximum(p, PROB_CLAMP)), axis=-1)
    return float(losses) if losses.ndim == 0 else losses


def init_params(settings, input_width, rng):
    """Fresh ParamSet for signals of the given width (feature count per row)."""
    if settings.variant == "mfcc":
        bank = init_mel_filterbank(
            settings.n_filters,
            settings.window.n_bins,
            settings.sample_rate,
            settings.f_min,
            settings.f_max,
        )
        projection = init_dct_matrix(settings.n_coeffs, settings.n_filters)
    else:
        bank = None
        projection = None
    enc = init_encoder(settings.encoder, settings.encoder_input_width(input_width), rng)
    k = settings.encoder.embedding_dim
    head_w = rng.standard_normal((settings.n_classes, k)) * np.sqrt(1.0 / k)
    head_b = np.zeros(settings.n_classes)
    return ParamSet(bank, projection, enc, head_w, head_b)


def _forward_core(settings, theta, features, spectra=None):
    """Pipeline up to the class probabilities; returns the activation cache."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise DataError("forward expects a non-empty (batch, width) feature matrix")
    cache = {"spectra": None, "e": None, "elog": None}
    if settings.variant == "mfcc":
        if spectra is None:
            spectra = spectrogram_batch(features, settings.window)
        bank, proj = theta.bank, theta.projection
        if spectra.shape[2] != bank.n_bins:
            raise DataError(
                f"filter-bank stage: spectrogram has {spectra.shape[2]} bins, "
                f"bank expects {bank.n_bins}"
            )
        e = spectra @ bank.weights.T
        elog = np.log(np.maximum(e, settings.log_floor))
        c = elog @ proj.weights
        u0 = c.reshape(features.shape[0], -1)
        cache.update(spectra=spectra, e=e, elog=elog)
    else:
        u0 = features
    if theta.pca_components is not None:
        u = (u0 - theta.pca_mean) @ theta.pca_components.T
    else:
        u = u0
    enc = theta.encoder
    if u.shape[1] != enc.in_dim:
        raise DataError(
            f"encoder stage: expects input width {enc.in_dim}, got {u.shape[1]}"
        )
    a = u @ enc.w_in.T + enc.b_in
    acts = [a]
    pres = []
    for blk in enc.blocks:
        pre = a @ blk.w1.T + blk.b1
        a = a + np.maximum(pre, 0.0) @ blk.w2.T + blk.b2
        pres.append(pre)
        acts.append(a)
    z = a @ enc.w_out.T + enc.b_out
    if z.shape[1] != theta.head_w.shape[1]:
        raise DataError(
            f"head stage: expects embedding width {theta.head_w.shape[1]}, "
            f"got {z.shape[1]}"
        )
    logits = z @ theta.head_w.T + theta.head_b
    cache.update(u0=u0, u=u, acts=acts, pres=pres, z=z, logits=logits,
                 probs=softmax(logits))
    return cache


def forward(settings, theta, features, labels, spectra=None):
    """Batch loss (mean cross-entropy + orthogonality penalty) plus the cache.

    spectra, when given, must be the precomputed power spectrograms of the
    batch; the training loop uses this to avoid recomputing the fixed frontend
    every step.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != np.shape(features)[0]:
        raise DataError("labels must be a vector matching the batch size")
    if labels.size == 0:
        raise DataError("forward expects a non-empty batch")
    if labels.min() < 0 or labels.max() >= settings.n_classes:
        raise DataError(f"labels must lie in [0, {settings.n_classes})")
    cache = _forward_core(settings, theta, features, spectra)
    probs = cache["probs"]
    onehot = np.eye(settings.n_classes)[labels]
    ce = float(np.mean(cross_entropy(probs, onehot)))
    penalty = (
        orthogonality_penalty(theta.projection) if theta.projection is not None else 0.0
    )
    total = ce + settings.lambda_orth * penalty
    acc = float(np.mean(np.argmax(probs, axis=1) == labels))
    cache.update(labels=labels.copy(), onehot=onehot)
    return LossReport(total, ce, penalty, acc), cache


def backward(settings, theta, cache, labels):
    """Exact gradients of the total loss for every trainable array.

    The softmax + cross-entropy composite uses the closed form p - y.
    """
    labels = np.asarray(labels)
    if "labels" not in cache or not np.array_equal(cache["labels"], labels):
        raise DataError("stale cache: labels do not match the cached forward pass")
    batch = labels.shape[0]
    enc = theta.encoder
    grads = {}

    d_logits = (cache["probs"] - cache["onehot"]) / batch
    grads["head_w"] = d_logits.T @ cache["z"]
    grads["head_b"] = d_logits.sum(axis=0)
    d_z = d_logits @ theta.head_w

    grads["enc_w_out"] = d_z.T @ cache["acts"][-1]
    grads["enc_b_out"] = d_z.sum(axis=0)
    d_a = d_z @ enc.w_out
    for i in reversed(range(len(enc.blocks))):
        blk = enc.blocks[i]
        pre = cache["pres"][i]
        relu_pre = np.maximum(pre, 0.0)
        grads[f"block{i}_w2"] = d_a.T @ relu_pre
        grads[f"block{i}_b2"] = d_a.sum(axis=0)
        d_pre = (d_a @ blk.w2) * (pre > 0.0)
        grads[f"block{i}_w1"] = d_pre.T @ cache["acts"][i]
        grads[f"block{i}_b1"] = d_pre.sum(axis=0)
        d_a = d_a + d_pre @ blk.w1
    grads["enc_w_in"] = d_a.T @ cache["u"]
    grads["enc_b_in"] = d_a.sum(axis=0)
    d_u = d_a @ enc.w_in

    if theta.pca_components is not None:
        d_u0 = d_u @ theta.pca_components
    else:
        d_u0 = d_u

    if settings.variant == "mfcc":
        elog = cache["elog"]
        n_frames = elog.shape[1]
        d_c = d_u0.reshape(batch, n_frames, theta.projection.n_coeffs)
        elog_flat = elog.reshape(batch * n_frames, -1)
        d_c_flat = d_c.reshape(batch * n_frames, -1)
        p = theta.projection.weights
        ptp_minus_i = p.T @ p - np.eye(theta.projection.n_coeffs)
        grads["projection"] = (
            elog_flat.T @ d_c_flat + settings.lambda_orth * 4.0 * (p @ ptp_minus_i)
        )
        d_elog = d_c @ p.T
        e = cache["e"]
        d_e = np.where(e > settings.log_floor, d_elog / np.maximum(e, settings.log_floor), 0.0)
        spectra_flat = cache["spectra"].reshape(batch * n_frames, -1)
        d_e_flat = d_e.reshape(batch * n_frames, -1)
        grads["mel_bank"] = d_e_flat.T @ spectra_flat
    return grads


def finite_diff_grad(settings, theta, features, labels, eps=1e-5):
    """Central-difference gradient oracle: O(#params) forward passes.

    Intended for tiny instances; perturbs each scalar in place and restores it
    exactly.
    """
    if eps <= 0.0:
        raise ConfigError(f"eps must be > 0, got {eps}")
    grads = {}
    for name, arr in param_arrays(theta):
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        grad_flat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus = forward(settings, theta, features, labels)[0].total_loss
            flat[i] = orig - eps
            minus = forward(settings, theta, features, labels)[0].total_loss
            flat[i] = orig
            grad_flat[i] = (plus - minus) / (2.0 * eps)
        grads[name] = grad
    return grads


def adam_step(theta, grads, state, lr):
    """One bias-corrected Adam update; returns the new ParamSet and AdamState."""
    if lr < 0.0:
        raise ConfigError(f"lr must be >= 0, got {lr}")
    t = state.t + 1
    new_m, new_v, updated = {}, {}, {}
    for name, arr in param_arrays(theta):
        g = grads[name]
        if g.shape != arr.shape:
            raise DataError(f"gradient {name!r} has shape {g.shape}, expected {arr.shape}")
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        updated[name] = arr - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v
    return (
        rebuild_params(theta, updated),
        AdamState(new_m, new_v, t, state.beta1, state.beta2, state.eps),
    )


def clip_gradients(grads, max_norm):
    """Scale all gradients down when their global norm exceeds max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm > 0.0:
        scale = max_norm / total
        for name in grads:
            grads[name] = grads[name] * scale
    return grads


def predict(settings, theta, features, spectra=None):
    """Hard class predictions (argmax of the logits)."""
    cache = _forward_core(settings, theta, features, spectra)
    return np.argmax(cache["logits"], axis=1)


def embed(settings, theta, features, spectra=None):
    """Embeddings z for each row."""
    return _forward_core(settings, theta, features, spectra)["z"]


def _flat_inputs(settings, theta, features, spectra):
    """Flattened pre-encoder features (cepstra for mfcc, raw features otherwise)."""
    if settings.variant != "mfcc":
        return features
    e = spectra @ theta.bank.weights.T
    elog = np.log(np.maximum(e, settings.log_floor))
    c = elog @ theta.projection.weights
    return c.reshape(features.shape[0], -1)


def train(settings, train_cfg, train_set, valid_set, log=True):
    """Seeded epoch loop over mini-batches; returns (ParamSet, history).

    The power spectrograms are parameter-free, so they are computed once per
    dataset up front. Validation F1 (positive class) is appended per epoch.
    Raises TrainingDiverged (with partial history attached) if the loss goes
    non-finite.
    """
    from .evaluation import confusion, f1, pca_fit  # local: evaluation trains arms too

    if train_set.n_features != valid_set.n_features:
        raise DataError(
            f"train set has {train_set.n_features} features, validation set "
            f"{valid_set.n_features}"
        )
    rng = np.random.default_rng(train_cfg.seed)
    theta = init_params(settings, train_set.n_features, rng)
    x, y = train_set.features, train_set.labels
    spectra = None
    valid_spectra = None
    if settings.variant == "mfcc":
        spectra = spectrogram_batch(x, settings.window)
        valid_spectra = spectrogram_batch(valid_set.features, settings.window)
    if settings.pca_components > 0:
        u0 = _flat_inputs(settings, theta, x, spectra)
        model = pca_fit(u0, settings.pca_components)
        theta.pca_mean = model.mean
        theta.pca_components = model.components
    state = init_adam_state(theta)
    history = []
    best_f1 = -1.0
    stale = 0
    n = train_set.n_rows
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(n)
        sums = np.zeros(4)
        for b, start in enumerate(range(0, n, train_cfg.batch_size)):
            idx = order[start : start + train_cfg.batch_size]
            batch_spectra = spectra[idx] if spectra is not None else None
            report, cache = forward(settings, theta, x[idx], y[idx], batch_spectra)
            if not np.isfinite(report.total_loss):
                raise TrainingDiverged(epoch, b, history)
            grads = backward(settings, theta, cache, y[idx])
            if train_cfg.clip_norm > 0.0:
                clip_gradients(grads, train_cfg.clip_norm)
            theta, state = adam_step(theta, grads, state, train_cfg.lr)
            if train_cfg.psd_safeguard and theta.bank is not None:
                theta = replace(theta, bank=psd_projection(theta.bank))
            w = idx.size
            sums += w * np.array(
                [report.total_loss, report.ce_loss, report.penalty,
                 report.batch_accuracy]
            )
        epoch_loss = LossReport(*(sums / n))
        val_pred = predict(settings, theta, valid_set.features, valid_spectra)
        val_f1 = f1(confusion(val_pred, valid_set.labels, settings.n_classes))
        history.append(EpochRecord(epoch, epoch_loss, val_f1))
        if log:
            logger.info(
                "epoch %d ce %.6f penalty %.6f total %.6f val_f1 %.4f",
                epoch, epoch_loss.ce_loss, epoch_loss.penalty,
                epoch_loss.total_loss, val_f1,
            )
        if train_cfg.early_stop_patience > 0:
            if val_f1 > best_f1:
                best_f1 = val_f1
                stale = 0
            else:
                stale += 1
                if stale >= train_cfg.early_stop_patience:
                    break
    return theta, history
