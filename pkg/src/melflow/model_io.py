"""Model artifact persistence.

Self-describing binary format: an ASCII header (magic, version, embedded
config snapshot, normalizer table, named dimension table, payload checksum)
followed by the raw little-endian float64 arrays in declaration order. Raw
float bytes make the save/load round trip bit-exact.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .config import parse_config
from .errors import ModelCorruptError, ModelVersionError
from .training import ParamSet, param_arrays, rebuild_params

MAGIC = b"MELFLOW-MODEL"
FORMAT_VERSION = 1


@dataclass
class ModelArtifact:
    version: int
    config_text: str
    normalizer: list  # (name, min, max) per training feature column
    history_digest: str
    arrays: list  # (name, array) in declaration order


def artifact_from_params(config_text, theta, normalizer, history_digest=""):
    arrays = [(name, arr) for name, arr in param_arrays(theta)]
    if theta.pca_mean is not None:
        arrays.append(("pca_mean", theta.pca_mean))
        arrays.append(("pca_components", theta.pca_components))
    return ModelArtifact(
        FORMAT_VERSION, config_text, list(normalizer), history_digest, arrays
    )


def params_from_artifact(artifact):
    """(RunConfig, ParamSet) reconstructed from a loaded artifact."""
    cfg = parse_config(artifact.config_text)
    arrays = dict(artifact.arrays)
    missing = object()
    settings = cfg.model
    if settings.variant == "mfcc":
        bank_w = arrays.get("mel_bank", missing)
        proj_w = arrays.get("projection", missing)
        if bank_w is missing or proj_w is missing:
            raise ModelCorruptError("artifact is missing the frontend arrays")
    template = ParamSet(
        bank=_BankTemplate(settings) if settings.variant == "mfcc" else None,
        projection=_ProjTemplate() if settings.variant == "mfcc" else None,
        encoder=_EncTemplate(settings.encoder.n_blocks),
        head_w=None,
        head_b=None,
        pca_mean=arrays.get("pca_mean"),
        pca_components=arrays.get("pca_components"),
    )
    try:
        return cfg, rebuild_params(template, arrays)
    except KeyError as exc:
        raise ModelCorruptError(f"artifact is missing array {exc.args[0]!r}") from exc


class _BankTemplate:
    """Shape stand-in so rebuild_params can attach the stored metadata."""

    def __init__(self, settings):
        self.sample_rate = settings.sample_rate
        self.f_min = settings.f_min
        self.f_max = settings.f_max


class _ProjTemplate:
    pass


class _EncTemplate:
    def __init__(self, n_blocks):
        self.blocks = [None] * n_blocks


def save_model(artifact, path):
    """Write header plus concatenated little-endian float64 payload."""
    payload = b"".join(
        np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in artifact.arrays
    )
    config_bytes = artifact.config_text.encode("utf-8")
    lines = [MAGIC + b" v%d" % artifact.version]
    lines.append(b"config %d" % len(config_bytes))
    lines.append(config_bytes)
    lines.append(b"normalizer %d" % len(artifact.normalizer))
    for name, lo, hi in artifact.normalizer:
        lines.append(f"{name}\t{lo!r}\t{hi!r}".encode("utf-8"))
    lines.append(b"history-digest %s" % (artifact.history_digest or "-").encode())
    lines.append(b"arrays %d" % len(artifact.arrays))
    for name, arr in artifact.arrays:
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"{name} {arr.ndim} {dims}".rstrip().encode("utf-8"))
    lines.append(b"payload-sha256 " + hashlib.sha256(payload).hexdigest().encode())
    lines.append(b"END")
    with open(path, "wb") as fh:
        fh.write(b"\n".join(lines) + b"\n")
        fh.write(payload)
    return path


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def line(self):
        end = self.blob.find(b"\n", self.pos)
        if end < 0:
            raise ModelCorruptError("truncated artifact: header line missing")
        out = self.blob[self.pos : end]
        self.pos = end + 1
        return out

    def exact(self, n):
        if self.pos + n > len(self.blob):
            raise ModelCorruptError(
                f"truncated artifact: expected {n} bytes, found "
                f"{len(self.blob) - self.pos}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out


def _header_int(line, prefix):
    parts = line.split()
    if len(parts) != 2 or parts[0] != prefix:
        raise ModelCorruptError(f"malformed artifact header near {line[:40]!r}")
    try:
        return int(parts[1])
    except ValueError:
        raise ModelCorruptError(f"malformed artifact header near {line[:40]!r}") from None


def load_model(path):
    """Read an artifact; truncation, corruption, and version skew raise distinct errors."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ModelCorruptError(f"cannot read {path}: {exc}") from exc
    reader = _Reader(blob)
    first = reader.line().split()
    if len(first) != 2 or first[0] != MAGIC:
        raise ModelCorruptError(f"{path} is not a model artifact (bad magic)")
    version_tag = first[1].decode("ascii", "replace")
    if version_tag != f"v{FORMAT_VERSION}":
        raise ModelVersionError(
            f"artifact format {version_tag}, this build reads v{FORMAT_VERSION}"
        )
    n_config = _header_int(reader.line(), b"config")
    config_text = reader.exact(n_config).decode("utf-8")
    if reader.exact(1) != b"\n":
        raise ModelCorruptError("malformed artifact: config block not terminated")
    n_norm = _header_int(reader.line(), b"normalizer")
    normalizer = []
    for _ in range(n_norm):
        parts = reader.line().decode("utf-8").split("\t")
        if len(parts) != 3:
            raise ModelCorruptError("malformed artifact: bad normalizer line")
        try:
            normalizer.append((parts[0], float(parts[1]), float(parts[2])))
        except ValueError:
            raise ModelCorruptError("malformed artifact: bad normalizer value") from None
    digest_line = reader.line().split()
    if len(digest_line) != 2 or digest_line[0] != b"history-digest":
        raise ModelCorruptError("malformed artifact: missing history digest")
    history_digest = digest_line[1].decode()
    if history_digest == "-":
        history_digest = ""
    n_arrays = _header_int(reader.line(), b"arrays")
    specs = []
    for _ in range(n_arrays):
        parts = reader.line().decode("utf-8").split()
        if len(parts) < 2:
            raise ModelCorruptError("malformed artifact: bad array line")
        name = parts[0]
        try:
            ndim = int(parts[1])
            shape = tuple(int(d) for d in parts[2:])
        except ValueError:
            raise ModelCorruptError("malformed artifact: bad array dims") from None
        if len(shape) != ndim:
            raise ModelCorruptError(f"malformed artifact: array {name!r} dims disagree")
        specs.append((name, shape))
    sha_line = reader.line().split()
    if len(sha_line) != 2 or sha_line[0] != b"payload-sha256":
        raise ModelCorruptError("malformed artifact: missing payload checksum")
    if reader.line() != b"END":
        raise ModelCorruptError("malformed artifact: missing END marker")
    expected = sum(int(np.prod(shape)) * 8 for _, shape in specs)
    payload = reader.exact(expected)
    if reader.pos != len(blob):
        raise ModelCorruptError("malformed artifact: trailing bytes after payload")
    if hashlib.sha256(payload).hexdigest() != sha_line[1].decode():
        raise ModelCorruptError("artifact payload checksum mismatch")
    arrays = []
    offset = 0
    for name, shape in specs:
        count = int(np.prod(shape))
        chunk = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays.append((name, chunk.astype(np.float64).reshape(shape)))
        offset += count * 8
    return ModelArtifact(FORMAT_VERSION, config_text, normalizer, history_digest, arrays)
