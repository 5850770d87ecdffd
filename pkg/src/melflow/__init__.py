"""melflow: anomaly detection for IoT network flows.

Flow records are rendered as short 1-D signals, lifted into a power
spectrogram, passed through a trainable mel filter bank and a trainable
near-orthogonal cepstral projection, and classified by a compact residual
encoder trained with softmax cross-entropy. Everything trains with a
hand-derived gradient engine; see the README for the CLI.
"""

from .spectral import backend_name as spectral_backend

__version__ = "0.1.0"

__all__ = ["spectral_backend", "__version__"]
