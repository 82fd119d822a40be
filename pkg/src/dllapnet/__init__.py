"""Causal amplitude/phase neural vocoder: batch and streaming synthesis,
latency analysis, distillation losses and objective metrics."""

from .errors import (
    FormatError,
    InvalidArgumentError,
    InvalidStateError,
    MissingTensorError,
    UnsupportedConfigurationError,
    UnsupportedFormatError,
)
from .io_codec import (
    WeightArchive,
    load_archive,
    load_config,
    load_mel,
    load_wav,
    random_init,
    save_archive,
    save_mel,
    save_wav,
)
from .model import (
    FeatureTrace,
    ModelConfig,
    SpectralPair,
    count_flops,
    forward_batch,
    synthesize_batch,
)
from .spectral import SpectralConfig, extract_mel, istft_batch, stft
from .streaming import (
    StreamState,
    lookahead_frames,
    stream_flush,
    stream_init,
    stream_push_frame,
    stream_push_frames,
    synthesize_streaming,
    total_latency,
)

__version__ = "0.1.0"
