"""STFT analysis, overlap-add synthesis and log-mel extraction.

All spectrogram arrays are frame-major: ``[T, n_bins]`` or ``[T, n_mels]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgumentError

ENVELOPE_FLOOR = 1e-8


@dataclass(frozen=True)
class SpectralConfig:
    sample_rate: int = 16000
    n_fft: int = 1024
    frame_len: int = 320
    hop: int = 80
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-5

    def __post_init__(self):
        if not 1 <= self.hop <= self.frame_len <= self.n_fft:
            raise InvalidArgumentError(
                f"need 1 <= hop <= frame_len <= n_fft, got hop={self.hop}, "
                f"frame_len={self.frame_len}, n_fft={self.n_fft}"
            )
        if self.frame_len % self.hop:
            raise InvalidArgumentError(
                f"frame_len ({self.frame_len}) must be a multiple of hop ({self.hop})"
            )
        if self.fmax > self.sample_rate / 2:
            raise InvalidArgumentError(
                f"fmax={self.fmax} exceeds Nyquist ({self.sample_rate / 2})"
            )
        if self.n_mels < 1 or self.log_floor <= 0:
            raise InvalidArgumentError("n_mels must be >= 1 and log_floor > 0")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def frames_per_second(self) -> float:
        return self.sample_rate / self.hop

    def num_frames(self, n_samples: int) -> int:
        return n_samples // self.hop + 1


@dataclass(frozen=True)
class ComplexSpectrogram:
    amplitude: np.ndarray
    phase: np.ndarray

    @property
    def num_frames(self) -> int:
        return self.amplitude.shape[0]

    def to_complex(self) -> np.ndarray:
        return self.amplitude * np.exp(1j * self.phase)


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]


def make_window(length: int) -> np.ndarray:
    """Periodic Hann window of ``length`` samples."""
    if length < 1:
        raise InvalidArgumentError(f"window length must be >= 1, got {length}")
    n = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / length))


@lru_cache(maxsize=16)
def _window(length: int) -> np.ndarray:
    w = make_window(length)
    w.setflags(write=False)
    return w


def wrap_phase(phase: np.ndarray) -> np.ndarray:
    """Fold values equal to -pi onto +pi so phases lie in (-pi, pi]."""
    return np.where(phase <= -np.pi, phase + 2.0 * np.pi, phase)


def _frames(wave: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    pad = cfg.frame_len // 2
    if wave.size == 1:
        # reflection of a single sample is the sample itself
        padded = np.pad(wave, pad, mode="edge")
    else:
        padded = np.pad(wave, pad, mode="reflect")
    t = cfg.num_frames(wave.size)
    return sliding_window_view(padded, cfg.frame_len)[:: cfg.hop][:t]


def stft_complex(wave, cfg: SpectralConfig = SpectralConfig()) -> np.ndarray:
    """Complex STFT ``[T, n_bins]`` with centred reflection padding."""
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1 or wave.size < 1:
        raise InvalidArgumentError("stft expects a non-empty 1-D waveform")
    frames = _frames(wave, cfg) * _window(cfg.frame_len)
    return np.fft.rfft(frames, n=cfg.n_fft, axis=1)


def stft(wave, cfg: SpectralConfig = SpectralConfig()) -> ComplexSpectrogram:
    spec = stft_complex(wave, cfg)
    return ComplexSpectrogram(np.abs(spec), wrap_phase(np.angle(spec)))


def synthesis_frames(amplitude, phase, cfg: SpectralConfig) -> np.ndarray:
    """Inverse FFT of each frame, truncated to ``frame_len`` and windowed."""
    spec = np.asarray(amplitude) * np.exp(1j * np.asarray(phase))
    frames = np.fft.irfft(spec, n=cfg.n_fft, axis=1)[:, : cfg.frame_len]
    return frames * _window(cfg.frame_len)


def overlap_add(frames: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """Overlap-add windowed frames and divide by the squared-window envelope.

    Returns the uncentred signal of length ``(T - 1) * hop + frame_len``.
    """
    t = frames.shape[0]
    if t == 0:
        return np.zeros(0)
    n = (t - 1) * cfg.hop + cfg.frame_len
    out = np.zeros(n)
    env = np.zeros(n)
    wsq = _window(cfg.frame_len) ** 2
    for j in range(t):
        s = j * cfg.hop
        out[s : s + cfg.frame_len] += frames[j]
        env[s : s + cfg.frame_len] += wsq
    return out / np.maximum(env, ENVELOPE_FLOOR)


def istft_batch(
    spec: ComplexSpectrogram,
    cfg: SpectralConfig = SpectralConfig(),
    out_len: int | None = None,
    center: bool = True,
) -> np.ndarray:
    """Inverse STFT by windowed overlap-add.

    With ``center=True`` the ``frame_len // 2`` samples of analysis padding are
    dropped from the front and the result is cut (or zero-extended) to
    ``out_len``. With ``center=False`` the raw overlap-add signal is returned,
    which is the alignment the streaming engine emits.
    """
    amp = np.asarray(spec.amplitude, dtype=np.float64)
    phase = np.asarray(spec.phase, dtype=np.float64)
    if amp.ndim != 2 or amp.shape != phase.shape or amp.shape[1] != cfg.n_bins:
        raise InvalidArgumentError(
            f"spectrogram must be [T, {cfg.n_bins}] for amplitude and phase, "
            f"got {amp.shape} and {phase.shape}"
        )
    t = amp.shape[0]
    full = overlap_add(synthesis_frames(amp, phase, cfg), cfg)
    if not center:
        return full if out_len is None else full[:out_len]
    if out_len is None:
        out_len = max((t - 1) * cfg.hop, 0)
    limit = max((t - 1) * cfg.hop + cfg.frame_len, 0)
    if out_len < 0 or out_len > limit:
        raise InvalidArgumentError(f"out_len must lie in [0, {limit}], got {out_len}")
    out = full[cfg.frame_len // 2 : cfg.frame_len // 2 + out_len]
    if out.size < out_len:
        out = np.concatenate([out, np.zeros(out_len - out.size)])
    return out


def hz_to_mel(freq):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    freq = np.asarray(freq, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    mel = freq / f_sp
    return np.where(
        freq >= min_log_hz,
        min_log_mel + np.log(np.maximum(freq, min_log_hz) / min_log_hz) / logstep,
        mel,
    )


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(
        mel >= min_log_mel,
        min_log_hz * np.exp(logstep * (mel - min_log_mel)),
        f_sp * mel,
    )


def mel_band_edges(cfg: SpectralConfig) -> np.ndarray:
    """The ``n_mels + 2`` filter corner frequencies in Hz."""
    lo, hi = hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax)
    return mel_to_hz(np.linspace(lo, hi, cfg.n_mels + 2))


def mel_filterbank(cfg: SpectralConfig = SpectralConfig()) -> np.ndarray:
    """Area-normalised triangular filters, shape ``[n_mels, n_bins]``."""
    if cfg.fmax <= cfg.fmin:
        raise InvalidArgumentError(f"fmax ({cfg.fmax}) must exceed fmin ({cfg.fmin})")
    return _filterbank(cfg).copy()


@lru_cache(maxsize=8)
def _filterbank(cfg: SpectralConfig) -> np.ndarray:
    fft_freqs = np.linspace(0.0, cfg.sample_rate / 2, cfg.n_bins)
    edges = mel_band_edges(cfg)
    widths = np.diff(edges)
    ramps = edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    fb = np.maximum(0.0, np.minimum(lower, upper))
    fb *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    fb.setflags(write=False)
    return fb


def extract_mel(wave, cfg: SpectralConfig = SpectralConfig()) -> MelSpectrogram:
    amp = np.abs(stft_complex(wave, cfg))
    energies = amp @ _filterbank(cfg).T
    return MelSpectrogram(np.log(np.maximum(energies, cfg.log_floor)))
