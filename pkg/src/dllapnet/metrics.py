"""Objective quality metrics for time-aligned reference/degraded waveforms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .errors import InvalidArgumentError
from .spectral import SpectralConfig, extract_mel, stft_complex

SNR_CAP_DB = 100.0
MCD_CONST = 10.0 * np.sqrt(2.0) / np.log(10.0)
MCD_ORDER = 12

F0_WINDOW_S = 0.040
F0_HOP_S = 0.010
F0_MIN_HZ = 65.0
F0_MAX_HZ = 400.0
VOICING_THRESHOLD = 0.3
OCTAVE_RATIO = 0.9


@dataclass(frozen=True)
class MetricReport:
    snr_db: float
    las_rmse_db: float
    mcd_db: float
    f0_rmse_cents: float
    vuv_error_pct: float

    def lines(self) -> list[str]:
        return [
            f"snr_db={self.snr_db:.4f}",
            f"las_rmse_db={self.las_rmse_db:.4f}",
            f"mcd_db={self.mcd_db:.4f}",
            f"f0_rmse_cents={self.f0_rmse_cents:.4f}",
            f"vuv_error_pct={self.vuv_error_pct:.4f}",
        ]


def _pair(ref, deg):
    ref = np.asarray(ref, dtype=np.float64)
    deg = np.asarray(deg, dtype=np.float64)
    if ref.shape != deg.shape or ref.ndim != 1:
        raise InvalidArgumentError(
            f"reference and degraded must be equal-length 1-D signals, got {ref.shape} and {deg.shape}"
        )
    return ref, deg


def snr_db(ref, deg) -> float:
    ref, deg = _pair(ref, deg)
    signal = float(np.sum(ref**2))
    if signal == 0:
        raise InvalidArgumentError("SNR is undefined for an all-zero reference")
    noise = float(np.sum((ref - deg) ** 2))
    if noise < 1e-10 * signal:
        return SNR_CAP_DB
    return min(10.0 * np.log10(signal / noise), SNR_CAP_DB)


def las_rmse_db(ref, deg, cfg: SpectralConfig = SpectralConfig()) -> float:
    """RMS difference of ``20 log10(|X| + 1e-5)`` over all time-frequency bins."""
    ref, deg = _pair(ref, deg)
    a = 20.0 * np.log10(np.abs(stft_complex(ref, cfg)) + 1e-5)
    b = 20.0 * np.log10(np.abs(stft_complex(deg, cfg)) + 1e-5)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mel_cepstrum(wave, cfg: SpectralConfig = SpectralConfig()) -> np.ndarray:
    """Orthonormal DCT-II of each log-mel frame, ``[T, n_mels]``."""
    return dct(extract_mel(wave, cfg).values, type=2, norm="ortho", axis=1)


def mcd_db(ref, deg, cfg: SpectralConfig = SpectralConfig()) -> float:
    """Frame-averaged mel-cepstral distortion over coefficients 1..12, no warping."""
    ref, deg = _pair(ref, deg)
    diff = mel_cepstrum(ref, cfg)[:, 1 : MCD_ORDER + 1] - mel_cepstrum(deg, cfg)[:, 1 : MCD_ORDER + 1]
    return float(MCD_CONST * np.mean(np.sqrt(np.sum(diff**2, axis=1))))


def f0_track(wave, cfg: SpectralConfig = SpectralConfig()) -> np.ndarray:
    """Per-frame F0 in Hz from normalised autocorrelation; 0 marks unvoiced frames.

    Frames are 40 ms long every 10 ms. A frame is voiced when the best
    normalised autocorrelation peak in the 65-400 Hz lag range reaches 0.3. The
    shortest local peak within 90% of it is taken and refined by fitting a
    parabola through its neighbours.
    """
    x = np.asarray(wave, dtype=np.float64)
    sr = cfg.sample_rate
    win = int(round(F0_WINDOW_S * sr))
    hop = int(round(F0_HOP_S * sr))
    if x.size < win:
        return np.zeros(0)
    frames = np.lib.stride_tricks.sliding_window_view(x, win)[::hop]
    frames = frames - frames.mean(axis=1, keepdims=True)
    lag_lo = int(np.floor(sr / F0_MAX_HZ))
    lag_hi = min(int(np.ceil(sr / F0_MIN_HZ)), win - 2)

    nfft = 1 << int(np.ceil(np.log2(2 * win)))
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    acf = np.fft.irfft(np.abs(spec) ** 2, n=nfft, axis=1)[:, : lag_hi + 2]
    sq = frames**2
    csum = np.concatenate([np.zeros((len(frames), 1)), np.cumsum(sq, axis=1)], axis=1)
    lags = np.arange(lag_hi + 2)
    head = csum[:, win - lags]  # energy of x[0 : win - lag]
    tail = csum[:, -1:] - csum[:, lags]  # energy of x[lag : win]
    denom = np.sqrt(head * tail)
    energy = csum[:, -1]
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 1e-12 * np.maximum(energy[:, None], 1e-300), acf / denom, 0.0)

    f0 = np.zeros(len(frames))
    for i in range(len(frames)):
        if energy[i] <= 1e-10:
            continue
        seg = r[i, lag_lo : lag_hi + 1]
        best = seg.max()
        if best < VOICING_THRESHOLD:
            continue
        # multiples of the period score nearly as high, so take the shortest
        # local peak that comes close to the best one
        inner = r[i, lag_lo - 1 : lag_hi + 2]
        is_peak = (seg >= inner[:-2]) & (seg >= inner[2:]) & (seg >= OCTAVE_RATIO * best)
        j = int(np.argmax(is_peak)) if is_peak.any() else int(np.argmax(seg))
        peak = seg[j]
        lag = float(lag_lo + j)
        y0, y1, y2 = r[i, lag_lo + j - 1], peak, r[i, lag_lo + j + 1]
        curve = y0 - 2.0 * y1 + y2
        if curve < 0:
            lag += 0.5 * (y0 - y2) / curve
        f0[i] = sr / lag
    return f0


def _tracks(ref, deg, cfg):
    ref, deg = _pair(ref, deg)
    return f0_track(ref, cfg), f0_track(deg, cfg)


def f0_rmse_cents(ref, deg, cfg: SpectralConfig = SpectralConfig()) -> float:
    """RMS pitch error in cents over frames voiced in both signals (0 if none)."""
    f_ref, f_deg = _tracks(ref, deg, cfg)
    both = (f_ref > 0) & (f_deg > 0)
    if not both.any():
        return 0.0
    cents = 1200.0 * np.log2(f_deg[both] / f_ref[both])
    return float(np.sqrt(np.mean(cents**2)))


def vuv_error_pct(ref, deg, cfg: SpectralConfig = SpectralConfig()) -> float:
    f_ref, f_deg = _tracks(ref, deg, cfg)
    if f_ref.size == 0:
        return 0.0
    return float(100.0 * np.mean((f_ref > 0) != (f_deg > 0)))


def evaluate(ref, deg, cfg: SpectralConfig = SpectralConfig()) -> MetricReport:
    """All metrics; the longer signal is cut to the length of the shorter."""
    ref = np.asarray(ref, dtype=np.float64)
    deg = np.asarray(deg, dtype=np.float64)
    n = min(ref.size, deg.size)
    ref, deg = ref[:n], deg[:n]
    return MetricReport(
        snr_db(ref, deg),
        las_rmse_db(ref, deg, cfg),
        mcd_db(ref, deg, cfg),
        f0_rmse_cents(ref, deg, cfg),
        vuv_error_pct(ref, deg, cfg),
    )
