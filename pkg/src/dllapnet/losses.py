"""Forward-only evaluation of the vocoder training criteria."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .model import FeatureTrace, SpectralPair, forward_batch
from .spectral import SpectralConfig, extract_mel, istft_batch, stft, stft_complex


@dataclass(frozen=True)
class LossWeights:
    lambda_a: float = 45.0
    lambda_p: float = 100.0
    lambda_s: float = 1.0
    lambda_w: float = 1.0
    lambda_kd: float = 5.0

    def __post_init__(self):
        for name in ("lambda_a", "lambda_p", "lambda_s", "lambda_w", "lambda_kd"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")


@dataclass(frozen=True)
class LossBreakdown:
    amplitude: float
    phase: float
    stft: float
    waveform: float
    kd: float
    total: float

    def lines(self) -> list[str]:
        return [
            f"L_A={self.amplitude:.6f}",
            f"L_P={self.phase:.6f}",
            f"L_S={self.stft:.6f}",
            f"L_W={self.waveform:.6f}",
            f"L_KD={self.kd:.6f}",
            f"total={self.total:.6f}",
        ]


def anti_wrap(x):
    """Distance of ``x`` to the nearest multiple of 2*pi, in [0, pi].

    Ties round away from zero.
    """
    x = np.asarray(x, dtype=np.float64)
    q = x / (2.0 * np.pi)
    k = np.sign(q) * np.floor(np.abs(q) + 0.5)
    return np.abs(x - 2.0 * np.pi * k)


def _same_shape(a, b, what):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"{what}: shapes differ, {a.shape} vs {b.shape}")
    return a, b


def _mean(x: np.ndarray) -> float:
    return float(x.mean()) if x.size else 0.0


def amplitude_loss(pred, target) -> float:
    """Mean squared error between log-amplitude spectra."""
    pred, target = _same_shape(pred, target, "amplitude_loss")
    return _mean((pred - target) ** 2)


def phase_loss_terms(pred, target) -> tuple[float, float, float]:
    """Instantaneous phase, group delay and instantaneous frequency terms.

    Arrays are ``[T, bins]``; group delay differences along bins and
    instantaneous frequency along frames, without wrap-around.
    """
    pred, target = _same_shape(pred, target, "phase_loss")
    delta = pred - target
    ip = _mean(anti_wrap(delta))
    gd = _mean(anti_wrap(np.diff(delta, axis=1)))
    iaf = _mean(anti_wrap(np.diff(delta, axis=0)))
    return ip, gd, iaf


def phase_loss(pred, target) -> float:
    return sum(phase_loss_terms(pred, target))


def stft_loss(pred: SpectralPair, target_wave, cfg: SpectralConfig = SpectralConfig()) -> float:
    """MSE of real parts plus MSE of imaginary parts against the target's STFT."""
    target = stft_complex(target_wave, cfg)
    pred_c = np.exp(pred.log_amplitude) * np.exp(1j * np.asarray(pred.phase))
    if pred_c.shape != target.shape:
        raise InvalidArgumentError(
            f"stft_loss: predicted spectra {pred_c.shape} vs target STFT {target.shape}"
        )
    diff = pred_c - target
    return _mean(diff.real**2) + _mean(diff.imag**2)


def waveform_loss(pred_wave, target_wave, cfg: SpectralConfig = SpectralConfig()) -> float:
    """Mean absolute log-mel difference; inputs are cut to the shorter length."""
    pred_wave = np.asarray(pred_wave, dtype=np.float64)
    target_wave = np.asarray(target_wave, dtype=np.float64)
    n = min(pred_wave.size, target_wave.size)
    if n == 0:
        raise InvalidArgumentError("waveform_loss needs non-empty waveforms")
    a = extract_mel(pred_wave[:n], cfg).values
    b = extract_mel(target_wave[:n], cfg).values
    return _mean(np.abs(a - b))


def kd_loss(teacher: FeatureTrace, student: FeatureTrace, active_blocks=None) -> float:
    """L1 feature distillation over input-convolution and selected block outputs.

    ``active_blocks`` holds 1-based block indices (all blocks when ``None``).
    Each included layer contributes its mean absolute difference; layers and
    both branches are summed.
    """
    k = teacher.num_blocks
    if student.num_blocks != k:
        raise InvalidArgumentError(
            f"kd_loss: teacher has {k} blocks, student has {student.num_blocks}"
        )
    active = range(1, k + 1) if active_blocks is None else sorted(set(active_blocks))
    for b in active:
        if not 1 <= b <= k:
            raise InvalidArgumentError(f"kd_loss: block index {b} outside 1..{k}")
    total = 0.0
    for name, t_branch in teacher.branches().items():
        s_branch = student.branches()[name]
        pairs = [(f"{name}.input_conv", t_branch.input_conv_out, s_branch.input_conv_out)]
        pairs += [
            (f"{name}.blocks.{b - 1}", t_branch.block_outs[b - 1], s_branch.block_outs[b - 1])
            for b in active
        ]
        for layer, t_feat, s_feat in pairs:
            if np.shape(t_feat) != np.shape(s_feat):
                raise InvalidArgumentError(
                    f"kd_loss: layer {layer} shapes differ, "
                    f"teacher {np.shape(t_feat)} vs student {np.shape(s_feat)}"
                )
            total += _mean(np.abs(np.asarray(t_feat) - np.asarray(s_feat)))
    return total


def first_blocks(n: int, num_blocks: int) -> list[int]:
    """The distilled subset used when only ``n`` blocks take part: blocks 1..n."""
    if not 0 <= n <= num_blocks:
        raise InvalidArgumentError(f"number of distilled blocks must be in 0..{num_blocks}")
    return list(range(1, n + 1))


def total_loss(
    amplitude: float,
    phase: float,
    stft: float,
    waveform: float,
    kd: float,
    weights: LossWeights = LossWeights(),
) -> LossBreakdown:
    parts = (amplitude, phase, stft, waveform, kd)
    if any(p < 0 for p in parts):
        raise InvalidArgumentError(f"loss components must be >= 0, got {parts}")
    total = (
        weights.lambda_a * amplitude
        + weights.lambda_p * phase
        + weights.lambda_s * stft
        + weights.lambda_w * waveform
        + weights.lambda_kd * kd
    )
    return LossBreakdown(*map(float, parts), float(total))


def evaluate_losses(
    wave,
    student_weights,
    teacher_weights,
    cfg,
    teacher_cfg=None,
    active_blocks=None,
    weights: LossWeights = LossWeights(),
) -> LossBreakdown:
    """All criteria for one utterance: the student resynthesises ``wave`` from its mel.

    The teacher defaults to ``cfg.teacher()``, the non-causal twin of ``cfg``.
    """
    sc = cfg.spectral
    wave = np.asarray(wave, dtype=np.float64)
    mel = extract_mel(wave, sc)
    pred, s_trace = forward_batch(mel, student_weights, cfg)
    _, t_trace = forward_batch(mel, teacher_weights, teacher_cfg or cfg.teacher())
    target = stft(wave, sc)
    pred_wave = istft_batch(pred.to_spectrogram(), sc, out_len=wave.size)
    return total_loss(
        amplitude_loss(pred.log_amplitude, np.log(np.maximum(target.amplitude, sc.log_floor))),
        phase_loss(pred.phase, target.phase),
        stft_loss(pred, wave, sc),
        waveform_loss(pred_wave, wave, sc),
        kd_loss(t_trace, s_trace, active_blocks),
        weights,
    )
