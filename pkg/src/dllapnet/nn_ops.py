"""Frame-major neural network primitives.

Every tensor here is ``[T, C]``: frames outermost, channels innermost. Stride is
always one, so every convolution preserves the number of frames.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from .errors import InvalidArgumentError

GRN_MODES = ("global", "causal_cumulative")


def zeta(kernel: int, dilation: int = 1) -> int:
    """Future frames a centred (non-causal) convolution reads."""
    if kernel < 1 or dilation < 1:
        raise InvalidArgumentError(
            f"kernel and dilation must be >= 1, got k={kernel}, d={dilation}"
        )
    return (kernel - 1) * dilation // 2


@dataclass(frozen=True)
class ConvParams:
    """Weights of a stride-1 1-D convolution.

    ``weight`` is ``[out_ch, in_ch, kernel]`` (``in_ch == 1`` for depthwise).
    """

    weight: np.ndarray
    bias: np.ndarray
    dilation: int = 1
    causal: bool = True

    def __post_init__(self):
        if self.weight.ndim != 3:
            raise InvalidArgumentError(
                f"conv weight must be [out, in, k], got shape {self.weight.shape}"
            )
        if self.bias.shape != (self.weight.shape[0],):
            raise InvalidArgumentError(
                f"conv bias must be [{self.weight.shape[0]}], got {self.bias.shape}"
            )
        if self.dilation < 1:
            raise InvalidArgumentError(f"dilation must be >= 1, got {self.dilation}")

    @property
    def out_ch(self) -> int:
        return self.weight.shape[0]

    @property
    def in_ch(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    @property
    def receptive_span(self) -> int:
        """Frames of history a causal layer keeps, ``(k - 1) * d``."""
        return (self.kernel - 1) * self.dilation

    def padding(self) -> tuple[int, int]:
        span = self.receptive_span
        if self.causal:
            return span, 0
        right = span // 2
        return span - right, right


def _as_frames(x, channels: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != channels:
        raise InvalidArgumentError(
            f"{what} expects [T, {channels}] input, got shape {x.shape}"
        )
    return x


def conv1d_valid(xp: np.ndarray, p: ConvParams) -> np.ndarray:
    """Convolution over an already padded input; yields ``len(xp) - span`` frames."""
    t = xp.shape[0] - p.receptive_span
    if t <= 0:
        return np.zeros((max(t, 0), p.out_ch))
    windows = sliding_window_view(xp, p.receptive_span + 1, axis=0)
    cols = windows[:t, :, :: p.dilation].reshape(t, p.in_ch * p.kernel)
    return cols @ p.weight.reshape(p.out_ch, -1).T + p.bias


def depthwise_conv1d_valid(xp: np.ndarray, p: ConvParams) -> np.ndarray:
    t = xp.shape[0] - p.receptive_span
    if t <= 0:
        return np.zeros((max(t, 0), p.out_ch))
    w = p.weight[:, 0, :]
    y = np.zeros((t, p.out_ch))
    for j in range(p.kernel):
        off = j * p.dilation
        y += xp[off : off + t] * w[:, j]
    return y + p.bias


def _pad(x: np.ndarray, p: ConvParams) -> np.ndarray:
    left, right = p.padding()
    return np.pad(x, ((left, right), (0, 0)))


def conv1d(x, p: ConvParams) -> np.ndarray:
    """Stride-1 convolution, output length equal to input length.

    Causal layers left-pad ``(k - 1) * d`` zero frames so that the last kernel
    tap sits on the current frame. Centred layers split the padding and read
    ``zeta(k, d)`` future frames.
    """
    x = _as_frames(x, p.in_ch, "conv1d")
    return conv1d_valid(_pad(x, p), p)


def depthwise_conv1d(x, p: ConvParams) -> np.ndarray:
    if p.in_ch != 1:
        raise InvalidArgumentError(
            f"depthwise weight must be [C, 1, k], got {p.weight.shape}"
        )
    x = _as_frames(x, p.out_ch, "depthwise_conv1d")
    return depthwise_conv1d_valid(_pad(x, p), p)


def layer_norm_channels(x, gamma, beta, eps: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or np.shape(gamma) != (x.shape[1],) or np.shape(beta) != (x.shape[1],):
        raise InvalidArgumentError(
            f"layer_norm_channels: x {x.shape}, gamma {np.shape(gamma)}, beta {np.shape(beta)}"
        )
    if x.shape[1] == 1 and eps == 0:
        raise InvalidArgumentError("a single channel with eps=0 divides by zero")
    mean = x.mean(axis=1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=1, keepdims=True)
    return gamma * (x - mean) / np.sqrt(var + eps) + beta


def gelu(x):
    """Exact GELU, ``0.5 x (1 + erf(x / sqrt 2))``."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def grn_step(x: np.ndarray, gamma, beta, sumsq: np.ndarray, eps: float = 1e-6):
    """Cumulative global response normalisation over a chunk of frames.

    ``sumsq`` holds the per-channel sum of squares of every frame before the
    chunk. Returns the normalised chunk and the updated running sum.
    """
    acc = np.cumsum(np.vstack([sumsq[None, :], x * x]), axis=0)[1:]
    g = np.sqrt(acc)
    n = g / (g.mean(axis=1, keepdims=True) + eps)
    y = gamma * (x * n) + beta + x
    new_sumsq = acc[-1] if acc.shape[0] else sumsq
    return y, new_sumsq


def grn(x, gamma, beta, mode: str = "causal_cumulative", eps: float = 1e-6) -> np.ndarray:
    """Global response normalisation with a residual connection.

    ``global`` uses each channel's L2 norm over the whole sequence;
    ``causal_cumulative`` uses the norm of frames up to and including ``t``.
    """
    x = np.asarray(x, dtype=np.float64)
    c = x.shape[1]
    if np.shape(gamma) != (c,) or np.shape(beta) != (c,):
        raise InvalidArgumentError(
            f"grn: gamma/beta must be [{c}], got {np.shape(gamma)} and {np.shape(beta)}"
        )
    if mode == "causal_cumulative":
        return grn_step(x, gamma, beta, np.zeros(c), eps)[0]
    if mode == "global":
        g = np.sqrt((x * x).sum(axis=0, keepdims=True))
        n = g / (g.mean(axis=1, keepdims=True) + eps)
        return gamma * (x * n) + beta + x
    raise InvalidArgumentError(f"grn mode must be one of {GRN_MODES}, got {mode!r}")


def phase_activate(real, imag) -> np.ndarray:
    """Wrapped phase ``atan2(imag, real)`` in (-pi, pi], with atan2(0, 0) = 0."""
    real = np.asarray(real, dtype=np.float64)
    imag = np.asarray(imag, dtype=np.float64)
    if real.shape != imag.shape:
        raise InvalidArgumentError(
            f"real/imag shapes differ: {real.shape} vs {imag.shape}"
        )
    phi = np.arctan2(imag, real)
    phi = np.where(phi <= -np.pi, np.pi, phi)
    return np.where((real == 0) & (imag == 0), 0.0, phi)
