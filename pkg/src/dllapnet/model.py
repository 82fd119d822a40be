"""Two-branch amplitude/phase vocoder graph.

Each branch maps a log-mel sequence through an input convolution, a stack of
ConvNeXt v2 blocks and an output head. The amplitude head predicts natural-log
magnitudes; the phase branch has two heads whose outputs are combined by
``atan2`` into a wrapped phase. Weight names follow::

    {branch}.input_conv.{weight,bias}
    {branch}.blocks.{i}.dwconv.{weight,bias}
    {branch}.blocks.{i}.norm.{gamma,beta}
    {branch}.blocks.{i}.pw1.{weight,bias}
    {branch}.blocks.{i}.grn.{gamma,beta}
    {branch}.blocks.{i}.pw2.{weight,bias}
    amplitude.head.{weight,bias}
    phase.head_real.{weight,bias}
    phase.head_imag.{weight,bias}

with ``branch`` in ``amplitude``/``phase`` and ``i`` counting from 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import nn_ops
from .errors import InvalidArgumentError, UnsupportedConfigurationError
from .nn_ops import ConvParams
from .spectral import (
    ComplexSpectrogram,
    MelSpectrogram,
    SpectralConfig,
    istft_batch,
)

BRANCHES = ("amplitude", "phase")
HEADS = {"amplitude": ("head",), "phase": ("head_real", "head_imag")}


@dataclass(frozen=True)
class ModelConfig:
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    hidden: int = 512
    intermediate: int = 1536
    num_blocks: int = 8
    kernel_io: int = 7
    kernel_dw: int = 7
    dilation: int = 1
    causal: bool = True
    grn_mode: str = "causal_cumulative"

    def __post_init__(self):
        if self.grn_mode not in nn_ops.GRN_MODES:
            raise InvalidArgumentError(
                f"grn_mode must be one of {nn_ops.GRN_MODES}, got {self.grn_mode!r}"
            )
        if self.causal and self.grn_mode != "causal_cumulative":
            raise InvalidArgumentError(
                "causal=true requires grn_mode=causal_cumulative "
                f"(got grn_mode={self.grn_mode})"
            )
        if self.num_blocks < 0:
            raise InvalidArgumentError(f"num_blocks must be >= 0, got {self.num_blocks}")
        if self.hidden < 1 or self.intermediate < self.hidden:
            raise InvalidArgumentError(
                f"need hidden >= 1 and intermediate >= hidden, got "
                f"hidden={self.hidden}, intermediate={self.intermediate}"
            )
        if min(self.kernel_io, self.kernel_dw, self.dilation) < 1:
            raise InvalidArgumentError("kernels and dilation must be >= 1")

    @property
    def n_mels(self) -> int:
        return self.spectral.n_mels

    @property
    def n_bins(self) -> int:
        return self.spectral.n_bins

    def teacher(self) -> "ModelConfig":
        """Same shapes, centred convolutions and sequence-global GRN."""
        return replace(self, causal=False, grn_mode="global")


def parameter_specs(cfg: ModelConfig) -> dict[str, tuple[tuple[int, ...], int]]:
    """Ordered ``name -> (shape, fan_in)`` for every tensor the graph reads.

    Norm and GRN affine parameters use their channel count as fan-in.
    """
    h, m = cfg.hidden, cfg.intermediate
    specs: dict[str, tuple[tuple[int, ...], int]] = {}
    for branch in BRANCHES:
        fan = cfg.n_mels * cfg.kernel_io
        specs[f"{branch}.input_conv.weight"] = ((h, cfg.n_mels, cfg.kernel_io), fan)
        specs[f"{branch}.input_conv.bias"] = ((h,), fan)
        for i in range(cfg.num_blocks):
            pre = f"{branch}.blocks.{i}"
            specs[f"{pre}.dwconv.weight"] = ((h, 1, cfg.kernel_dw), cfg.kernel_dw)
            specs[f"{pre}.dwconv.bias"] = ((h,), cfg.kernel_dw)
            specs[f"{pre}.norm.gamma"] = ((h,), h)
            specs[f"{pre}.norm.beta"] = ((h,), h)
            specs[f"{pre}.pw1.weight"] = ((m, h), h)
            specs[f"{pre}.pw1.bias"] = ((m,), h)
            specs[f"{pre}.grn.gamma"] = ((m,), m)
            specs[f"{pre}.grn.beta"] = ((m,), m)
            specs[f"{pre}.pw2.weight"] = ((h, m), m)
            specs[f"{pre}.pw2.bias"] = ((h,), m)
        for head in HEADS[branch]:
            fan = h * cfg.kernel_io
            specs[f"{branch}.{head}.weight"] = ((cfg.n_bins, h, cfg.kernel_io), fan)
            specs[f"{branch}.{head}.bias"] = ((cfg.n_bins,), fan)
    return specs


@dataclass(frozen=True)
class BlockParams:
    dwconv: ConvParams
    norm_gamma: np.ndarray
    norm_beta: np.ndarray
    pw1_weight: np.ndarray  # [in, out], transposed for frame-major matmul
    pw1_bias: np.ndarray
    grn_gamma: np.ndarray
    grn_beta: np.ndarray
    pw2_weight: np.ndarray
    pw2_bias: np.ndarray


@dataclass(frozen=True)
class BranchParams:
    name: str
    input_conv: ConvParams
    blocks: tuple[BlockParams, ...]
    heads: tuple[ConvParams, ...]


@dataclass(frozen=True)
class ModelParams:
    cfg: ModelConfig
    amplitude: BranchParams
    phase: BranchParams

    def branches(self) -> tuple[BranchParams, BranchParams]:
        return self.amplitude, self.phase


def prepare_params(weights, cfg: ModelConfig) -> ModelParams:
    """Validate an archive against ``cfg`` and convert it to float64 arrays."""
    if isinstance(weights, ModelParams):
        if weights.cfg != cfg:
            raise InvalidArgumentError("prepared parameters were built for another config")
        return weights
    specs = parameter_specs(cfg)

    def get(name):
        arr = weights[name]
        shape = specs[name][0]
        if tuple(arr.shape) != shape:
            raise InvalidArgumentError(
                f"tensor {name!r} has shape {tuple(arr.shape)}, expected {shape}"
            )
        return np.asarray(arr, dtype=np.float64)

    def conv(name):
        return ConvParams(get(f"{name}.weight"), get(f"{name}.bias"), cfg.dilation, cfg.causal)

    branches = []
    for branch in BRANCHES:
        blocks = []
        for i in range(cfg.num_blocks):
            pre = f"{branch}.blocks.{i}"
            blocks.append(
                BlockParams(
                    dwconv=conv(f"{pre}.dwconv"),
                    norm_gamma=get(f"{pre}.norm.gamma"),
                    norm_beta=get(f"{pre}.norm.beta"),
                    pw1_weight=np.ascontiguousarray(get(f"{pre}.pw1.weight").T),
                    pw1_bias=get(f"{pre}.pw1.bias"),
                    grn_gamma=get(f"{pre}.grn.gamma"),
                    grn_beta=get(f"{pre}.grn.beta"),
                    pw2_weight=np.ascontiguousarray(get(f"{pre}.pw2.weight").T),
                    pw2_bias=get(f"{pre}.pw2.bias"),
                )
            )
        heads = tuple(conv(f"{branch}.{head}") for head in HEADS[branch])
        branches.append(
            BranchParams(branch, conv(f"{branch}.input_conv"), tuple(blocks), heads)
        )
    return ModelParams(cfg, *branches)


@dataclass
class BranchTrace:
    input_conv_out: np.ndarray
    block_outs: list[np.ndarray]


@dataclass
class FeatureTrace:
    """Intermediate features used for distillation, one entry per branch."""

    amplitude: BranchTrace
    phase: BranchTrace

    def branches(self) -> dict[str, BranchTrace]:
        return {"amplitude": self.amplitude, "phase": self.phase}

    @property
    def num_blocks(self) -> int:
        return len(self.amplitude.block_outs)

    @classmethod
    def concatenate(cls, traces: list["FeatureTrace"]) -> "FeatureTrace":
        def cat(branch):
            parts = [getattr(t, branch) for t in traces]
            return BranchTrace(
                np.concatenate([p.input_conv_out for p in parts]),
                [np.concatenate(xs) for xs in zip(*(p.block_outs for p in parts))],
            )

        return cls(cat("amplitude"), cat("phase"))


@dataclass
class SpectralPair:
    log_amplitude: np.ndarray
    phase: np.ndarray

    def to_spectrogram(self) -> ComplexSpectrogram:
        return ComplexSpectrogram(np.exp(self.log_amplitude), self.phase)


# Per-layer streaming memory. ``None`` runs a whole sequence from rest.
class _Memory:
    def __init__(self):
        self.history: dict[str, np.ndarray] = {}
        self.sumsq: dict[str, np.ndarray] = {}


def _run_conv(x, p: ConvParams, name: str, mem: _Memory | None, depthwise=False):
    valid = nn_ops.depthwise_conv1d_valid if depthwise else nn_ops.conv1d_valid
    if mem is None:
        fn = nn_ops.depthwise_conv1d if depthwise else nn_ops.conv1d
        return fn(x, p)
    span = p.receptive_span
    hist = mem.history.get(name)
    if hist is None:
        hist = np.zeros((span, x.shape[1]))
    xp = np.concatenate([hist, x]) if span else x
    if span:
        mem.history[name] = xp[-span:].copy()
    return valid(xp, p)


def _run_grn(x, b: BlockParams, name: str, mode: str, mem: _Memory | None):
    if mem is None:
        return nn_ops.grn(x, b.grn_gamma, b.grn_beta, mode)
    sumsq = mem.sumsq.get(name)
    if sumsq is None:
        sumsq = np.zeros(x.shape[1])
    y, mem.sumsq[name] = nn_ops.grn_step(x, b.grn_gamma, b.grn_beta, sumsq)
    return y


def _block(x, b: BlockParams, name: str, grn_mode: str, mem: _Memory | None):
    h = _run_conv(x, b.dwconv, f"{name}.dwconv", mem, depthwise=True)
    h = nn_ops.layer_norm_channels(h, b.norm_gamma, b.norm_beta)
    h = nn_ops.gelu(h @ b.pw1_weight + b.pw1_bias)
    h = _run_grn(h, b, f"{name}.grn", grn_mode, mem)
    return x + (h @ b.pw2_weight + b.pw2_bias)


def convnext_v2_block(x, b: BlockParams, cfg: ModelConfig) -> np.ndarray:
    """``x + pw2(grn(gelu(pw1(layer_norm(dwconv(x))))))``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != b.dwconv.out_ch:
        raise InvalidArgumentError(
            f"block expects [T, {b.dwconv.out_ch}] input, got {x.shape}"
        )
    return _block(x, b, "block", cfg.grn_mode, None)


def run_branch(x, branch: BranchParams, grn_mode: str, mem: _Memory | None = None):
    """Return the head outputs and the trace of one branch."""
    h = _run_conv(x, branch.input_conv, f"{branch.name}.input_conv", mem)
    trace = BranchTrace(h, [])
    for i, b in enumerate(branch.blocks):
        h = _block(h, b, f"{branch.name}.blocks.{i}", grn_mode, mem)
        trace.block_outs.append(h)
    outs = [
        _run_conv(h, head, f"{branch.name}.head{j}", mem)
        for j, head in enumerate(branch.heads)
    ]
    return outs, trace


def _forward(mel: np.ndarray, params: ModelParams, mem: _Memory | None):
    cfg = params.cfg
    (log_amp,), amp_trace = run_branch(mel, params.amplitude, cfg.grn_mode, mem)
    (real, imag), phase_trace = run_branch(mel, params.phase, cfg.grn_mode, mem)
    pair = SpectralPair(log_amp, nn_ops.phase_activate(real, imag))
    return pair, FeatureTrace(amp_trace, phase_trace)


def _mel_values(mel, cfg: ModelConfig) -> np.ndarray:
    values = mel.values if isinstance(mel, MelSpectrogram) else mel
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != cfg.n_mels:
        raise InvalidArgumentError(
            f"mel must be [T, {cfg.n_mels}], got shape {values.shape}"
        )
    return values


def forward_batch(mel, weights, cfg: ModelConfig) -> tuple[SpectralPair, FeatureTrace]:
    """Predict log-amplitude and phase spectra for a whole mel sequence."""
    params = prepare_params(weights, cfg)
    return _forward(_mel_values(mel, cfg), params, None)


def synthesize_batch(mel, weights, cfg: ModelConfig, center: bool = True) -> np.ndarray:
    """Mel to waveform through the predicted spectra and iSTFT.

    The centred output has ``(T - 1) * hop`` samples. ``center=False`` returns
    the full overlap-add signal in streaming alignment,
    ``(T - 1) * hop + frame_len`` samples.
    """
    pair, _ = forward_batch(mel, weights, cfg)
    t = pair.log_amplitude.shape[0]
    sc = cfg.spectral
    return istft_batch(
        pair.to_spectrogram(), sc, out_len=(t - 1) * sc.hop if center else None, center=center
    )


def layer_macs(cfg: ModelConfig) -> list[tuple[str, int]]:
    """Per-frame multiply-accumulate count of every stage.

    Convolutions count ``in * out * k``; layer norm and GRN count two
    operations per channel (statistics and affine); GELU counts nothing.
    """
    h, m, k_io = cfg.hidden, cfg.intermediate, cfg.kernel_io
    rows = []
    for branch in BRANCHES:
        rows.append((f"{branch}.input_conv", cfg.n_mels * h * k_io))
        for i in range(cfg.num_blocks):
            pre = f"{branch}.blocks.{i}"
            rows += [
                (f"{pre}.dwconv", h * cfg.kernel_dw),
                (f"{pre}.norm", 2 * h),
                (f"{pre}.pw1", h * m),
                (f"{pre}.grn", 2 * m),
                (f"{pre}.pw2", m * h),
            ]
        for head in HEADS[branch]:
            rows.append((f"{branch}.{head}", h * cfg.n_bins * k_io))
    return rows


def count_flops(cfg: ModelConfig) -> float:
    """FLOPs (one MAC counted as one FLOP) to generate one second of audio."""
    per_frame = sum(n for _, n in layer_macs(cfg))
    return per_frame * cfg.spectral.frames_per_second


def check_streamable(cfg: ModelConfig) -> None:
    """Raise if any layer of ``cfg`` reads future frames."""
    if cfg.grn_mode == "global":
        raise UnsupportedConfigurationError(
            "grn_mode=global normalises over the whole sequence; streaming needs "
            "grn_mode=causal_cumulative"
        )
    if not cfg.causal:
        for branch in BRANCHES:
            for name, k in [("input_conv", cfg.kernel_io)] + [
                (f"blocks.{i}.dwconv", cfg.kernel_dw) for i in range(cfg.num_blocks)
            ]:
                if nn_ops.zeta(k, cfg.dilation) > 0:
                    raise UnsupportedConfigurationError(
                        f"layer {branch}.{name} is a non-causal convolution "
                        f"(kernel {k}, dilation {cfg.dilation}); streaming needs causal=true"
                    )
            if nn_ops.zeta(cfg.kernel_io, cfg.dilation) > 0:
                raise UnsupportedConfigurationError(
                    f"layer {branch}.{HEADS[branch][0]} is a non-causal convolution"
                )
