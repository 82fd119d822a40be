"""Frame-by-frame synthesis and algorithmic latency accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError
from .model import (
    FeatureTrace,
    ModelConfig,
    SpectralPair,
    _forward,
    _Memory,
    check_streamable,
    prepare_params,
)
from .nn_ops import zeta
from .spectral import ENVELOPE_FLOOR, _window, synthesis_frames

UNBOUNDED = math.inf


def lookahead_frames(cfg: ModelConfig):
    """Future mel frames the newest output frame depends on.

    Serial layers add up within a branch, parallel branches and heads take the
    maximum; causal and frame-local layers add nothing. A sequence-global GRN
    makes the lookahead unbounded.
    """
    if cfg.grn_mode == "global":
        return UNBOUNDED
    if cfg.causal:
        return 0
    # both branches, and both phase heads, share one layer layout
    return (
        zeta(cfg.kernel_io, cfg.dilation)
        + cfg.num_blocks * zeta(cfg.kernel_dw, cfg.dilation)
        + zeta(cfg.kernel_io, cfg.dilation)
    )


@dataclass(frozen=True)
class LatencyReport:
    lookahead_frames: float
    model_latency_ms: float
    ola_latency_ms: float
    total_ms: float

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.total_ms)

    def lines(self) -> list[str]:
        def fmt(v, ms=True):
            if not math.isfinite(v):
                return "unbounded"
            return f"{v:.3f}" if ms else str(int(v))

        return [
            f"lookahead_frames={fmt(self.lookahead_frames, ms=False)}",
            f"model_latency_ms={fmt(self.model_latency_ms)}",
            f"ola_latency_ms={fmt(self.ola_latency_ms)}",
            f"total_ms={fmt(self.total_ms)}",
        ]


def total_latency(cfg: ModelConfig) -> LatencyReport:
    """Delay from the newest mel frame's arrival to the newest finalised sample.

    Model latency is ``lookahead * hop`` samples; overlap-add holds back
    ``frame_len - hop`` samples until the following frames arrive.
    """
    sc = cfg.spectral
    look = lookahead_frames(cfg)
    ms_per_sample = 1000.0 / sc.sample_rate
    model_ms = look * sc.hop * ms_per_sample
    ola_ms = (sc.frame_len - sc.hop) * ms_per_sample
    return LatencyReport(look, model_ms, ola_ms, model_ms + ola_ms)


class StreamState:
    """Everything needed to continue synthesis after the last pushed frame.

    Holds the convolution histories, the running GRN sums of squares and the
    overlap-add carry. Its size depends on the configuration only, never on how
    many frames were pushed. A state must not be used from two threads at once.
    """

    def __init__(self, weights, cfg: ModelConfig):
        check_streamable(cfg)
        self.cfg = cfg
        self.params = prepare_params(weights, cfg)
        self.reset()

    def reset(self) -> None:
        sc = self.cfg.spectral
        self._mem = _Memory()
        # run an empty chunk so every buffer exists at its final size
        _forward(np.zeros((0, self.cfg.n_mels)), self.params, self._mem)
        self.ola_carry = np.zeros(sc.frame_len - sc.hop)
        self.env_carry = np.zeros(sc.frame_len - sc.hop)
        self.frames_pushed = 0
        self.finished = False

    @property
    def histories(self) -> dict[str, np.ndarray]:
        return self._mem.history

    @property
    def grn_sums(self) -> dict[str, np.ndarray]:
        return self._mem.sumsq

    @property
    def nbytes(self) -> int:
        arrays = [*self.histories.values(), *self.grn_sums.values()]
        arrays += [self.ola_carry, self.env_carry]
        return sum(a.nbytes for a in arrays)

    def __eq__(self, other):
        if not isinstance(other, StreamState):
            return NotImplemented

        def same(a: dict, b: dict):
            return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)

        return (
            self.cfg == other.cfg
            and self.frames_pushed == other.frames_pushed
            and self.finished == other.finished
            and same(self.histories, other.histories)
            and same(self.grn_sums, other.grn_sums)
            and np.array_equal(self.ola_carry, other.ola_carry)
            and np.array_equal(self.env_carry, other.env_carry)
        )

    def push_frames(self, mel_chunk, return_features: bool = False):
        """Synthesise ``n`` new mel frames and emit ``n * hop`` finalised samples."""
        if self.finished:
            raise InvalidStateError("stream was flushed; call reset() before pushing")
        chunk = np.asarray(mel_chunk, dtype=np.float64)
        if chunk.ndim != 2 or chunk.shape[1] != self.cfg.n_mels:
            raise InvalidArgumentError(
                f"mel frames must be [n, {self.cfg.n_mels}], got shape {chunk.shape}"
            )
        pair, trace = _forward(chunk, self.params, self._mem)
        frames = synthesis_frames(np.exp(pair.log_amplitude), pair.phase, self.cfg.spectral)
        samples = self._overlap_add(frames)
        self.frames_pushed += chunk.shape[0]
        if return_features:
            return samples, pair, trace
        return samples

    def push_frame(self, mel_frame) -> np.ndarray:
        frame = np.asarray(mel_frame, dtype=np.float64)
        if frame.shape != (self.cfg.n_mels,):
            raise InvalidArgumentError(
                f"mel frame must have {self.cfg.n_mels} values, got shape {frame.shape}"
            )
        return self.push_frames(frame[None, :])

    def _overlap_add(self, frames: np.ndarray) -> np.ndarray:
        sc = self.cfg.spectral
        hop = sc.hop
        wsq = _window(sc.frame_len) ** 2
        out = np.empty(frames.shape[0] * hop)
        for j, frame in enumerate(frames):
            num = np.concatenate([self.ola_carry, np.zeros(hop)]) + frame
            env = np.concatenate([self.env_carry, np.zeros(hop)]) + wsq
            out[j * hop : (j + 1) * hop] = num[:hop] / np.maximum(env[:hop], ENVELOPE_FLOOR)
            self.ola_carry, self.env_carry = num[hop:], env[hop:]
        return out

    def flush(self) -> np.ndarray:
        """Emit the overlap-add tail and close the stream."""
        if self.finished:
            raise InvalidStateError("stream already flushed")
        self.finished = True
        if self.frames_pushed == 0:
            return np.zeros(0)
        return self.ola_carry / np.maximum(self.env_carry, ENVELOPE_FLOOR)


def stream_init(weights, cfg: ModelConfig) -> StreamState:
    return StreamState(weights, cfg)


def stream_push_frame(state: StreamState, mel_frame) -> np.ndarray:
    return state.push_frame(mel_frame)


def stream_push_frames(state: StreamState, mel_chunk, return_features: bool = False):
    return state.push_frames(mel_chunk, return_features)


def stream_flush(state: StreamState) -> np.ndarray:
    return state.flush()


def stream_reset(state: StreamState) -> None:
    state.reset()


def synthesize_streaming(
    mel, weights, cfg: ModelConfig, chunk: int = 1, return_features: bool = False
):
    """Push a whole mel sequence through a fresh stream, ``chunk`` frames at a time.

    Output is in uncentred alignment: ``T * hop + frame_len - hop`` samples.
    """
    values = np.asarray(getattr(mel, "values", mel), dtype=np.float64)
    if chunk < 1:
        raise InvalidArgumentError(f"chunk must be >= 1, got {chunk}")
    state = StreamState(weights, cfg)
    pieces, pairs, traces = [], [], []
    for start in range(0, values.shape[0], chunk):
        res = state.push_frames(values[start : start + chunk], return_features)
        if return_features:
            res, pair, trace = res
            pairs.append(pair)
            traces.append(trace)
        pieces.append(res)
    pieces.append(state.flush())
    wave = np.concatenate(pieces)
    if not return_features:
        return wave
    if not pairs:
        pair, trace = _forward(values, state.params, None)
        pairs, traces = [pair], [trace]
    pair = SpectralPair(
        np.concatenate([p.log_amplitude for p in pairs]),
        np.concatenate([p.phase for p in pairs]),
    )
    return wave, pair, FeatureTrace.concatenate(traces)
