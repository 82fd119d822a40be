"""Self-checks run by ``dllapnet verify`` on seeded random weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedConfigurationError
from .io_codec import WeightArchive, random_init
from .metrics import snr_db
from .model import ModelConfig, check_streamable, forward_batch, prepare_params, synthesize_batch
from .spectral import istft_batch, stft
from .streaming import synthesize_streaming

SAMPLE_TOL = 1e-4
FEATURE_TOL = 1e-5
ROUND_TRIP_MIN_SNR = 60.0


@dataclass
class Check:
    name: str
    passed: bool | None  # None: not applicable to this config
    detail: str = ""

    def line(self) -> str:
        status = {True: "pass", False: "fail", None: "skip"}[self.passed]
        return f"{self.name}={status}" + (f" ({self.detail})" if self.detail else "")


def random_mel(rng: np.random.Generator, frames: int, n_mels: int) -> np.ndarray:
    """Log-mel-like noise: roughly the range of natural speech at a 1e-5 floor."""
    return rng.normal(-4.0, 2.0, size=(frames, n_mels))


def perturb_after(mel: np.ndarray, t: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``mel`` with every frame after ``t`` replaced by fresh noise."""
    out = mel.copy()
    out[t + 1 :] = random_mel(rng, mel.shape[0] - t - 1, mel.shape[1])
    return out


def causal_prefix_holds(mel, perturbed, t: int, params, cfg: ModelConfig) -> bool:
    """Whether outputs up to frame ``t`` (and samples before ``(t+1)*hop``) are bit-identical."""
    hop = cfg.spectral.hop
    a = synthesize_batch(mel, params, cfg, center=False)[: (t + 1) * hop]
    b = synthesize_batch(perturbed, params, cfg, center=False)[: (t + 1) * hop]
    return bool(np.array_equal(a, b))


def max_feature_diff(trace_a, trace_b) -> float:
    worst = 0.0
    for name, a in trace_a.branches().items():
        b = trace_b.branches()[name]
        for x, y in zip([a.input_conv_out, *a.block_outs], [b.input_conv_out, *b.block_outs]):
            worst = max(worst, float(np.max(np.abs(x - y), initial=0.0)))
    return worst


def streaming_matches_batch(mel, params, cfg: ModelConfig, chunk: int = 1):
    """Max sample and feature differences between streaming and batch synthesis."""
    pad = cfg.spectral.frame_len // 2
    batch = synthesize_batch(mel, params, cfg)
    pair, trace = forward_batch(mel, params, cfg)
    wave, s_pair, s_trace = synthesize_streaming(mel, params, cfg, chunk=chunk, return_features=True)
    sample_diff = float(np.max(np.abs(wave[pad : pad + batch.size] - batch), initial=0.0))
    feat_diff = max(
        max_feature_diff(trace, s_trace),
        float(np.max(np.abs(pair.log_amplitude - s_pair.log_amplitude), initial=0.0)),
    )
    return sample_diff, feat_diff


def run_checks(cfg: ModelConfig, seed: int = 0, frames: int = 50) -> list[Check]:
    rng = np.random.default_rng(seed)
    weights = random_init(cfg, seed)
    params = prepare_params(weights, cfg)
    mel = random_mel(rng, frames, cfg.n_mels)
    checks = []

    probes = sorted(set(rng.integers(0, max(frames - 1, 1), size=3).tolist()))
    ok = all(causal_prefix_holds(mel, perturb_after(mel, t, rng), t, params, cfg) for t in probes)
    checks.append(Check("causality", ok, f"probes at frames {probes}"))

    try:
        check_streamable(cfg)
    except UnsupportedConfigurationError as exc:
        checks.append(Check("streaming_equivalence", None, str(exc)))
    else:
        sample_diff, feat_diff = streaming_matches_batch(mel, params, cfg)
        checks.append(
            Check(
                "streaming_equivalence",
                sample_diff <= SAMPLE_TOL and feat_diff <= FEATURE_TOL,
                f"max sample diff {sample_diff:.3g}, max feature diff {feat_diff:.3g}",
            )
        )

    sc = cfg.spectral
    x = rng.uniform(-0.5, 0.5, size=sc.sample_rate)
    snr = snr_db(x, istft_batch(stft(x, sc), sc, out_len=x.size))
    checks.append(Check("stft_round_trip", snr >= ROUND_TRIP_MIN_SNR, f"snr {snr:.1f} dB"))

    blob = weights.to_bytes()
    again = WeightArchive.from_bytes(blob)
    checks.append(
        Check("archive_round_trip", again == weights and again.to_bytes() == blob)
    )
    checks.append(Check("init_deterministic", random_init(cfg, seed) == weights))
    return checks
