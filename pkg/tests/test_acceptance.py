"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACn PASS|FAIL: detail`` line (visible with ``-s``
or in the ``-v`` log) and asserts the same condition.
"""
import io
import math
import time

import numpy as np
import pytest

from dllapnet.cli import run
from dllapnet.io_codec import WeightArchive, load_wav, random_init, save_wav
from dllapnet.losses import (
    amplitude_loss,
    anti_wrap,
    first_blocks,
    kd_loss,
    phase_loss,
    stft_loss,
    total_loss,
    waveform_loss,
)
from dllapnet.metrics import f0_rmse_cents, las_rmse_db, mcd_db, snr_db, vuv_error_pct
from dllapnet.model import BranchTrace, FeatureTrace, ModelConfig, SpectralPair, count_flops, layer_macs
from dllapnet.nn_ops import zeta
from dllapnet.spectral import stft
from dllapnet.streaming import StreamState, total_latency
from dllapnet.verify import causal_prefix_holds, perturb_after, random_mel, streaming_matches_batch

SR = 16000


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail):
        with capsys.disabled():
            print(f"\n{tag} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def harmonic(f0, seconds=1.0):
    t = np.arange(int(seconds * SR)) / SR
    n = int((SR / 2 - 1) // f0)
    return sum(np.cos(2 * np.pi * k * f0 * t) for k in range(1, n + 1)) / n


def random_trace(rng, blocks=8, frames=20, width=16):
    def branch():
        return BranchTrace(
            rng.standard_normal((frames, width)),
            [rng.standard_normal((frames, width)) for _ in range(blocks)],
        )
    return FeatureTrace(branch(), branch())


def test_ac01_zeta_table(report):
    start = time.perf_counter()
    bad = [(k, d) for k in range(1, 9) for d in range(1, 5) if zeta(k, d) != ((k - 1) * d) // 2]
    ok = not bad and zeta(3, 1) == 1 and zeta(7, 3) == 9 and time.perf_counter() - start < 1
    report("AC1", ok, f"32 grid points, mismatches {bad}, zeta(3,1)={zeta(3, 1)}, zeta(7,3)={zeta(7, 3)}")


def test_ac02_latency(report):
    causal = total_latency(ModelConfig())
    local = total_latency(ModelConfig(causal=False))
    glob = total_latency(ModelConfig().teacher())
    ok = (
        causal.lookahead_frames == 0 and causal.total_ms == 15.0
        and local.lookahead_frames == 30 and local.total_ms == 165.0
        and math.isinf(glob.lookahead_frames) and math.isinf(glob.total_ms)
    )
    report(
        "AC2", ok,
        f"causal {causal.lookahead_frames} frames / {causal.total_ms} ms, "
        f"non-causal {local.lookahead_frames} / {local.total_ms} ms, global GRN {glob.total_ms}",
    )


def test_ac03_empirical_causality(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    cfg = ModelConfig()
    weights = random_init(cfg, 0)
    probes = []
    for _ in range(10):
        mel = random_mel(rng, 100, cfg.n_mels)
        t = int(rng.integers(0, 99))
        probes.append((t, causal_prefix_holds(mel, perturb_after(mel, t, rng), t, weights, cfg)))
    teacher = cfg.teacher()
    t_weights = random_init(teacher, 0)
    mel = random_mel(rng, 100, cfg.n_mels)
    teacher_leaks = not causal_prefix_holds(mel, perturb_after(mel, 50, rng), 50, t_weights, teacher)
    elapsed = time.perf_counter() - start
    held = sum(ok for _, ok in probes)
    ok = held == 10 and teacher_leaks and elapsed < 30
    report("AC3", ok, f"{held}/10 causal probes bit-exact, non-causal leaks={teacher_leaks}, {elapsed:.1f} s")


def test_ac04_streaming_equals_batch(report):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    cfg = ModelConfig()
    worst_sample = worst_feat = 0.0
    for i in range(3):
        weights = random_init(cfg, 100 + i)
        s, f = streaming_matches_batch(random_mel(rng, 200, cfg.n_mels), weights, cfg, chunk=1)
        worst_sample, worst_feat = max(worst_sample, s), max(worst_feat, f)
    elapsed = time.perf_counter() - start
    ok = worst_sample <= 1e-4 and worst_feat <= 1e-5 and elapsed < 60
    report("AC4", ok, f"max sample diff {worst_sample:.2e}, max feature diff {worst_feat:.2e}, {elapsed:.1f} s")


def test_ac05_copy_synthesis(report, tmp_path):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    t = np.arange(SR) / SR
    signals = {
        "noise": rng.uniform(-0.5, 0.5, SR),
        "chirp": 0.5 * np.sin(2 * np.pi * (100 + 3000 * t) * t),
        "harmonic": 0.8 * harmonic(140.0),
    }
    snrs = {}
    for name, x in signals.items():
        save_wav(x, tmp_path / f"{name}.wav")
        code = run(["copy-synth", "--in", str(tmp_path / f"{name}.wav"), "--out", str(tmp_path / f"{name}_y.wav")],
                   io.StringIO())
        ref = load_wav(tmp_path / f"{name}.wav")
        snrs[name] = snr_db(ref, load_wav(tmp_path / f"{name}_y.wav")) if code == 0 else -math.inf
    elapsed = time.perf_counter() - start
    ok = min(snrs.values()) >= 60 and elapsed < 5
    report("AC5", ok, ", ".join(f"{k} {v:.1f} dB" for k, v in snrs.items()) + f", {elapsed:.1f} s")


def test_ac06_flops(report):
    start = time.perf_counter()
    total = count_flops(ModelConfig())
    tiny = ModelConfig(hidden=4, intermediate=12, num_blocks=2)
    # input convs 2*80*4*7, blocks 2*2*(dw 28 + ln 8 + pw1 48 + grn 24 + pw2 48), heads 3*4*513*7
    hand = (2 * 80 * 4 * 7 + 2 * 2 * (28 + 8 + 48 + 24 + 48) + 3 * 4 * 513 * 7) * 200
    ok = abs(total / 6.30e9 - 1) <= 0.25 and count_flops(tiny) == hand and time.perf_counter() - start < 1
    report("AC6", ok, f"default {total / 1e9:.4f} G/s vs 6.30, tiny {count_flops(tiny)} vs hand {hand}")


def test_ac07_loss_oracles(report):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    x = rng.standard_normal(1600)
    spec = stft(x)
    pair = SpectralPair(np.log(spec.amplitude), spec.phase)
    trace = random_trace(rng)
    zeros = [
        amplitude_loss(pair.log_amplitude, pair.log_amplitude),
        phase_loss(spec.phase, spec.phase),
        stft_loss(pair, x),
        waveform_loss(x, x),
        kd_loss(trace, trace),
    ]
    grid = np.linspace(-10 * np.pi, 10 * np.pi, 10_001)
    period_err = float(np.max(np.abs(anti_wrap(grid + 2 * np.pi) - anti_wrap(grid))))
    c = 0.37
    shifted = FeatureTrace(*(
        BranchTrace(b.input_conv_out + c, [o + c for o in b.block_outs])
        for b in (trace.amplitude, trace.phase)
    ))
    kd = kd_loss(trace, shifted)
    total = total_loss(1, 1, 1, 1, 1).total
    ok = (
        max(zeros) <= 1e-12 and period_err <= 1e-6 and abs(kd - 9 * 2 * c) <= 1e-6
        and total == 152.0 and time.perf_counter() - start < 5
    )
    report("AC7", ok, f"max zero-loss {max(zeros):.1e}, periodicity err {period_err:.1e}, "
                      f"kd {kd:.6f} vs {18 * c:.6f}, total {total}")


def test_ac08_kd_monotone(report):
    rng = np.random.default_rng(8)
    teacher, student = random_trace(rng), random_trace(rng)
    values = [kd_loss(teacher, student, first_blocks(n, 8)) for n in (0, 2, 4, 6, 8)]
    ok = all(a <= b for a, b in zip(values, values[1:]))
    report("AC8", ok, "kd over 0/2/4/6/8 blocks: " + ", ".join(f"{v:.4f}" for v in values))


def test_ac09_metric_oracles(report):
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    x = 0.3 * rng.standard_normal(SR)
    same = (snr_db(x, x), las_rmse_db(x, x), mcd_db(x, x), vuv_error_pct(x, x))
    loud = 100 * rng.standard_normal(SR)
    gain = (mcd_db(loud, 2 * loud), las_rmse_db(loud, 2 * loud))
    cents = f0_rmse_cents(harmonic(100.0), harmonic(101.0))
    elapsed = time.perf_counter() - start
    ok = (
        same == (100.0, 0.0, 0.0, 0.0)
        and gain[0] <= 1e-6 and abs(gain[1] - 6.02) <= 0.01
        and abs(cents - 17.2) <= 3 and elapsed < 10
    )
    report("AC9", ok, f"identical {same}, gain x2 MCD {gain[0]:.1e} LAS {gain[1]:.4f} dB, "
                      f"100 vs 101 Hz {cents:.2f} cents, {elapsed:.1f} s")


def test_ac10_persistence(report, tmp_path):
    cfg = ModelConfig(num_blocks=2)
    weights = random_init(cfg, 42)
    blob = weights.to_bytes()
    archive_ok = WeightArchive.from_bytes(blob) == weights and WeightArchive.from_bytes(blob).to_bytes() == blob
    pcm = np.random.default_rng(10).integers(-32768, 32768, 4000) / 32768.0
    save_wav(pcm, tmp_path / "a.wav")
    wav_ok = np.array_equal(load_wav(tmp_path / "a.wav"), pcm)
    init_ok = random_init(cfg, 42).to_bytes() == blob
    ok = archive_ok and wav_ok and init_ok
    report("AC10", ok, f"archive {archive_ok}, wav {wav_ok}, init deterministic {init_ok}")


def test_ac11_streaming_speed(report):
    cfg = ModelConfig()
    weights = random_init(cfg, 0)
    frames = int(10 * cfg.spectral.frames_per_second)
    mel = random_mel(np.random.default_rng(11), frames, cfg.n_mels)

    state = StreamState(weights, cfg)
    size = state.nbytes
    sizes_constant = True
    start = time.perf_counter()
    for i in range(0, frames, 32):
        state.push_frames(mel[i : i + 32])
        sizes_constant &= state.nbytes == size
    state.flush()
    chunked = time.perf_counter() - start

    # frame-at-a-time rate, measured on one second of audio
    state = StreamState(weights, cfg)
    start = time.perf_counter()
    for row in mel[:200]:
        state.push_frame(row)
    per_frame_rtf = (time.perf_counter() - start) / 1.0

    ok = chunked < 10.0 and sizes_constant
    report("AC11", ok, f"10 s of audio in {chunked:.2f} s with 32-frame pushes, state {size} bytes "
                       f"constant={sizes_constant}, frame-at-a-time real-time factor {per_frame_rtf:.2f}")
