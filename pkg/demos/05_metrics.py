"""Objective metrics on synthetic signals with known answers."""
import numpy as np

from dllapnet.metrics import evaluate, f0_track

sr = 16000
t = np.arange(sr) / sr


def pulse_train(f0):
    n = int((sr / 2 - 1) // f0)
    return sum(np.cos(2 * np.pi * k * f0 * t) for k in range(1, n + 1)) / n


ref = pulse_train(100.0)

# %% pitch track of a 100 Hz pulse train
f0 = f0_track(ref)
print("frames:", f0.size, " median F0: %.2f Hz" % np.median(f0))

# %% a 1% pitch shift is about 17 cents
print("\n".join(evaluate(ref, pulse_train(101.0)).lines()))

# %% doubling the gain: log spectra move by 6.02 dB, cepstra only in c0
rng = np.random.default_rng(0)
noise = 100 * rng.standard_normal(sr)
print()
print("\n".join(evaluate(noise, 2 * noise).lines()))
