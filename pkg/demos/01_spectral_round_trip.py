"""Analysis and resynthesis with the vocoder's STFT settings, no model involved."""
import numpy as np

from dllapnet.metrics import snr_db
from dllapnet.spectral import SpectralConfig, extract_mel, istft_batch, stft

# %% 320-sample Hann frames every 80 samples, zero-padded to 1024 points
cfg = SpectralConfig()
print("bins:", cfg.n_bins, " frames per second:", cfg.frames_per_second)

rng = np.random.default_rng(0)
t = np.arange(cfg.sample_rate) / cfg.sample_rate
x = 0.4 * np.sin(2 * np.pi * 220 * t) + 0.05 * rng.standard_normal(t.size)

# %% one second gives 201 frames with centred framing
spec = stft(x, cfg)
print("amplitude:", spec.amplitude.shape, " phase range:", spec.phase.min(), spec.phase.max())

# 220 Hz sits near bin 220 * 1024 / 16000 = 14.08
print("peak bin of frame 100:", spec.amplitude[100].argmax())

# %% squared-window normalised overlap-add inverts the analysis
y = istft_batch(spec, cfg, out_len=x.size)
print("round trip SNR: %.1f dB" % snr_db(x, y))

# %% log-mel features, floored at 1e-5 before the log
mel = extract_mel(x, cfg)
print("mel:", mel.values.shape, " min %.3f  max %.3f" % (mel.values.min(), mel.values.max()))
