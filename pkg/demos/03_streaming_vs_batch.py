"""Frame-by-frame synthesis reproduces whole-utterance synthesis.

A reduced model keeps this quick; the default config behaves the same way,
only slower.
"""
import numpy as np

from dllapnet.io_codec import random_init
from dllapnet.model import ModelConfig, synthesize_batch
from dllapnet.streaming import StreamState

cfg = ModelConfig(hidden=64, intermediate=192, num_blocks=4)
weights = random_init(cfg, seed=0)
rng = np.random.default_rng(1)
mel = rng.normal(-4.0, 2.0, (120, cfg.n_mels))

# %% push one frame at a time; each push emits one hop of finished samples
state = StreamState(weights, cfg)
print("state bytes:", state.nbytes)
pieces = [state.push_frame(row) for row in mel]
pieces.append(state.flush())
print("samples per push:", pieces[0].size, " flush:", pieces[-1].size)
print("state bytes after 120 frames:", state.nbytes)
stream = np.concatenate(pieces)

# %% batch output is centred, so it starts frame_len // 2 samples later
batch = synthesize_batch(mel, weights, cfg)
pad = cfg.spectral.frame_len // 2
print("max |stream - batch|: %.2e" % np.abs(stream[pad : pad + batch.size] - batch).max())

# %% changing future frames never touches samples already emitted
other = mel.copy()
other[60:] += rng.normal(0, 1, other[60:].shape)
state.reset()
early = np.concatenate([state.push_frame(row) for row in other])
print("first 60 hops unchanged:", np.array_equal(early[: 60 * 80], stream[: 60 * 80]))
