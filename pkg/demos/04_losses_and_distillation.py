"""Training criteria evaluated forward-only for one utterance."""
import numpy as np

from dllapnet.io_codec import random_init
from dllapnet.losses import anti_wrap, evaluate_losses, first_blocks
from dllapnet.model import ModelConfig

# %% phase errors are measured modulo a full turn
print(anti_wrap(np.array([0.0, np.pi / 2, np.pi, 2 * np.pi, 3 * np.pi])))

# %% a small causal student and its non-causal teacher
cfg = ModelConfig(hidden=32, intermediate=96, num_blocks=8)
student = random_init(cfg, seed=1)
teacher = random_init(cfg.teacher(), seed=2)

t = np.arange(8000) / 16000
wave = 0.3 * np.sin(2 * np.pi * 180 * t) * np.hanning(t.size)

# %% more distilled blocks, more summed L1 terms
# untrained weights predict wild log-amplitudes, hence the large L_S
for n in (0, 2, 4, 6, 8):
    rep = evaluate_losses(wave, student, teacher, cfg, active_blocks=first_blocks(n, 8))
    print(f"blocks={n}  L_KD={rep.kd:8.4f}  total={rep.total:10.3f}")

print()
print("\n".join(rep.lines()))
