"""How much future context each configuration needs, and what it costs."""
from dllapnet.model import ModelConfig, count_flops, layer_macs
from dllapnet.nn_ops import zeta
from dllapnet.streaming import total_latency

# %% a centred conv with kernel k and dilation d reads floor((k-1)d/2) future frames
for k, d in [(3, 1), (7, 1), (7, 3)]:
    print(f"k={k} d={d}: lookahead {zeta(k, d)} frames")

# %% the causal default only waits for overlap-add (240 samples = 15 ms)
configs = {
    "causal": ModelConfig(),
    "centred convs, cumulative GRN": ModelConfig(causal=False),
    "centred convs, global GRN": ModelConfig().teacher(),
}
for name, cfg in configs.items():
    rep = total_latency(cfg)
    print(f"{name:32s} lookahead={rep.lookahead_frames}  total={rep.total_ms} ms")

# %% cost does not depend on padding, only on shapes
cfg = ModelConfig()
print("GFLOPs per second of audio: %.3f" % (count_flops(cfg) / 1e9))
rows = sorted(layer_macs(cfg), key=lambda r: -r[1])[:5]
for name, macs in rows:
    print(f"  {name:28s} {macs:>12,d} MACs/frame")
