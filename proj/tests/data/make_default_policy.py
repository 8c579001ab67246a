"""Independent recomputation of the raw = 0 stacked-ReLU policy (width 16)."""
import json
import math

EPS = 1e-3
WIDTH = 16
GAP = 0.01
LOWER, UPPER = 0.95, 1.05

slope = EPS + math.log(2.0)      # eps + softplus(0)
spacing = GAP * math.log(2.0)    # gap_scale * softplus(0)

w_plus = [0.0, slope] + [0.0] * (WIDTH - 2)
b_plus = [0.0] + [-UPPER - spacing * k for k in range(WIDTH - 1)]
w_minus = [0.0, -slope] + [0.0] * (WIDTH - 2)
b_minus = [0.0] + [LOWER - spacing * k for k in range(WIDTH - 1)]


def g(v):
    plus = sum(w * max(0.0, v + b) for w, b in zip(w_plus, b_plus))
    minus = sum(w * max(0.0, b - v) for w, b in zip(w_minus, b_minus))
    return -(plus + minus)


probes = [0.8, 0.9, 0.93, 0.95, 1.0, 1.05, 1.07, 1.1, 1.2]
doc = {
    "eps": EPS, "width": WIDTH, "lower": LOWER, "upper": UPPER,
    "w_plus": w_plus, "b_plus": b_plus, "w_minus": w_minus, "b_minus": b_minus,
    "probes": [{"v": v, "u": g(v)} for v in probes],
}
with open("default_policy.json", "w") as f:
    json.dump(doc, f, indent=2)
    f.write("\n")
