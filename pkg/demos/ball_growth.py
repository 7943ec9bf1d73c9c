"""Ball growth profiles across the group families.

Builds word-metric balls by BFS and prints V(r) next to the closed forms
where one exists (L1 ball of Z^d, free-group geometric series). Run:

    python3 demos/ball_growth.py
"""

import math

from cayleylab import build_ball, parse_group

RADIUS = 8

for name in ("Z^2", "Z^3", "H3", "LL", "F2"):
    model = parse_group(name)
    oracle = build_ball(model, RADIUS)
    print(f"\n{name}: |B(o,r)| for r = 0..{RADIUS}")
    print("  r      V(r)  sphere   local growth exponent")
    for r in range(RADIUS + 1):
        v = oracle.volume(r)
        if r >= 2:
            exponent = (math.log(v) - math.log(oracle.volume(r - 1))) / \
                (math.log(r) - math.log(r - 1))
            exp_txt = f"{exponent:8.2f}"
        else:
            exp_txt = "       -"
        print(f"  {r:2d} {v:9d} {oracle.sphere_sizes[r]:7d}  {exp_txt}")

# closed-form cross checks
z2 = build_ball(parse_group("Z^2"), RADIUS)
assert all(z2.volume(r) == 2 * r * r + 2 * r + 1 for r in range(RADIUS + 1))
f2 = build_ball(parse_group("F2"), RADIUS)
assert all(f2.volume(r) == 2 * 3 ** r - 1 for r in range(RADIUS + 1))
print("\nclosed-form checks passed: Z^2 quadratic ball, F2 geometric ball")
