# Crossing events in the 10 x 3 frame

# The reference frame is a rectangle T = [0,10] x [0,3] holding S, R and the
# end squares Q1, Q8. This script plants a configuration where the crossing
# cluster of S meets the ghost once at each end, then looks at sampled
# configurations.

from pathlib import Path

import numpy as np

from isingghost.events import (
    config_from_text,
    coupled_loop_events,
    disjoint_crossed_rectangles,
    event_E,
    event_H,
    has_crossing,
    has_dual_circuit,
    verify_rectangles,
)
from isingghost.lattice import WIRED, RectFrame, build_domain_graph, row_of_frames
from isingghost.samplers import RngStream, fk_chain

frame = RectFrame()
g = build_domain_graph((0, 10, 0, 3), 0.5, 0.1)
fixture = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "h_frame.edges"
omega = config_from_text(fixture.read_text(), g)

rep = event_H(omega, g, frame)
print("planted configuration:", rep)
print("E holds on it:", event_E(omega, g, frame))

# One more ghost edge in the middle of the cluster breaks H.

extra = omega.copy()
extra[g.external_edge(g.vertex_at((5.0, 1.5)))] = True
print("with a third ghost edge:", event_H(extra, g, frame).H)

# Wired samples in T: how often S is long-crossed and how often a closed
# dual circuit separates S from the boundary of T.

chain = fk_chain(g, WIRED, RngStream(3), cluster_moves=True)
cross = circuit = 0
for _ in range(500):
    w = next(chain)
    cross += has_crossing(w, g, frame.S, "long")
    circuit += has_dual_circuit(w, g, frame)
print(f"500 wired samples at a=0.5, h=0.1: S crossed {cross}, dual circuit {circuit}")

# Coupled loops: frames in a row, each forced to satisfy H, then a loop
# sample grown from a forest through those crossings. Where the coin of the
# closing edge comes up 1, E holds on the loops.

frames = row_of_frames(3)
big = build_domain_graph((-1, 35, -1, 4), 0.5, 0.1)
w = np.zeros(big.n_edges, bool)
for fr in frames:
    x0 = fr.S.x0
    for k in range(16):
        w[big.edge_between(big.vertex_at((x0 + k / 2, 1.0)), big.vertex_at((x0 + (k + 1) / 2, 1.0)))] = True
    for x in (x0, x0 + 8):
        w[big.edge_between(big.vertex_at((x, 1.0)), big.vertex_at((x, 1.5)))] = True
        w[big.edge_between(big.vertex_at((x, 1.5)), big.vertex_at((x, 2.0)))] = True
        w[big.external_edge(big.vertex_at((x, 1.0)))] = True
out = coupled_loop_events(w, big, frames, RngStream(4))
print("frames with H:", out["h"], " coins:", out["coins"])
print("E on loops:", [bool(event_E(out["loops"], big, frames[i])) for i in out["h"]])

# Disjoint rectangles along a lattice path.

path = [(x, 0) for x in range(-40, 41)] + [(40, y) for y in range(1, 30)]
rects = disjoint_crossed_rectangles(path, 3, 90)
print(f"{len(rects)} rectangles of size 6 x 3, problems: {verify_rectangles(path, 3, 90, rects)}")
