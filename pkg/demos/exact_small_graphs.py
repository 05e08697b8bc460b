# Exact computations on a 2x2 block with a ghost vertex

# The oracle enumerates every spin, bond and current configuration of a
# small graph, so each graphical representation can be compared against the
# plain Ising measure without any sampling error.

import numpy as np

from isingghost.lattice import BETA_C, FREE, WIRED, build_graph, sites_from_rows
from isingghost.oracle import (
    current_trace_law,
    double_current_disconnection,
    ising_correlation,
    loop_law,
    rc_event_probability,
    rc_law,
    truncated_correlation_exact,
    verify_identity,
)

# A 2x2 block at lattice spacing 1 and field 0.3. Sites are numbered row by
# row and the ghost comes last.

g = build_graph(sites_from_rows(["##", "##"]), 1.0, 0.3)
print(g)
print("internal coupling", BETA_C, "external coupling", g.couplings[-1])

# Magnetisation and the truncated two-point function between opposite corners.

m = ising_correlation(g, [0])
cov = truncated_correlation_exact(g, 0, 3)
print(f"<s_0> = {m:.12f}   <s_0; s_3> = {cov:.12f}")

# In the random-cluster measure <s_0> is the probability that site 0 is
# connected to the ghost.

def joined(w, x=0):
    reach, frontier = {x}, [x]
    while frontier:
        v = frontier.pop()
        for e in np.flatnonzero(w):
            a, b = g.edges[e]
            for p, q in ((a, b), (b, a)):
                if p == v and q not in reach:
                    reach.add(q)
                    frontier.append(q)
    return g.ghost in reach

print("P_free(0 <-> ghost) =", rc_event_probability(g, FREE, joined))

# The switching lemma writes the truncated function as a correlation times
# the probability that the double current with sources {0, 3} leaves 0 cut
# off from the ghost.

rhs = ising_correlation(g, [0, 3]) * double_current_disconnection(g, 0, 3)
print(f"switching: {cov:.12f} vs {rhs:.12f}")

# Wired and free boundary laws on the same edges. With the boundary wired the
# four sites behave as one vertex, so the bonds open more often.

free, wired = rc_law(g), rc_law(g, WIRED)
bits = (np.arange(len(free))[:, None] >> np.arange(g.n_edges)) & 1
print("mean open bonds, free  :", float(free @ bits.sum(axis=1)))
print("mean open bonds, wired :", float(wired @ bits.sum(axis=1)))

# Loop and current-trace laws live on the same bit masks.

masks, probs = loop_law(g)
print("loop configurations with positive weight:", int((probs > 0).sum()))
print("current-trace law sums to", current_trace_law(g).sum())

# Every identity the package checks, with its largest violation here.

for which in ("ES", "SWITCHING", "UEG", "SECH", "GHS-MONOTONE", "FINITE-ENERGY"):
    print(f"{which:14s} {verify_identity(g, which):.2e}")
