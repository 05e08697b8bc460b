# Markov chains checked against exact laws

# On graphs small enough for the oracle, the empirical law of a sampler can
# be compared bit-mask by bit-mask with the exact one. Total variation should
# shrink like one over the square root of the number of sweeps.

import time

import numpy as np

from isingghost.lattice import FREE, WIRED, build_domain_graph, build_graph, sites_from_rows
from isingghost.oracle import current_trace_law, rc_law
from isingghost.samplers import (
    RngStream,
    current_trace_masks,
    fk_bond_masks,
    fk_chain,
    sample_current_trace,
)

g = build_graph(sites_from_rows(["##", "##"]), 1.0, 0.1)
exact_fk, exact_trace = rc_law(g), current_trace_law(g)


def tv(masks, exact):
    emp = np.bincount(masks, minlength=len(exact)) / len(masks)
    return 0.5 * np.abs(emp - exact).sum()


# Random-cluster bonds from the Edwards-Sokal chain, and the current trace
# built from a loop sample plus independent sech coins.

for n in (10**4, 10**5, 10**6):
    t0 = time.time()
    fk = fk_bond_masks(g, FREE, n, RngStream(1, n))
    _, trace = current_trace_masks(g, n, RngStream(2, n))
    print(f"n={n:>8d}  TV fk {tv(fk, exact_fk):.4f}  TV trace {tv(trace, exact_trace):.4f}"
          f"  ({time.time() - t0:.1f} s)")

# The same chains run on lattice domains. Streams are keyed, so the chain
# below is reproduced exactly by any run with the same seed and key.

box = build_domain_graph((0, 16, 0, 16), 1.0, 0.05)
chain = fk_chain(box, WIRED, RngStream(7, 0), cluster_moves=True)
density = np.mean([next(chain)[: box.n_internal].mean() for _ in range(200)])
print(f"{box!r}: mean internal bond density {density:.3f} with wired boundary")

loops, trace = sample_current_trace(box, 400, RngStream(7, 1), return_loops=True)
print("trace contains the loops:", not np.any(loops & ~trace),
      f" loop edges {loops.sum()}, trace edges {trace.sum()}")
