"""
Four ways to agree
==================

Plain averaging, W-MSR trimming, the relative-measurement estimator and an
adaptive-weight diffusion rule, each on the same random geometric graph.
"""

import numpy as np

from secure_inference.consensus import run_consensus_experiment
from secure_inference.topology import connected_geometric_graph

g, seed = connected_geometric_graph(25, 1000.0, 450.0, rng_seed=3)
print(f"graph: {g.node_count} nodes, {len(g.edges)} edges (seed {seed})")

# %%
# Metropolis averaging converges to the initial mean and nothing else.
traj, target = run_consensus_experiment("avg", g, 400, seed=1)
print(f"avg      final error {np.abs(traj[-1] - target).max():.2e}")

# %%
# W-MSR on a complete graph throws away the F largest and smallest values
# each round, so the normals agree inside their own envelope even while two
# nodes shout random values up to 1e6.
k = connected_geometric_graph(11, 10.0, 100.0, rng_seed=0)[0]
traj, target = run_consensus_experiment("wmsr", k, 200, seed=1, f=2, byzantine=[0, 5])
normal = [n for n in range(11) if n not in (0, 5)]
print(f"wmsr     spread among normals {np.ptp(traj[-1, normal]):.2e}, "
      f"inside [{traj[0, normal].min():.3f}, {traj[0, normal].max():.3f}]: "
      f"{traj[-1, normal].min() >= traj[0, normal].min() and traj[-1, normal].max() <= traj[0, normal].max()}")

# %%
# Relative measurements only pin positions up to a shift, so a few reliable
# nodes that know their own value anchor everyone else.
traj, target = run_consensus_experiment("leblanc", g, 2000, seed=1, f=1, reliable=[0, 1, 2, 3])
print(f"leblanc  final error {np.abs(traj[-1] - target).max():.2e}")

traj, target = run_consensus_experiment("adaptive", g, 2000, seed=1, byzantine=[7])
honest = [n for n in range(g.node_count) if n != 7]
print(f"adaptive honest error {np.abs(traj[-1, honest] - target[honest]).max():.2e}")
