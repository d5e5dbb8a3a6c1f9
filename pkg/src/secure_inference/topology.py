"""Communication graphs: generation, connectivity, Laplacians, observability."""

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..node_count-1``.

    ``edges`` is a sorted tuple of ``(i, j)`` pairs with ``i < j``.
    ``positions`` holds per-node coordinates in meters for geometric graphs.
    """

    node_count: int
    edges: tuple
    positions: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be positive")
        clean = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge ({i}, {j}) out of range")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))
        if self.positions is not None:
            pos = np.asarray(self.positions, dtype=np.float64)
            if pos.shape != (self.node_count, 2):
                raise ValueError("positions must have shape (node_count, 2)")
            object.__setattr__(self, "positions", pos)

    @property
    def edge_array(self):
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    def adjacency(self):
        a = np.zeros((self.node_count, self.node_count))
        e = self.edge_array
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
        return a

    def neighbors(self):
        nbrs = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(n) for n in nbrs]

    def degrees(self):
        deg = np.zeros(self.node_count, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def subgraph(self, nodes):
        """Induced subgraph, relabelled in the sorted order of ``nodes``."""
        nodes = sorted(int(n) for n in nodes)
        index = {n: k for k, n in enumerate(nodes)}
        edges = [(index[i], index[j]) for i, j in self.edges if i in index and j in index]
        pos = None if self.positions is None else self.positions[nodes]
        return Graph(len(nodes), tuple(edges), pos)


def geometric_graph_from_positions(positions, radius):
    """Connect every pair of points at Euclidean distance ``<= radius``."""
    pos = np.asarray(positions, dtype=np.float64)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    i, j = np.nonzero(np.triu(dist <= radius, k=1))
    return Graph(len(pos), tuple(zip(i.tolist(), j.tolist())), pos)


def random_geometric_graph(n, side, radius, rng_seed):
    """Uniform points on ``[0, side]^2`` joined when within ``radius``.

    The result may be disconnected; see :func:`connected_geometric_graph`.
    """
    if n < 1 or side <= 0 or radius <= 0:
        raise ValueError("need n >= 1, side > 0 and radius > 0")
    rng = np.random.default_rng(rng_seed)
    pos = rng.uniform(0.0, side, size=(n, 2))
    return geometric_graph_from_positions(pos, radius)


def connected_geometric_graph(n, side, radius, rng_seed, max_retries=100):
    """First connected geometric graph for seeds ``rng_seed, rng_seed+1, ...``.

    Returns ``(graph, seed_used)``.
    """
    for k in range(max_retries + 1):
        g = random_geometric_graph(n, side, radius, rng_seed + k)
        if is_connected(g):
            return g, rng_seed + k
    raise RuntimeError(
        f"no connected graph for n={n}, side={side}, radius={radius} "
        f"in seeds {rng_seed}..{rng_seed + max_retries}"
    )


def is_connected(g):
    """Breadth-first search from node 0."""
    nbrs = g.neighbors()
    seen = np.zeros(g.node_count, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return bool(seen.all())


def laplacian(g):
    """Combinatorial Laplacian ``D - A``."""
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def algebraic_connectivity(g):
    if g.node_count == 1:
        return 0.0
    return float(np.linalg.eigvalsh(laplacian(g))[1])


def numerical_rank(mat, rtol=RANK_RTOL):
    s = np.linalg.svd(np.atleast_2d(mat), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def is_globally_observable(h_list, subset=None):
    """True iff ``sum_{n in subset} H_n^T H_n`` has full column rank.

    ``subset=None`` means every node.  An empty subset is never observable.
    """
    h_list = [np.atleast_2d(np.asarray(h, dtype=np.float64)) for h in h_list]
    m = h_list[0].shape[1]
    if any(h.shape[1] != m for h in h_list):
        raise ValueError("measurement matrices must share a column count")
    idx = range(len(h_list)) if subset is None else sorted(subset)
    gram = np.zeros((m, m))
    for n in idx:
        gram += h_list[n].T @ h_list[n]
    return numerical_rank(gram) == m


def write_graph(g, edge_path, positions_path=None):
    """Edge list as ``i j`` lines; positions as ``node,x,y`` CSV."""
    edge_path = Path(edge_path)
    with open(edge_path, "w") as fh:
        fh.write(f"# nodes {g.node_count}\n")
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")
    if positions_path is not None and g.positions is not None:
        with open(positions_path, "w") as fh:
            fh.write("node,x,y\n")
            for k, (x, y) in enumerate(g.positions):
                fh.write(f"{k},{float(x)!r},{float(y)!r}\n")


def read_graph(edge_path, positions_path=None, node_count=None):
    """Inverse of :func:`write_graph`.

    The node count comes from ``node_count``, the ``# nodes`` header, the
    positions file, or the largest index seen, in that order.
    """
    edges, header_n = [], None
    with open(edge_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "nodes":
                    header_n = int(parts[1])
                continue
            i, j = line.split()[:2]
            edges.append((int(i), int(j)))
    pos = None
    if positions_path is not None:
        rows = np.loadtxt(positions_path, delimiter=",", skiprows=1, ndmin=2)
        order = np.argsort(rows[:, 0])
        pos = rows[order, 1:3]
    if node_count is None:
        node_count = header_n
    if node_count is None and pos is not None:
        node_count = len(pos)
    if node_count is None:
        node_count = 1 + max((max(e) for e in edges), default=0)
    return Graph(node_count, tuple(edges), pos)
