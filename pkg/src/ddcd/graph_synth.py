"""Ground-truth DAGs and synthetic SEM data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError

FAMILIES = ("ER", "SF")
MECHANISMS = ("linear", "sin", "cos", "quadratic", "sigmoid", "tanh", "relu", "leaky_relu")
BOUNDED_MECHANISMS = {"sin": (-1.0, 1.0), "cos": (-1.0, 1.0), "tanh": (-1.0, 1.0), "sigmoid": (0.0, 1.0)}
LEAKY_SLOPE = 0.1
COS_SHIFT = 1.0

_MECHANISM_FNS = {
    "sin": np.sin,
    # phase shift keeps the map from being even: y = cos(x + 1)
    "cos": lambda u: np.cos(u + COS_SHIFT),
    "quadratic": np.square,
    "sigmoid": lambda u: 1.0 / (1.0 + np.exp(-u)),
    "tanh": np.tanh,
    "relu": lambda u: np.maximum(u, 0.0),
    "leaky_relu": lambda u: np.where(u > 0, u, LEAKY_SLOPE * u),
}


@dataclass(frozen=True)
class GraphSpec:
    d: int
    family: str = "ER"
    expected_degree: float = 4.0
    seed: int = 0
    weight_low: float = 0.5
    weight_high: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "family", self.family.upper())
        if self.d < 2:
            raise ValidationError(f"d must be >= 2, got {self.d}")
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not 0 < self.expected_degree < self.d:
            raise ValidationError(f"expected_degree must lie in (0, d), got {self.expected_degree}")
        if self.family == "SF" and int(round(self.expected_degree)) < 1:
            raise ValidationError("SF attachment count must round to at least 1")


@dataclass(frozen=True)
class SemSpec:
    mechanism: str = "linear"
    noise_std: float = 1.0
    n: int = 1000

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValidationError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if not self.noise_std > 0:
            raise ValidationError(f"noise_std must be positive, got {self.noise_std}")
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")


@dataclass
class GroundTruth:
    adjacency: np.ndarray
    topological_order: np.ndarray

    @property
    def d(self):
        return self.adjacency.shape[0]

    @property
    def binary(self):
        return (self.adjacency != 0).astype(int)


@dataclass
class Dataset:
    X: np.ndarray
    column_names: list | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ValidationError(f"X must be a non-empty 2-D array, got shape {self.X.shape}")
        if not np.all(np.isfinite(self.X)):
            raise ValidationError("X contains NaN or Inf")
        if self.column_names is not None and len(self.column_names) != self.X.shape[1]:
            raise ValidationError("column_names length does not match the column count")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def names(self):
        return list(self.column_names) if self.column_names else [f"x{j}" for j in range(self.d)]


def topological_sort(adj):
    """Kahn's algorithm. Returns an order, or None when ``adj`` has a cycle."""
    B = np.asarray(adj) != 0
    d = B.shape[0]
    indeg = B.sum(axis=0).astype(int)
    queue = [i for i in range(d) if indeg[i] == 0]
    order = []
    while queue:
        i = queue.pop()
        order.append(i)
        for j in np.flatnonzero(B[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    return np.array(order) if len(order) == d else None


def is_dag(adj) -> bool:
    return topological_sort(adj) is not None


def _reachability(B):
    """Boolean transitive closure: ``R[i, j]`` iff a path of length >= 1 leads from i to j."""
    R = B.astype(float)
    while True:
        nxt = ((R + R @ R) > 0).astype(float)
        if np.array_equal(nxt, R):
            return R > 0
        R = nxt


def break_cycles(W, omega=0.0):
    """Drop the weakest cycle edges until the graph ``|W| > omega`` is acyclic.

    Each pass zeroes the smallest-magnitude edge that lies on a directed
    cycle. Returns a new matrix and the removed ``(i, j)`` pairs in order.
    """
    W = np.array(W, dtype=float)
    removed = []
    while True:
        B = np.abs(W) > omega
        np.fill_diagonal(B, False)
        if is_dag(B):
            return W, removed
        # (i, j) is on a cycle exactly when j reaches i
        on_cycle = B & _reachability(B).T
        mag = np.where(on_cycle, np.abs(W), np.inf)
        i, j = np.unravel_index(np.argmin(mag), mag.shape)
        W[i, j] = 0.0
        removed.append((int(i), int(j)))


def _er_skeleton(d, p, rng):
    upper = np.triu(rng.random((d, d)) < p, k=1)
    return upper.astype(int)


def _ba_skeleton(d, m, rng):
    """Barabasi-Albert growth from a complete seed of ``m`` nodes.

    Edges point from the earlier-added node to the newcomer, so the skeleton
    is upper triangular in insertion order.
    """
    B = np.zeros((d, d), dtype=int)
    for i in range(m):
        B[i, i + 1 : m] = 1
    degree = B.sum(axis=0) + B.sum(axis=1)
    for new in range(m, d):
        if new == m:
            targets = np.arange(m)
        else:
            w = degree[:new].astype(float)
            targets = rng.choice(new, size=m, replace=False, p=w / w.sum())
        B[targets, new] = 1
        degree[targets] += 1
        degree[new] += m
    return B


def sample_weights(skeleton, range_low=0.5, range_high=2.0, seed=0):
    """Uniform magnitudes on ``[range_low, range_high]`` with a random sign."""
    S = np.asarray(skeleton) != 0
    if not 0 < range_low < range_high:
        raise ValidationError(f"need 0 < range_low < range_high, got {range_low}, {range_high}")
    if not is_dag(S):
        raise ValidationError("skeleton contains a cycle")
    rng = np.random.default_rng(seed)
    mag = rng.uniform(range_low, range_high, size=S.shape)
    sign = np.where(rng.random(S.shape) < 0.5, -1.0, 1.0)
    return np.where(S, sign * mag, 0.0)


def gen_dag(spec: GraphSpec) -> GroundTruth:
    rng = np.random.default_rng([int(spec.seed), 0])
    d = spec.d
    if spec.family == "ER":
        B = _er_skeleton(d, spec.expected_degree / (d - 1), rng)
    else:
        B = _ba_skeleton(d, int(round(spec.expected_degree)), rng)
    # node i of the construction becomes node perm[i]
    perm = rng.permutation(d)
    P = np.zeros((d, d), dtype=int)
    P[perm[:, None], perm[None, :]] = B
    W = sample_weights(P, spec.weight_low, spec.weight_high, seed=[int(spec.seed), 1])
    return GroundTruth(adjacency=W, topological_order=perm.copy())


def _topo_order(gt: GroundTruth):
    order = gt.topological_order
    if order is None or len(order) != gt.d:
        order = topological_sort(gt.adjacency)
    return order


def simulate_linear_sem(gt: GroundTruth, sem: SemSpec, seed, return_noise=False):
    if sem.mechanism != "linear":
        raise ValidationError("simulate_linear_sem needs mechanism='linear'")
    return _simulate(gt, sem, seed, return_noise, lambda u: u)


def simulate_nonlinear_sem(gt: GroundTruth, sem: SemSpec, seed, return_noise=False):
    """``x_j = f(X @ W[:, j]) + z_j`` for non-roots; roots are pure noise."""
    if sem.mechanism == "linear":
        raise ValidationError("simulate_nonlinear_sem needs a nonlinear mechanism")
    return _simulate(gt, sem, seed, return_noise, _MECHANISM_FNS[sem.mechanism])


def simulate_sem(gt: GroundTruth, sem: SemSpec, seed, return_noise=False):
    if sem.mechanism == "linear":
        return simulate_linear_sem(gt, sem, seed, return_noise)
    return simulate_nonlinear_sem(gt, sem, seed, return_noise)


def _simulate(gt, sem, seed, return_noise, f):
    W = gt.adjacency
    d = W.shape[0]
    rng = np.random.default_rng(seed)
    E = rng.normal(0.0, sem.noise_std, size=(sem.n, d))
    X = np.zeros((sem.n, d))
    for j in _topo_order(gt):
        parents = np.flatnonzero(W[:, j])
        if parents.size:
            X[:, j] = f(X @ W[:, j]) + E[:, j]
        else:
            X[:, j] = E[:, j]
    data = Dataset(X, [f"x{j}" for j in range(d)])
    return (data, E) if return_noise else data
