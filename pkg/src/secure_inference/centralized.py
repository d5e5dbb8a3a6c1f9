"""Centralized attack detection and identification baselines.

Residual detection and stealthy column-space attacks for ``y = H theta + w + a``,
sparse attack identification (exhaustive l0 and its l1 relaxation),
detection over a window of a linear dynamical system, and the
Byzantine-resilient counting fusion rule.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from scipy import optimize, stats

from .topology import numerical_rank


class RankDeficientError(ValueError):
    pass


class IdentificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CentralModel:
    h: np.ndarray
    tau_detect: float = 1.0

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=np.float64))
        object.__setattr__(self, "h", h)
        if not np.isfinite(self.tau_detect) or self.tau_detect <= 0:
            raise ValueError("tau_detect must be positive and finite")

    @property
    def rows(self):
        return self.h.shape[0]

    @property
    def dim(self):
        return self.h.shape[1]


@dataclass(frozen=True)
class IdentificationResult:
    theta_tilde: np.ndarray
    a_tilde: np.ndarray
    support: tuple


def _require_full_rank(h, what="H"):
    if numerical_rank(h) < h.shape[1]:
        raise RankDeficientError(f"{what} ({h.shape[0]}x{h.shape[1]}) does not have full column rank")


def ls_estimate(model, y):
    """Least-squares estimate ``argmin |y - H theta|_2``."""
    _require_full_rank(model.h)
    theta, *_ = np.linalg.lstsq(model.h, np.asarray(y, dtype=np.float64), rcond=None)
    return theta


def residual(model, y):
    y = np.asarray(y, dtype=np.float64)
    return float(np.linalg.norm(y - model.h @ ls_estimate(model, y)))


def residual_detect(model, y):
    """Alarm iff the least-squares residual norm exceeds ``tau_detect``."""
    return residual(model, y) > model.tau_detect


def stealthy_attack(model, c, rng=None):
    """Column-space attack ``a = H c``; invisible to :func:`residual_detect`.

    ``c=None`` draws a standard normal ``c`` from ``rng``.
    """
    if c is None:
        c = np.random.default_rng(rng).standard_normal(model.dim)
    return model.h @ np.asarray(c, dtype=np.float64)


def calibrate_tau(model, noise_cov, false_alarm_rate, n_samples=20000, seed=0):
    """Monte-Carlo threshold with the requested false-alarm rate under Gaussian noise."""
    rng = np.random.default_rng(seed)
    cov = np.atleast_2d(np.asarray(noise_cov, dtype=np.float64))
    if cov.shape == (1, 1):
        cov = cov[0, 0] * np.eye(model.rows)
    w = rng.multivariate_normal(np.zeros(model.rows), cov, size=n_samples)
    proj = np.eye(model.rows) - model.h @ np.linalg.pinv(model.h)
    res = np.linalg.norm(w @ proj.T, axis=1)
    return float(np.quantile(res, 1.0 - false_alarm_rate))


def _result(model, y, theta, support_tol):
    a = y - model.h @ theta
    tol = support_tol * max(np.linalg.norm(y), 1.0)
    return IdentificationResult(theta, a, tuple(np.flatnonzero(np.abs(a) > tol).tolist()))


def identify_l0(model, y, s_max, eps=1e-8, max_supports=1_000_000, support_tol=1e-6):
    """Sparsest attack explaining ``y`` by exhaustive search over attacked-row sets.

    Candidate sets are tried by size, then lexicographically; the first set
    whose removal leaves rows that a single ``theta`` fits to within
    ``eps`` (relative to ``max(1, |y|_inf)``) wins.
    """
    y = np.asarray(y, dtype=np.float64)
    p = model.rows
    if y.size != p:
        raise ValueError(f"y has {y.size} entries, expected {p}")
    budget = sum(comb(p, k) for k in range(min(s_max, p) + 1))
    if budget > max_supports:
        raise IdentificationError(f"{budget} candidate supports exceed the budget of {max_supports}")
    scale = max(1.0, float(np.abs(y).max(initial=0.0)))
    for k in range(min(s_max, p) + 1):
        for removed in combinations(range(p), k):
            keep = np.setdiff1d(np.arange(p), removed)
            hk = model.h[keep]
            if numerical_rank(hk) < model.dim:
                continue
            theta, *_ = np.linalg.lstsq(hk, y[keep], rcond=None)
            if np.abs(y[keep] - hk @ theta).max(initial=0.0) <= eps * scale:
                return _result(model, y, theta, support_tol)
    raise IdentificationError(f"no theta explains y with at most {s_max} attacked rows")


def identify_l1(model, y, tol=1e-9, support_tol=1e-6):
    """``argmin_theta |y - H theta|_1`` as a linear program (HiGHS).

    Variables are ``theta`` (free) and ``u >= |y - H theta|`` componentwise.
    """
    y = np.asarray(y, dtype=np.float64)
    p, m = model.h.shape
    c = np.concatenate([np.zeros(m), np.ones(p)])
    eye = np.eye(p)
    a_ub = np.block([[model.h, -eye], [-model.h, -eye]])
    b_ub = np.concatenate([y, -y])
    bounds = [(None, None)] * m + [(0, None)] * p
    res = optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs",
                           options={"primal_feasibility_tolerance": tol,
                                    "dual_feasibility_tolerance": tol})
    if res.status != 0:
        raise IdentificationError(f"l1 program failed: {res.message} (status {res.status})")
    return _result(model, y, res.x[:m], support_tol)


def observability_matrix(a_dyn, h, horizon):
    a_dyn = np.atleast_2d(np.asarray(a_dyn, dtype=np.float64))
    blocks, power = [], np.eye(a_dyn.shape[0])
    for _ in range(horizon):
        blocks.append(h @ power)
        power = a_dyn @ power
    return np.vstack(blocks)


def dynamic_residual(a_dyn, model, y_sequence):
    """Residual norm of the least-squares initial-state fit to a measurement window."""
    y_seq = np.atleast_2d(np.asarray(y_sequence, dtype=np.float64))
    obs = observability_matrix(a_dyn, model.h, y_seq.shape[0])
    _require_full_rank(obs, "stacked observability matrix")
    stacked = y_seq.ravel()
    x0, *_ = np.linalg.lstsq(obs, stacked, rcond=None)
    return float(np.linalg.norm(stacked - obs @ x0))


def dynamic_residual_detect(a_dyn, model, y_sequence, tau_detect=None):
    """Alarm over a window ``y_0..y_{T-1}`` of ``theta_{t+1} = A theta_t``."""
    tau = model.tau_detect if tau_detect is None else tau_detect
    return dynamic_residual(a_dyn, model, y_sequence) > tau


H0, H1 = 0, 1


def counting_fusion(decisions, k_star):
    """``H1`` iff at least ``k_star`` sensors vote ``H1``."""
    return H1 if int(np.sum(np.asarray(decisions) == 1)) >= k_star else H0


@dataclass(frozen=True)
class FusionProblem:
    n_sensors: int
    p0: float
    p1: float
    accuracy: float
    byzantine_fraction: float = 0.0

    def __post_init__(self):
        if abs(self.p0 + self.p1 - 1.0) > 1e-12:
            raise ValueError("priors must sum to one")
        if not 0.0 <= self.byzantine_fraction < 1.0:
            raise ValueError("byzantine_fraction must lie in [0, 1)")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")

    @property
    def n_byzantine(self):
        return int(np.floor(self.byzantine_fraction * self.n_sensors + 1e-9))


def fusion_error(problem, k):
    """Bayes error of the counting rule when Byzantines always vote wrong.

    Under ``H1`` the honest H1-votes are ``Bin(N-B, q)``; under ``H0`` they
    are ``Bin(N-B, 1-q)`` plus the ``B`` Byzantine votes.
    """
    honest = problem.n_sensors - problem.n_byzantine
    q = problem.accuracy
    b = problem.n_byzantine
    miss = stats.binom.cdf(k - 1, honest, q)                 # P(V1 < k)
    false_alarm = stats.binom.sf(k - 1 - b, honest, 1 - q)   # P(V0 >= k)
    return float(problem.p0 * false_alarm + problem.p1 * miss)


def choose_k_star(problem):
    """Threshold in ``[1, N]`` with the smallest worst-case error; ties go to the smallest."""
    if problem.byzantine_fraction >= 0.5:
        raise ValueError("with half or more Byzantine sensors the hypotheses are indistinguishable")
    errors = [fusion_error(problem, k) for k in range(1, problem.n_sensors + 1)]
    return int(np.argmin(errors)) + 1


def simulate_fusion(problem, k_values, trials=10_000, seed=0):
    """Monte-Carlo error of each threshold in ``k_values`` on shared draws."""
    rng = np.random.default_rng(seed)
    n, b = problem.n_sensors, problem.n_byzantine
    truth = (rng.random(trials) < problem.p1).astype(int)
    correct = rng.random((trials, n - b)) < problem.accuracy
    honest_votes = np.where(correct, truth[:, None], 1 - truth[:, None])
    votes = np.concatenate([honest_votes, np.repeat((1 - truth)[:, None], b, axis=1)], axis=1)
    counts = votes.sum(axis=1)
    return {k: float(np.mean((counts >= k).astype(int) != truth)) for k in k_values}
