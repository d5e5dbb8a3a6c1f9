"""Consensus+innovations estimation with adaptive-threshold adversary detection.

Each uncompromised agent keeps an estimate ``x_n``, a running measurement
average ``ybar_n`` and a latched flag.  One synchronous round is: broadcast
``x_n(t)``, update ``ybar_n``, apply the consensus+innovations update, compare
own state against every received state with threshold ``gamma_t``, and
advance ``gamma_t``.
"""

import enum
import math
from dataclasses import dataclass, replace
import mpmath
import numpy as np


class Flag(enum.IntEnum):
    NO_ATTACK = 0
    ATTACK = 1


class GainSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class EstimatorParams:
    alpha: float
    beta: float
    big_k: float
    tau: float
    r1: float
    eta: float

    def __post_init__(self):
        if not 0.0 < self.tau < 0.5:
            raise ValueError(f"tau must lie in (0, 1/2), got {self.tau}")
        if not 0.0 < self.r1 <= 1.0:
            raise ValueError(f"r1 must lie in (0, 1], got {self.r1}")
        for name in ("alpha", "beta", "big_k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")


@dataclass
class AgentState:
    node: int
    x: np.ndarray
    ybar: np.ndarray
    flag: Flag = Flag.NO_ATTACK


@dataclass(frozen=True)
class ThresholdState:
    gamma: float
    t: int = 0


def initial_threshold(eta, n_agents):
    return ThresholdState(2.0 * eta * math.sqrt(n_agents), 0)


def noise_buffer(t, params):
    """``alpha * 2K / (t+1)^tau``."""
    return params.alpha * 2.0 * params.big_k / (t + 1) ** params.tau


def threshold_step(ts, params):
    gamma = (1.0 - params.r1) * ts.gamma + noise_buffer(ts.t, params)
    return ThresholdState(gamma, ts.t + 1)


def threshold_trace(gamma0, params, horizon):
    """``gamma_0 .. gamma_horizon`` by iterating :func:`threshold_step`."""
    out = np.empty(horizon + 1)
    ts = ThresholdState(float(gamma0), 0)
    out[0] = ts.gamma
    for t in range(horizon):
        ts = threshold_step(ts, params)
        out[t + 1] = ts.gamma
    return out


def threshold_closed_form(gamma0, params, t, exact=False):
    """``(1-r1)^t gamma_0 + sum_{s<t} (1-r1)^(t-1-s) alpha 2K / (s+1)^tau``.

    ``exact=True`` evaluates the sum in 40-digit arithmetic (mpmath), an
    independent reference for the floating-point recursion.
    """
    if exact:
        with mpmath.workdps(40):
            q = 1 - mpmath.mpf(params.r1)
            c = mpmath.mpf(params.alpha) * 2 * mpmath.mpf(params.big_k)
            tau = mpmath.mpf(params.tau)
            total = mpmath.mpf(0)
            w = mpmath.mpf(1)
            for s in range(t - 1, -1, -1):
                total += w * c / mpmath.power(s + 1, tau)
                w *= q
            total += w * mpmath.mpf(gamma0)
            return float(total)
    q = 1.0 - params.r1
    s = np.arange(t)
    terms = q ** (t - 1 - s) * noise_buffer(s, params)
    return math.fsum(np.append(terms, q ** t * gamma0))


def update_running_average(ybar_prev, y_t, t):
    """``t/(t+1) * ybar(t-1) + 1/(t+1) * y(t)`` for ``t >= 1``."""
    ybar_prev = np.asarray(ybar_prev, dtype=np.float64)
    y_t = np.asarray(y_t, dtype=np.float64)
    if ybar_prev.shape != y_t.shape:
        raise ValueError(f"shape mismatch: {ybar_prev.shape} vs {y_t.shape}")
    if t < 1:
        raise ValueError("running average update needs t >= 1; use ybar(0) = y(0)")
    return (t / (t + 1)) * ybar_prev + (1.0 / (t + 1)) * y_t


def consensus_innovations_step(x_self, neighbor_states, ybar, h, params):
    """``x - beta sum_l (x - x_l) + alpha H^T (ybar - H x)``."""
    x_self = np.asarray(x_self, dtype=np.float64)
    h = np.atleast_2d(np.asarray(h, dtype=np.float64))
    ybar = np.atleast_1d(np.asarray(ybar, dtype=np.float64))
    m = x_self.size
    if h.shape != (ybar.size, m):
        raise ValueError(f"H has shape {h.shape}, expected ({ybar.size}, {m})")
    consensus = np.zeros(m)
    for xl in neighbor_states:
        xl = np.asarray(xl, dtype=np.float64)
        if xl.shape != x_self.shape:
            raise ValueError("neighbor state dimension mismatch")
        consensus += x_self - xl
    return x_self - params.beta * consensus + params.alpha * h.T @ (ybar - h @ x_self)


def detect_step(x_self, neighbor_states, flag, gamma):
    if flag == Flag.ATTACK:
        return Flag.ATTACK
    x_self = np.asarray(x_self, dtype=np.float64)
    for xl in neighbor_states:
        if np.linalg.norm(x_self - np.asarray(xl, dtype=np.float64)) > gamma:
            return Flag.ATTACK
    return Flag.NO_ATTACK


def agent_round(state, neighbor_states, y_t, t, h, params, gamma):
    """Advance one uncompromised agent from round ``t`` to ``t+1``.

    ``neighbor_states`` are the broadcasts received at ``t``.
    """
    ybar = np.asarray(y_t, dtype=np.float64) if t == 0 else update_running_average(state.ybar, y_t, t)
    x_next = consensus_innovations_step(state.x, neighbor_states, ybar, h, params)
    flag = detect_step(state.x, neighbor_states, state.flag, gamma)
    return replace(state, x=x_next, ybar=ybar, flag=flag)


def error_dynamics_matrix(lap, h_list, alpha, beta):
    """``I - beta (L kron I_m) - alpha blkdiag(H_n^T H_n)``."""
    lap = np.asarray(lap, dtype=np.float64)
    n = lap.shape[0]
    m = np.atleast_2d(h_list[0]).shape[1]
    grams = [np.atleast_2d(h).T @ np.atleast_2d(h) for h in h_list]
    out = np.eye(n * m) - beta * np.kron(lap, np.eye(m))
    for k, g in enumerate(grams):
        out[k * m:(k + 1) * m, k * m:(k + 1) * m] -= alpha * g
    return out


def spectral_radius(lap, h_list, alpha, beta):
    """Spectral radius of :func:`error_dynamics_matrix`.

    When every ``H_n^T H_n`` is diagonal the matrix splits into ``m``
    independent ``N x N`` blocks, which is much cheaper for large networks.
    """
    lap = np.asarray(lap, dtype=np.float64)
    grams = [np.atleast_2d(h).T @ np.atleast_2d(h) for h in h_list]
    if all(np.count_nonzero(g - np.diag(np.diag(g))) == 0 for g in grams):
        diag = np.array([np.diag(g) for g in grams])  # N x m
        rho = 0.0
        for k in range(diag.shape[1]):
            mk = np.eye(lap.shape[0]) - beta * lap - alpha * np.diag(diag[:, k])
            rho = max(rho, float(np.abs(np.linalg.eigvalsh(mk)).max()))
        return rho
    mat = error_dynamics_matrix(lap, h_list, alpha, beta)
    return float(np.abs(np.linalg.eigvalsh(mat)).max())


DEFAULT_ALPHAS = tuple(np.geomspace(1e-3, 1e-1, 9))


def choose_gains(lap, h_list, m=None, alphas=DEFAULT_ALPHAS, n_betas=15):
    """Grid search for ``(alpha, beta, r1)`` minimizing the contraction factor.

    ``beta`` runs log-spaced over ``(0, 2/lambda_max(L))``; the pair with
    the smallest spectral radius ``rho`` wins and ``r1 = (1 - rho) / 2``.
    Returns ``(alpha, beta, r1, rho)``.
    """
    lap = np.asarray(lap, dtype=np.float64)
    if m is not None and np.atleast_2d(h_list[0]).shape[1] != m:
        raise ValueError("dimension m does not match the measurement matrices")
    lam_max = float(np.linalg.eigvalsh(lap).max()) if lap.size else 0.0
    if lam_max > 0:
        betas = (2.0 / lam_max) * np.geomspace(1e-3, 1.0, n_betas + 1)[:-1]
    else:
        betas = np.array([1.0])
    best = None
    tried = []
    for a in alphas:
        for b in betas:
            rho = spectral_radius(lap, h_list, a, b)
            tried.append((a, b, rho))
            if best is None or rho < best[2]:
                best = (float(a), float(b), rho)
    if best[2] >= 1.0:
        worst = sorted(tried, key=lambda r: r[2])[:3]
        raise GainSearchError(
            f"no gains with spectral radius < 1 among {len(tried)} pairs; "
            f"best (alpha, beta, rho) = {worst}. Is the network connected and globally observable?"
        )
    alpha, beta, rho = best
    return alpha, beta, (1.0 - rho) / 2.0, rho
