"""Ground-truth parameters and noisy linear measurements ``y = H theta + w``."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .rng import NoiseStream


@dataclass(frozen=True)
class Parameter:
    theta: np.ndarray
    eta: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64).ravel()
        object.__setattr__(self, "theta", theta)
        if np.linalg.norm(theta) > self.eta * (1 + 1e-12):
            raise ValueError(f"|theta| = {np.linalg.norm(theta)} exceeds eta = {self.eta}")

    @property
    def dim(self):
        return self.theta.size


@dataclass(frozen=True)
class Measurement:
    node: int
    time: int
    value: np.ndarray


def sample_parameter(m, low, high, rng_seed):
    """Components i.i.d. uniform on ``[low, high]``; ``eta`` is the worst-case norm."""
    if low > high:
        raise ValueError("low must not exceed high")
    rng = np.random.default_rng(rng_seed)
    theta = rng.uniform(low, high, size=m) if low < high else np.full(m, float(low))
    eta = float(np.sqrt(m) * max(abs(low), abs(high)))
    return Parameter(theta, eta)


class MeasurementSpec:
    """Per-node measurement matrices ``H_n`` (k_n x m) and noise covariances.

    Rows of all nodes are stacked in node order; ``offsets[n]:offsets[n+1]``
    are node ``n``'s rows in any stacked vector.
    """

    def __init__(self, h_list, sigma_list):
        self.h_list = [np.atleast_2d(np.asarray(h, dtype=np.float64)) for h in h_list]
        if len(sigma_list) != len(self.h_list):
            raise ValueError("need one covariance per node")
        self.m = self.h_list[0].shape[1]
        sig = []
        for n, (h, s) in enumerate(zip(self.h_list, sigma_list)):
            if h.shape[1] != self.m:
                raise ValueError(f"node {n}: H has {h.shape[1]} columns, expected {self.m}")
            s = np.atleast_2d(np.asarray(s, dtype=np.float64))
            if s.shape == (1, 1) and h.shape[0] > 1:
                s = s[0, 0] * np.eye(h.shape[0])
            if s.shape != (h.shape[0], h.shape[0]):
                raise ValueError(f"node {n}: covariance shape {s.shape} does not match H")
            if not np.allclose(s, s.T):
                raise ValueError(f"node {n}: covariance is not symmetric")
            if np.linalg.eigvalsh(s).min() < -1e-10 * max(1.0, np.abs(s).max()):
                raise ValueError(f"node {n}: covariance is not positive semidefinite")
            sig.append(s)
        self.sigma_list = sig
        self.rows = np.array([h.shape[0] for h in self.h_list])
        self.offsets = np.concatenate([[0], np.cumsum(self.rows)])
        self._factors = [_psd_factor(s) for s in sig]

    @property
    def node_count(self):
        return len(self.h_list)

    def rows_of(self, node):
        return slice(self.offsets[node], self.offsets[node + 1])

    def stacked_h(self):
        """Block-diagonal ``blkdiag(H_1, ..., H_N)`` as a CSR matrix (sum k_n x N m)."""
        return sp.block_diag(self.h_list, format="csr")

    def noise_factor(self):
        """Block-diagonal ``F`` with ``F F^T = blkdiag(Sigma_n)``."""
        return sp.block_diag(self._factors, format="csr")

    def gram_blocks(self):
        return [h.T @ h for h in self.h_list]

    def to_dict(self):
        return {
            "h_list": [h.tolist() for h in self.h_list],
            "sigma_list": [s.tolist() for s in self.sigma_list],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["h_list"], d["sigma_list"])


def _psd_factor(s):
    w, v = np.linalg.eigh(s)
    return v * np.sqrt(np.clip(w, 0.0, None))


def sector_assignment(positions, side, sectors_per_side):
    """Row-major index of the ``s x s`` grid cell containing each position."""
    s = int(sectors_per_side)
    cell = side / s
    col = np.clip(np.floor(positions[:, 0] / cell).astype(int), 0, s - 1)
    row = np.clip(np.floor(positions[:, 1] / cell).astype(int), 0, s - 1)
    return row * s + col


def center_sector(sectors_per_side):
    s = int(sectors_per_side)
    return (s // 2) * s + s // 2


def sector_selector_spec(sectors, assignment, noise_var=10.0):
    """Each node observes only the component of its own sector.

    ``sectors`` is the parameter dimension ``m`` (the number of grid cells).
    """
    assignment = np.asarray(assignment, dtype=int)
    if assignment.size and (assignment.min() < 0 or assignment.max() >= sectors):
        raise ValueError("sector index out of range")
    h_list = []
    for a in assignment:
        h = np.zeros((1, sectors))
        h[0, a] = 1.0
        h_list.append(h)
    return MeasurementSpec(h_list, [np.array([[noise_var]])] * len(h_list))


def measure(spec, param, node, t, rng_stream):
    """``y_n(t) = H_n theta + w_n(t)`` with ``w_n(t) ~ N(0, Sigma_n)``.

    The noise is the node's slice of round ``t`` of ``rng_stream`` (a
    :class:`NoiseStream`), so it depends only on the stream seed, ``node`` and ``t``.
    """
    z = rng_stream.standard_normal(t, int(spec.offsets[-1]))[spec.rows_of(node)]
    value = spec.h_list[node] @ param.theta + spec._factors[node] @ z
    return Measurement(node, t, value)


def measure_all(spec, theta, t, rng_stream, stacked_h=None, factor=None):
    """Stacked measurements of every node at round ``t``; agrees with :func:`measure`."""
    stacked_h = spec.stacked_h() if stacked_h is None else stacked_h
    factor = spec.noise_factor() if factor is None else factor
    z = rng_stream.standard_normal(t, int(spec.offsets[-1]))
    return stacked_h @ np.tile(theta, spec.node_count) + factor @ z


def snr_db(spec, theta, kind="power"):
    """Per-node SNR in dB.

    ``kind="power"`` is ``10 log10(|H_n theta|^2 / tr Sigma_n)``;
    ``kind="amplitude"`` is ``10 log10(|H_n theta| / sqrt(tr Sigma_n))``,
    the convention under which 0-160 ug/m3 concentrations with variance 10
    noise come out near 13 dB.
    """
    out = []
    for h, s in zip(spec.h_list, spec.sigma_list):
        sig = np.linalg.norm(h @ theta) ** 2
        noise = np.trace(s)
        ratio = sig / noise if kind == "power" else np.sqrt(sig / noise)
        out.append(10.0 * np.log10(ratio))
    return np.array(out)


def network_snr_db(spec, theta, kind="amplitude"):
    """Network SNR: the node-average of the per-node ratios, in dB."""
    per_node = 10.0 ** (snr_db(spec, theta, kind) / 10.0)
    return float(10.0 * np.log10(per_node.mean()))


__all__ = [
    "Parameter", "Measurement", "MeasurementSpec", "NoiseStream",
    "sample_parameter", "sector_assignment", "center_sector",
    "sector_selector_spec", "measure", "measure_all", "snr_db", "network_snr_db",
]
