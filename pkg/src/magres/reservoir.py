"""Leaky stochastic echo-state network.

The node update is the discretized stochastic leaky integrator

    z     = W_in u[t+1] + W_fb y[t] + W_self x[t]
    x[t+1] = gain * tanh(z) + (1 - leak) * x[t] - noise_amp * xi[t]

clamped to [-1, 1], where ``xi`` is a standard normal draw per node.
Only the readout ``W_out`` is ever trained (see :mod:`magres.training`).
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConvergenceWarning, DimensionError, DomainError, TopologyError
from .rng import RngState

log = logging.getLogger(__name__)

FEATURE_MODES = ("state_only", "bias_input_state")
MAX_TOPOLOGY_ATTEMPTS = 8


@dataclass
class ReservoirConfig:
    """Reservoir hyperparameters.

    ``leak`` and ``gain`` are the per-tick leak and activation strengths of the
    update rule. With ``gain == leak`` the rule is the classic leaky-integrator
    ESN, whose echo-state property holds whenever ``spectral_radius < 1``.
    """

    n_nodes: int = 100
    n_inputs: int = 1
    n_outputs: int = 1
    spectral_radius: float = 0.9
    input_scale: float = 1.0
    feedback_scale: float = 1.0
    connectivity: float = 0.1
    leak: float = 0.3
    gain: float = 0.3
    noise_amp: float = 1e-4
    washout: int = 100
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_nodes < 1:
            raise DomainError("n_nodes must be >= 1")
        if self.n_inputs < 0 or self.n_outputs < 0:
            raise DomainError("n_inputs/n_outputs must be >= 0")
        if not 0 < self.leak <= 1:
            raise DomainError("leak must lie in (0, 1]")
        if self.gain <= 0:
            raise DomainError("gain must be > 0")
        if self.spectral_radius <= 0:
            raise DomainError("spectral_radius must be > 0")
        if not 0 < self.connectivity <= 1:
            raise DomainError("connectivity must lie in (0, 1]")
        if self.noise_amp < 0:
            raise DomainError("noise_amp must be >= 0")
        if self.washout < 0:
            raise DomainError("washout must be >= 0")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ReservoirTopology:
    w_in: np.ndarray  # N x K
    w_self: np.ndarray  # N x N
    w_fb: np.ndarray  # N x L
    achieved_radius: float

    @property
    def n_nodes(self) -> int:
        return self.w_self.shape[0]

    def to_text(self, path) -> None:
        """Write every nonzero entry as ``matrix,row,col,value`` (round-trippable)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["matrix", "row", "col", "value"])
            for name in ("w_in", "w_self", "w_fb"):
                m = getattr(self, name)
                w.writerow([name, "shape", m.shape[0], m.shape[1]])
                for i, j in zip(*np.nonzero(m)):
                    w.writerow([name, i, j, repr(float(m[i, j]))])
            w.writerow(["achieved_radius", "", "", repr(float(self.achieved_radius))])

    @classmethod
    def from_text(cls, path) -> "ReservoirTopology":
        mats: dict[str, np.ndarray] = {}
        radius = float("nan")
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for name, row, col, value in reader:
                if name == "achieved_radius":
                    radius = float(value)
                elif row == "shape":
                    mats[name] = np.zeros((int(col), int(value)))
                else:
                    mats[name][int(row), int(col)] = float(value)
        return cls(mats["w_in"], mats["w_self"], mats["w_fb"], radius)


@dataclass
class StateTrace:
    """States, inputs and outputs of one run; row ``t`` is time step ``t``."""

    states: np.ndarray  # T x N
    inputs: np.ndarray  # T x K
    outputs: np.ndarray  # T x L
    washout: int = 0
    time_step: float = 1.0

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def train_mask(self) -> np.ndarray:
        """True for rows usable in readout training (post-washout)."""
        mask = np.ones(len(self), dtype=bool)
        mask[: self.washout] = False
        return mask

    def to_csv(self, path) -> None:
        n, k, l_ = self.states.shape[1], self.inputs.shape[1], self.outputs.shape[1]
        header = ["t"] + [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(k)] + [f"y_{i}" for i in range(l_)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t in range(len(self)):
                row = np.concatenate([self.states[t], self.inputs[t], self.outputs[t]])
                w.writerow([t] + [format(float(v), ".9g") for v in row])


class SpectralEstimate(NamedTuple):
    radius: float
    converged: bool
    iterations: int


def power_iteration(w, tol: float = 1e-8, max_iter: int = 1000, block: int = 16,
                    seed: int = 0) -> SpectralEstimate:
    """Spectral radius of a square matrix by block power (subspace) iteration.

    A block of ``block`` orthonormal vectors is iterated and the Ritz values of
    the projected matrix are extracted each sweep, so complex-conjugate or
    near-degenerate dominant eigenvalues are handled. Iteration stops when the
    relative residual ``|A v - theta v| / |theta|`` of the dominant Ritz pair
    drops below ``tol`` and its modulus has stopped moving (a small residual
    alone does not pin the eigenvalue of a strongly non-normal matrix).
    """
    A = np.asarray(w, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("spectral radius needs a square matrix")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    n = A.shape[0]
    if n == 0:
        raise DomainError("empty matrix")
    rng = np.random.default_rng(seed)
    # exact nilpotency probe: A^n v vanishes for structurally nilpotent A
    v = rng.standard_normal(n)
    for _ in range(n):
        v = A @ v
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return SpectralEstimate(0.0, True, 0)
        v /= nv
    # the block must be a proper subspace, or iterating cannot filter anything;
    # tiny matrices are projected whole
    p = n if n <= 4 else min(block, n // 2)
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    theta_abs = prev = 0.0
    for k in range(1, max_iter + 1):
        Z = A @ Q
        vals, vecs = np.linalg.eig(Q.T @ Z)
        i = int(np.argmax(np.abs(vals)))
        theta = vals[i]
        prev, theta_abs = theta_abs, float(abs(theta))
        if k > 1 and theta_abs > 0.0 and abs(theta_abs - prev) <= tol * theta_abs:
            v = Q @ vecs[:, i]
            resid = np.linalg.norm(A @ v - theta * v) / (theta_abs * np.linalg.norm(v))
            if resid < tol:
                return SpectralEstimate(theta_abs, True, k)
        Q, _ = np.linalg.qr(Z)
    return SpectralEstimate(theta_abs, False, max_iter)


def spectral_radius(w, tol: float = 1e-8, max_iter: int = 1000, dense_limit: int = 2000) -> float:
    """Largest eigenvalue modulus.

    Falls back to a dense eigensolve when the iteration stalls (clusters of
    equal-modulus eigenvalues larger than the block) and ``n <= dense_limit``;
    otherwise warns with :class:`ConvergenceWarning` and returns the best estimate.
    """
    est = power_iteration(w, tol=tol, max_iter=max_iter)
    if est.converged:
        return est.radius
    a = np.asarray(w, dtype=float)
    if a.shape[0] <= dense_limit:
        log.debug("power iteration stalled after %d sweeps, using dense eigenvalues", est.iterations)
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    warnings.warn(f"spectral radius did not converge after {est.iterations} iterations; "
                  f"best estimate {est.radius:.9g}", ConvergenceWarning, stacklevel=2)
    return est.radius


def _sparse_uniform(n: int, connectivity: float, rng: RngState) -> np.ndarray:
    # fixed in-degree per row, so the connection graph always contains a cycle
    k = max(1, int(round(connectivity * n)))
    w = np.zeros((n, n))
    for i in range(n):
        cols = rng.choice(n, k)
        w[i, cols] = rng.uniform(-1.0, 1.0, k)
    return w


def init_topology(cfg: ReservoirConfig, w_self: Optional[np.ndarray] = None) -> ReservoirTopology:
    """Random reservoir weights, with ``w_self`` rescaled to ``cfg.spectral_radius``.

    All draws come from substreams of ``cfg.seed``. Passing ``w_self``
    bypasses the random recurrent draw (used by tests and for imported
    topologies); it is still rescaled.
    """
    cfg.validate()
    root = RngState(cfg.seed, ("topology",))
    n = cfg.n_nodes
    w_in = root.substream("w_in").uniform(-1.0, 1.0, (n, cfg.n_inputs)) * cfg.input_scale
    w_fb = root.substream("w_fb").uniform(-1.0, 1.0, (n, cfg.n_outputs)) * cfg.feedback_scale

    if w_self is not None:
        candidates = [np.array(w_self, dtype=float)]
        if candidates[0].shape != (n, n):
            raise DimensionError(f"w_self must be {n}x{n}")
    else:
        candidates = (_sparse_uniform(n, cfg.connectivity, root.substream("w_self", a))
                      for a in range(MAX_TOPOLOGY_ATTEMPTS))
    for attempt, w in enumerate(candidates):
        rho = spectral_radius(w)
        if rho > 1e-12 * max(float(np.linalg.norm(w)), 1e-300):
            w = w * (cfg.spectral_radius / rho)
            return ReservoirTopology(w_in, w, w_fb, spectral_radius(w))
        log.debug("recurrent draw %d has zero spectral radius, retrying", attempt)
    raise TopologyError(f"no recurrent matrix with nonzero spectral radius after "
                        f"{MAX_TOPOLOGY_ATTEMPTS if w_self is None else 1} attempt(s)")


def features(x, u, mode: str = "bias_input_state") -> np.ndarray:
    """Readout feature vector (or matrix, one row per time step)."""
    x = np.asarray(x, dtype=float)
    if mode == "state_only":
        return x
    if mode != "bias_input_state":
        raise DomainError(f"feature mode must be one of {FEATURE_MODES}")
    u = np.asarray(u, dtype=float)
    if x.ndim == 1:
        return np.concatenate([[1.0], u.ravel(), x])
    return np.hstack([np.ones((x.shape[0], 1)), u.reshape(x.shape[0], -1), x])


def feature_dim(cfg: ReservoirConfig, mode: str) -> int:
    return cfg.n_nodes if mode == "state_only" else 1 + cfg.n_inputs + cfg.n_nodes


def step(x, u, y_prev, topo: ReservoirTopology, cfg: ReservoirConfig, rng: RngState) -> np.ndarray:
    """Advance the reservoir state by one tick."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y_prev = np.atleast_1d(np.asarray(y_prev, dtype=float))
    n = topo.n_nodes
    if x.shape != (n,) or u.shape != (topo.w_in.shape[1],) or y_prev.shape != (topo.w_fb.shape[1],):
        raise DimensionError(
            f"expected x:{(n,)} u:{(topo.w_in.shape[1],)} y:{(topo.w_fb.shape[1],)}, "
            f"got {x.shape} {u.shape} {y_prev.shape}")
    return _step(x, u, y_prev, topo, cfg, rng)


def _step(x, u, y_prev, topo, cfg, rng):
    z = topo.w_in @ u + topo.w_fb @ y_prev + topo.w_self @ x
    nxt = cfg.gain * np.tanh(z) + (1.0 - cfg.leak) * x
    if cfg.noise_amp > 0:
        nxt -= cfg.noise_amp * rng.normal(x.shape[0])
    return np.clip(nxt, -1.0, 1.0)


def _as_2d(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a T x d array")
    return a


def run_teacher_forced(inputs, targets, topo: ReservoirTopology, cfg: ReservoirConfig,
                       rng: RngState, x0=None) -> StateTrace:
    """Drive the reservoir with ``inputs`` while the feedback path sees the teacher.

    Row ``t`` of the trace is the state after consuming ``inputs[t]`` and
    ``targets[t-1]`` (zero for ``t = 0``); the readout is trained to map it to
    ``targets[t]``. The first ``cfg.washout`` rows are flagged.
    """
    U = _as_2d(inputs, "inputs")
    Y = _as_2d(targets, "targets")
    T = U.shape[0]
    if Y.shape[0] != T:
        raise DimensionError("inputs and targets must have the same length")
    if U.shape[1] != topo.w_in.shape[1] or Y.shape[1] != topo.w_fb.shape[1]:
        raise DimensionError("input/target widths do not match the topology")
    if T <= cfg.washout:
        raise DomainError(f"sequence length {T} must exceed washout {cfg.washout}")
    n = topo.n_nodes
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (n,):
        raise DimensionError("x0 has the wrong length")
    X = np.empty((T, n))
    y_prev = np.zeros(Y.shape[1])
    for t in range(T):
        x = _step(x, U[t], y_prev, topo, cfg, rng)
        X[t] = x
        y_prev = Y[t]
    return StateTrace(X, U, Y, washout=cfg.washout)


def run_free(x0, w_out, steps: int, topo: ReservoirTopology, cfg: ReservoirConfig, rng: RngState,
             external_inputs=None, y0=None, feature_mode: str = "bias_input_state") -> StateTrace:
    """Closed-loop generation: each output ``w_out @ features(x, u)`` feeds the next step.

    ``y0`` is the output fed back on the first step (zeros by default), e.g.
    the last teacher value after teacher-forced training.
    """
    n, k, l_ = topo.n_nodes, topo.w_in.shape[1], topo.w_fb.shape[1]
    w_out = np.atleast_2d(np.asarray(w_out, dtype=float))
    d = n if feature_mode == "state_only" else 1 + k + n
    if w_out.shape != (l_, d):
        raise DimensionError(f"w_out must be {l_}x{d} for feature mode {feature_mode!r}, got {w_out.shape}")
    if external_inputs is None:
        U = np.zeros((steps, k))
    else:
        U = _as_2d(external_inputs, "external_inputs")
        if U.shape != (steps, k):
            raise DimensionError(f"external_inputs must be {steps}x{k}")
    x = np.array(x0, dtype=float)
    if x.shape != (n,):
        raise DimensionError("x0 has the wrong length")
    y = np.zeros(l_) if y0 is None else np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    X = np.empty((steps, n))
    Y = np.empty((steps, l_))
    for t in range(steps):
        x = _step(x, U[t], y, topo, cfg, rng)
        y = w_out @ features(x, U[t], feature_mode)
        X[t] = x
        Y[t] = y
    return StateTrace(X, U, Y, washout=0)
