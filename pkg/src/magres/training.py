"""Readout training and evaluation metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateChannelError, DimensionError, DomainError, SingularSystemError
from .reservoir import FEATURE_MODES, StateTrace, features


@dataclass
class RidgeConfig:
    lam: float = 1e-6
    feature_mode: str = "bias_input_state"

    def __post_init__(self):
        if not self.lam >= 0:
            raise DomainError("ridge parameter must be >= 0")
        if self.feature_mode not in FEATURE_MODES:
            raise DomainError(f"feature_mode must be one of {FEATURE_MODES}")

    def as_dict(self) -> dict:
        return asdict(self)


def ridge_solve(F, Y, lam: float) -> np.ndarray:
    """Solve ``W = Y F^T (F F^T + lam I)^-1``.

    Args:
        F: features x time matrix.
        Y: outputs x time matrix.
        lam: ridge parameter; 0 gives the plain normal-equation (Wiener-Hopf)
            solution and requires ``F`` to have full row rank.

    Returns:
        outputs x features readout matrix.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if F.shape[1] != Y.shape[1]:
        raise DimensionError(f"F has {F.shape[1]} time steps but Y has {Y.shape[1]}")
    if lam < 0:
        raise DomainError("ridge parameter must be >= 0")
    G = F @ F.T
    if lam > 0:
        G[np.diag_indices_from(G)] += lam
    else:
        ev = np.linalg.eigvalsh(G)
        if ev[0] <= ev[-1] * G.shape[0] * np.finfo(float).eps:
            raise SingularSystemError("feature correlation matrix is singular; use lam > 0")
    try:
        factor = scipy.linalg.cho_factor(G, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("feature correlation matrix is not positive definite; "
                                  "use lam > 0") from exc
    # W G = Y F^T, G symmetric  =>  G W^T = F Y^T
    return scipy.linalg.cho_solve(factor, F @ Y.T).T


def feature_matrix(trace: StateTrace, mode: str) -> np.ndarray:
    """Time x features matrix for every row of ``trace``."""
    return features(trace.states, trace.inputs, mode)


def train_readout(trace: StateTrace, targets, cfg: RidgeConfig) -> np.ndarray:
    """Fit ``W_out`` on the post-washout rows of ``trace``.

    ``targets[t]`` is the desired readout for row ``t`` of the trace.
    """
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != len(trace):
        raise DimensionError("targets must have one row per trace step")
    mask = trace.train_mask
    F = feature_matrix(trace, cfg.feature_mode)[mask]
    return ridge_solve(F.T, Y[mask].T, cfg.lam)


def predict(trace: StateTrace, w_out, mode: str) -> np.ndarray:
    return feature_matrix(trace, mode) @ np.atleast_2d(w_out).T


def nrmse(y, target) -> float:
    """Root-mean-square error over target standard deviation, averaged over channels."""
    y = np.asarray(y, dtype=float)
    target = np.asarray(target, dtype=float)
    if y.shape != target.shape:
        raise DimensionError(f"shape mismatch {y.shape} vs {target.shape}")
    if y.ndim == 1:
        y, target = y[:, None], target[:, None]
    var = target.var(axis=0)
    if np.any(var == 0):
        raise DomainError("target has zero variance")
    mse = ((y - target) ** 2).mean(axis=0)
    return float(np.mean(np.sqrt(mse / var)))


def srr(y, d, u, norm: str = "l2") -> float:
    """Symbol recovery rate ``1 - |y - d| / |u - d|``.

    ``y`` is the equalizer output, ``d`` the transmitted symbols and ``u``
    the channel output, all over the same window. ``norm`` is ``"l2"`` or
    ``"l1"``.
    """
    y, d, u = (np.ravel(np.asarray(a, dtype=float)) for a in (y, d, u))
    if not (y.shape == d.shape == u.shape):
        raise DimensionError("y, d and u must have equal lengths")
    ord_ = {"l2": 2, "l1": 1}.get(norm)
    if ord_ is None:
        raise DomainError("norm must be 'l2' or 'l1'")
    denom = np.linalg.norm(u - d, ord_)
    if denom == 0:
        raise DegenerateChannelError("SRR undefined: channel output equals the transmitted "
                                     "symbols (|u - d| = 0)")
    return float(1.0 - np.linalg.norm(y - d, ord_) / denom)


def pam_alphabet(levels: int) -> np.ndarray:
    """Zero-mean, equally spaced amplitude levels spanning [-1, 1]."""
    if levels < 2:
        raise DomainError("levels must be >= 2")
    return (2.0 * np.arange(levels) - (levels - 1)) / (levels - 1)


def bit_error_rate(y, d, levels: int = 2) -> float:
    """Fraction of symbols misdetected by a nearest-level slicer (reference metric)."""
    y = np.ravel(np.asarray(y, dtype=float))
    d = np.ravel(np.asarray(d, dtype=float))
    if y.shape != d.shape:
        raise DimensionError("y and d must have equal lengths")
    alphabet = pam_alphabet(levels)
    decided = alphabet[np.argmin(np.abs(y[:, None] - alphabet[None, :]), axis=1)]
    return float(np.mean(decided != d))
