"""Signed weights realized as differential conductance pairs.

Each synaptic weight ``W[i, j]`` becomes a pair of non-negative conductances
``g_plus[i, j]``/``g_minus[i, j]``; the current into neuron ``i`` is the
Kirchhoff sum ``sum_j (g_plus - g_minus)[i, j] * v[j]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateScaleError, DimensionError, DomainError

DEFAULT_G_MAX = 1e-3  # siemens


@dataclass(frozen=True)
class ConductanceNetwork:
    g_plus: np.ndarray
    g_minus: np.ndarray
    g_scale: float  # siemens per unit weight
    g_max: float
    levels: int | None = None  # set once quantized

    def __post_init__(self):
        if self.g_plus.shape != self.g_minus.shape:
            raise DimensionError("g_plus and g_minus must have the same shape")
        for g in (self.g_plus, self.g_minus):
            if np.any(g < 0) or np.any(g > self.g_max * (1 + 1e-12)):
                raise DomainError("conductances must lie in [0, g_max]")
        if np.any((self.g_plus > 0) & (self.g_minus > 0)):
            raise DomainError("at most one of g_plus/g_minus may be nonzero per synapse")

    @property
    def shape(self):
        return self.g_plus.shape

    def weights(self) -> np.ndarray:
        """Effective signed weights ``(g_plus - g_minus) / g_scale``."""
        return (self.g_plus - self.g_minus) / self.g_scale

    def to_csv(self, path) -> None:
        """Write ``row,col,g_plus,g_minus`` for every synapse (siemens)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "col", "g_plus", "g_minus"])
            rows, cols = self.shape
            for i in range(rows):
                for j in range(cols):
                    w.writerow([i, j, repr(float(self.g_plus[i, j])), repr(float(self.g_minus[i, j]))])

    @classmethod
    def from_csv(cls, path, g_scale: float, g_max: float) -> "ConductanceNetwork":
        with open(path, newline="") as fh:
            recs = list(csv.DictReader(fh))
        n_rows = max(int(r["row"]) for r in recs) + 1
        n_cols = max(int(r["col"]) for r in recs) + 1
        gp = np.zeros((n_rows, n_cols))
        gm = np.zeros((n_rows, n_cols))
        for r in recs:
            i, j = int(r["row"]), int(r["col"])
            gp[i, j] = float(r["g_plus"])
            gm[i, j] = float(r["g_minus"])
        return cls(gp, gm, g_scale, g_max)


def weights_to_conductances(W, g_max: float = DEFAULT_G_MAX, allow_zero: bool = False) -> ConductanceNetwork:
    """Map signed weights onto a differential conductance pair.

    The largest ``|W|`` is mapped to ``g_max``. An all-zero ``W`` raises
    :class:`DegenerateScaleError` unless ``allow_zero`` is set, in which case
    a zero network with ``g_scale = g_max`` is returned.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if g_max <= 0:
        raise DomainError("g_max must be > 0")
    w_max = float(np.max(np.abs(W))) if W.size else 0.0
    if w_max == 0.0:
        if not allow_zero:
            raise DegenerateScaleError("all-zero weight matrix has no conductance scale")
        z = np.zeros_like(W)
        return ConductanceNetwork(z, z.copy(), g_max, g_max)
    g_scale = g_max / w_max
    g = W * g_scale
    g_plus = np.where(W > 0, g, 0.0)
    g_minus = np.where(W < 0, -g, 0.0)
    # exact reconstruction for the largest entries
    g_plus = np.minimum(g_plus, g_max)
    g_minus = np.minimum(g_minus, g_max)
    return ConductanceNetwork(g_plus, g_minus, g_scale, g_max)


def quantize(net: ConductanceNetwork, levels: int) -> ConductanceNetwork:
    """Snap every conductance to the nearest of ``levels`` uniform states in ``[0, g_max]``."""
    if levels < 2:
        raise DomainError("levels must be >= 2")
    step = net.g_max / (levels - 1)

    def snap(g):
        k = np.clip(np.rint(g / step), 0, levels - 1)
        return k * step

    return replace(net, g_plus=snap(net.g_plus), g_minus=snap(net.g_minus), levels=int(levels))


def input_currents(net: ConductanceNetwork, v) -> np.ndarray:
    """Kirchhoff current into each row: ``(g_plus - g_minus) @ v`` in amperes."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != net.shape[1]:
        raise DimensionError(f"voltage vector of length {net.shape[1]} expected, got shape {v.shape}")
    return net.g_plus @ v - net.g_minus @ v
