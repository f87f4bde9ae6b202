"""Behavioral models of low-barrier-magnet stochastic neurons.

The analog stochastic neuron (ASN) produces a noisy tanh response between
the supply rails; the binary stochastic neuron (BSN, "p-bit") produces one
of the two rails with a tanh-shaped probability. Both are evaluated from an
explicit :class:`~magres.rng.RngState`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .rng import RngState

MU0 = 4e-7 * math.pi  # vacuum permeability, T·m/A
K_B = 1.380649e-23  # Boltzmann constant, J/K
ROOM_TEMPERATURE = 300.0

NOISE_ENVELOPES = ("constant", "saturating")
NOISE_PROCESSES = ("white", "correlated")


def energy_barrier_from_material(M_s: float, H_k: float, volume: float,
                                 temperature: float = ROOM_TEMPERATURE) -> float:
    """Uniaxial anisotropy barrier ``mu0*M_s*H_k*volume/2`` in units of kT.

    Args:
        M_s: saturation magnetization (A/m).
        H_k: anisotropy field (A/m).
        volume: free-layer volume (m^3); zero gives a zero barrier.
        temperature: kelvin.
    """
    if M_s <= 0 or H_k <= 0 or temperature <= 0:
        raise DomainError("M_s, H_k and temperature must be positive")
    if volume < 0:
        raise DomainError("volume must be non-negative")
    return MU0 * M_s * H_k * volume / 2.0 / (K_B * temperature)


@dataclass(frozen=True)
class MagnetParams:
    """Free-layer magnet. ``energy_barrier`` is in units of kT."""

    energy_barrier: float
    attempt_time: float = 1e-9
    saturation_magnetization: Optional[float] = None
    anisotropy_field: Optional[float] = None
    volume: Optional[float] = None
    temperature: float = ROOM_TEMPERATURE

    def __post_init__(self):
        if self.energy_barrier < 0:
            raise DomainError("energy_barrier must be >= 0")
        if self.attempt_time <= 0:
            raise DomainError("attempt_time must be > 0")
        material = (self.saturation_magnetization, self.anisotropy_field, self.volume)
        if all(v is not None for v in material):
            expected = energy_barrier_from_material(*material, temperature=self.temperature)
            if not math.isclose(self.energy_barrier, expected, rel_tol=1e-9, abs_tol=0.0):
                raise DomainError(
                    f"energy_barrier {self.energy_barrier} disagrees with material value {expected}")

    @classmethod
    def from_material(cls, M_s: float, H_k: float, volume: float, attempt_time: float = 1e-9,
                      temperature: float = ROOM_TEMPERATURE) -> "MagnetParams":
        u = energy_barrier_from_material(M_s, H_k, volume, temperature)
        return cls(u, attempt_time, M_s, H_k, volume, temperature)


def retention_time(m: MagnetParams) -> float:
    """Arrhenius state retention time ``tau0 * exp(U/kT)`` in seconds."""
    return m.attempt_time * math.exp(m.energy_barrier)


@dataclass(frozen=True)
class NeuronParams:
    """Behavioral constants of an ASN/BSN unit.

    ``beta`` defaults to 20/V so the linear region spans about +-0.1 V of the
    0.8 V supply. ``alpha0`` of 50 mV keeps the saturating envelope at least
    four standard deviations inside the rails everywhere.
    """

    v_dd: float = 0.8
    beta: float = 20.0
    alpha0: float = 0.05
    noise_envelope: str = "saturating"
    noise_process: str = "white"
    correlation_time: float = 10.0

    def __post_init__(self):
        if self.v_dd <= 0:
            raise DomainError("v_dd must be > 0")
        if self.beta <= 0:
            raise DomainError("beta must be > 0")
        if self.alpha0 < 0:
            raise DomainError("alpha0 must be >= 0")
        if self.noise_envelope not in NOISE_ENVELOPES:
            raise DomainError(f"noise_envelope must be one of {NOISE_ENVELOPES}")
        if self.noise_process not in NOISE_PROCESSES:
            raise DomainError(f"noise_process must be one of {NOISE_PROCESSES}")
        if self.noise_process == "correlated" and self.correlation_time <= 0:
            raise DomainError("correlation_time must be > 0")

    @property
    def rail(self) -> float:
        return self.v_dd / 2.0


def noise_amplitude(v_in, p: NeuronParams):
    """Envelope alpha(v_in) scaling the random term of the ASN."""
    v_in = np.asarray(v_in, dtype=float)
    if p.noise_envelope == "constant":
        return np.full_like(v_in, p.alpha0)
    return p.alpha0 * (1.0 - np.tanh(p.beta * v_in) ** 2)


def _unit_noise(shape, p: NeuronParams, rng: RngState) -> np.ndarray:
    xi = rng.normal(shape)
    if p.noise_process == "white":
        return xi
    # AR(1) with unit stationary variance; the carry lives on the stream.
    phi = math.exp(-1.0 / p.correlation_time)
    prev = rng.carry
    if prev is None or np.shape(prev) != np.shape(xi):
        rng.carry = np.asarray(xi, dtype=float)
        return rng.carry
    rng.carry = phi * prev + math.sqrt(1.0 - phi * phi) * xi
    return rng.carry


def asn_output(v_in, p: NeuronParams, rng: RngState):
    """One sample of the analog stochastic neuron output (volts).

    ``clamp(v_dd*tanh(beta*v_in)/2 + alpha(v_in)*r, -v_dd/2, v_dd/2)`` with
    ``r`` a unit-variance white or AR(1) sample. Accepts scalars or arrays;
    one variate is drawn per element.
    """
    v = np.asarray(v_in, dtype=float)
    mean = p.rail * np.tanh(p.beta * v)
    if p.alpha0 > 0:
        out = mean + noise_amplitude(v, p) * _unit_noise(v.shape, p, rng)
    else:
        out = mean
    out = np.clip(out, -p.rail, p.rail)
    return float(out) if out.ndim == 0 else out


def bsn_output(v_in, p: NeuronParams, rng: RngState):
    """One sample of the binary stochastic neuron: ``+v_dd/2`` w.p. ``(1+tanh(beta*v_in))/2``.

    Realized as ``sgn(tanh(beta*v_in) + r)`` with ``r`` uniform on (-1, 1).
    """
    v = np.asarray(v_in, dtype=float)
    r = rng.uniform(-1.0, 1.0, v.shape)
    out = np.where(np.tanh(p.beta * v) + r > 0, p.rail, -p.rail)
    return float(out) if out.ndim == 0 else out


@dataclass
class TransferTable:
    """Monte-Carlo characterization of the ASN transfer curve."""

    v_in: np.ndarray
    mean: np.ndarray
    min: np.ndarray
    max: np.ndarray

    def rows(self):
        return zip(self.v_in, self.mean, self.min, self.max)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["v_in", "mean", "min", "max"])
            for row in self.rows():
                w.writerow([format_g9(v) for v in row])

    def as_dict(self) -> dict:
        return {"v_in": self.v_in.tolist(), "mean": self.mean.tolist(),
                "min": self.min.tolist(), "max": self.max.tolist()}


def format_g9(x: float) -> str:
    """Locale-independent 9-significant-digit rendering."""
    s = format(float(x), ".9g")
    return "0" if s == "-0" else s


def characterize_transfer(p: NeuronParams, v_min: float, v_max: float, n_points: int,
                          samples_per_point: int, rng: RngState) -> TransferTable:
    """Sweep ``v_in`` over ``[v_min, v_max]`` and record mean/min/max of the ASN output."""
    if not v_min < v_max:
        raise DomainError("v_min must be < v_max")
    if n_points < 2:
        raise DomainError("n_points must be >= 2")
    if samples_per_point < 1:
        raise DomainError("samples_per_point must be >= 1")
    t = np.linspace(-1.0, 1.0, n_points)
    t = (t - t[::-1]) / 2.0  # exactly antisymmetric grid
    v = (v_min + v_max) / 2.0 + (v_max - v_min) / 2.0 * t
    if p.alpha0 == 0:
        curve = p.rail * np.tanh(p.beta * v)
        return TransferTable(v, curve, curve.copy(), curve.copy())
    if p.noise_process == "white":
        samples = np.asarray(asn_output(np.broadcast_to(v, (samples_per_point, n_points)), p, rng))
    else:
        # correlated noise evolves in time; one sweep-wide draw per sample tick
        samples = np.empty((samples_per_point, n_points))
        for k in range(samples_per_point):
            samples[k] = asn_output(v, p, rng)
    return TransferTable(v, samples.mean(axis=0), samples.min(axis=0), samples.max(axis=0))
