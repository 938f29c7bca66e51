"""Synthetic link data.

Gaussian-modulated key pulses are interleaved with bright reference pulses,
sent through a lossy, noisy, phase-drifting channel, and measured by a noisy
homodyne detector that switches quadratures at random.

Noise placement: the channel op is a pure rotate + scale + excess-noise map
(added variance T*xi per quadrature); every vacuum contribution, including the
loss-induced one, is attributed to the detection step, which adds variance
1 + nu_el after the sqrt(eta) scaling.  A key pulse therefore measures with
total variance eta*T*(V_A + xi) + 1 + nu_el, matching the covariance model.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import SystemParams

__all__ = [
    "PhaseDriftModel",
    "Frame",
    "modulate_key",
    "interleave_reference",
    "channel_apply",
    "homodyne_measure",
    "simulate_frame",
    "stage_rng",
]

_MAGIC = b"CVQKDFR1"
_VERSION = 1

# Named sub-streams split off a frame's master seed.  The spawn key is the
# stream's index in this tuple; documented so transcripts can be replayed.
RNG_STREAMS = ("modulation", "basis", "channel", "detector", "drift")


def stage_rng(seed: int, stream: str) -> np.random.Generator:
    """Deterministic per-stage generator from a 64-bit master seed."""
    idx = RNG_STREAMS.index(stream)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))


@dataclass(frozen=True)
class PhaseDriftModel:
    """Channel phase trajectory law.

    The drift law is a modeling choice: ``wiener`` takes independent Gaussian
    steps per pulse (default step keeps the drift over a 1100-pulse
    compensation period at the 0.01 rad scale); ``constant`` holds a fixed
    offset and exists mainly for unit tests.
    """

    kind: str = "wiener"
    constant_phi: float = 0.0
    wiener_step_sigma: float = 1.0e-4

    def __post_init__(self):
        if self.kind not in ("constant", "wiener"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.wiener_step_sigma < 0:
            raise ValueError("wiener_step_sigma must be >= 0")

    def trajectory(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.constant_phi)
        steps = rng.normal(0.0, self.wiener_step_sigma, n)
        return self.constant_phi + np.cumsum(steps)


@dataclass
class Frame:
    """One transmission block; all arrays share one length."""

    alice_x: np.ndarray
    alice_p: np.ndarray
    roles: np.ndarray             # 0 = key, 1 = reference
    basis_bits: np.ndarray        # 0 = x, 1 = p
    phase_trajectory: np.ndarray
    bob_meas: np.ndarray
    rng_seed: int

    def __post_init__(self):
        n = self.alice_x.size
        for name in ("alice_p", "roles", "basis_bits", "phase_trajectory", "bob_meas"):
            if getattr(self, name).size != n:
                raise ValueError(f"array {name} has mismatched length")

    @property
    def n_pulses(self) -> int:
        return self.alice_x.size

    @property
    def key_mask(self) -> np.ndarray:
        return self.roles == 0

    @property
    def ref_mask(self) -> np.ndarray:
        return self.roles == 1

    # -- persistence --------------------------------------------------------

    _ARRAYS = ("alice_x", "alice_p", "roles", "basis_bits", "phase_trajectory", "bob_meas")

    def save(self, path) -> None:
        """Binary layout: 16-byte magic+version header, then little-endian
        float64 arrays in declared order, lengths in the header."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", _VERSION, 0))
            fh.write(struct.pack("<QQ", self.n_pulses, self.rng_seed))
            for name in self._ARRAYS:
                fh.write(np.ascontiguousarray(getattr(self, name), dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Frame":
        raw = Path(path).read_bytes()
        if raw[:8] != _MAGIC:
            raise ValueError("not a frame file (bad magic)")
        version, _ = struct.unpack("<II", raw[8:16])
        if version != _VERSION:
            raise ValueError(f"unsupported frame version {version}")
        n, seed = struct.unpack("<QQ", raw[16:32])
        arrays = {}
        offset = 32
        for name in cls._ARRAYS:
            arrays[name] = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).copy()
            offset += 8 * n
        arrays["roles"] = arrays["roles"].astype(np.uint8)
        arrays["basis_bits"] = arrays["basis_bits"].astype(np.uint8)
        return cls(rng_seed=seed, **arrays)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "role", "basis", "alice_x", "alice_p",
                             "phase", "bob_meas"])
            for i in range(self.n_pulses):
                writer.writerow([i, int(self.roles[i]), int(self.basis_bits[i]),
                                 repr(float(self.alice_x[i])), repr(float(self.alice_p[i])),
                                 repr(float(self.phase_trajectory[i])),
                                 repr(float(self.bob_meas[i]))])


def modulate_key(params: SystemParams, count: int, rng: np.random.Generator):
    """I.i.d. centered Gaussian symbols with variance V_A per quadrature."""
    if count <= 0:
        raise ValueError("count must be positive")
    sigma = math.sqrt(params.v_a)
    return rng.normal(0.0, sigma, count), rng.normal(0.0, sigma, count)


def interleave_reference(key_x, key_p, v_a, *, ref_snr_advantage_db: float = 34.0,
                         period: int = 1000, refs_per_period: int = 100):
    """Insert bright reference pulses ahead of every ``period`` key pulses.

    References are fixed public constellation points alternating (A, 0) and
    (0, A), with A^2 / V_A set by the SNR advantage, so both phase correlators
    stay well conditioned.  Effective overhead is refs_per_period / period.

    Returns (x, p, roles) with roles 1 marking references.
    """
    if refs_per_period >= period:
        raise ValueError("refs_per_period must be smaller than period")
    if refs_per_period < 0 or period <= 0:
        raise ValueError("period and refs_per_period must be positive")
    key_x = np.asarray(key_x, float)
    key_p = np.asarray(key_p, float)
    n_key = key_x.size
    n_periods = max(1, math.ceil(n_key / period))
    amp = math.sqrt(v_a * 10.0 ** (ref_snr_advantage_db / 10.0))

    total = n_key + n_periods * refs_per_period
    x = np.empty(total)
    p = np.empty(total)
    roles = np.zeros(total, dtype=np.uint8)
    pos = 0
    consumed = 0
    ref_idx = 0
    for _ in range(n_periods):
        for _ in range(refs_per_period):
            if ref_idx % 2 == 0:
                x[pos], p[pos] = amp, 0.0
            else:
                x[pos], p[pos] = 0.0, amp
            roles[pos] = 1
            ref_idx += 1
            pos += 1
        take = min(period, n_key - consumed)
        x[pos:pos + take] = key_x[consumed:consumed + take]
        p[pos:pos + take] = key_p[consumed:consumed + take]
        pos += take
        consumed += take
    return x[:pos], p[:pos], roles[:pos]


def channel_apply(x, p, T, xi, phases, rng: np.random.Generator):
    """Rotate each pulse by its phase, scale by sqrt(T), add excess noise T*xi.

    Rotation convention: x' = x cos(phi) + p sin(phi), p' = -x sin(phi) + p cos(phi).
    """
    if not 0 < T <= 1:
        raise ValueError(f"T must lie in (0, 1], got {T}")
    if xi < 0:
        raise ValueError("xi must be >= 0")
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    phases = np.asarray(phases, float)
    c, s = np.cos(phases), np.sin(phases)
    scale = math.sqrt(T)
    out_x = scale * (x * c + p * s)
    out_p = scale * (-x * s + p * c)
    if xi > 0:
        noise_sigma = math.sqrt(T * xi)
        out_x = out_x + rng.normal(0.0, noise_sigma, x.size)
        out_p = out_p + rng.normal(0.0, noise_sigma, x.size)
    return out_x, out_p


def homodyne_measure(chan_x, chan_p, eta, nu_el, basis_bits, rng: np.random.Generator):
    """sqrt(eta) * selected quadrature + N(0, 1 + nu_el).

    The unit term carries the shot noise and the loss-induced vacuum, so a key
    pulse measures with total variance eta*T*(V_A + xi) + 1 + nu_el.
    """
    chan_x = np.asarray(chan_x, float)
    chan_p = np.asarray(chan_p, float)
    basis_bits = np.asarray(basis_bits)
    if basis_bits.size != chan_x.size:
        raise ValueError("basis_bits must match the pulse count")
    selected = np.where(basis_bits == 0, chan_x, chan_p)
    return math.sqrt(eta) * selected + rng.normal(0.0, math.sqrt(1.0 + nu_el), chan_x.size)


def simulate_frame(params: SystemParams, n_key: int, *, seed: int,
                   drift: PhaseDriftModel | None = None,
                   period: int = 1000, refs_per_period: int | None = None,
                   ref_snr_advantage_db: float = 34.0) -> Frame:
    """Generate one frame end to end; byte-identical for identical inputs."""
    if drift is None:
        drift = PhaseDriftModel()
    if refs_per_period is None:
        refs_per_period = round(params.alpha * period)
    ax, ap = modulate_key(params, n_key, stage_rng(seed, "modulation"))
    x, p, roles = interleave_reference(
        ax, ap, params.v_a, ref_snr_advantage_db=ref_snr_advantage_db,
        period=period, refs_per_period=refs_per_period)
    total = x.size
    phases = drift.trajectory(total, stage_rng(seed, "drift"))
    cx, cp = channel_apply(x, p, params.transmittance, params.xi, phases,
                           stage_rng(seed, "channel"))
    basis = stage_rng(seed, "basis").integers(0, 2, total).astype(np.uint8)
    meas = homodyne_measure(cx, cp, params.eta, params.nu_el, basis,
                            stage_rng(seed, "detector"))
    return Frame(alice_x=x, alice_p=p, roles=roles, basis_bits=basis,
                 phase_trajectory=phases, bob_meas=meas, rng_seed=seed)
