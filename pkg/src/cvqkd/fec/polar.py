"""Polar codes: reliability construction, transform, and successive cancellation.

The transform is the n-fold Kronecker power of [[1, 0], [1, 1]] in natural
(non bit-reversed) order; over GF(2) it is an involution, so the same routine
serves encoding and source transforms.

Construction ranks the synthetic bit channels either by Gaussian-approximation
density evolution of LLR means at a BIAWGN design SNR (``method="ga"``) or by
the Bhattacharyya/erasure recursion on a BEC proxy (``method="bec"``); both
are deterministic.  The frozen set is the least reliable complement of the
payload.

The SC decoder uses the exact check kernel log((1+e^{a+b})/(e^a+e^b)) in a
numerically stable form, supports nonzero frozen values (needed for source
coding with side information), decodes whole batches at once, and breaks LLR
ties toward bit 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "PolarSpec",
    "polar_construct",
    "polar_transform",
    "polar_encode",
    "polar_decode",
    "biawgn_capacity",
    "biawgn_snr_for_capacity",
]


@dataclass(frozen=True)
class PolarSpec:
    block_length: int
    frozen_set: np.ndarray          # sorted bit indices
    design_snr: float
    method: str = "ga"

    def __post_init__(self):
        n = self.block_length
        if n <= 0 or n & (n - 1):
            raise ValueError(f"block_length must be a power of two, got {n}")
        fs = np.asarray(self.frozen_set, dtype=np.int64)
        if fs.size and (fs.min() < 0 or fs.max() >= n or np.any(np.diff(fs) <= 0)):
            raise ValueError("frozen_set must be sorted unique indices within range")

    @property
    def payload_size(self) -> int:
        return self.block_length - self.frozen_set.size

    @property
    def rate(self) -> float:
        return self.payload_size / self.block_length

    @property
    def info_set(self) -> np.ndarray:
        mask = np.ones(self.block_length, dtype=bool)
        mask[self.frozen_set] = False
        return np.flatnonzero(mask)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# polar frozen set: n={self.block_length} "
                     f"design_snr={self.design_snr!r} method={self.method}\n")
            for i in self.frozen_set:
                fh.write(f"{int(i)}\n")

    @classmethod
    def load(cls, path) -> "PolarSpec":
        n = design = method = None
        idx = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if line.startswith("#"):
                for tok in line[1:].replace(":", " ").split():
                    if tok.startswith("n="):
                        n = int(tok[2:])
                    elif tok.startswith("design_snr="):
                        design = float(tok[11:])
                    elif tok.startswith("method="):
                        method = tok[7:]
            elif line:
                idx.append(int(line))
        return cls(block_length=n, frozen_set=np.array(sorted(idx), dtype=np.int64),
                   design_snr=design, method=method or "ga")


# -- Gaussian-approximation density evolution ---------------------------------

def _phi(x):
    """Chung et al. approximation of E[tanh(L/2)] deficit for L ~ N(x, 2x)."""
    x = np.asarray(x, float)
    out = np.empty_like(x)
    small = x < 10.0
    xs = np.clip(x[small], 1e-12, None)
    out[small] = np.exp(0.0218 - 0.4527 * xs ** 0.86)
    xl = x[~small]
    out[~small] = np.sqrt(np.pi / xl) * np.exp(-xl / 4.0) * (1.0 - 10.0 / (7.0 * xl))
    return np.clip(out, 0.0, 1.0)


def _phi_inv(y):
    y = np.asarray(y, float)
    lo = np.full_like(y, 1e-12)
    hi = np.full_like(y, 1e4)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        too_big = _phi(mid) > y          # phi decreasing: phi(mid) > y -> mid too small
        lo = np.where(too_big, mid, lo)
        hi = np.where(too_big, hi, mid)
    return 0.5 * (lo + hi)


def _ga_means(design_snr: float, n: int) -> np.ndarray:
    """Mean LLR of each synthetic channel at BIAWGN SNR ``design_snr`` (linear)."""
    m = np.array([4.0 * design_snr])     # channel LLR mean 2/sigma^2 = 2*snr*2
    while m.size < n:
        f = _phi_inv(1.0 - (1.0 - _phi(m)) ** 2)
        g = 2.0 * m
        m = np.stack([f, g], axis=1).reshape(-1)
    return m


def _bec_erasures(design_erasure: float, n: int) -> np.ndarray:
    z = np.array([design_erasure])
    while z.size < n:
        upper = 2.0 * z - z * z
        lower = z * z
        z = np.stack([upper, lower], axis=1).reshape(-1)
    return z


def polar_construct(design_snr: float, length: int, target_rate: float,
                    method: str = "ga") -> PolarSpec:
    """Frozen set of the ``length * (1 - target_rate)`` least reliable channels.

    ``design_snr`` is the linear BIAWGN SNR for "ga"; for "bec" it is reused
    as the erasure probability of the proxy channel.
    """
    if length <= 0 or length & (length - 1):
        raise ValueError(f"length must be a power of two, got {length}")
    payload = int(round(length * target_rate))
    if payload < 1 and target_rate > 0:
        raise ValueError("target_rate leaves no payload bits")
    if not 0 <= payload <= length:
        raise ValueError("target_rate out of range")
    n_frozen = length - payload
    if method == "ga":
        reliab = _ga_means(design_snr, length)      # larger mean = more reliable
        order = np.lexsort((np.arange(length), reliab))
    elif method == "bec":
        z = _bec_erasures(design_snr, length)       # larger erasure = less reliable
        order = np.lexsort((np.arange(length), -z))
    else:
        raise ValueError(f"unknown construction method {method!r}")
    frozen = np.sort(order[:n_frozen]).astype(np.int64)
    return PolarSpec(block_length=length, frozen_set=frozen,
                     design_snr=design_snr, method=method)


# -- transform and SC decoding -------------------------------------------------

def polar_transform(bits: np.ndarray) -> np.ndarray:
    """x = u F^{(x) log2 n} over GF(2); involutive; batched on the last axis."""
    x = np.asarray(bits, dtype=np.uint8).copy()
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        x = x.reshape(*x.shape[:-1], -1, 2 * h)
        x[..., :h] ^= x[..., h:]
        x = x.reshape(*x.shape[:-2], n)
        h *= 2
    return x


def polar_encode(spec: PolarSpec, payload_bits, frozen_values=None) -> np.ndarray:
    """Codeword of a payload; frozen positions default to zero."""
    payload = np.atleast_2d(np.asarray(payload_bits, dtype=np.uint8))
    batch = payload.shape[0]
    if payload.shape[1] != spec.payload_size:
        raise ValueError(f"payload must have {spec.payload_size} bits")
    u = np.zeros((batch, spec.block_length), dtype=np.uint8)
    if frozen_values is not None:
        u[:, spec.frozen_set] = np.atleast_2d(np.asarray(frozen_values, np.uint8))
    u[:, spec.info_set] = payload
    x = polar_transform(u)
    return x if np.asarray(payload_bits).ndim > 1 else x[0]


def _cn(a, b):
    """Exact polar check kernel, elementwise and stable."""
    s = np.sign(a) * np.sign(b)
    s[s == 0] = 1.0
    m = np.minimum(np.abs(a), np.abs(b))
    corr = np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))
    return s * m + corr


def polar_decode(spec: PolarSpec, llrs, frozen_values=None):
    """Successive cancellation decode of one batch.

    ``llrs``: (batch, n) channel LLRs, positive favouring bit 0.
    ``frozen_values``: (batch, n_frozen) values at the frozen positions
    (defaults to zeros).

    Returns (payload, u_hat, x_hat): the information bits, the full input
    estimate, and its re-encoded codeword.  All-zero LLR positions decode
    deterministically toward bit 0 (documented tie-break); callers needing a
    verified result compare an out-of-band hash, since plain SC has no
    internal success signal.
    """
    llrs = np.atleast_2d(np.asarray(llrs, float))
    batch, n = llrs.shape
    if n != spec.block_length:
        raise ValueError(f"llr length {n} != block length {spec.block_length}")
    frozen_mask = np.zeros(n, dtype=bool)
    frozen_mask[spec.frozen_set] = True
    fvals = np.zeros((batch, n), dtype=np.uint8)
    if frozen_values is not None:
        fv = np.atleast_2d(np.asarray(frozen_values, np.uint8))
        if fv.shape != (batch, spec.frozen_set.size):
            raise ValueError("frozen_values shape mismatch")
        fvals[:, spec.frozen_set] = fv
    u_hat = np.zeros((batch, n), dtype=np.uint8)

    def recurse(ll, offset):
        width = ll.shape[1]
        if width == 1:
            if frozen_mask[offset]:
                bit = fvals[:, offset]
            else:
                bit = (ll[:, 0] < 0).astype(np.uint8)
            u_hat[:, offset] = bit
            return bit[:, None].copy()
        half = width // 2
        a, b = ll[:, :half], ll[:, half:]
        x_left = recurse(_cn(a, b), offset)
        g = b + (1.0 - 2.0 * x_left) * a
        x_right = recurse(g, offset + half)
        return np.concatenate([x_left ^ x_right, x_right], axis=1)

    x_hat = recurse(llrs, 0)
    payload = u_hat[:, spec.info_set]
    return payload, u_hat, x_hat


# -- BIAWGN capacity helpers (design-SNR matching for non-Gaussian channels) --

def biawgn_capacity(snr_linear: float, n_grid: int = 20001) -> float:
    """Capacity in bits of the binary-input AWGN channel at Es/N0 = snr."""
    if snr_linear <= 0:
        return 0.0
    sigma = 1.0 / math.sqrt(snr_linear)
    y = np.linspace(-1 - 10 * sigma, 1 + 10 * sigma, n_grid)
    p1 = np.exp(-0.5 * ((y - 1) / sigma) ** 2)
    p0 = np.exp(-0.5 * ((y + 1) / sigma) ** 2)
    mix = 0.5 * (p0 + p1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.where(p1 > 0, p1 * np.log2(2 * p1 / (p0 + p1)), 0.0)
    val = np.trapz(kern, y) / (sigma * math.sqrt(2 * math.pi))
    return float(min(max(val, 0.0), 1.0))


def biawgn_snr_for_capacity(capacity: float) -> float:
    """Inverse of `biawgn_capacity` by bisection."""
    if capacity <= 0:
        return 0.0
    if capacity >= 1:
        raise ValueError("capacity must be < 1")
    lo, hi = 1e-6, 1e4
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if biawgn_capacity(mid, n_grid=4001) < capacity:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)
