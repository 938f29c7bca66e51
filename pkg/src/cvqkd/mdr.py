"""Reconciliation front-ends: 8-dimensional rotation mapping and slice quantization.

Rotation mapping
----------------
Bob encodes a binary word u onto his normalized block y' by publishing an
orthogonal matrix M with M y' = u_s, u_s the antipodal unit vector
(-1)^u / sqrt(d).  M is realized by left multiplication in the dimension-d
Cayley-Dickson algebra (complex, quaternion or octonion numbers):

    alpha = u_s * conj(y'),   M v = alpha * v.

Since these algebras are alternative and compose norms, M is orthogonal and
(alpha * y') = u_s * (conj(y') * y') = u_s exactly.  The 8-coefficient vector
``alpha`` is the wire descriptor of the mapping.

The induced virtual channel seen by Alice (reverse reconciliation, Y = tX + Z)
is modeled per component as

    v_i ~ N( (-1)^{u_i} * mu, s^2 ),  mu = |Y| / (t |X| sqrt(d)),
    s^2 = sigma^2 / (t^2 |X|^2),

with the publicly known block norms acting as channel-state information; the
log-likelihood ratio is llr_i = 2 mu v_i / s^2.  This Gaussian model is an
approximation whose adequacy is pinned by the calibration tests.

Slice quantization
------------------
Bob maps each value to the 5-bit index of its interval among 2^5 equal-width
bins spanning +-span standard deviations; bit-plane i collects bit i of every
index (plane 4 is the sign plane for a symmetric config).  Per-level code
rates follow R_i = 1 - H(b_i | b_{<i}, X), the conditional entropy of plane i
given Alice's variable and the already-decoded planes, by numeric integration.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

__all__ = [
    "oct_mul",
    "mdr_build_mapping",
    "mapping_matrix",
    "mdr_alice_map",
    "mdr_llr",
    "normalize_blocks",
    "MdrBlock",
    "write_side_info_record",
    "read_side_info_records",
    "SliceConfig",
    "make_slice_config",
    "slice_quantize",
    "slice_rates",
    "slice_level_llr",
    "quantized_entropy",
]

LLR_CLIP = 1e6


# -- Cayley-Dickson algebra ---------------------------------------------------

@lru_cache(maxsize=None)
def _structure(d: int):
    """Structure tensor tens[k, i, j] with e_i e_j = sum_k tens[k,i,j] e_k."""
    if d not in (1, 2, 4, 8):
        raise ValueError("dimension must be one of 1, 2, 4, 8")
    idx = np.zeros((1, 1), dtype=int)
    sgn = np.ones((1, 1), dtype=int)
    conj_sign = np.array([1], dtype=int)
    n = 1
    while n < d:
        new_idx = np.zeros((2 * n, 2 * n), dtype=int)
        new_sgn = np.zeros((2 * n, 2 * n), dtype=int)
        for i in range(2 * n):
            for j in range(2 * n):
                if i < n and j < n:            # (a,0)(c,0) = (ac, 0)
                    new_idx[i, j] = idx[i, j]
                    new_sgn[i, j] = sgn[i, j]
                elif i < n <= j:               # (a,0)(0,d) = (0, d a)
                    jj = j - n
                    new_idx[i, j] = n + idx[jj, i]
                    new_sgn[i, j] = sgn[jj, i]
                elif j < n <= i:               # (0,b)(c,0) = (0, b conj(c))
                    ii = i - n
                    new_idx[i, j] = n + idx[ii, j]
                    new_sgn[i, j] = conj_sign[j] * sgn[ii, j]
                else:                          # (0,b)(0,d) = (-conj(d) b, 0)
                    ii, jj = i - n, j - n
                    new_idx[i, j] = idx[jj, ii]
                    new_sgn[i, j] = -conj_sign[jj] * sgn[jj, ii]
        idx, sgn = new_idx, new_sgn
        conj_sign = np.concatenate([conj_sign, -np.ones(n, dtype=int)])
        conj_sign[0] = 1
        n *= 2
    tens = np.zeros((d, d, d))
    ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    tens[idx, ii, jj] = sgn
    return tens


def oct_mul(a, b, d: int = 8) -> np.ndarray:
    """Algebra product a * b; inputs broadcast over leading axes."""
    tens = _structure(d)
    return np.einsum("kij,...i,...j->...k", tens, np.asarray(a, float),
                     np.asarray(b, float))


def _conj(a) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


def mdr_build_mapping(y, u_bits, d: int = 8) -> np.ndarray:
    """Mapping coefficients alpha with mapping_matrix(alpha) @ (y/|y|) = u_signed/sqrt(d).

    Deterministic; batched over leading axes.  Near-zero blocks are rejected.
    """
    y = np.asarray(y, float)
    u_bits = np.asarray(u_bits)
    norms = np.linalg.norm(y, axis=-1, keepdims=True)
    if np.any(norms < 1e-9):
        raise ValueError("block norm below 1e-9; mapping undefined")
    u_signed = (1.0 - 2.0 * u_bits.astype(float)) / math.sqrt(d)
    return oct_mul(u_signed, _conj(y / norms), d)


def mapping_matrix(alpha, d: int = 8) -> np.ndarray:
    """Dense orthogonal matrix of the left-multiplication mapping."""
    return np.einsum("kij,...i->...kj", _structure(d), np.asarray(alpha, float))


def mdr_alice_map(alpha, x_norm, d: int = 8) -> np.ndarray:
    """v = M x'; orthogonality preserves the unit norm."""
    return oct_mul(alpha, x_norm, d)


def mdr_llr(v, norm_x, norm_y, t, sigma2, d: int = 8) -> np.ndarray:
    """Per-component LLRs of the virtual binary channel (positive -> bit 0)."""
    v = np.asarray(v, float)
    norm_x = np.asarray(norm_x, float)
    norm_y = np.asarray(norm_y, float)
    if not np.all(np.isfinite(norm_x)) or not np.all(np.isfinite(norm_y)):
        raise ValueError("block norms must be finite")
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = 2.0 * t * norm_x * norm_y / (math.sqrt(d) * sigma2)
        llr = v * scale[..., None] if v.ndim > 1 else v * scale
    return np.clip(np.nan_to_num(llr, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP),
                   -LLR_CLIP, LLR_CLIP)


def normalize_blocks(values, d: int = 8):
    """Reshape a stream into d-vectors and normalize; returns (blocks, norms, used)."""
    values = np.asarray(values, float)
    n_blocks = values.size // d
    blocks = values[: n_blocks * d].reshape(n_blocks, d)
    norms = np.linalg.norm(blocks, axis=1)
    if np.any(norms < 1e-9):
        raise ValueError("encountered a block with norm below 1e-9")
    return blocks / norms[:, None], norms, n_blocks * d


@dataclass(frozen=True)
class MdrBlock:
    """One reconciliation block: the published side information plus state."""

    index: int
    alpha: np.ndarray       # 8 mapping coefficients
    norm_x: float
    norm_y: float


_RECORD = struct.Struct("<Q8ddd")


def write_side_info_record(fh, block: MdrBlock) -> None:
    payload = _RECORD.pack(block.index, *block.alpha.tolist(),
                           block.norm_x, block.norm_y)
    fh.write(struct.pack("<I", len(payload)))
    fh.write(payload)


def read_side_info_records(fh):
    out = []
    while True:
        head = fh.read(4)
        if not head:
            break
        (length,) = struct.unpack("<I", head)
        vals = _RECORD.unpack(fh.read(length))
        out.append(MdrBlock(index=vals[0], alpha=np.array(vals[1:9]),
                            norm_x=vals[9], norm_y=vals[10]))
    return out


# -- slice quantization -------------------------------------------------------

N_SLICES = 5


@dataclass(frozen=True)
class SliceConfig:
    """Equal-width 5-bit quantizer on the normalized (unit-variance) axis."""

    thresholds: np.ndarray          # 2^5 - 1 strictly increasing interior points
    span_sigmas: float

    def __post_init__(self):
        t = np.asarray(self.thresholds, float)
        if t.size != 2 ** N_SLICES - 1:
            raise ValueError(f"need {2**N_SLICES - 1} thresholds, got {t.size}")
        if np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be strictly increasing")


def make_slice_config(span_sigmas: float = 4.2) -> SliceConfig:
    edges = np.linspace(-span_sigmas, span_sigmas, 2 ** N_SLICES + 1)
    return SliceConfig(thresholds=edges[1:-1], span_sigmas=span_sigmas)


def slice_quantize(y_normalized, config: SliceConfig) -> np.ndarray:
    """Bit planes of the interval indices, shape (5, n); plane i is bit i."""
    idx = np.searchsorted(config.thresholds, np.asarray(y_normalized, float),
                          side="right")
    planes = np.empty((N_SLICES, idx.size), dtype=np.uint8)
    for i in range(N_SLICES):
        planes[i] = (idx >> i) & 1
    return planes


def _bin_probs_given_x(x_normalized, rho, config: SliceConfig) -> np.ndarray:
    """P(bin j | x) for Y' = rho X' + sqrt(1-rho^2) N(0,1); shape (n, 32)."""
    s = math.sqrt(max(1.0 - rho * rho, 1e-300))
    x = np.asarray(x_normalized, float)[:, None]
    edges = np.concatenate([[-np.inf], config.thresholds, [np.inf]])
    cdf = np.empty((x.size, edges.size))
    cdf[:, 0] = 0.0
    cdf[:, -1] = 1.0
    cdf[:, 1:-1] = ndtr((config.thresholds[None, :] - rho * x) / s)
    return np.diff(cdf, axis=1)


def _plane_bits(n_levels=N_SLICES):
    idx = np.arange(2 ** N_SLICES)
    return np.stack([(idx >> i) & 1 for i in range(n_levels)])  # (5, 32)


def _entropy(p):
    p = np.clip(p, 1e-300, 1.0)
    return -p * np.log2(p)


def slice_rates(snr: float, config: SliceConfig | None = None,
                n_grid: int = 4001):
    """Ideal per-level rates R_i = 1 - H(b_i | b_{<i}, X), low plane first.

    Returns (rates, info) where info carries the per-level conditional mutual
    informations I_i = I(b_i; X | b_{<i}) and marginal entropies used by the
    efficiency bookkeeping.
    """
    if snr <= 0:
        raise ValueError("snr must be positive")
    if config is None:
        config = make_slice_config()
    rho = math.sqrt(snr / (1.0 + snr))
    # Gauss quadrature over X' via a fine trapezoid on +-8 sigma
    xs = np.linspace(-8.0, 8.0, n_grid)
    wx = np.exp(-0.5 * xs * xs) / math.sqrt(2 * math.pi)
    wx /= wx.sum()
    probs = _bin_probs_given_x(xs, rho, config)          # (n_grid, 32)
    marg = wx @ probs                                     # P(bin)
    bits = _plane_bits()                                  # (5, 32)

    rates, infos, h_prior = [], [], []
    for level in range(N_SLICES):
        # group bins by the value of planes < level and this plane's bit
        group = np.zeros(2 ** N_SLICES, dtype=int)
        for j in range(level):
            group |= bits[j] << j
        n_groups = 2 ** level
        h_cond_x = 0.0   # H(b_level | b_<level, X)
        h_cond = 0.0     # H(b_level | b_<level)
        for g in range(n_groups):
            sel = group == g
            p_g_x = probs[:, sel]
            p1_x = p_g_x[:, bits[level, sel] == 1].sum(axis=1)
            p_tot_x = p_g_x.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                cond = np.where(p_tot_x > 1e-300, p1_x / np.maximum(p_tot_x, 1e-300), 0.0)
            h_bin = _entropy(cond) + _entropy(1.0 - cond)
            h_cond_x += float(np.sum(wx * p_tot_x * h_bin))
            p_g = marg[sel].sum()
            if p_g > 1e-300:
                p1 = marg[sel][bits[level, sel] == 1].sum() / p_g
                h_cond += p_g * float(_entropy(p1) + _entropy(1.0 - p1))
        rates.append(min(max(1.0 - h_cond_x, 0.0), 1.0))
        infos.append(h_cond - h_cond_x)
        h_prior.append(h_cond)
    return np.array(rates), {
        "mutual_info_per_level": np.array(infos),
        "prior_entropy_per_level": np.array(h_prior),
        "quantized_mutual_info": float(np.sum(infos)),
        "quantized_entropy": float(np.sum(h_prior)),
    }


def quantized_entropy(config: SliceConfig) -> float:
    """H(Q(Y')) of the quantizer output on unit-variance Gaussian input, bits."""
    edges = np.concatenate([[-np.inf], config.thresholds, [np.inf]])
    cdf = np.concatenate([[0.0], ndtr(config.thresholds), [1.0]])
    p = np.diff(cdf)
    return float(np.sum(_entropy(p)))


def slice_level_llr(x_normalized, decoded_planes, level: int, snr: float,
                    config: SliceConfig) -> np.ndarray:
    """Alice's LLR for plane ``level`` given X and the already-decoded planes.

    Positive LLR favours bit 0.  ``decoded_planes`` holds planes 0..level-1,
    shape (level, n).
    """
    rho = math.sqrt(snr / (1.0 + snr))
    probs = _bin_probs_given_x(x_normalized, rho, config)   # (n, 32)
    bits = _plane_bits()
    n = probs.shape[0]
    mask = np.ones((n, 2 ** N_SLICES), dtype=bool)
    for j in range(level):
        mask &= bits[j][None, :] == np.asarray(decoded_planes)[j][:, None]
    sel = np.where(mask, probs, 0.0)
    p0 = np.where(bits[level][None, :] == 0, sel, 0.0).sum(axis=1)
    p1 = np.where(bits[level][None, :] == 1, sel, 0.0).sum(axis=1)
    with np.errstate(divide="ignore"):
        llr = np.log(np.maximum(p0, 1e-300)) - np.log(np.maximum(p1, 1e-300))
    return np.clip(llr, -LLR_CLIP, LLR_CLIP)
