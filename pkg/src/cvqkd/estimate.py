"""Maximum-likelihood channel estimation and worst-case parameter bounds.

The estimators follow the normal linear model b = t*a + z, z ~ N(0, sigma^2):

    t_hat      = sum(a*b) / sum(a^2)
    sigma2_hat = (1/n) * sum((b - t_hat*a)^2)

with standard errors  se(t_hat) = sqrt(sigma2_hat / sum(a^2))  and
se(sigma2_hat) = sigma2_hat * sqrt(2/n).  Worst-case bounds take ``z_score``
standard deviations (default 6.5) on both, the conservative reading.

``n_used`` is the protocol-block point count (1-alpha)(1-fer)*N implied by the
system parameters; ``n_data`` is the number of samples actually reduced.  The
worst-case bands are evaluated at ``n_used`` so that desk-scale runs report
the bounds a full protocol block would carry; set ``block_size_n`` equal to
the simulated pulse count to get bands matched to the data actually seen.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .params import SystemParams

__all__ = [
    "ChannelEstimate",
    "estimate_covariance",
    "mle_channel",
    "worst_case",
    "ideal_estimate",
]


@dataclass(frozen=True)
class ChannelEstimate:
    t_hat: float            # sqrt(eta*T) link gain
    T_hat: float            # channel transmittance
    xi_hat: float           # excess noise at channel input, SNU
    sigma2_hat: float       # total noise variance of b given t_hat*a, SNU
    mean_a2: float          # sum(a^2)/n_data of the regressor
    n_data: int             # samples actually used in the reduction
    n_used: float           # protocol point count (1-alpha)(1-fer)*N
    eta: float
    nu_el: float
    z_score: float = 6.5
    T_worst: float = float("nan")   # lower confidence bound on T
    xi_worst: float = float("nan")  # upper confidence bound on xi
    xi_clamped: bool = False        # raw xi_hat was negative and clamped to 0
    t_low_nonpositive: bool = False

    def to_json(self, **extra) -> str:
        payload = asdict(self)
        payload.update(extra)
        return json.dumps(payload, indent=2, sort_keys=True)


def estimate_covariance(alice_x, alice_p, bob_meas, basis_bits) -> np.ndarray:
    """Empirical covariance of (x_A, p_A, x_B, p_B) from sifted homodyne data.

    Bob measures a single quadrature per pulse, so only same-basis pairs enter
    each B-side second moment; the unobservable <x_B p_B> entry is set to 0.
    """
    alice_x = np.asarray(alice_x, float)
    alice_p = np.asarray(alice_p, float)
    bob_meas = np.asarray(bob_meas, float)
    basis_bits = np.asarray(basis_bits)
    n = alice_x.size
    if not (alice_p.size == bob_meas.size == basis_bits.size == n):
        raise ValueError("all input arrays must have equal length")
    if n < 2:
        raise ValueError("need at least 2 samples")
    in_x = basis_bits == 0
    in_p = ~in_x
    if in_x.sum() < 2 or in_p.sum() < 2:
        raise ValueError("need at least 2 samples in each measurement basis")

    def mom(u, v):
        return float(np.mean((u - u.mean()) * (v - v.mean())))

    bx, bp = bob_meas[in_x], bob_meas[in_p]
    cm = np.zeros((4, 4))
    cm[0, 0] = mom(alice_x, alice_x)
    cm[1, 1] = mom(alice_p, alice_p)
    cm[0, 1] = cm[1, 0] = mom(alice_x, alice_p)
    cm[2, 2] = mom(bx, bx)
    cm[3, 3] = mom(bp, bp)
    cm[0, 2] = cm[2, 0] = mom(alice_x[in_x], bx)
    cm[1, 2] = cm[2, 1] = mom(alice_p[in_x], bx)
    cm[0, 3] = cm[3, 0] = mom(alice_x[in_p], bp)
    cm[1, 3] = cm[3, 1] = mom(alice_p[in_p], bp)
    return cm


def mle_channel(alice, bob, params: SystemParams, *, n_used=None,
                z_score: float = 6.5) -> ChannelEstimate:
    """MLE of the link gain and noise variance from compensated same-basis data.

    Returns the estimate with worst-case bounds already attached.
    """
    a = np.asarray(alice, float)
    b = np.asarray(bob, float)
    if a.size != b.size:
        raise ValueError("alice and bob arrays must have equal length")
    n = a.size
    sum_a2 = float(np.dot(a, a))
    if sum_a2 <= 0:
        raise ValueError("sum(a^2) must be positive")
    t_hat = float(np.dot(a, b) / sum_a2)
    resid = b - t_hat * a
    sigma2_hat = float(np.dot(resid, resid) / n)
    T_hat = t_hat * t_hat / params.eta
    xi_raw = (sigma2_hat - 1.0 - params.nu_el) / (params.eta * T_hat)
    clamped = xi_raw < 0
    if n_used is None:
        n_used = (1.0 - params.alpha) * (1.0 - params.fer) * params.block_size_n
    est = ChannelEstimate(
        t_hat=t_hat, T_hat=T_hat, xi_hat=max(xi_raw, 0.0),
        sigma2_hat=sigma2_hat, mean_a2=sum_a2 / n, n_data=n, n_used=float(n_used),
        eta=params.eta, nu_el=params.nu_el, z_score=z_score, xi_clamped=bool(clamped),
    )
    t_w, xi_w, nonpos = _worst_case_values(est, z_score)
    return replace(est, T_worst=t_w, xi_worst=xi_w, t_low_nonpositive=nonpos)


def _worst_case_values(est: ChannelEstimate, z: float):
    if est.n_used < 100:
        raise ValueError("worst-case bounds need n_used >= 100")
    se_t = math.sqrt(est.sigma2_hat / (est.n_used * est.mean_a2))
    t_low = est.t_hat - z * se_t
    if t_low <= 0:
        return 0.0, float("inf"), True
    T_worst = t_low * t_low / est.eta
    sigma2_high = est.sigma2_hat * (1.0 + z * math.sqrt(2.0 / est.n_used))
    xi_worst = (sigma2_high - 1.0 - est.nu_el) / (est.eta * T_worst)
    return T_worst, max(xi_worst, 0.0), False


def worst_case(est: ChannelEstimate, z: float = 6.5) -> tuple[float, float]:
    """(T_worst, xi_worst) at z standard deviations; z=0 returns the point estimates."""
    if z == 0:
        return est.T_hat, est.xi_hat
    t_w, xi_w, _ = _worst_case_values(est, z)
    return t_w, xi_w


def ideal_estimate(params: SystemParams, *, z_score: float = 6.5) -> ChannelEstimate:
    """Estimate populated with the exact model values of a parameter set.

    Used for rate scans and table evaluation where no measured data exists;
    the worst-case bands then reflect purely the protocol block size.
    """
    t = math.sqrt(params.eta * params.transmittance)
    sigma2 = 1.0 + params.nu_el + params.eta * params.transmittance * params.xi
    n_used = (1.0 - params.alpha) * (1.0 - params.fer) * params.block_size_n
    est = ChannelEstimate(
        t_hat=t, T_hat=params.transmittance, xi_hat=params.xi,
        sigma2_hat=sigma2, mean_a2=params.v_a, n_data=0, n_used=n_used,
        eta=params.eta, nu_el=params.nu_el, z_score=z_score,
    )
    t_w, xi_w, nonpos = _worst_case_values(est, z_score)
    return replace(est, T_worst=t_w, xi_worst=xi_w, t_low_nonpositive=nonpos)
