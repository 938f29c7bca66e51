"""Shot-noise-unit arithmetic, the covariance model, and Gaussian-state entropy primitives.

The covariance matrix ordering is {x_A, p_A, x_B, p_B} throughout.
"""

from __future__ import annotations

import numpy as np

from .params import SystemParams

__all__ = [
    "transmittance",
    "g_entropy",
    "model_covariance",
    "validate_covariance",
    "symplectic_eigenvalues",
    "symplectic_spectrum",
    "homodyne_condition",
    "UnphysicalStateError",
]


class UnphysicalStateError(ValueError):
    """A covariance matrix failed a physicality check."""


def transmittance(attenuation_db):
    """Power transmittance of a link with the given loss in dB."""
    att = np.asarray(attenuation_db, dtype=float)
    if np.any(att < 0):
        raise ValueError("attenuation_db must be >= 0")
    t = 10.0 ** (-att / 10.0)
    return float(t) if np.isscalar(attenuation_db) else t


def g_entropy(x):
    """von Neumann entropy, in bits, of a thermal bosonic state with mean photon number x.

    g(x) = (x+1) log2(x+1) - x log2 x, with g(0) = 0 as the vacuum limit.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("mean photon number must be >= 0")
    out = np.zeros_like(arr)
    # series branch keeps tiny arguments accurate: g(x) ~ (x - x ln x) / ln 2
    tiny = (arr > 0) & (arr < 1e-12)
    if np.any(tiny):
        xt = arr[tiny]
        out[tiny] = (xt - xt * np.log(xt)) / np.log(2.0)
    big = arr >= 1e-12
    if np.any(big):
        xb = arr[big]
        out[big] = (xb + 1) * np.log2(xb + 1) - xb * np.log2(xb)
    return float(out) if arr.ndim == 0 else out


def model_covariance(params: SystemParams) -> np.ndarray:
    """Prepare-and-measure covariance matrix of (x_A, p_A, x_B, p_B) in SNU.

    <x_A^2> = V_A, <x_B^2> = eta*T*(V_A + xi) + 1 + nu_el,
    <x_A x_B> = sqrt(eta*T)*V_A; cross-quadrature entries vanish.
    """
    t = params.transmittance
    va = params.v_a
    vb = params.eta * t * (va + params.xi) + 1.0 + params.nu_el
    c = np.sqrt(params.eta * t) * va
    cm = np.diag([va, va, vb, vb]).astype(float)
    cm[0, 2] = cm[2, 0] = c
    cm[1, 3] = cm[3, 1] = c
    return cm


def validate_covariance(cm: np.ndarray, *, sym_rtol=1e-12, psd_atol=1e-9) -> None:
    """Check the CovMat4 invariants: symmetry, positive diagonal, PSD."""
    cm = np.asarray(cm, dtype=float)
    if cm.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {cm.shape}")
    scale = max(np.abs(cm).max(), 1.0)
    if np.abs(cm - cm.T).max() > sym_rtol * scale:
        raise UnphysicalStateError("covariance matrix is not symmetric")
    if np.any(np.diag(cm) <= 0):
        raise UnphysicalStateError("covariance diagonal must be strictly positive")
    eigvals = np.linalg.eigvalsh(0.5 * (cm + cm.T))
    if eigvals.min() < -psd_atol:
        raise UnphysicalStateError(
            f"covariance matrix is not PSD (min eigenvalue {eigvals.min():.3e})"
        )


def _omega(n_modes: int) -> np.ndarray:
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(n_modes), block)


def symplectic_spectrum(cm: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a 2n x 2n covariance matrix, descending.

    Computed as the moduli of the eigenvalues of i*Omega*cm, collapsed from
    the +/- pairs to n values.
    """
    cm = np.asarray(cm, dtype=float)
    n2 = cm.shape[0]
    if cm.shape != (n2, n2) or n2 % 2:
        raise ValueError(f"expected a 2n x 2n matrix, got shape {cm.shape}")
    scale = max(np.abs(cm).max(), 1.0)
    if np.abs(cm - cm.T).max() > 1e-10 * scale:
        raise ValueError("covariance matrix must be symmetric")
    moduli = np.sort(np.abs(np.linalg.eigvals(_omega(n2 // 2) @ cm)))[::-1]
    return moduli[::2]  # each symplectic eigenvalue appears as a +/- pair


def symplectic_eigenvalues(cm: np.ndarray) -> tuple[float, float]:
    """The two symplectic eigenvalues of a two-mode covariance matrix, descending."""
    cm = np.asarray(cm, dtype=float)
    if cm.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {cm.shape}")
    nu = symplectic_spectrum(cm)
    return float(nu[0]), float(nu[1])


def homodyne_condition(cm: np.ndarray, mode: int, quadrature: str = "x") -> np.ndarray:
    """Covariance of the remaining modes after a homodyne measurement of one mode.

    Implements the Gaussian measurement update with the rank-one pseudoinverse
    of Pi*gamma_m*Pi, Pi projecting on the measured quadrature.
    """
    cm = np.asarray(cm, dtype=float)
    n2 = cm.shape[0]
    idx = 2 * mode + (0 if quadrature == "x" else 1)
    keep = [i for i in range(n2) if i not in (2 * mode, 2 * mode + 1)]
    var = cm[idx, idx]
    if var <= 0:
        raise UnphysicalStateError("measured quadrature has non-positive variance")
    cross = cm[keep, idx]
    return cm[np.ix_(keep, keep)] - np.outer(cross, cross) / var
