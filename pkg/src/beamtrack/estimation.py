"""Fisher information and CRLBs for the two tractable observation models.

Static model: y ~ CN(|s| beta W^H a(x), noise_var I3), parameter vector
psi = [beta_re, beta_im, x1, x2].  Fading-gain model ("direction-only"):
beta ~ CN(0, sigma_beta_sq) fresh per cycle, so y ~ CN(0, Sigma(x)) and only
the 2D direction is estimable.

Normalized CRLBs follow the conventions used throughout the package:
``crlb_static`` is (1/MN) Tr{I^-1 V^H V} (channel-vector MSE per element),
``crlb_di`` is Tr{I^-1} (direction MSE).  The ``*_asymptotic`` variants
return the large-array limits of MN times these quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import (ArrayConfig, probe_kernels, probe_kernels_limit,
                     steering_derivative, steering_vector)
from .signal import ChannelParams, Ebm, OffsetSet, observation_kernels

COND_LIMIT = 1e12


class SingularFisher(np.linalg.LinAlgError):
    """Fisher information too ill-conditioned to invert (degenerate probes)."""


@dataclass(frozen=True)
class DiModel:
    """Fading-gain model: variance of the equivalent channel gain."""

    sigma_beta_sq: float

    def __post_init__(self):
        if self.sigma_beta_sq < 0:
            raise ValueError("gain variance must be nonnegative")


@dataclass(frozen=True)
class FisherDI:
    """Direction Fisher matrix with its working quantities: the probe
    response g = W^H a(x), the gradients of ||g||^2, and the derivative
    matrices of g g^H."""

    m: np.ndarray        # (2, 2) real
    g: np.ndarray        # (3,) complex
    g_tilde: np.ndarray  # (2,) real
    big_g: np.ndarray    # (2, 3, 3) complex


def jacobian(cfg: ArrayConfig, psi: ChannelParams) -> np.ndarray:
    """Jacobian of the channel vector w.r.t. psi: columns
    [a, j a, beta da/dx1, beta da/dx2], shape (MN, 4)."""
    a = steering_vector(cfg, psi.x)
    return np.stack([a, 1j * a,
                     psi.beta * steering_derivative(cfg, psi.x, 1),
                     psi.beta * steering_derivative(cfg, psi.x, 2)], axis=1)


def steering_gram(m: int, n: int, beta: complex) -> np.ndarray:
    """Closed form of V^H V for the Jacobian above.  Independent of the
    direction; exact for any array size."""
    b = complex(beta)
    ab2 = abs(b) ** 2
    c1 = np.pi * (m - 1) / m
    c2 = np.pi * (n - 1) / n
    g = np.array([
        [1, 1j, 1j * b * c1, 1j * b * c2],
        [-1j, 1, b * c1, b * c2],
        [-1j * b.conjugate() * c1, b.conjugate() * c1,
         (2 * np.pi**2 / 3) * ab2 * (m - 1) * (2 * m - 1) / m**2,
         np.pi**2 * ab2 * (m - 1) * (n - 1) / (m * n)],
        [-1j * b.conjugate() * c2, b.conjugate() * c2,
         np.pi**2 * ab2 * (m - 1) * (n - 1) / (m * n),
         (2 * np.pi**2 / 3) * ab2 * (n - 1) * (2 * n - 1) / n**2],
    ], complex)
    return m * n * g


def steering_gram_limit(beta: complex) -> np.ndarray:
    """Limit of V^H V / MN as the array grows."""
    b = complex(beta)
    ab2 = abs(b) ** 2
    return np.array([
        [1, 1j, 1j * np.pi * b, 1j * np.pi * b],
        [-1j, 1, np.pi * b, np.pi * b],
        [-1j * np.pi * b.conjugate(), np.pi * b.conjugate(),
         4 * np.pi**2 * ab2 / 3, np.pi**2 * ab2],
        [-1j * np.pi * b.conjugate(), np.pi * b.conjugate(),
         np.pi**2 * ab2, 4 * np.pi**2 * ab2 / 3],
    ], complex)


def fisher_static(cfg: ArrayConfig, psi: ChannelParams, ebm: Ebm) -> np.ndarray:
    """4x4 Fisher information of the static model,
    (2|s|^2/noise_var) Re{V^H W W^H V}."""
    wv = ebm.columns.conj().T @ jacobian(cfg, psi)
    return (2 * cfg.pilot_amp**2 / cfg.noise_var) * np.real(wv.conj().T @ wv)


def _guarded_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(mat)) or np.linalg.cond(mat) > COND_LIMIT:
        raise SingularFisher("Fisher information is numerically singular")
    return np.linalg.solve(mat, rhs)


def crlb_static(cfg: ArrayConfig, psi: ChannelParams, ebm: Ebm) -> float:
    """Normalized channel-vector CRLB (1/MN) Tr{I^-1 V^H V} for one cycle's
    probe pattern.  Invariant to the gain and the direction."""
    info = fisher_static(cfg, psi, ebm)
    gram = steering_gram(cfg.m, cfg.n, psi.beta)
    return float(np.trace(_guarded_solve(info, gram)).real) / cfg.size


def _batch_trace_solve(info, gram, scale: float, lead_shape):
    """Tr{info^-1 gram} * scale per batch item; +inf where singular."""
    scalar = info.ndim == 2
    info = info.reshape((-1, 4, 4))
    out = np.full(info.shape[0], np.inf)
    finite = np.all(np.isfinite(info), axis=(1, 2))
    with np.errstate(all="ignore"):
        dets = np.zeros(info.shape[0])
        dets[finite] = np.abs(np.linalg.det(info[finite]))
    good = np.where(finite & (dets > 1e-12 * np.abs(info).max(axis=(1, 2)).clip(1e-300) ** 4))[0]
    if good.size:
        rhs = np.broadcast_to(gram, (good.size, 4, 4))
        try:
            sol = np.linalg.solve(info[good], rhs)
            out[good] = np.einsum("...ii->...", sol).real * scale
        except np.linalg.LinAlgError:
            for i in good:
                try:
                    out[i] = np.trace(np.linalg.solve(info[i], gram)).real * scale
                except np.linalg.LinAlgError:
                    pass
    out = np.where(np.isfinite(out) & (out > 0), out, np.inf)
    if scalar:
        return float(out[0])
    return out.reshape(lead_shape)


def static_offsets_crlb(deltas, m: int, n: int, pilot_amp: float = 1.0,
                        noise_var: float = 1.0, beta: complex = 1.0 + 0j):
    """Vectorized normalized static CRLB as a function of the offsets alone
    (shift property).  ``deltas`` has shape (..., 3, 2)."""
    g, k1, k2 = probe_kernels(deltas, m, n)
    kmat = np.stack([g, 1j * g, beta * k1, beta * k2], axis=-1)  # (..., 3, 4)
    info = (2 * pilot_amp**2 / noise_var) * np.real(
        np.einsum("...iq,...ip->...qp", kmat.conj(), kmat))
    gram = steering_gram(m, n, beta)
    return _batch_trace_solve(info, gram, 1.0 / (m * n),
                              np.asarray(deltas).shape[:-2])


def crlb_static_asymptotic(offsets, pilot_amp: float = 1.0,
                           noise_var: float = 1.0,
                           beta: complex = 1.0 + 0j):
    """Large-array limit of MN times the normalized static CRLB.  Supports a
    batch of offset sets with shape (..., 3, 2)."""
    deltas = offsets.deltas if isinstance(offsets, OffsetSet) else np.asarray(offsets)
    g, k1, k2 = probe_kernels_limit(deltas)
    kmat = np.stack([g, 1j * g, beta * k1, beta * k2], axis=-1)
    info = (2 * pilot_amp**2 / noise_var) * np.real(
        np.einsum("...iq,...ip->...qp", kmat.conj(), kmat))
    gram = steering_gram_limit(beta)
    return _batch_trace_solve(info, gram, 1.0, deltas.shape[:-2])


# ---------------------------------------------------------------------------
# fading-gain (direction-only) model
# ---------------------------------------------------------------------------

def sigma_di(cfg: ArrayConfig, x, model: DiModel, ebm: Ebm):
    """Determinant and inverse of the observation covariance
    Sigma = |s|^2 sigma_beta^2 g g^H + noise_var I3."""
    g, _, _ = observation_kernels(cfg, x, ebm)
    c = cfg.pilot_amp**2 * model.sigma_beta_sq
    sz2 = cfg.noise_var
    g0 = float(np.vdot(g, g).real)
    det = sz2**2 * (c * g0 + sz2)
    inv = np.eye(3) / sz2 - (sz2 * c / det) * np.outer(g, g.conj())
    return float(det), inv


def _di_fisher_from_kernels(g, d1, d2, c: float, sz2: float) -> FisherDI:
    ds = (d1, d2)
    g0 = float(np.vdot(g, g).real)
    det = sz2**2 * (c * g0 + sz2)
    gt = np.array([2 * np.real(np.vdot(g, d)) for d in ds])
    big = np.stack([np.outer(d, g.conj()) + np.outer(g, d.conj()) for d in ds])
    pref = sz2**3 * c**3 / det**2
    m = np.empty((2, 2))
    for p in range(2):
        for j in range(p, 2):
            t1 = -2.0 * g0 * gt[p] * gt[j]
            t2 = (sz2 / c) * float(np.trace(big[p] @ big[j]).real)
            t3 = float(np.real(g.conj() @ (big[p] @ big[j] + big[j] @ big[p]) @ g))
            m[p, j] = m[j, p] = pref * (t1 + t2 + t3)
    return FisherDI(m, g, gt, big)


def fisher_di(cfg: ArrayConfig, x, model: DiModel, ebm: Ebm) -> FisherDI:
    """2x2 direction Fisher information of the fading-gain model, via the
    closed-form element expression in g, its norm gradient, and the
    derivative matrices of g g^H."""
    if model.sigma_beta_sq == 0:
        g, d1, d2 = observation_kernels(cfg, x, ebm)
        return FisherDI(np.zeros((2, 2)), g, np.zeros(2),
                        np.stack([np.outer(d, g.conj()) + np.outer(g, d.conj())
                                  for d in (d1, d2)]))
    g, d1, d2 = observation_kernels(cfg, x, ebm)
    c = cfg.pilot_amp**2 * model.sigma_beta_sq
    return _di_fisher_from_kernels(g, d1, d2, c, cfg.noise_var)


def crlb_di(cfg: ArrayConfig, x, model: DiModel, ebm: Ebm) -> float:
    """Direction CRLB Tr{I_DI^-1} for one cycle's probe pattern."""
    info = fisher_di(cfg, x, model, ebm).m
    return float(np.trace(_guarded_solve(info, np.eye(2))))


def di_offsets_fisher(deltas, m: int, n: int, snr_beta: float):
    """Vectorized direction Fisher matrices from the offsets alone.
    ``snr_beta`` is |s|^2 sigma_beta^2 / noise_var; ``deltas`` (..., 3, 2)."""
    g, k1, k2 = probe_kernels(deltas, m, n)
    return _di_fisher_batch(g, k1, k2, snr_beta)


def _di_fisher_batch(g, k1, k2, snr_beta: float):
    # noise_var normalized to 1; snr_beta plays the role of c
    c = snr_beta
    g0 = np.einsum("...i,...i->...", g.conj(), g).real
    det = c * g0 + 1.0
    ds = np.stack([k1, k2], axis=-2)                      # (..., 2, 3)
    gt = 2 * np.einsum("...i,...pi->...p", g.conj(), ds).real
    big = (np.einsum("...pi,...j->...pij", ds, g.conj())
           + np.einsum("...i,...pj->...pij", g, ds.conj()))  # (..., 2, 3, 3)
    tr = np.einsum("...pij,...qji->...pq", big, big).real
    quad = np.einsum("...i,...pij,...qjk,...k->...pq", g.conj(), big, big, g).real
    quad = quad + np.swapaxes(quad, -1, -2)
    pref = c**3 / det**2
    info = pref[..., None, None] * (
        -2.0 * g0[..., None, None] * np.einsum("...p,...q->...pq", gt, gt)
        + (1.0 / c) * tr + quad)
    return info


def di_offsets_crlb(deltas, m: int, n: int, snr_beta: float):
    """Vectorized Tr{I_DI^-1} from the offsets alone."""
    info = di_offsets_fisher(deltas, m, n, snr_beta)
    return _trace_inv_2x2(info, np.asarray(deltas).shape[:-2])


def _trace_inv_2x2(info, lead_shape):
    scalar = info.ndim == 2
    info = info.reshape((-1, 2, 2))
    a = info[:, 0, 0]
    b = info[:, 0, 1]
    d = info[:, 1, 1]
    det = a * d - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where((det > 1e-30) & np.isfinite(det), (a + d) / det, np.inf)
    out = np.where(out > 0, out, np.inf)
    if scalar:
        return float(out[0])
    return out.reshape(lead_shape)


def crlb_di_asymptotic(offsets, snr_beta: float):
    """Large-array limit of MN times the direction CRLB.  In the limit the
    array gain swamps the noise, so the SNR enters only as an overall scale.
    Supports batches with shape (..., 3, 2)."""
    deltas = offsets.deltas if isinstance(offsets, OffsetSet) else np.asarray(offsets)
    g, k1, k2 = probe_kernels_limit(deltas)
    s0 = np.einsum("...i,...i->...", g.conj(), g).real
    ds = np.stack([k1, k2], axis=-2)
    big = (np.einsum("...pi,...j->...pij", ds, g.conj())
           + np.einsum("...i,...pj->...pij", g, ds.conj()))
    tau = 2 * np.einsum("...i,...pi->...p", g.conj(), ds).real
    tr = np.einsum("...pij,...qji->...pq", big, big).real
    info = snr_beta * (tr - np.einsum("...p,...q->...pq", tau, tau)) \
        / s0[..., None, None]
    return _trace_inv_2x2(info, deltas.shape[:-2])


def di_log_pdf(cfg: ArrayConfig, x, model: DiModel, ebm: Ebm, y) -> float:
    """Log-density of one observation under the fading-gain model."""
    det, inv = sigma_di(cfg, x, model, ebm)
    y = np.asarray(y, complex)
    return float(-3 * np.log(np.pi) - np.log(det)
                 - np.real(y.conj() @ inv @ y))


def di_score(cfg: ArrayConfig, x, model: DiModel, ebm: Ebm, y) -> np.ndarray:
    """Gradient of :func:`di_log_pdf` in the direction coordinates."""
    g, d1, d2 = observation_kernels(cfg, x, ebm)
    c = cfg.pilot_amp**2 * model.sigma_beta_sq
    sz2 = cfg.noise_var
    g0 = float(np.vdot(g, g).real)
    det = sz2**2 * (c * g0 + sz2)
    gg = np.outer(g, g.conj())
    y = np.asarray(y, complex)
    out = np.empty(2)
    for p, d in enumerate((d1, d2)):
        gt = 2 * np.real(np.vdot(g, d))
        ddet = sz2**2 * c * gt
        big = np.outer(d, g.conj()) + np.outer(g, d.conj())
        dinv = -sz2 * c * (big * det - gg * ddet) / det**2
        out[p] = -ddet / det - np.real(y.conj() @ dinv @ y)
    return out
