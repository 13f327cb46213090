"""Recursive tracking loops: the stochastic-Newton joint tracker (diminishing
or constant step), the direction-only tracker for fast-fading gains, their
mean-field map, and two reference baselines (grid beam switching, EKF).

Fast-update path and operation audit
------------------------------------
All probe-dependent quantities entering one update are functions of the
fixed exploration offsets only (shift property), so they are precomputed
once per (offsets, array, pilot) into a cache.  The per-cycle online work is
audited by counting every multiplication and division executed while
computing the update direction -- real or complex alike, additions and
Re/Im/conjugate extractions free.  Cache construction is offline and
excluded; so is the final step-size scale-and-add.  Under this convention
one cycle costs 39 operations for the joint tracker and 28 for the
direction-only tracker (see ``count_ops``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .arrays import ArrayConfig, _xy, probe_kernels
from .estimation import COND_LIMIT, DiModel, SingularFisher, jacobian
from .signal import ChannelParams, Ebm, OffsetSet, noiseless_mean


@dataclass(frozen=True)
class DiminishingStep:
    """b_k = epsilon / (k + k0); the classic stochastic-approximation rate."""

    epsilon: float
    k0: float = 0.0

    def __post_init__(self):
        if self.epsilon <= 0 or self.k0 < 0:
            raise ValueError("need epsilon > 0 and k0 >= 0")

    def at(self, k: int) -> float:
        return self.epsilon / (k + self.k0)


@dataclass(frozen=True)
class ConstantStep:
    b: float

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("need b > 0")

    def at(self, k: int) -> float:
        return self.b


class OpCounter:
    """Multiplication/division tally for the online-update audit."""

    __slots__ = ("n",)

    def __init__(self):
        self.n = 0

    def add(self, k: int):
        self.n += k


# ---------------------------------------------------------------------------
# joint gain + direction tracker
# ---------------------------------------------------------------------------

# per-cycle estimate moves are truncated at half the main-lobe halfwidth,
# and the direction preconditioner never trusts a gain estimate below twice
# its own one-cycle measurement noise (see _jbct_direction_fast): standard
# stochastic-approximation safeguards for deep-fade cycles, inactive in the
# regular tracking regime.
STEP_CAP = 0.5
GAIN_FLOOR_MULT = 4.0


@dataclass(frozen=True)
class FastUpdateCache:
    """Offset-only terms for the joint tracker's update, all independent of
    the running estimate: probe kernels, the Fisher blocks they induce, and
    pilot-folded copies used by the gradient inner products."""

    e: np.ndarray        # (3,) probe gains w^H a at the offsets
    d1: np.ndarray       # (3,) w^H da/dx1
    d2: np.ndarray       # (3,) w^H da/dx2
    se: np.ndarray       # pilot_amp * e  (matched response per unit gain)
    e_s: np.ndarray      # e / pilot_amp  (gradient weights, scale folded)
    d1_s: np.ndarray
    d2_s: np.ndarray
    r12: np.ndarray      # (2,) e^H [d1, d2]; the gain-direction coupling row
    a_inv: float         # 1 / ||e||^2  (inverse of the gain block / I2)
    is_inv: np.ndarray   # (2, 2) inverse of the direction Schur block
    gain_floor_sq: float  # |gain|^2 floor for the direction Schur scale


def build_fast_cache(cfg: ArrayConfig, offsets: OffsetSet) -> FastUpdateCache:
    e, d1, d2 = probe_kernels(offsets.deltas, cfg.m, cfg.n)
    a = float(np.vdot(e, e).real)
    if a < 1e-12:
        raise SingularFisher("probe gains vanish; offsets are degenerate")
    r12 = np.array([np.vdot(e, d1), np.vdot(e, d2)])
    u2 = np.stack([d1, d2], axis=1)
    d_tilde = np.real(u2.conj().T @ u2)
    # Schur complement of the gain block: D - Re{B^H A^-1 B}/... collapses to
    # D - Re{r^H r}/||e||^2 because the gain columns are e and j e.
    i_s = d_tilde - np.real(np.outer(r12.conj(), r12)) / a
    if not np.all(np.isfinite(i_s)) or np.linalg.cond(i_s) > COND_LIMIT:
        raise SingularFisher("direction block is singular; offsets are degenerate")
    s = cfg.pilot_amp
    floor = GAIN_FLOOR_MULT * cfg.noise_var / (s**2 * a)
    return FastUpdateCache(e, d1, d2, s * e, e / s, d1 / s, d2 / s,
                           r12, 1.0 / a, np.linalg.inv(i_s), floor)


@dataclass
class JbctState:
    """Joint-tracker state: current [beta_re, beta_im, x1, x2], cycle count,
    step schedule, offsets, and the offset-only cache."""

    psi: np.ndarray
    k: int
    schedule: object
    offsets: OffsetSet
    cache: FastUpdateCache
    op_count_last_ecc: int = 0

    @property
    def params(self) -> ChannelParams:
        return ChannelParams.from_vector(self.psi)

    def probe_directions(self) -> np.ndarray:
        return self.psi[2:] + self.offsets.deltas


def jbct_tracker(cfg: ArrayConfig, psi0: ChannelParams, offsets: OffsetSet,
                 schedule) -> JbctState:
    return JbctState(psi0.as_vector().astype(float), 0, schedule, offsets,
                     build_fast_cache(cfg, offsets))


def _cdot3(a, b, ops: OpCounter) -> complex:
    """Inner product a^H b of 3-vectors; 3 counted multiplications."""
    ops.add(3)
    return complex(np.vdot(a, b))


def _jbct_direction_fast(cache: FastUpdateCache, beta_hat: complex,
                         y: np.ndarray, ops: OpCounter) -> np.ndarray:
    """Update direction I^-1 grad-log-likelihood via a block solve.

    The 4x4 Fisher has blocks [[||e||^2 I2, B(beta)], [B^T, |beta|^2 D]];
    only scalar functions of beta enter online, everything else is cached.
    The direction Schur scale |beta|^2 is floored at the one-cycle
    gain-noise level (times GAIN_FLOOR_MULT), which freezes direction
    updates through deep gain fades instead of letting the near-singular
    preconditioner amplify pure noise; inactive at healthy gains.
    """
    # gradient of the log-likelihood (pilot scale folded into the caches)
    ops.add(3)
    y_hat = beta_hat * cache.se
    resid = y - y_hat
    ops.add(6)
    f1 = beta_hat * cache.d1_s
    f2 = beta_hat * cache.d2_s
    ip0 = _cdot3(cache.e_s, resid, ops)
    ua = np.array([ip0.real, ip0.imag])
    ub = np.array([_cdot3(f1, resid, ops).real,
                   _cdot3(f2, resid, ops).real])

    # block solve: gain block is ||e||^2 I2, coupling rows are Re/Im of
    # beta_hat * r12, direction Schur block is |beta_hat|^2 * Is.
    ops.add(2)
    br = beta_hat * cache.r12
    b_r = np.array([[br[0].real, br[1].real], [br[0].imag, br[1].imag]])
    ops.add(2)
    t = cache.a_inv * ua
    ops.add(4)
    v = ub - b_r.T @ t
    ops.add(1)
    b2 = max((beta_hat * beta_hat.conjugate()).real, cache.gain_floor_sq)
    ops.add(4)
    w0 = cache.is_inv @ v
    ops.add(2)
    w = w0 / b2
    ops.add(4)
    q = b_r @ w
    ops.add(2)
    xa = cache.a_inv * (ua - q)
    return np.array([xa[0], xa[1], w[0], w[1]])


def _jbct_step(state: JbctState, cfg: ArrayConfig, y) -> JbctState:
    beta_hat = complex(state.psi[0], state.psi[1])
    b2 = abs(beta_hat) ** 2
    k_next = state.k + 1
    if not np.isfinite(b2) or b2 < 1e-24:
        # Fisher is singular at a vanishing gain estimate: skip the update
        state.k = k_next
        state.op_count_last_ecc = 0
        return state
    ops = OpCounter()
    direction = _jbct_direction_fast(state.cache, beta_hat,
                                     np.asarray(y, complex), ops)
    if np.all(np.isfinite(direction)):
        step = state.schedule.at(k_next) * direction
        largest = np.abs(step).max()
        if largest > STEP_CAP:
            step *= STEP_CAP / largest
        state.psi = state.psi + step
    state.k = k_next
    state.op_count_last_ecc = ops.n
    return state


def jbct_static_step(state: JbctState, cfg: ArrayConfig, y) -> JbctState:
    """One cycle of the joint tracker (diminishing-step configuration)."""
    return _jbct_step(state, cfg, y)


def jbct_dii_step(state: JbctState, cfg: ArrayConfig, y) -> JbctState:
    """One cycle of the joint tracker with its constant-step configuration;
    identical update algebra to :func:`jbct_static_step`."""
    return _jbct_step(state, cfg, y)


def jbct_direction(cfg: ArrayConfig, psi_hat: ChannelParams, ebm: Ebm,
                   y) -> np.ndarray:
    """Reference (naive) update direction: explicit Fisher build and solve.

    Equals the fast path to numerical precision (gain floor included); kept
    as the slow oracle.
    """
    kmat = ebm.columns.conj().T @ jacobian(cfg, psi_hat)
    rem = np.real(kmat.conj().T @ kmat)
    if not np.all(np.isfinite(rem)) or np.linalg.cond(rem) > COND_LIMIT:
        raise SingularFisher("Fisher information is numerically singular")
    b2 = abs(psi_hat.beta) ** 2
    floor = GAIN_FLOOR_MULT * cfg.noise_var / (cfg.pilot_amp**2 * rem[0, 0])
    if 0 < b2 < floor:
        # same regularization as the fast path: lift the direction Schur
        # block from |beta|^2 Is to floor * Is
        coupling = rem[:2, 2:]
        schur = rem[2:, 2:] - coupling.T @ coupling / rem[0, 0]
        rem = rem.copy()
        rem[2:, 2:] += ((floor - b2) / b2) * schur
    resid = np.asarray(y, complex) - cfg.pilot_amp * psi_hat.beta * kmat[:, 0]
    u = np.real(kmat.conj().T @ resid)
    return np.linalg.solve(rem, u) / cfg.pilot_amp


def mean_field(psi_hat: ChannelParams, psi_true: ChannelParams,
               cfg: ArrayConfig, ebm: Ebm) -> np.ndarray:
    """Expected update direction at estimate ``psi_hat`` when the channel is
    ``psi_true``.  Zero with Jacobian -I4 at psi_hat = psi_true."""
    return jbct_direction(cfg, psi_hat, ebm,
                          noiseless_mean(cfg, psi_true, ebm))


def bootstrap_gain(cfg: ArrayConfig, ebm: Ebm, center, y) -> complex:
    """Least-squares gain fit from one cycle observed with an EBM built at
    ``center``: beta = (e^H e)^-1 e^H y / s with e = W^H a(center).
    Initializes the joint tracker's gain estimate."""
    from .signal import observation_kernels
    e, _, _ = observation_kernels(cfg, center, ebm)
    denom = cfg.pilot_amp * float(np.vdot(e, e).real)
    if denom < 1e-30:
        return 0.0 + 0.0j
    return complex(np.vdot(e, np.asarray(y, complex)) / denom)


# ---------------------------------------------------------------------------
# direction-only tracker (fading gain)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RbtCache:
    """Offset-only terms of the direction tracker: the covariance-derivative
    quadratic forms, the log-determinant slopes, and the Fisher inverse."""

    sigma_beta_sq: float
    q_mats: np.ndarray   # (2, 3, 3) derivative of the inverse covariance
    c0: np.ndarray       # (2,) -d log|Sigma| / dx_p
    i_inv: np.ndarray    # (2, 2) inverse direction Fisher


def build_rbt_cache(cfg: ArrayConfig, offsets: OffsetSet,
                    sigma_beta_sq: float) -> RbtCache:
    from .estimation import _di_fisher_from_kernels
    e, d1, d2 = probe_kernels(offsets.deltas, cfg.m, cfg.n)
    c = cfg.pilot_amp**2 * sigma_beta_sq
    sz2 = cfg.noise_var
    if c <= 0:
        raise SingularFisher("zero gain variance carries no direction information")
    g0 = float(np.vdot(e, e).real)
    det = sz2**2 * (c * g0 + sz2)
    gg = np.outer(e, e.conj())
    q_mats = np.empty((2, 3, 3), complex)
    c0 = np.empty(2)
    for p, d in enumerate((d1, d2)):
        gt = 2 * np.real(np.vdot(e, d))
        ddet = sz2**2 * c * gt
        big = np.outer(d, e.conj()) + np.outer(e, d.conj())
        q_mats[p] = -sz2 * c * (big * det - gg * ddet) / det**2
        c0[p] = -ddet / det
    info = _di_fisher_from_kernels(e, d1, d2, c, sz2).m
    if not np.all(np.isfinite(info)) or np.linalg.cond(info) > COND_LIMIT:
        raise SingularFisher("direction Fisher is singular at these offsets")
    return RbtCache(sigma_beta_sq, q_mats, c0, np.linalg.inv(info))


@dataclass
class RbtState:
    x: np.ndarray
    k: int
    schedule: object
    offsets: OffsetSet
    cache: RbtCache
    op_count_last_ecc: int = 0

    def probe_directions(self) -> np.ndarray:
        return self.x + self.offsets.deltas


def rbt_tracker(cfg: ArrayConfig, x0, offsets: OffsetSet, schedule,
                model: DiModel) -> RbtState:
    return RbtState(np.asarray(_xy(x0), float), 0, schedule, offsets,
                    build_rbt_cache(cfg, offsets, model.sigma_beta_sq))


def rbt_di_step(state: RbtState, cfg: ArrayConfig, model: DiModel,
                y) -> RbtState:
    """One cycle of the direction tracker: Fisher-preconditioned score step.

    If the model's gain variance changed since the cache was built (the
    estimated-variance mode), the cache is rebuilt first; that rebuild is
    offline work and excluded from the operation audit.
    """
    if model.sigma_beta_sq != state.cache.sigma_beta_sq:
        state.cache = build_rbt_cache(cfg, state.offsets, model.sigma_beta_sq)
    ops = OpCounter()
    y = np.asarray(y, complex)
    grad = np.empty(2)
    for p in range(2):
        ops.add(9)
        qy = state.cache.q_mats[p] @ y
        qf = _cdot3(y, qy, ops).real
        grad[p] = state.cache.c0[p] - qf
    ops.add(4)
    direction = state.cache.i_inv @ grad
    k_next = state.k + 1
    if np.all(np.isfinite(direction)):
        step = state.schedule.at(k_next) * direction
        largest = np.abs(step).max()
        if largest > STEP_CAP:
            step *= STEP_CAP / largest
        state.x = state.x + step
    state.k = k_next
    state.op_count_last_ecc = ops.n
    return state


# ---------------------------------------------------------------------------
# operation audit
# ---------------------------------------------------------------------------

def count_ops(step_kind: str, cfg: Optional[ArrayConfig] = None) -> int:
    """Audited online multiply/divide count of one tracking cycle.

    Runs one instrumented step on a generic configuration and returns the
    tally.  Under the documented convention the joint tracker costs 39 and
    the direction tracker 28.  (A nominal hand count of 45 for the joint
    tracker treats the gain block of the inverse Fisher as precomputable;
    that block rotates with the gain-estimate phase, and the correct block
    solve implemented here is cheaper.)
    """
    from .offsets import FADING_OFFSETS, STATIC_OFFSETS
    cfg = cfg or ArrayConfig(8, 8)
    rng = np.random.default_rng(0)
    y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    if step_kind in ("jbct_static", "jbct_dii"):
        schedule = DiminishingStep(1.0) if step_kind == "jbct_static" \
            else ConstantStep(0.7)
        state = jbct_tracker(cfg, ChannelParams(1.0, 0.2, 0.0, 0.0),
                             STATIC_OFFSETS, schedule)
        _jbct_step(state, cfg, y)
        return state.op_count_last_ecc
    if step_kind == "rbt":
        model = DiModel(1.0)
        state = rbt_tracker(cfg, (0.0, 0.0), FADING_OFFSETS,
                            DiminishingStep(1.0), model)
        rbt_di_step(state, cfg, model, y)
        return state.op_count_last_ecc
    raise ValueError(f"unknown step kind: {step_kind}")


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

@dataclass
class BeamSwitchState:
    """Grid-of-beams baseline: the estimate lives on a uniform direction
    lattice; each cycle probes the current beam plus its two neighbors along
    one axis (axes alternate between cycles)."""

    x: np.ndarray
    beta_hat: complex
    k: int
    spacing: float
    limits: tuple


def beam_switch_tracker(cfg: ArrayConfig, x0, oversample: int = 2
                        ) -> BeamSwitchState:
    spacing = 1.0 / oversample
    limits = (cfg.m / 2.0, cfg.n / 2.0)
    x = np.asarray(_xy(x0), float)
    snapped = np.round(x / spacing) * spacing
    snapped = np.clip(snapped, [-limits[0], -limits[1]], list(limits))
    return BeamSwitchState(snapped, 0.0 + 0.0j, 0, spacing, limits)


def beam_switch_probes(state: BeamSwitchState) -> np.ndarray:
    axis = state.k % 2
    step = np.zeros(2)
    step[axis] = state.spacing
    probes = np.stack([state.x, state.x + step, state.x - step])
    lim = np.array(state.limits)
    return np.clip(probes, -lim, lim)


def baseline_beam_switch_step(state: BeamSwitchState, cfg: ArrayConfig,
                              y) -> BeamSwitchState:
    """Switch to the strongest of the probed beams; matched-filter gain."""
    probes = beam_switch_probes(state)
    y = np.asarray(y, complex)
    i = int(np.argmax(np.abs(y)))
    state.x = probes[i].copy()
    state.beta_hat = complex(y[i] / (cfg.pilot_amp * np.sqrt(cfg.size)))
    state.k += 1
    return state


# equilateral probe triangle of circumradius 0.5 around the estimate
EKF_PROBE_OFFSETS = 0.5 * np.array([
    [np.cos(np.pi / 2), np.sin(np.pi / 2)],
    [np.cos(np.pi / 2 + 2 * np.pi / 3), np.sin(np.pi / 2 + 2 * np.pi / 3)],
    [np.cos(np.pi / 2 + 4 * np.pi / 3), np.sin(np.pi / 2 + 4 * np.pi / 3)],
])


@dataclass
class EkfState:
    x: np.ndarray
    p: np.ndarray
    beta_hat: complex
    k: int
    process_noise: float
    prior_var: float


def ekf_tracker(cfg: ArrayConfig, x0, process_noise: float = 1e-4,
                prior_var: float = 0.1) -> EkfState:
    return EkfState(np.asarray(_xy(x0), float), prior_var * np.eye(2),
                    0.0 + 0.0j, 0, process_noise, prior_var)


def ekf_probes(state: EkfState) -> np.ndarray:
    return state.x + EKF_PROBE_OFFSETS


def baseline_ekf_step(state: EkfState, cfg: ArrayConfig, y) -> EkfState:
    """Identity-dynamics EKF on the 2D direction with a per-cycle
    least-squares gain refit and a Joseph-form covariance update."""
    y = np.asarray(y, complex)
    p_pred = state.p + state.process_noise * np.eye(2)
    deltas = EKF_PROBE_OFFSETS  # probes minus predicted state
    g, k1, k2 = probe_kernels(deltas, cfg.m, cfg.n)
    s = cfg.pilot_amp
    denom = s * float(np.vdot(g, g).real)
    beta = complex(np.vdot(g, y) / denom) if denom > 1e-30 else 0.0 + 0.0j
    state.beta_hat = beta
    mean = s * beta * g
    h_cplx = s * beta * np.stack([k1, k2], axis=1)
    h_r = np.vstack([h_cplx.real, h_cplx.imag])
    resid = np.concatenate([(y - mean).real, (y - mean).imag])
    r_mat = (cfg.noise_var / 2.0) * np.eye(6)
    s_mat = h_r @ p_pred @ h_r.T + r_mat
    # pseudo-inverse: identical to the inverse when the measurement noise
    # makes S full rank, and the correct rank-2 limit when it vanishes
    gain = p_pred @ h_r.T @ np.linalg.pinv(s_mat, rcond=1e-12)
    state.x = state.x + gain @ resid
    ikh = np.eye(2) - gain @ h_r
    p_new = ikh @ p_pred @ ikh.T + gain @ r_mat @ gain.T
    p_new = 0.5 * (p_new + p_new.T)
    if not np.all(np.isfinite(p_new)) or np.min(np.linalg.eigvalsh(p_new)) < -1e-12:
        p_new = state.prior_var * np.eye(2)
    state.p = p_new
    state.k += 1
    return state
