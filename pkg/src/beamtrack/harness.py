"""Monte-Carlo experiment orchestration: per-trial tracking loops, metric
aggregation, CSV emission, and flat config-file parsing.

Each trial draws a channel and an in-main-lobe initial estimate (one
bootstrap probing cycle fits the initial gain), then runs the cycle loop:
build the probe pattern at the current estimate, evolve the channel, observe,
update, record.  Trials use counter-based independent RNG streams derived
from (seed, trial index), so results are byte-identical for a fixed seed at
any parallelism degree (``BEAMTRACK_THREADS``; 0 = auto, unset = serial).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Union

import numpy as np

from .arrays import ArrayConfig, element_gain, probe_kernels
from .channels import (ChannelState, DynamicI, DynamicII, QuasiStatic,
                       ScenarioConfig, estimated_gain_variance, evolve,
                       init_channel, initial_estimate)
from .estimation import DiModel, di_offsets_crlb, static_offsets_crlb
from .offsets import OFFSET_PRESETS
from .signal import OffsetSet
from .trackers import (ConstantStep, DiminishingStep, baseline_beam_switch_step,
                       baseline_ekf_step, beam_switch_probes,
                       beam_switch_tracker, ekf_probes, ekf_tracker,
                       jbct_dii_step, jbct_static_step, jbct_tracker,
                       rbt_di_step, rbt_tracker)

TRACKER_NAMES = ("JBCT_S", "RBT_DI", "JBCT_DII", "BeamSwitch", "EKF")


class ConfigError(ValueError):
    """An experiment configuration field is missing, unknown, or invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    array: ArrayConfig
    tracker: str
    offsets: Union[OffsetSet, str] = "tableII"
    schedule: Optional[object] = None   # default depends on the tracker
    num_trials: int = 1
    num_eccs: int = 100
    seed: int = 0
    snr_db: float = 0.0
    record_every: int = 1
    init_halfwidth: float = 0.5
    rbt_sigma_mode: str = "perfect"


@dataclass(frozen=True)
class MetricsRecord:
    ecc: int
    explorations_total: int
    mse_h: float
    mse_x: float
    crlb_ref: float
    trials: int


def _validate(ec: ExperimentConfig):
    if ec.tracker not in TRACKER_NAMES:
        raise ConfigError(f"tracker: unknown tracker {ec.tracker!r}; "
                          f"expected one of {TRACKER_NAMES}")
    if ec.num_trials < 1:
        raise ConfigError("num_trials: must be at least 1")
    if ec.num_eccs < 1:
        raise ConfigError("num_eccs: must be at least 1")
    if ec.record_every < 1:
        raise ConfigError("record_every: must be at least 1")
    if not 0 <= ec.init_halfwidth < 1:
        raise ConfigError("init_halfwidth: must lie in [0, 1)")
    if ec.rbt_sigma_mode not in ("perfect", "estimated"):
        raise ConfigError("rbt_sigma_mode: expected 'perfect' or 'estimated'")
    if isinstance(ec.offsets, str) and ec.offsets not in OFFSET_PRESETS:
        raise ConfigError(f"offsets: unknown preset {ec.offsets!r}; "
                          f"expected one of {sorted(OFFSET_PRESETS)}")


def _resolve_offsets(ec: ExperimentConfig) -> OffsetSet:
    if isinstance(ec.offsets, str):
        return OFFSET_PRESETS[ec.offsets]
    return ec.offsets


def effective_array(ec: ExperimentConfig) -> ArrayConfig:
    """Array config with the pilot amplitude implied by the transmit SNR:
    pilot_amp = sqrt(10^(snr/10) * noise_var)."""
    pilot = float(np.sqrt(10.0 ** (ec.snr_db / 10.0) * ec.array.noise_var))
    return replace(ec.array, pilot_amp=pilot)


def _stationary_gain_var(kind) -> float:
    if isinstance(kind, DynamicI):
        return kind.sigma_beta_c_sq
    return 1.0  # Rician (unit mean power) and Gauss-Markov stationary


def _default_schedule(tracker: str):
    if tracker == "JBCT_DII":
        return ConstantStep(0.7)
    return DiminishingStep(1.0)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _observe_fast(cfg: ArrayConfig, state: ChannelState, dirs: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    """Observation via the shift-property kernels; equal to building the
    explicit probing matrix (tested), but O(M+N) per probe."""
    g, _, _ = probe_kernels(dirs - state.x[None, :], cfg.m, cfg.n)
    noise = np.sqrt(cfg.noise_var / 2.0) * (rng.standard_normal(3)
                                            + 1j * rng.standard_normal(3))
    return cfg.pilot_amp * state.beta_eff * g + noise


def _channel_errors(cfg: ArrayConfig, state: ChannelState, x_hat: np.ndarray,
                    beta_hat: Optional[complex]):
    """(per-element channel-vector SE, direction SE) for one cycle."""
    dx = x_hat - state.x
    err_x = float(dx @ dx)
    if beta_hat is None:
        return np.nan, err_x
    g, _, _ = probe_kernels(dx, cfg.m, cfg.n)
    cross = np.sqrt(cfg.size) * g
    beta = state.beta_eff
    err_h = (cfg.size * (abs(beta_hat) ** 2 + abs(beta) ** 2)
             - 2.0 * np.real(np.conj(beta_hat) * beta * cross))
    return max(float(err_h), 0.0) / cfg.size, err_x


def _run_trial(ec: ExperimentConfig, trial: int):
    cfg = effective_array(ec)
    sc = ec.scenario
    offsets = _resolve_offsets(ec)
    rng = _trial_rng(ec.seed, trial)
    state = init_channel(sc, cfg, rng)
    psi0 = initial_estimate(state, cfg, rng, ec.init_halfwidth, offsets)
    schedule = ec.schedule or _default_schedule(ec.tracker)
    sigma_c_sq = _stationary_gain_var(sc.kind)

    tracker = ec.tracker
    crlb_ref = np.nan
    if isinstance(sc.kind, QuasiStatic):
        crlb_ref = float(static_offsets_crlb(offsets.deltas, cfg.m, cfg.n,
                                             cfg.pilot_amp, cfg.noise_var))
    if tracker in ("JBCT_S", "JBCT_DII"):
        ts = jbct_tracker(cfg, psi0, offsets, schedule)
        step = jbct_static_step if tracker == "JBCT_S" else jbct_dii_step
        probes_of = lambda: ts.probe_directions()
        estimate_of = lambda: (ts.psi[2:], complex(ts.psi[0], ts.psi[1]))
    elif tracker == "RBT_DI":
        eta = element_gain(sc.pattern, state.aoa)
        model = DiModel(eta**2 * sigma_c_sq)
        ts = rbt_tracker(cfg, psi0.x, offsets, schedule, model)
        probes_of = lambda: ts.probe_directions()
        estimate_of = lambda: (ts.x, None)
    elif tracker == "BeamSwitch":
        ts = beam_switch_tracker(cfg, psi0.x)
        probes_of = lambda: beam_switch_probes(ts)
        estimate_of = lambda: (ts.x, ts.beta_hat)
    else:  # EKF
        ts = ekf_tracker(cfg, psi0.x)
        ts.beta_hat = psi0.beta
        probes_of = lambda: ekf_probes(ts)
        estimate_of = lambda: (ts.x, ts.beta_hat)

    if isinstance(sc.kind, DynamicI):
        # per-trial direction bound at this trial's equivalent-gain variance
        eta_true = element_gain(sc.pattern, state.aoa)
        snr_b = cfg.pilot_amp**2 * eta_true**2 * sigma_c_sq / cfg.noise_var
        crlb_ref = float(di_offsets_crlb(offsets.deltas, cfg.m, cfg.n, snr_b))

    err_h = np.empty(ec.num_eccs)
    err_x = np.empty(ec.num_eccs)
    for k in range(ec.num_eccs):
        dirs = probes_of()
        state = evolve(state, sc, cfg, rng)
        y = _observe_fast(cfg, state, dirs, rng)
        if tracker == "RBT_DI":
            if ec.rbt_sigma_mode == "estimated":
                model = DiModel(estimated_gain_variance(sc, cfg, ts.x,
                                                        sigma_c_sq))
            rbt_di_step(ts, cfg, model, y)
        elif tracker == "BeamSwitch":
            baseline_beam_switch_step(ts, cfg, y)
        elif tracker == "EKF":
            baseline_ekf_step(ts, cfg, y)
        else:
            step(ts, cfg, y)
        x_hat, beta_hat = estimate_of()
        err_h[k], err_x[k] = _channel_errors(cfg, state, x_hat, beta_hat)
    return trial, err_h, err_x, crlb_ref


def _worker(args):
    ec, trials = args
    return [_run_trial(ec, t) for t in trials]


def _worker_count() -> int:
    env = os.environ.get("BEAMTRACK_THREADS", "")
    if env == "":
        return 1
    count = int(env)
    if count == 0:
        return os.cpu_count() or 1
    return max(1, count)


def run_experiment(ec: ExperimentConfig) -> List[MetricsRecord]:
    """Run the configured Monte-Carlo experiment and aggregate per-cycle
    mean squared errors across trials.

    Every tracker consumes exactly 3 probes per cycle plus one bootstrap
    cycle, so ``explorations_total`` = 3 * (ecc + 1) for all of them.
    ``crlb_ref`` reports the relevant achieved CRLB over the cycle count for
    the quasi-static (channel-vector) and fading-gain (direction) scenarios,
    NaN otherwise.
    """
    _validate(ec)
    workers = _worker_count()
    if workers <= 1 or ec.num_trials == 1:
        results = [_run_trial(ec, t) for t in range(ec.num_trials)]
    else:
        chunks = np.array_split(np.arange(ec.num_trials), workers * 4)
        chunks = [c for c in chunks if len(c)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_worker, [(ec, list(c)) for c in chunks])
        results = [r for part in parts for r in part]
        results.sort(key=lambda r: r[0])  # deterministic reduction order

    sum_h = np.zeros(ec.num_eccs)
    sum_x = np.zeros(ec.num_eccs)
    sum_crlb = 0.0
    crlb_count = 0
    for _, err_h, err_x, crlb in results:
        sum_h += err_h
        sum_x += err_x
        if np.isfinite(crlb):
            sum_crlb += crlb
            crlb_count += 1
    trials = ec.num_trials
    mean_crlb = sum_crlb / crlb_count if crlb_count else np.nan

    records = []
    for k in range(1, ec.num_eccs + 1):
        if k % ec.record_every and k != ec.num_eccs:
            continue
        records.append(MetricsRecord(
            ecc=k,
            explorations_total=3 * (k + 1),
            mse_h=float(sum_h[k - 1] / trials),
            mse_x=float(sum_x[k - 1] / trials),
            crlb_ref=float(mean_crlb / k) if np.isfinite(mean_crlb) else float("nan"),
            trials=trials,
        ))
    return records


CSV_HEADER = "ecc,explorations_total,mse_h,mse_x,crlb_ref,trials"


def emit_csv(records, path):
    """Write records with 12-significant-digit decimals and LF endings."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in records:
                fh.write(f"{r.ecc},{r.explorations_total},{r.mse_h:.12g},"
                         f"{r.mse_x:.12g},{r.crlb_ref:.12g},{r.trials}\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> List[MetricsRecord]:
    records = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}: {header!r}")
        for line in fh:
            ecc, expl, mh, mx, cr, tr = line.strip().split(",")
            records.append(MetricsRecord(int(ecc), int(expl), float(mh),
                                         float(mx), float(cr), int(tr)))
    return records


# ---------------------------------------------------------------------------
# flat key-value configuration files (TOML-compatible subset)
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {"scenario", "aoa_region", "rician_k_db", "sigma_beta_c_sq",
                  "rho", "delta_a_deg"}
_KNOWN_KEYS = _SCENARIO_KEYS | {
    "tracker", "offsets", "m", "n", "d1", "d2", "noise_var", "snr_db",
    "trials", "eccs", "seed", "record_every", "init_halfwidth",
    "schedule", "epsilon", "k0", "step", "rbt_sigma_mode", "out",
}


def _parse_value(raw: str, key: str):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        if any(c in raw for c in ".eE") and not raw.lstrip("+-").isdigit():
            return float(raw)
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse value {raw!r}")


def parse_config_text(text: str) -> dict:
    """Parse a flat ``key = value`` file (strings quoted, `#` comments)."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(raw, key)
    return out


def config_from_mapping(kv: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from parsed key-value pairs.
    The ``out`` key (output CSV path) is the CLI's to consume."""
    kv = dict(kv)
    kv.pop("out", None)
    name = kv.pop("scenario", "quasi-static")
    if name == "quasi-static":
        kind = QuasiStatic(rician_k_db=float(kv.pop("rician_k_db", 15.0)))
    elif name == "dynamic-i":
        kind = DynamicI(sigma_beta_c_sq=float(kv.pop("sigma_beta_c_sq", 1.0)))
    elif name == "dynamic-ii":
        kind = DynamicII(rho=float(kv.pop("rho", 0.995)),
                         delta_a=float(np.deg2rad(kv.pop("delta_a_deg", 0.3))))
    else:
        raise ConfigError(f"scenario: unknown scenario {name!r}")
    scenario = ScenarioConfig(kind, kv.pop("aoa_region", "central"))

    try:
        array = ArrayConfig(m=int(kv.pop("m", 8)), n=int(kv.pop("n", 8)),
                            d1=float(kv.pop("d1", 0.5)),
                            d2=float(kv.pop("d2", 0.5)),
                            noise_var=float(kv.pop("noise_var", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"array: {exc}")

    schedule = None
    sched_name = kv.pop("schedule", None)
    eps = kv.pop("epsilon", 1.0)
    k0 = kv.pop("k0", 0.0)
    step = kv.pop("step", 0.7)
    if sched_name == "diminishing":
        schedule = DiminishingStep(float(eps), float(k0))
    elif sched_name == "constant":
        schedule = ConstantStep(float(step))
    elif sched_name is not None:
        raise ConfigError(f"schedule: unknown schedule {sched_name!r}")

    ec = ExperimentConfig(
        scenario=scenario,
        array=array,
        tracker=str(kv.pop("tracker", "JBCT_S")),
        offsets=str(kv.pop("offsets", "tableII")),
        schedule=schedule,
        num_trials=int(kv.pop("trials", 1)),
        num_eccs=int(kv.pop("eccs", 100)),
        seed=int(kv.pop("seed", 0)),
        snr_db=float(kv.pop("snr_db", 0.0)),
        record_every=int(kv.pop("record_every", 1)),
        init_halfwidth=float(kv.pop("init_halfwidth", 0.5)),
        rbt_sigma_mode=str(kv.pop("rbt_sigma_mode", "perfect")),
    )
    if kv:
        raise ConfigError(f"unused keys: {sorted(kv)}")
    _validate(ec)
    return ec


def load_experiment(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}")
    return config_from_mapping(parse_config_text(text))
