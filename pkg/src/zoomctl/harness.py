"""Monte Carlo engine: trial ensembles, stability verdicts, parameter sweeps.

Trials are vectorized in lockstep across a chunk axis; every trial draws
its noise from its own counter-derived stream (PCG64 seeded by mixing the
master seed with the trial index), so results are independent of chunking
and threading.  The vectorized step mirrors the scalar reference loop
expression by expression and is held to bit-identical agreement with it by
the test suite.

Policies:

* ``adaptive_fixed_rate``  -- the two-mode strategy under test.
* ``static_quantizer``     -- same symbol budget (2L+1 cells) spent on a
  fixed uniform partition of [-range, range] with the same cell control
  law; out-of-range states saturate into the extreme cells.  This is the
  classical failure mode of non-adaptive quantizers under unbounded noise.
* ``perfect_observation``  -- U = mu_A * X + mu_W (rate-unlimited oracle).
* ``zero_control``         -- U = mu_W (the disturbance-centering offset
  only); the open-loop oracle.

Aggregation: per time index, X_n^2 is averaged over the trials still alive
at n (a trial dies when |X| exceeds the divergence limit); divergence is
counted and reported, never mixed into means.  Sums reduce in trial order
with a fixed chunk size, so identical configs give bit-identical stats.
``ZOOMCTL_THREADS`` caps the number of worker threads used across chunks.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from zoomctl import analysis
from zoomctl.analysis import TraceBundle
from zoomctl.codec import StrategyParams, rate
from zoomctl.distributions import DistributionSpec, moments, sample_array
from zoomctl.loop import DIVERGENCE_LIMIT, NO_SYMBOL, Trace

CHUNK_TRIALS = 512

POLICY_KINDS = (
    "adaptive_fixed_rate",
    "static_quantizer",
    "perfect_observation",
    "zero_control",
)

FULL_RECORD_FIELDS = ("X", "M", "I", "normal", "rho", "clamped", "symbol", "U", "A", "W")


@dataclass(frozen=True)
class Policy:
    """What the controller is allowed to see and do."""

    kind: str
    range: float | None = None  # static_quantizer only; defaults to 10*M0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"policy kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if self.range is not None:
            if self.kind != "static_quantizer":
                raise ValueError("range applies to static_quantizer only")
            if not (math.isfinite(self.range) and self.range > 0):
                raise ValueError(f"static range must be finite and > 0, got {self.range}")

    @classmethod
    def adaptive(cls) -> "Policy":
        return cls("adaptive_fixed_rate")

    @classmethod
    def static(cls, range: float | None = None) -> "Policy":
        return cls("static_quantizer", range)

    @classmethod
    def perfect(cls) -> "Policy":
        return cls("perfect_observation")

    @classmethod
    def zero(cls) -> "Policy":
        return cls("zero_control")


@dataclass(frozen=True)
class ExperimentConfig:
    a_spec: DistributionSpec
    w_spec: DistributionSpec
    params: StrategyParams
    policy: Policy
    horizon: int
    trials: int
    master_seed: int
    alpha: float

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")

    def static_range(self) -> float:
        if self.policy.range is not None:
            return self.policy.range
        return 10.0 * self.params.M0

    def describe(self) -> dict:
        d = {
            "system": {"A": self.a_spec.describe(), "W": self.w_spec.describe()},
            "strategy": self.params.describe(),
            "policy": self.policy.kind,
            "horizon": self.horizon,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "alpha": self.alpha,
        }
        if self.policy.kind == "static_quantizer":
            d["static_range"] = self.static_range()
        return d


@dataclass
class SummaryStats:
    """Ensemble aggregates.

    ``curve_mean[n]`` and ``curve_stderr[n]`` are over trials alive at n
    (``curve_count[n]`` of them); NaN where no trial remains.
    ``max_mean_nsq`` is the largest per-index mean of the dominating
    envelope N_n^2 (adaptive policy only, None otherwise).
    """

    policy: str
    trials: int
    horizon: int
    curve_mean: np.ndarray
    curve_stderr: np.ndarray
    curve_count: np.ndarray
    diverged_count: int
    emergency_fraction: float
    window_ratio: float
    max_mean_nsq: float | None
    verdict: str

    def second_moment_curve(self) -> list[tuple[int, float, float]]:
        return [
            (int(n), float(self.curve_mean[n]), float(self.curve_stderr[n]))
            for n in range(len(self.curve_mean))
        ]

    def terminal_mean(self) -> tuple[int, float]:
        """Mean X^2 at the last index where any trial is still alive."""
        alive = np.nonzero(self.curve_count > 0)[0]
        n = int(alive[-1])
        return n, float(self.curve_mean[n])


def trial_seed(master_seed: int, index: int) -> list[int]:
    """Entropy words mixed into each trial's PCG64 stream."""
    return [master_seed, index]


def _predraw(cfg: ExperimentConfig, indices: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    h = cfg.horizon
    a = np.empty((len(indices), h))
    w = np.empty((len(indices), h))
    for j, t in enumerate(indices):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(trial_seed(cfg.master_seed, t))))
        a[j] = sample_array(cfg.a_spec, rng, h)
        w[j] = sample_array(cfg.w_spec, rng, h)
    return a, w


@dataclass
class _ChunkOut:
    sum_xsq: np.ndarray
    sum_x4: np.ndarray
    count: np.ndarray
    steps_alive: int
    emergency_steps: int
    diverged: int
    diverged_at: np.ndarray
    records: dict[str, np.ndarray] | None
    sum_nsq: np.ndarray | None
    count_nsq: np.ndarray | None


def _alloc_records(fields, n_t: int, h: int) -> dict[str, np.ndarray]:
    rec: dict[str, np.ndarray] = {}
    for f in fields:
        if f == "X":
            rec[f] = np.zeros((n_t, h + 1))
        elif f in ("normal", "clamped"):
            rec[f] = np.zeros((n_t, h), dtype=bool)
        elif f in ("rho", "symbol"):
            rec[f] = np.full((n_t, h), NO_SYMBOL if f == "symbol" else 1, dtype=np.int64)
        else:
            rec[f] = np.zeros((n_t, h))
    return rec


def _chunk_envelope(
    m_rec: np.ndarray, i_rec: np.ndarray, normal_rec: np.ndarray, alive: np.ndarray, K: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-index sums and counts of N^2 over non-diverged trials in a chunk."""
    keep = np.nonzero(alive)[0]
    h = m_rec.shape[1]
    if len(keep) == 0:
        return np.zeros(h), np.zeros(h, dtype=np.int64)
    bundle = TraceBundle(
        X=np.zeros((len(keep), h + 1)),
        M=m_rec[keep],
        I=i_rec[keep],
        normal=normal_rec[keep],
    )
    nsq, hr = analysis.envelope_squared(bundle, K)
    sums = np.zeros(h)
    counts = np.zeros(h, dtype=np.int64)
    sums[:hr] = nsq.sum(axis=0)
    counts[:hr] = len(keep)
    return sums, counts


def _run_chunk(
    cfg: ExperimentConfig,
    indices: Sequence[int],
    record_fields: tuple[str, ...] | None,
    envelope: bool,
) -> _ChunkOut:
    kind = cfg.policy.kind
    n_t = len(indices)
    h = cfg.horizon
    p = cfg.params
    mu_a, _ = moments(cfg.a_spec)
    mu_w, _ = moments(cfg.w_spec)
    a_draws, w_draws = _predraw(cfg, indices)

    x = np.zeros(n_t)
    alive = np.ones(n_t, dtype=bool)
    diverged_at = np.full(n_t, -1, dtype=np.int64)
    sum_xsq = np.zeros(h + 1)
    sum_x4 = np.zeros(h + 1)
    count = np.zeros(h + 1, dtype=np.int64)
    count[0] = n_t
    steps_alive = 0
    emergency_steps = 0

    rec = _alloc_records(record_fields, n_t, h) if record_fields else None
    need_env = envelope and kind == "adaptive_fixed_rate"
    if need_env:
        env_m = np.empty((n_t, h))
        env_i = np.empty((n_t, h))
        env_normal = np.zeros((n_t, h), dtype=bool)

    L = p.L
    two_l = 2 * L
    adaptive = kind == "adaptive_fixed_rate"
    static = kind == "static_quantizer"
    if adaptive:
        m_enc = np.full(n_t, p.M0)
        i_enc = np.full(n_t, p.M0)
        rho_enc = np.ones(n_t, dtype=np.int64)
        m_ctl = np.full(n_t, p.M0)
        i_ctl = np.full(n_t, p.M0)
        rho_ctl = np.ones(n_t, dtype=np.int64)
    if static:
        srange = cfg.static_range()
        w_cell_s = 2.0 * srange / (two_l + 1)

    for n in range(h):
        steps_alive += int(alive.sum())
        if adaptive:
            limit = p.P * m_enc
            normal = np.abs(x) <= limit
            w_cell = p.P * m_enc / L
            k = np.floor(np.clip(x / w_cell, -float(L), float(L))).astype(np.int64)
            k = np.where(x < k * w_cell, k - 1, k)
            k = np.where(x >= (k + 1) * w_cell, k + 1, k)
            k = np.clip(k, -L, L - 1)
            symbol = np.where(normal, L + k, two_l)
            # encoder-side tracker from its own cell arithmetic
            a_cell = np.where(k == -L, -limit, k * w_cell)
            b_cell = np.where(k == L - 1, limit, (k + 1) * w_cell)
            geo_m = np.maximum(np.abs(a_cell), np.abs(b_cell))
            geo_i = (b_cell - a_cell) / 2.0
            m_new = np.maximum(p.M0, geo_m)
            i_new = np.maximum(p.M0, geo_i)
            rho_new = np.where(a_cell >= 0.0, 1, -1).astype(np.int64)
            clamped = (geo_m < p.M0) | (geo_i < p.M0)
            m_enc_n = np.where(normal, m_new, p.P * m_enc)
            i_enc_n = np.where(normal, i_new, i_enc)
            rho_enc_n = np.where(normal, rho_new, rho_enc)
            # controller-side tracker from the symbol alone
            normal_c = symbol != two_l
            k_c = np.clip(symbol - L, -L, L - 1)
            w_cell_c = p.P * m_ctl / L
            limit_c = p.P * m_ctl
            a_c = np.where(k_c == -L, -limit_c, k_c * w_cell_c)
            b_c = np.where(k_c == L - 1, limit_c, (k_c + 1) * w_cell_c)
            geo_m_c = np.maximum(np.abs(a_c), np.abs(b_c))
            geo_i_c = (b_c - a_c) / 2.0
            m_c = np.maximum(p.M0, geo_m_c)
            i_c = np.maximum(p.M0, geo_i_c)
            rho_c = np.where(a_c >= 0.0, 1, -1).astype(np.int64)
            u = np.where(normal_c, rho_c * mu_a * (m_c - i_c) + mu_w, mu_w)
            m_ctl_n = np.where(normal_c, m_c, p.P * m_ctl)
            i_ctl_n = np.where(normal_c, i_c, i_ctl)
            rho_ctl_n = np.where(normal_c, rho_c, rho_ctl)
            if (
                np.any((m_enc_n != m_ctl_n) & alive)
                or np.any((i_enc_n != i_ctl_n) & alive)
                or np.any((rho_enc_n != rho_ctl_n) & alive)
            ):  # pragma: no cover - protocol invariant
                raise AssertionError(f"tracker mismatch at step {n}")
            emergency_steps += int(np.sum(~normal & alive))
            if rec is not None:
                live = alive
                rec["X"][live, n] = x[live]
                rec["M"][live, n] = m_enc_n[live]
                rec["I"][live, n] = i_enc_n[live]
                rec["normal"][live, n] = normal[live]
                if "rho" in rec:
                    rec["rho"][live, n] = rho_enc_n[live]
                    rec["clamped"][live, n] = (clamped & normal)[live]
                    rec["symbol"][live, n] = symbol[live]
                    rec["U"][live, n] = u[live]
                    rec["A"][live, n] = a_draws[live, n]
                    rec["W"][live, n] = w_draws[live, n]
            if need_env:
                env_m[:, n] = m_enc_n
                env_i[:, n] = i_enc_n
                env_normal[:, n] = normal & alive
            m_enc = np.where(alive, m_enc_n, m_enc)
            i_enc = np.where(alive, i_enc_n, i_enc)
            rho_enc = np.where(alive, rho_enc_n, rho_enc)
            m_ctl = np.where(alive, m_ctl_n, m_ctl)
            i_ctl = np.where(alive, i_ctl_n, i_ctl)
            rho_ctl = np.where(alive, rho_ctl_n, rho_ctl)
        elif static:
            idx = np.floor(
                np.clip((x + srange) / w_cell_s, 0.0, float(two_l) + 1.0)
            ).astype(np.int64)
            idx = np.clip(idx, 0, two_l)
            a_cell = -srange + idx * w_cell_s
            b_cell = a_cell + w_cell_s
            geo_m = np.maximum(np.abs(a_cell), np.abs(b_cell))
            geo_i = (b_cell - a_cell) / 2.0
            m_new = np.maximum(p.M0, geo_m)
            i_new = np.maximum(p.M0, geo_i)
            est = np.where(
                a_cell >= 0.0, m_new - i_new, np.where(b_cell <= 0.0, -(m_new - i_new), 0.0)
            )
            u = mu_a * est + mu_w
            if rec is not None:
                live = alive
                rec["X"][live, n] = x[live]
                rec["M"][live, n] = m_new[live]
                rec["I"][live, n] = i_new[live]
                rec["normal"][live, n] = True
                if "rho" in rec:
                    rec["rho"][live, n] = np.where(a_cell >= 0.0, 1, -1)[live]
                    rec["symbol"][live, n] = idx[live]
                    rec["U"][live, n] = u[live]
                    rec["A"][live, n] = a_draws[live, n]
                    rec["W"][live, n] = w_draws[live, n]
        else:
            u = mu_a * x + mu_w if kind == "perfect_observation" else np.full(n_t, mu_w)
            if rec is not None:
                live = alive
                rec["X"][live, n] = x[live]
                rec["normal"][live, n] = True
                if "U" in rec:
                    rec["U"][live, n] = u[live]
                    rec["A"][live, n] = a_draws[live, n]
                    rec["W"][live, n] = w_draws[live, n]

        x_next = a_draws[:, n] * x + w_draws[:, n] - u
        step_alive = alive
        x = np.where(step_alive, x_next, x)
        dead_now = step_alive & (~np.isfinite(x) | (np.abs(x) > DIVERGENCE_LIMIT))
        diverged_at[dead_now] = n + 1
        alive = step_alive & ~dead_now
        xsq = np.where(alive, x * x, 0.0)
        sum_xsq[n + 1] = xsq.sum()
        with np.errstate(over="ignore"):
            # near the divergence limit x^4 saturates to inf; the stderr at
            # such indices is reported as inf, means stay finite
            sum_x4[n + 1] = (xsq * xsq).sum()
        count[n + 1] = int(alive.sum())
        if rec is not None:
            # the freshly diverged value is recorded too (flagged, excluded
            # from the aggregates above)
            rec["X"][step_alive, n + 1] = x[step_alive]

    sum_nsq = count_nsq = None
    if need_env:
        sum_nsq, count_nsq = _chunk_envelope(env_m, env_i, env_normal, alive, p.K)
    return _ChunkOut(
        sum_xsq=sum_xsq,
        sum_x4=sum_x4,
        count=count,
        steps_alive=steps_alive,
        emergency_steps=emergency_steps,
        diverged=int(np.sum(diverged_at >= 0)),
        diverged_at=diverged_at,
        records=rec,
        sum_nsq=sum_nsq,
        count_nsq=count_nsq,
    )


def _max_workers() -> int:
    raw = os.environ.get("ZOOMCTL_THREADS", "").strip()
    if not raw:
        return 1
    return max(1, int(raw))


def _window_ratio(curve: np.ndarray, split: float) -> float:
    h = len(curve) - 1
    lo = int(math.floor(h * split))
    mid = int(math.floor(h * (1.0 + split) / 2.0))
    third = curve[lo:mid]
    last = curve[mid:]
    third = third[np.isfinite(third)]
    last = last[np.isfinite(last)]
    if len(third) == 0 or len(last) == 0 or third.mean() == 0.0:
        return math.nan
    return float(last.mean() / third.mean())


def stability_verdict(stats: SummaryStats, split: float = 0.5) -> str:
    """Operational reading of the bounded-second-moment requirement.

    stable: flat tail (window ratio within [0.5, 1.5]) and zero divergence.
    unstable: window ratio above 4 or more than 1% of trials diverged.
    Anything else, including an undefined ratio, is inconclusive.
    """
    if not 0.0 < split < 1.0:
        raise ValueError(f"split must lie in (0, 1), got {split}")
    if stats.horizon < 1000:
        raise ValueError(f"verdicts need horizon >= 1000, got {stats.horizon}")
    ratio = _window_ratio(stats.curve_mean, split)
    if (math.isfinite(ratio) and ratio > 4.0) or stats.diverged_count > 0.01 * stats.trials:
        return "unstable"
    if math.isfinite(ratio) and 0.5 <= ratio <= 1.5 and stats.diverged_count == 0:
        return "stable"
    return "inconclusive"


def run_experiment(
    cfg: ExperimentConfig,
    keep_traces: int = 0,
    envelope: bool = True,
) -> tuple[SummaryStats, list[Trace]]:
    """Run the configured ensemble and aggregate second-moment statistics.

    ``keep_traces`` retains the first k trials as full Trace objects
    (re-simulated through the recording path; bit-identical to their
    ensemble counterparts).  ``envelope`` controls whether the dominating
    envelope statistic max_mean_nsq is computed (adaptive policy only).
    """
    chunks = [
        list(range(start, min(start + CHUNK_TRIALS, cfg.trials)))
        for start in range(0, cfg.trials, CHUNK_TRIALS)
    ]
    workers = _max_workers()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(lambda idx: _run_chunk(cfg, idx, None, envelope), chunks))
    else:
        outs = [_run_chunk(cfg, idx, None, envelope) for idx in chunks]

    h = cfg.horizon
    sum_xsq = np.zeros(h + 1)
    sum_x4 = np.zeros(h + 1)
    count = np.zeros(h + 1, dtype=np.int64)
    steps_alive = 0
    emergency_steps = 0
    diverged = 0
    sum_nsq = np.zeros(h)
    count_nsq = np.zeros(h, dtype=np.int64)
    have_env = False
    for out in outs:
        sum_xsq += out.sum_xsq
        sum_x4 += out.sum_x4
        count += out.count
        steps_alive += out.steps_alive
        emergency_steps += out.emergency_steps
        diverged += out.diverged
        if out.sum_nsq is not None:
            have_env = True
            sum_nsq += out.sum_nsq
            count_nsq += out.count_nsq

    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        mean = np.where(count > 0, sum_xsq / np.maximum(count, 1), np.nan)
        ex4 = np.where(count > 0, sum_x4 / np.maximum(count, 1), np.nan)
        var = np.maximum(ex4 - mean**2, 0.0)
        stderr = np.where(count > 1, np.sqrt(var / np.maximum(count, 1)), np.nan)
        mean_nsq = np.where(count_nsq > 0, sum_nsq / np.maximum(count_nsq, 1), np.nan)

    max_mean_nsq = None
    if have_env and np.any(count_nsq > 0):
        max_mean_nsq = float(np.nanmax(mean_nsq))

    stats = SummaryStats(
        policy=cfg.policy.kind,
        trials=cfg.trials,
        horizon=h,
        curve_mean=mean,
        curve_stderr=stderr,
        curve_count=count,
        diverged_count=diverged,
        emergency_fraction=(emergency_steps / steps_alive) if steps_alive else 0.0,
        window_ratio=_window_ratio(mean, 0.5),
        max_mean_nsq=max_mean_nsq,
        verdict="",
    )
    stats.verdict = (
        stability_verdict(stats) if h >= 1000 else "inconclusive"
    )

    traces: list[Trace] = []
    if keep_traces > 0:
        traces = [
            extract_trace(cfg, t) for t in range(min(keep_traces, cfg.trials))
        ]
    return stats, traces


def run_recorded_bundle(
    cfg: ExperimentConfig, full: bool = False
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Record per-step columns for every trial.

    Returns the stacked record dict plus each trial's divergence step (-1
    where the trial ran to the horizon).  Memory scales with
    trials * horizon * fields; callers cap the horizon accordingly.
    """
    fields = FULL_RECORD_FIELDS if full else ("X", "M", "I", "normal")
    chunks = [
        list(range(start, min(start + CHUNK_TRIALS, cfg.trials)))
        for start in range(0, cfg.trials, CHUNK_TRIALS)
    ]
    outs = [_run_chunk(cfg, idx, fields, envelope=False) for idx in chunks]
    rec = {
        f: np.concatenate([o.records[f] for o in outs], axis=0) for f in fields
    }
    diverged_at = np.concatenate([o.diverged_at for o in outs])
    return rec, diverged_at


def extract_trace(cfg: ExperimentConfig, index: int) -> Trace:
    """Materialize one ensemble member as a full Trace."""
    out = _run_chunk(cfg, [index], FULL_RECORD_FIELDS, envelope=False)
    rec = out.records
    quantized = cfg.policy.kind in ("adaptive_fixed_rate", "static_quantizer")
    div_at = int(out.diverged_at[0])
    steps = cfg.horizon if div_at < 0 else div_at
    mode = np.zeros(steps + 1, dtype=np.uint8)
    mode[:steps] = ~rec["normal"][0, :steps]
    normal_steps = rec["normal"][0, :steps]
    round_id = np.maximum(np.cumsum(normal_steps.astype(np.int64)) - 1, 0)
    symbol = np.full(steps + 1, NO_SYMBOL, dtype=np.int64)
    rho = np.ones(steps + 1, dtype=np.int64)
    m_col = np.full(steps + 1, cfg.params.M0)
    i_col = np.full(steps + 1, cfg.params.M0)
    if quantized:
        symbol[:steps] = rec["symbol"][0, :steps]
        rho[:steps] = rec["rho"][0, :steps]
        m_col[:steps] = rec["M"][0, :steps]
        i_col[:steps] = rec["I"][0, :steps]
    if steps:
        m_col[steps] = m_col[steps - 1]
        i_col[steps] = i_col[steps - 1]
        rho[steps] = rho[steps - 1]
        mode[steps] = mode[steps - 1]
    u_col = np.zeros(steps + 1)
    u_col[:steps] = rec["U"][0, :steps]
    a_col = np.full(steps + 1, np.nan)
    a_col[:steps] = rec["A"][0, :steps]
    w_col = np.full(steps + 1, np.nan)
    w_col[:steps] = rec["W"][0, :steps]
    round_col = np.zeros(steps + 1, dtype=np.int64)
    round_col[:steps] = round_id
    if steps:
        round_col[steps] = round_col[steps - 1]
    return Trace(
        n=np.arange(steps + 1, dtype=np.int64),
        X=rec["X"][0, : steps + 1].copy(),
        symbol=symbol,
        mode=mode,
        M=m_col,
        I=i_col,
        rho=rho,
        U=u_col,
        A=a_col,
        W=w_col,
        round_id=round_col,
        params=cfg.params,
        a_spec=cfg.a_spec,
        w_spec=cfg.w_spec,
        seed=trial_seed(cfg.master_seed, index),
        diverged=div_at >= 0,
        diverged_at=None if div_at < 0 else div_at,
        policy=cfg.policy.kind,
    )


@dataclass(frozen=True)
class SweepRow:
    dimension: str
    value: float
    R: int
    verdict: str
    diverged_count: int
    window_ratio: float
    emergency_fraction: float
    terminal_mean_xsq: float


SWEEP_DIMENSIONS = ("P", "L", "K", "M0", "R")


def sweep(cfg: ExperimentConfig, dimension: str, values: Sequence[float]) -> list[SweepRow]:
    """One ensemble per value of the swept strategy dimension.

    Sweeping R picks the largest codebook fitting the bit budget,
    L = (2^R - 1) // 2.  The master seed is reused across values (common
    random numbers).
    """
    if dimension not in SWEEP_DIMENSIONS:
        raise ValueError(f"dimension must be one of {SWEEP_DIMENSIONS}, got {dimension!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    rows = []
    for v in values:
        if dimension == "L":
            params = replace(cfg.params, L=int(v))
        elif dimension == "R":
            bits = int(v)
            if bits < 2:
                raise ValueError(f"rate sweep needs R >= 2, got {bits}")
            params = replace(cfg.params, L=(2**bits - 1) // 2)
        else:
            params = replace(cfg.params, **{dimension: float(v)})
        sub = replace(cfg, params=params)
        stats, _ = run_experiment(sub, envelope=False)
        n_term, mean_term = stats.terminal_mean()
        rows.append(
            SweepRow(
                dimension=dimension,
                value=float(v),
                R=rate(params),
                verdict=stats.verdict,
                diverged_count=stats.diverged_count,
                window_ratio=stats.window_ratio,
                emergency_fraction=stats.emergency_fraction,
                terminal_mean_xsq=mean_term,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_summary_json(stats: SummaryStats, cfg: ExperimentConfig, path) -> None:
    n_term, mean_term = stats.terminal_mean()
    payload = {
        "config": cfg.describe(),
        "verdict": stats.verdict,
        "trials": stats.trials,
        "horizon": stats.horizon,
        "diverged_count": stats.diverged_count,
        "emergency_fraction": stats.emergency_fraction,
        "window_ratio": _json_safe(stats.window_ratio),
        "max_mean_nsq": _json_safe(stats.max_mean_nsq),
        "terminal": {"n": n_term, "mean_xsq": _json_safe(mean_term)},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_curve_csv(stats: SummaryStats, cfg: ExperimentConfig, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config: {json.dumps(cfg.describe(), sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "mean", "stderr"])
        for n in range(len(stats.curve_mean)):
            writer.writerow([n, repr(float(stats.curve_mean[n])), repr(float(stats.curve_stderr[n]))])


def write_sweep_csv(rows: Iterable[SweepRow], cfg: ExperimentConfig, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config: {json.dumps(cfg.describe(), sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["dimension", "value", "R", "verdict", "diverged_count",
             "window_ratio", "emergency_fraction", "terminal_mean_xsq"]
        )
        for r in rows:
            writer.writerow(
                [r.dimension, repr(r.value), r.R, r.verdict, r.diverged_count,
                 repr(float(r.window_ratio)), repr(float(r.emergency_fraction)),
                 repr(float(r.terminal_mean_xsq))]
            )
