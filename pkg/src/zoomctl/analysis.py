"""Verification machinery for the two-mode strategy.

The stability argument rests on a dominating sequence built per trace:

* freeze(trace, n0): hold the state fixed at X_{n0} from n0 on (gains 1,
  disturbances 0, controls 0) while the tracker keeps growing by P per
  step whenever it still sits below |X_{n0}|.
* tau(n): first step m >= n whose guard |X~_m| <= P*M~_{m-1} holds, i.e.
  the step where the round containing n exits back to normal mode.
* Q_n = sqrt(M~_n^2 + K*I~_n^2): composite envelope of the tracker.
* N_n = Q_{tau(n)} * 2^(tau(n)-n): the dominating sequence.  It front-loads
  the cost of a zoom-out: during an emergency N halves per step by
  construction, and |X_{n0}| <= N_{n0} always (checked here, exactly).

The drift diagnostic checks the contraction E[N_{n+1}^2] <= (1-c) E[N_n^2] + D
with D = 2*sigma_W^2 + (1+K)*M0^2 on trial ensembles, plus the implied cap
E[N_n^2] <= D/c.  Drift statistics use N computed on unmodified traces;
the frozen construction is only needed for the domination check (the two
coincide up to the step where a freeze would start).

Feasibility reproduces the parameter arithmetic: the normal-mode
contraction margin, the envelope-weight condition on K, and the zoom-out
tail bound epsilon(P, M0), which must leave c + epsilon below
min(1 - sigma_A^2, 3/4).

Two deliberate variants are exposed side by side: the contraction margin
and K condition are evaluated with |mu_A| and mu_A^2 where the gain mean
multiplies nonnegative quantities (the analytically safe form), and the
signed/linear literal variants are reported alongside for comparison.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from zoomctl.codec import StrategyParams, rate
from zoomctl.distributions import MomentSummary
from zoomctl.loop import Trace

STALE_GUARD_STEPS = 2  # padding kept after a frozen tracker stabilizes


class UnstabilizableError(ValueError):
    """sigma_A^2 >= 1: no causal strategy can stabilize the second moment."""


class MomentOrderError(ValueError):
    """The tail analysis needs a moment order alpha > 4."""


class BoundDomainError(ValueError):
    """The zoom-out tail bound is outside its domain of validity."""


class DominatingSeqError(ValueError):
    """tau could not be resolved within the available horizon."""


# ---------------------------------------------------------------------------
# frozen traces and the dominating sequence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrozenTrace:
    """State/tracker sequences with the state held fixed from step n0 on.

    Arrays extend past the source trace far enough for the grown tracker to
    stabilize; beyond their length everything is constant.
    """

    n0: int
    Xt: np.ndarray
    Mt: np.ndarray
    It: np.ndarray
    params: StrategyParams


@dataclass(frozen=True)
class DominatingSeq:
    tau: np.ndarray
    Q: np.ndarray
    N: np.ndarray
    K: float


def freeze_arrays(
    X: np.ndarray, M: np.ndarray, I: np.ndarray, n0: int, params: StrategyParams
) -> FrozenTrace:
    """Frozen sequences from raw per-step columns.

    ``X`` holds states (one more entry than executed steps); ``M`` and ``I``
    hold post-update tracker values per executed step.  ``n0`` must index an
    executed step.
    """
    steps = len(M)
    if not 0 <= n0 < steps:
        raise ValueError(f"n0={n0} outside executed steps [0, {steps})")
    x_frozen = abs(float(X[n0]))

    grown = [float(M[n0])]
    # tracker growth after the freeze: multiply by P while it still sits
    # below the frozen state (threshold without the factor P, by definition)
    while x_frozen > grown[-1]:
        grown.append(params.P * grown[-1])
    ext_len = max(steps, n0 + len(grown) + STALE_GUARD_STEPS)

    Xt = np.empty(ext_len)
    Xt[:n0] = X[:n0]
    Xt[n0:] = X[n0]
    Mt = np.empty(ext_len)
    Mt[: n0 + 1] = M[: n0 + 1]
    Mt[n0 : n0 + len(grown)] = grown
    Mt[n0 + len(grown) :] = grown[-1]
    It = np.empty(ext_len)
    It[: n0 + 1] = I[: n0 + 1]
    It[n0 + 1 :] = I[n0]
    return FrozenTrace(n0=n0, Xt=Xt, Mt=Mt, It=It, params=params)


def freeze(trace: Trace, n0: int) -> FrozenTrace:
    """Freeze a recorded trial at step n0 (must index an executed step)."""
    if trace.diverged and trace.diverged_at is not None and trace.diverged_at <= n0:
        raise ValueError(
            f"trace diverged at step {trace.diverged_at}, before requested n0={n0}"
        )
    steps = trace.steps
    return freeze_arrays(trace.X, trace.M[:steps], trace.I[:steps], n0, trace.params)


def _tau_backward(guard: np.ndarray) -> np.ndarray:
    """tau[n] = min{m >= n : guard[m]}, or -1 where unresolved."""
    n = len(guard)
    tau = np.empty(n, dtype=np.int64)
    nxt = -1
    for m in range(n - 1, -1, -1):
        if guard[m]:
            nxt = m
        tau[m] = nxt
    return tau


def dominating_seq(frozen: FrozenTrace, K: float, P: float | None = None) -> DominatingSeq:
    """tau, Q and N over the frozen horizon.

    ``P`` defaults to the strategy's zoom factor; it is accepted separately
    so the guard can be probed at other thresholds in tests.
    """
    if P is None:
        P = frozen.params.P
    m_before = np.concatenate(([frozen.params.M0], frozen.Mt[:-1]))
    guard = np.abs(frozen.Xt) <= P * m_before
    tau = _tau_backward(guard)
    if tau[-1] < 0 or np.any(tau < 0):
        last = int(np.max(np.nonzero(tau < 0)[0], initial=len(tau) - 1))
        raise DominatingSeqError(
            f"round never exits within the frozen horizon; unresolved through index {last}"
        )
    Q = np.sqrt(frozen.Mt**2 + K * frozen.It**2)
    idx = np.arange(len(tau), dtype=np.int64)
    N = np.ldexp(Q[tau], tau - idx)
    return DominatingSeq(tau=tau, Q=Q, N=N, K=float(K))


# ---------------------------------------------------------------------------
# unmodified-trace envelope (for drift statistics)
# ---------------------------------------------------------------------------


@dataclass
class TraceBundle:
    """Stacked per-trace columns for ensemble diagnostics.

    X: (T, steps+1) states; M, I: (T, steps) tracker values; normal:
    (T, steps) True where the step ran in normal mode.
    """

    X: np.ndarray
    M: np.ndarray
    I: np.ndarray
    normal: np.ndarray

    @classmethod
    def from_traces(cls, traces: Sequence[Trace]) -> "TraceBundle":
        steps = {t.steps for t in traces}
        if len(steps) != 1:
            raise ValueError(f"traces have mixed lengths {sorted(steps)}")
        if any(t.diverged for t in traces):
            raise ValueError("diverged traces cannot enter envelope statistics")
        return cls(
            X=np.stack([t.X for t in traces]),
            M=np.stack([t.M[: t.steps] for t in traces]),
            I=np.stack([t.I[: t.steps] for t in traces]),
            normal=np.stack([t.normal_mask() for t in traces]),
        )

    @property
    def num_traces(self) -> int:
        return self.M.shape[0]

    @property
    def steps(self) -> int:
        return self.M.shape[1]


def envelope_squared(bundle: TraceBundle, K: float) -> tuple[np.ndarray, int]:
    """(N^2 per trace and step, resolved horizon).

    tau comes straight from the recorded mode flags.  The resolved horizon
    is the largest h such that every trace has tau defined for all n < h;
    trailing steps of a round that never exits within the horizon are
    excluded (unresolved tau is a suffix property).
    """
    T, H = bundle.normal.shape
    tau = np.empty((T, H), dtype=np.int64)
    nxt = np.full(T, -1, dtype=np.int64)
    for m in range(H - 1, -1, -1):
        nxt = np.where(bundle.normal[:, m], m, nxt)
        tau[:, m] = nxt
    # unresolved tau is a suffix property, so counting it gives the cutoff
    resolved = H - (tau < 0).sum(axis=1)
    h = int(resolved.min())
    if h == 0:
        raise DominatingSeqError("a trace never exits its first round; no resolved steps")
    # work in the squared domain: N^2 = Q^2 * 4^(tau - n) avoids the sqrt
    # round trip, so power-of-two halving stays exact
    qsq = bundle.M**2 + K * bundle.I**2
    tau_h = tau[:, :h]
    qsq_tau = np.take_along_axis(qsq, tau_h, axis=1)
    nsq = np.ldexp(qsq_tau, 2 * (tau_h - np.arange(h, dtype=np.int64)[None, :]))
    return nsq, h


# ---------------------------------------------------------------------------
# domination and halving checks
# ---------------------------------------------------------------------------


@dataclass
class DominationReport:
    checked: int
    violations: list[tuple[int, float, float]]  # (n0, |X_n0|, N_n0)
    max_ratio: float
    points: list[tuple[int, int, float, float]] = field(default_factory=list)
    # (trace index, n0, |X_n0|, N_n0) for every checked point

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "checked": self.checked,
            "violations": [
                {"n0": n0, "abs_x": x, "N": n} for n0, x, n in self.violations
            ],
            "max_ratio": self.max_ratio,
            "ok": self.ok,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trace", "n0", "abs_x", "N", "ok"])
            for t, n0, x_abs, n_val in self.points:
                writer.writerow([t, n0, repr(x_abs), repr(n_val), int(x_abs <= n_val)])


def check_domination(trace: Trace, K: float, n0_set: Iterable[int]) -> DominationReport:
    """Exact check |X_{n0}| <= N_{n0} for each requested n0."""
    violations = []
    points = []
    max_ratio = 0.0
    checked = 0
    for n0 in n0_set:
        frozen = freeze(trace, int(n0))
        ds = dominating_seq(frozen, K)
        x_abs = abs(float(trace.X[n0]))
        n_val = float(ds.N[n0])
        checked += 1
        points.append((0, int(n0), x_abs, n_val))
        if n_val > 0:
            max_ratio = max(max_ratio, x_abs / n_val)
        if x_abs > n_val:
            violations.append((int(n0), x_abs, n_val))
    return DominationReport(
        checked=checked, violations=violations, max_ratio=max_ratio, points=points
    )


@dataclass
class HalvingReport:
    emergency_pairs: int
    violations: list[tuple[int, int, float, float]]  # (trace, n, N_n, N_{n+1})

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "emergency_pairs": self.emergency_pairs,
            "violations": [
                {"trace": t, "n": n, "N_n": a, "N_n1": b}
                for t, n, a, b in self.violations
            ],
            "ok": self.ok,
        }


def check_emergency_halving(bundle: TraceBundle, K: float) -> HalvingReport:
    """N_{n+1} == N_n / 2 exactly at every step still inside a round.

    tau(n) > n exactly when step n ran in emergency mode, and then N drops
    by the factor 2 with no other change.  Checked as N^2_{n+1} == N^2_n / 4,
    which is equivalent and exact in float64 (power-of-two scaling).
    """
    nsq, h = envelope_squared(bundle, K)
    inside = ~bundle.normal[:, :h]
    pairs = inside[:, : h - 1]
    count = int(pairs.sum())
    bad = pairs & (nsq[:, 1:h] != nsq[:, : h - 1] / 4.0)
    violations = [
        (int(t), int(n), float(math.sqrt(nsq[t, n])), float(math.sqrt(nsq[t, n + 1])))
        for t, n in zip(*np.nonzero(bad))
    ]
    return HalvingReport(emergency_pairs=count, violations=violations)


# ---------------------------------------------------------------------------
# drift diagnostics
# ---------------------------------------------------------------------------

MIN_DRIFT_TRACES = 100


@dataclass
class DriftReport:
    num_traces: int
    n_checked: int
    c: float
    D: float
    mean_nsq: np.ndarray
    stderr_nsq: np.ndarray
    step_excess: np.ndarray  # mean(N_{n+1}^2 - (1-c) N_n^2) - D
    step_stderr: np.ndarray
    flagged: list[int]
    cap_violations: list[int]

    @property
    def cap(self) -> float:
        return self.D / self.c

    @property
    def ok(self) -> bool:
        return not self.flagged and not self.cap_violations

    def to_dict(self) -> dict:
        return {
            "num_traces": self.num_traces,
            "n_checked": self.n_checked,
            "c": self.c,
            "D": self.D,
            "cap": self.cap,
            "flagged": self.flagged,
            "cap_violations": self.cap_violations,
            "max_mean_nsq": float(self.mean_nsq.max()) if len(self.mean_nsq) else None,
            "ok": self.ok,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "mean_Nsq", "stderr_Nsq", "step_excess", "step_stderr"])
            for n in range(self.n_checked):
                row = [n, self.mean_nsq[n], self.stderr_nsq[n]]
                if n < len(self.step_excess):
                    row += [self.step_excess[n], self.step_stderr[n]]
                else:
                    row += ["", ""]
                writer.writerow([row[0]] + [repr(float(v)) if v != "" else "" for v in row[1:]])


def drift_estimate(
    traces: TraceBundle | Sequence[Trace], K: float, c: float, D: float
) -> DriftReport:
    """Empirical check of the per-step contraction and the implied cap.

    Flags every index n where the paired sample mean of
    N_{n+1}^2 - (1-c) * N_n^2 exceeds D by more than three standard errors,
    and every n where mean N_n^2 exceeds (D/c) * (1 + 3 * relative stderr).
    """
    bundle = traces if isinstance(traces, TraceBundle) else TraceBundle.from_traces(list(traces))
    T = bundle.num_traces
    if T < MIN_DRIFT_TRACES:
        raise ValueError(
            f"drift statistics need at least {MIN_DRIFT_TRACES} traces, got {T}"
        )
    nsq, h = envelope_squared(bundle, K)
    mean_nsq = nsq[:, :h].mean(axis=0)
    std_nsq = nsq[:, :h].std(axis=0, ddof=1)
    stderr_nsq = std_nsq / math.sqrt(T)

    diffs = nsq[:, 1:h] - (1.0 - c) * nsq[:, : h - 1]
    step_mean = diffs.mean(axis=0)
    step_stderr = diffs.std(axis=0, ddof=1) / math.sqrt(T)
    flagged = [int(n) for n in np.nonzero(step_mean > D + 3.0 * step_stderr)[0]]

    cap = D / c
    rel = np.divide(
        stderr_nsq, mean_nsq, out=np.zeros_like(stderr_nsq), where=mean_nsq > 0
    )
    cap_violations = [
        int(n) for n in np.nonzero(mean_nsq > cap * (1.0 + 3.0 * rel))[0]
    ]
    return DriftReport(
        num_traces=T,
        n_checked=h,
        c=c,
        D=D,
        mean_nsq=mean_nsq,
        stderr_nsq=stderr_nsq,
        step_excess=step_mean - D,
        step_stderr=step_stderr,
        flagged=flagged,
        cap_violations=cap_violations,
    )


# ---------------------------------------------------------------------------
# feasibility arithmetic and the zoom-out tail bound
# ---------------------------------------------------------------------------


def epsilon_bound(P: float, M0: float, alpha: float, m_alpha: float, ell_alpha: float) -> float:
    """Certified upper bound on the zoom-out contribution epsilon(P, M0).

    Derivation sketch (all steps are conservative):

    * while a round is still out, the would-be state after h extra steps is
      a product of gains times the escape overshoot plus a noise
      convolution; its alpha-moment is at most C3 * m_alpha^h * M^alpha with
      C3 = 2^(2 alpha) * m_alpha + 2^alpha * Cs * ell_alpha,
      where Cs = (1 - m_alpha^(-1/alpha))^(-alpha) bounds the L_alpha
      triangle-inequality sum of the noise terms as a geometric series
      (m_alpha >= 2 keeps it finite; computing it with the actual m_alpha
      only sharpens the classical worst-case constant).
    * a round lasting k extra steps forces an overshoot of P^k M, so Markov
      at order alpha gives P[k extra steps] <= C3 * P^(-k alpha)
      * M^(alpha(1-k)) * m_alpha^(k-1); M >= M0 >= 1 lets M0 replace M.
    * N_{n+1}^2 on that event is at most 2^(2k+1) P^(2k+2) N_n^2; summing
      the geometric series in k (ratio below) gives the bound.

    Requires alpha > 4, M0 >= 1, P > 1 and a series ratio below one.
    """
    if alpha <= 4:
        raise MomentOrderError(f"tail bound requires alpha > 4, got {alpha}")
    if M0 < 1.0:
        raise BoundDomainError(f"tail bound constants require M0 >= 1, got {M0}")
    if P <= 1.0:
        raise BoundDomainError(f"tail bound requires P > 1, got {P}")
    m = max(2.0, m_alpha)
    ratio = 4.0 * P ** (2.0 - alpha) * M0 ** (-alpha) * m
    if ratio >= 1.0:
        raise BoundDomainError(
            f"geometric ratio {ratio:.3g} >= 1; increase P or M0 to enter the "
            "domain of the tail bound"
        )
    c_series = (1.0 - m ** (-1.0 / alpha)) ** (-alpha)
    c3 = 2.0 ** (2.0 * alpha) * m + 2.0**alpha * c_series * ell_alpha
    return 8.0 * c3 * P ** (4.0 - alpha) / (1.0 - ratio)


def min_zoom_factor(
    M0: float,
    alpha: float,
    m_alpha: float,
    ell_alpha: float,
    target: float,
    tol: float = 1e-3,
) -> float:
    """Smallest P with epsilon_bound below ``target`` (geometric bisection)."""
    lo, hi = 1.0 + 1e-9, 4.0
    while True:
        try:
            if epsilon_bound(hi, M0, alpha, m_alpha, ell_alpha) < target:
                break
        except BoundDomainError:
            pass
        hi *= 4.0
        if hi > 1e60:
            raise BoundDomainError("no zoom factor below 1e60 meets the target")
    while hi / lo > 1.0 + tol:
        mid = math.sqrt(lo * hi)
        try:
            ok = epsilon_bound(mid, M0, alpha, m_alpha, ell_alpha) < target
        except BoundDomainError:
            ok = False
        if ok:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class FeasibilityReport:
    """Parameter certification: margins, tail bound and derived constants."""

    ok: bool
    margin_drift: float
    margin_K: float
    epsilon_estimate: float
    D: float
    C: float
    R: int
    drift_ok: bool
    K_ok: bool
    epsilon_ok: bool
    margin_drift_literal: float
    margin_K_literal: float
    c: float
    alpha: float
    mu_A: float
    sigma_A: float
    sigma_W: float
    m_alpha: float
    ell_alpha: float
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "ok", "margin_drift", "margin_K", "epsilon_estimate", "D", "C", "R",
            "drift_ok", "K_ok", "epsilon_ok", "margin_drift_literal",
            "margin_K_literal", "c", "alpha", "mu_A", "sigma_A", "sigma_W",
            "m_alpha", "ell_alpha",
        )}
        d["notes"] = list(self.notes)
        d["epsilon_estimate"] = (
            None if not math.isfinite(self.epsilon_estimate) else self.epsilon_estimate
        )
        return d


def feasibility(
    c: float,
    params: StrategyParams,
    A_moments: MomentSummary,
    W_moments: MomentSummary,
    alpha: float,
) -> FeasibilityReport:
    """Certify a parameter set against the contraction requirements.

    Clauses: (i) the normal-mode coefficient
    sigma_A^2 + (2|mu_A| + sigma_A)(2 P delta) + (2+K) P^2 delta^2 must stay
    below 1 - c; (ii) mu_A^2 <= (1-c) K; (iii) c + epsilon(P, M0) must stay
    below min(1 - sigma_A^2, 3/4).  Literal variants of (i) and (ii) with
    the signed/linear gain mean are reported for comparison; the safe forms
    decide ``ok``.
    """
    if alpha <= 4:
        raise MomentOrderError(
            f"feasibility requires a tail moment order alpha > 4, got {alpha}"
        )
    mu_a, sig_a = A_moments.mean, A_moments.stddev
    sig_w = W_moments.stddev
    if sig_a**2 >= 1.0:
        raise UnstabilizableError(
            f"sigma_A^2 = {sig_a**2:.4g} >= 1: the system is not second-moment "
            "stabilizable at any rate"
        )
    y = params.P * params.delta
    coeff = sig_a**2 + (2.0 * abs(mu_a) + sig_a) * (2.0 * y) + (2.0 + params.K) * y * y
    coeff_literal = sig_a**2 + (2.0 * mu_a + sig_a) * (2.0 * y) + (2.0 + params.K) * y * y
    margin_drift = (1.0 - c) - coeff
    margin_drift_literal = (1.0 - c) - coeff_literal
    margin_k = (1.0 - c) * params.K - mu_a**2
    margin_k_literal = (1.0 - c) * params.K - mu_a

    m_alpha = max(2.0, A_moments.shifted_abs_moment_alpha)
    ell_alpha = W_moments.abs_moment_alpha
    notes: list[str] = []
    try:
        eps = epsilon_bound(params.P, params.M0, alpha, m_alpha, ell_alpha)
    except BoundDomainError as exc:
        eps = math.inf
        notes.append(f"tail bound unavailable: {exc}")

    drift_ok = margin_drift >= 0.0
    k_ok = margin_k >= 0.0
    eps_ok = c + eps < min(1.0 - sig_a**2, 0.75)
    d_const = 2.0 * sig_w**2 + (1.0 + params.K) * params.M0**2
    return FeasibilityReport(
        ok=drift_ok and k_ok and eps_ok,
        margin_drift=margin_drift,
        margin_K=margin_k,
        epsilon_estimate=eps,
        D=d_const,
        C=d_const / c,
        R=rate(params),
        drift_ok=drift_ok,
        K_ok=k_ok,
        epsilon_ok=eps_ok,
        margin_drift_literal=margin_drift_literal,
        margin_K_literal=margin_k_literal,
        c=c,
        alpha=alpha,
        mu_A=mu_a,
        sigma_A=sig_a,
        sigma_W=sig_w,
        m_alpha=m_alpha,
        ell_alpha=ell_alpha,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# closed-form second-moment recursions (simulation oracles)
# ---------------------------------------------------------------------------

ORACLE_POLICIES = ("zero_control", "perfect_observation")


def moment_recursion_curve(
    policy: str,
    A_moments: tuple[float, float],
    W_moments: tuple[float, float],
    n: int,
) -> np.ndarray:
    """E[X_k^2] for k = 0..n under an idealized control policy.

    zero_control applies only the disturbance-centering offset, so
    E_{k+1} = (mu_A^2 + sigma_A^2) E_k + sigma_W^2; perfect_observation
    cancels mu_A X exactly, so E_{k+1} = sigma_A^2 E_k + sigma_W^2.
    E_0 = 0.  The recursion may diverge; that is informative.
    """
    if policy not in ORACLE_POLICIES:
        raise ValueError(f"policy must be one of {ORACLE_POLICIES}, got {policy!r}")
    mu_a, sig_a = A_moments
    _, sig_w = W_moments
    coef = sig_a**2 + (mu_a**2 if policy == "zero_control" else 0.0)
    out = np.empty(n + 1)
    out[0] = 0.0
    for k in range(n):
        out[k + 1] = coef * out[k] + sig_w**2
    return out


def moment_recursion_oracle(
    policy: str,
    A_moments: tuple[float, float],
    W_moments: tuple[float, float],
    n: int,
) -> float:
    """E[X_n^2] under an idealized policy (see moment_recursion_curve)."""
    return float(moment_recursion_curve(policy, A_moments, W_moments, n)[-1])


def oracle_mean_stderr(policy: str, a_spec, w_spec, n: int, trials: int) -> np.ndarray:
    """Exact standard error of the ensemble mean of X_k^2, k = 0..n.

    X' = G*X + W_c with G the raw gain (zero_control) or the centered gain
    (perfect_observation) and W_c the centered disturbance, so

        E[X'^4] = E[G^4] E[X^4] + 6 E[G^2] E[X^2] sigma_W^2 + E[W_c^4],

    valid because the odd cross terms each carry E[W_c] = 0, E[W_c^3] = 0
    (symmetric disturbances) or E[G_c] = 0.  An exact variance makes the
    oracle comparison a proper z-test; the empirical standard error of a
    heavy-tailed X^2 shrinks together with its mean and would understate.
    """
    from zoomctl.distributions import central_moment, moments as law_moments

    mu_a, var_a = law_moments(a_spec)
    _, var_w = law_moments(w_spec)
    if abs(central_moment(w_spec, 3)) > 1e-12:
        raise ValueError("exact oracle stderr requires a symmetric disturbance law")
    a_c4 = central_moment(a_spec, 4)
    a_c3 = central_moment(a_spec, 3)
    w_c4 = central_moment(w_spec, 4)
    if policy == "zero_control":
        g2 = var_a + mu_a**2
        g4 = mu_a**4 + 6.0 * mu_a**2 * var_a + 4.0 * mu_a * a_c3 + a_c4
    elif policy == "perfect_observation":
        g2 = var_a
        g4 = a_c4
    else:
        raise ValueError(f"policy must be one of {ORACLE_POLICIES}, got {policy!r}")
    e2 = np.empty(n + 1)
    e4 = np.empty(n + 1)
    e2[0] = e4[0] = 0.0
    for k in range(n):
        e2[k + 1] = g2 * e2[k] + var_w
        e4[k + 1] = g4 * e4[k] + 6.0 * g2 * e2[k] * var_w + w_c4
    var_xsq = np.maximum(e4 - e2**2, 0.0)
    return np.sqrt(var_xsq / trials)
