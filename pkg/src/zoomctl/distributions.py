"""Laws of the random gain A and the additive disturbance W.

Four parametric families are supported: gaussian, uniform, two_point and
student_t.  Everything the control strategy and its analysis consume lives
here: sampling (scalar and batched), exact first/second moments, and
absolute moments with an additive shift, E[(|Z| + shift)^alpha].  The
shifted absolute moment at alpha > 4 is what the zoom-out tail bound runs
on; student_t is included precisely because it has only finitely many
moments (alpha < dof), which exercises that hypothesis.

Closed forms are used for two_point and uniform.  gaussian and student_t
absolute moments fall back to adaptive quadrature at a fixed relative
tolerance of 1e-6 (not configurable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

QUAD_REL_TOL = 1e-6

# Named parameters per family, in positional order.
KIND_FIELDS: dict[str, tuple[str, ...]] = {
    "gaussian": ("mean", "stddev"),
    "uniform": ("lo", "hi"),
    "two_point": ("v1", "p", "v2"),
    "student_t": ("dof", "scale", "shift"),
}


class MomentError(ValueError):
    """A requested moment does not exist for the given law."""


@dataclass(frozen=True)
class DistributionSpec:
    """One of the supported scalar laws, identified by kind plus parameters.

    ``params`` holds the family's parameters in the order given by
    ``KIND_FIELDS[kind]``.  Use the classmethod constructors.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in KIND_FIELDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        fields = KIND_FIELDS[self.kind]
        if len(self.params) != len(fields):
            raise ValueError(
                f"{self.kind} takes {len(fields)} parameters {fields}, got {len(self.params)}"
            )
        vals = [float(v) for v in self.params]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"{self.kind} parameters must be finite, got {vals}")
        object.__setattr__(self, "params", tuple(vals))
        if self.kind == "gaussian" and self.params[1] <= 0:
            raise ValueError("gaussian requires stddev > 0")
        if self.kind == "uniform" and not self.params[0] < self.params[1]:
            raise ValueError("uniform requires lo < hi")
        if self.kind == "two_point" and not 0.0 <= self.params[1] <= 1.0:
            raise ValueError("two_point requires 0 <= p <= 1")
        if self.kind == "student_t" and (self.params[0] <= 0 or self.params[1] <= 0):
            raise ValueError("student_t requires dof > 0 and scale > 0")

    @classmethod
    def gaussian(cls, mean: float, stddev: float) -> "DistributionSpec":
        return cls("gaussian", (mean, stddev))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "DistributionSpec":
        return cls("uniform", (lo, hi))

    @classmethod
    def two_point(cls, v1: float, p: float, v2: float) -> "DistributionSpec":
        """Takes value ``v1`` with probability ``p``, else ``v2``."""
        return cls("two_point", (v1, p, v2))

    @classmethod
    def student_t(cls, dof: float, scale: float, shift: float = 0.0) -> "DistributionSpec":
        """``shift + scale * T`` for T standard Student-t with ``dof`` degrees."""
        return cls("student_t", (dof, scale, shift))

    def named_params(self) -> dict[str, float]:
        return dict(zip(KIND_FIELDS[self.kind], self.params))

    def describe(self) -> dict[str, object]:
        d: dict[str, object] = {"kind": self.kind}
        d.update(self.named_params())
        return d


@dataclass(frozen=True)
class MomentSummary:
    """Moment bundle of a law at a requested order alpha.

    ``abs_moment_alpha`` is E[|Z|^alpha]; ``shifted_abs_moment_alpha`` is
    E[(|Z| + |mean|)^alpha], the quantity the zoom-out tail analysis needs
    for the gain law.
    """

    mean: float
    stddev: float
    alpha: float
    abs_moment_alpha: float
    shifted_abs_moment_alpha: float


def sample(spec: DistributionSpec, rng: np.random.Generator) -> float:
    """One draw from the law.  Deterministic given the generator state."""
    return float(sample_array(spec, rng, None))


def sample_array(spec: DistributionSpec, rng: np.random.Generator, n: int | None):
    """``n`` i.i.d. draws (``n=None`` gives a scalar).

    A trial's noise streams are drawn as two batched calls (all gains, then
    all disturbances), so the bit stream consumed per trial is a documented
    function of (spec, seed, horizon).
    """
    p = spec.params
    if spec.kind == "gaussian":
        return p[0] + p[1] * rng.standard_normal(n)
    if spec.kind == "uniform":
        return rng.uniform(p[0], p[1], n)
    if spec.kind == "two_point":
        return np.where(rng.random(n) < p[1], p[0], p[2])
    if spec.kind == "student_t":
        return p[2] + p[1] * rng.standard_t(p[0], n)
    raise AssertionError(spec.kind)


def moments(spec: DistributionSpec) -> tuple[float, float]:
    """Exact (mean, variance) of the law.

    Raises MomentError where undefined (student_t with dof <= 2).
    """
    p = spec.params
    if spec.kind == "gaussian":
        return p[0], p[1] ** 2
    if spec.kind == "uniform":
        lo, hi = p
        return (lo + hi) / 2.0, (hi - lo) ** 2 / 12.0
    if spec.kind == "two_point":
        v1, prob, v2 = p
        mean = prob * v1 + (1.0 - prob) * v2
        var = prob * v1**2 + (1.0 - prob) * v2**2 - mean**2
        return mean, max(var, 0.0)
    if spec.kind == "student_t":
        dof, scale, shift = p
        if dof <= 2:
            raise MomentError(
                f"student_t variance is undefined for dof={dof}; requires dof > 2"
            )
        return shift, scale**2 * dof / (dof - 2.0)
    raise AssertionError(spec.kind)


def _uniform_abs_moment(lo: float, hi: float, alpha: float, shift: float) -> float:
    # antiderivative of (x + shift)^alpha is (x + shift)^(alpha+1) / (alpha+1)
    def seg(a: float, b: float) -> float:
        # integral of (|x| + shift)^alpha over [a, b] with a, b same sign
        if b <= 0:
            a, b = -b, -a
        lo_, hi_ = a + shift, b + shift
        return (hi_ ** (alpha + 1.0) - lo_ ** (alpha + 1.0)) / (alpha + 1.0)

    if lo >= 0 or hi <= 0:
        total = seg(lo, hi)
    else:
        total = seg(lo, 0.0) + seg(0.0, hi)
    return total / (hi - lo)


def _quad_abs_moment(spec: DistributionSpec, alpha: float, shift: float) -> float:
    if spec.kind == "gaussian":
        mean, sd = spec.params
        pdf = stats.norm(mean, sd).pdf
    else:
        dof, scale, loc = spec.params
        pdf = stats.t(dof, loc=loc, scale=scale).pdf

    def f(x):
        return (abs(x) + shift) ** alpha * pdf(x)

    # split at 0 (kink of |x|) and integrate each half-line separately
    left, _ = integrate.quad(f, -np.inf, 0.0, epsrel=QUAD_REL_TOL, limit=300)
    right, _ = integrate.quad(f, 0.0, np.inf, epsrel=QUAD_REL_TOL, limit=300)
    return left + right


def abs_moment(spec: DistributionSpec, alpha: float, shift: float = 0.0) -> float:
    """E[(|Z| + shift)^alpha] for Z distributed per ``spec``.

    ``alpha >= 1`` and ``shift >= 0``.  Closed form for two_point and
    uniform; quadrature (relative tolerance 1e-6) for gaussian and
    student_t.  Raises MomentError when the moment does not exist.
    """
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if shift < 0:
        raise ValueError(f"shift must be >= 0, got {shift}")
    p = spec.params
    if spec.kind == "two_point":
        v1, prob, v2 = p
        return prob * (abs(v1) + shift) ** alpha + (1.0 - prob) * (abs(v2) + shift) ** alpha
    if spec.kind == "uniform":
        return _uniform_abs_moment(p[0], p[1], alpha, shift)
    if spec.kind == "student_t" and alpha >= p[0]:
        raise MomentError(
            f"E[(|Z|+s)^alpha] does not exist for student_t with dof={p[0]} "
            f"and alpha={alpha}; requires alpha < dof"
        )
    return _quad_abs_moment(spec, alpha, shift)


def moment_summary(spec: DistributionSpec, alpha: float) -> MomentSummary:
    mean, var = moments(spec)
    return MomentSummary(
        mean=mean,
        stddev=math.sqrt(var),
        alpha=alpha,
        abs_moment_alpha=abs_moment(spec, alpha, 0.0),
        shifted_abs_moment_alpha=abs_moment(spec, alpha, abs(mean)),
    )


def central_moment(spec: DistributionSpec, k: int) -> float:
    """k-th central moment, k in {2, 3, 4}, closed form per family.

    Used by the exact-variance oracle for the idealized policies.  Raises
    MomentError where undefined (student_t needs dof > k).
    """
    if k not in (2, 3, 4):
        raise ValueError(f"central_moment supports k in 2..4, got {k}")
    p = spec.params
    if spec.kind == "gaussian":
        sd = p[1]
        return {2: sd**2, 3: 0.0, 4: 3.0 * sd**4}[k]
    if spec.kind == "uniform":
        width = p[1] - p[0]
        return {2: width**2 / 12.0, 3: 0.0, 4: width**4 / 80.0}[k]
    if spec.kind == "two_point":
        v1, prob, v2 = p
        mean = prob * v1 + (1.0 - prob) * v2
        return prob * (v1 - mean) ** k + (1.0 - prob) * (v2 - mean) ** k
    if spec.kind == "student_t":
        dof, scale, _ = p
        if dof <= k:
            raise MomentError(
                f"student_t central moment of order {k} requires dof > {k}, got dof={dof}"
            )
        if k == 2:
            return scale**2 * dof / (dof - 2.0)
        if k == 3:
            return 0.0
        return 3.0 * scale**4 * dof**2 / ((dof - 2.0) * (dof - 4.0))
    raise AssertionError(spec.kind)


def gain_tail_moment(a_spec: DistributionSpec, alpha: float) -> float:
    """max(2, E[(|A| + |mu_A|)^alpha]): tail weight of the gain law.

    The floor of 2 keeps the geometric-series constants of the zoom-out
    bound valid for degenerate gain laws.
    """
    mean, _ = moments(a_spec)
    return max(2.0, abs_moment(a_spec, alpha, abs(mean)))


def noise_tail_moment(w_spec: DistributionSpec, alpha: float) -> float:
    """E[|W|^alpha]: tail weight of the disturbance law."""
    return abs_moment(w_spec, alpha, 0.0)
