"""Descriptive statistics and hypothesis tests for the experiment harnesses.

Welch t-tests (unequal variances, Welch-Satterthwaite df), classical one-way
ANOVA with partial eta squared, and successive-pair trend contrasts with a
Bonferroni-corrected family alpha. p-values come from exact Student-t and F
CDF evaluations built on an in-repo regularized incomplete beta (continued
fraction, ~1e-10 accuracy), not table lookups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import TooFewGroups, TooFewSamples

_MAX_CF_ITER = 300
_CF_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0 if t < 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * betainc_reg(df / 2.0, 0.5, x)
    return tail if t < 0 else 1.0 - tail


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|)."""
    if t == 0.0:
        return 1.0
    if math.isinf(t):
        return 0.0
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def f_cdf(x: float, df1: float, df2: float) -> float:
    if df1 <= 0 or df2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return betainc_reg(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2))


def f_sf(x: float, df1: float, df2: float) -> float:
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return betainc_reg(df2 / 2.0, df1 / 2.0, df2 / (df1 * x + df2))


@dataclass
class TestResult:
    test: str
    groups: tuple[str, ...]
    statistic: float
    df: float | tuple[float, float]
    p_value: float
    alpha_effective: float = 0.05
    extras: dict = field(default_factory=dict)

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha_effective

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "groups": list(self.groups),
            "statistic": self.statistic,
            "df": list(self.df) if isinstance(self.df, tuple) else self.df,
            "p": self.p_value,
            "alpha_effective": self.alpha_effective,
            "significant": self.significant,
            **self.extras,
        }


def bonferroni_alpha(alpha: float, comparisons: int) -> float:
    return alpha / comparisons


def mean_se(samples: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error (sample sd over sqrt n)."""
    n = len(samples)
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    m = math.fsum(samples) / n
    var = math.fsum((x - m) ** 2 for x in samples) / (n - 1)
    return m, math.sqrt(var / n)


def _mean_var(samples: Sequence[float]) -> tuple[float, float, int]:
    n = len(samples)
    m = math.fsum(samples) / n
    var = math.fsum((x - m) ** 2 for x in samples) / (n - 1)
    return m, var, n


def welch_t(
    a: Sequence[float],
    b: Sequence[float],
    alpha: float = 0.05,
    labels: tuple[str, str] = ("a", "b"),
) -> TestResult:
    """Two-sided Welch t-test (no homogeneity-of-variances assumption)."""
    if len(a) < 2 or len(b) < 2:
        raise TooFewSamples("each group needs at least 2 samples")
    ma, va, na = _mean_var(a)
    mb, vb, nb = _mean_var(b)
    sa, sb = va / na, vb / nb
    if sa + sb == 0.0:
        t = 0.0 if ma == mb else math.copysign(math.inf, ma - mb)
        df = float(na + nb - 2)
    else:
        t = (ma - mb) / math.sqrt(sa + sb)
        df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    p = student_t_sf2(t, df)
    return TestResult(
        test="welch_t",
        groups=labels,
        statistic=t,
        df=df,
        p_value=p,
        alpha_effective=alpha,
        extras={"mean_diff": ma - mb, "n": [na, nb]},
    )


def oneway_anova(
    groups: Sequence[Sequence[float]],
    alpha: float = 0.05,
    labels: Sequence[str] | None = None,
) -> TestResult:
    """Classical one-way F-test plus partial eta squared."""
    k = len(groups)
    if k < 2:
        raise TooFewGroups(f"need at least 2 groups, got {k}")
    for g in groups:
        if len(g) < 2:
            raise TooFewSamples("each group needs at least 2 samples")
    n_total = sum(len(g) for g in groups)
    grand = math.fsum(math.fsum(g) for g in groups) / n_total
    ss_between = math.fsum(
        len(g) * (math.fsum(g) / len(g) - grand) ** 2 for g in groups
    )
    ss_within = math.fsum(
        math.fsum((x - math.fsum(g) / len(g)) ** 2 for x in g) for g in groups
    )
    df1, df2 = float(k - 1), float(n_total - k)
    if ss_within == 0.0:
        f = 0.0 if ss_between == 0.0 else math.inf
        p = 1.0 if ss_between == 0.0 else 0.0
    else:
        f = (ss_between / df1) / (ss_within / df2)
        p = f_sf(f, df1, df2)
    eta_p2 = 0.0 if ss_between + ss_within == 0.0 else ss_between / (ss_between + ss_within)
    group_labels = tuple(labels) if labels else tuple(f"g{i}" for i in range(k))
    return TestResult(
        test="oneway_anova",
        groups=group_labels,
        statistic=f,
        df=(df1, df2),
        p_value=p,
        alpha_effective=alpha,
        extras={"eta_p2": eta_p2, "n": [len(g) for g in groups]},
    )


def trend_contrast(
    groups: Sequence[Sequence[float]],
    labels: Sequence[str],
    alpha: float = 0.05,
    family_size: int | None = None,
) -> list[TestResult]:
    """Successive-pair Welch comparisons over groups in the stated order.

    The Bonferroni divisor defaults to the number of contrasts; pass
    family_size when the contrasts belong to a larger planned family.
    """
    if len(groups) < 2:
        raise TooFewGroups("need at least 2 groups for a trend")
    m = family_size if family_size is not None else len(groups) - 1
    alpha_eff = bonferroni_alpha(alpha, m)
    results = []
    for i in range(len(groups) - 1):
        r = welch_t(
            groups[i],
            groups[i + 1],
            alpha=alpha_eff,
            labels=(labels[i], labels[i + 1]),
        )
        results.append(r)
    return results
