"""Repeated-measures ANOVA, paired contrasts and F-distribution tails."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "AnovaEffect",
    "AnovaTable",
    "PairwiseResult",
    "betainc_regularized",
    "f_tail",
    "bonferroni_alpha",
    "rm_anova_one_way",
    "rm_anova_two_way",
    "pairwise_rm_f",
    "marginal_contrast",
]

_CF_TOL = 1e-15
_CF_MAX_ITER = 10_000
_TINY = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the fraction converges fast on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def f_tail(F: float, df1: int, df2: int) -> float:
    """Upper tail probability P(X > F) of the F(df1, df2) distribution."""
    if df1 < 1 or df2 < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got ({df1}, {df2})")
    if F < 0 or math.isnan(F):
        raise ValueError(f"F must be non-negative, got {F}")
    if F == 0:
        return 1.0
    if math.isinf(F):
        return 0.0
    x = df2 / (df2 + df1 * F)
    return betainc_regularized(df2 / 2.0, df1 / 2.0, x)


def bonferroni_alpha(alpha: float, m: int) -> float:
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if m < 1:
        raise ValueError("m must be >= 1")
    return alpha / m


@dataclass(frozen=True)
class AnovaEffect:
    name: str
    F: float
    df_effect: int
    df_error: int
    p: float
    ss_effect: float
    ss_error: float


@dataclass(frozen=True)
class AnovaTable:
    effects: tuple[AnovaEffect, ...]

    def __getitem__(self, name: str) -> AnovaEffect:
        for e in self.effects:
            if e.name == name:
                return e
        raise KeyError(name)

    def __iter__(self):
        return iter(self.effects)


def _noise_floor(y) -> float:
    # sums of squares below this are rounding residue of exactly-equal means
    return (1e-13 * float(np.abs(y).max())) ** 2 * y.size


def _effect(name, ss_eff, df_eff, ss_err, df_err, floor=0.0) -> AnovaEffect:
    if ss_eff <= floor:
        F, p = 0.0, 1.0
    elif ss_err <= floor:
        F, p = math.inf, 0.0
    else:
        F = (ss_eff / df_eff) / (ss_err / df_err)
        p = f_tail(F, df_eff, df_err)
    return AnovaEffect(name, float(F), int(df_eff), int(df_err), float(p), float(ss_eff), float(ss_err))


def _check_complete(values, ndim):
    values = np.asarray(values, dtype=float)
    if values.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {values.shape}")
    if np.isnan(values).any():
        raise ValueError("cube has missing cells")
    if values.shape[0] < 2:
        raise ValueError("need at least 2 subjects")
    return values


def rm_anova_one_way(values, name: str = "condition") -> AnovaTable:
    """One-factor within-subjects ANOVA on a subjects x levels matrix."""
    y = _check_complete(values, 2)
    n, k = y.shape
    grand = y.mean()
    subj = y.mean(axis=1, keepdims=True)
    level = y.mean(axis=0, keepdims=True)
    ss_level = n * np.sum((level - grand) ** 2)
    ss_error = np.sum((y - subj - level + grand) ** 2)
    floor = _noise_floor(y)
    return AnovaTable((_effect(name, ss_level, k - 1, ss_error, (k - 1) * (n - 1), floor),))


def rm_anova_two_way(cube, names: tuple[str, str] = ("band", "window")) -> AnovaTable:
    """Two-factor within-subjects ANOVA on a subjects x A x B array.

    Each effect is tested against its own subject-by-effect interaction, with
    no sphericity correction. Effects are named ``names[0]``, ``names[1]`` and
    ``"interaction"``.
    """
    y = _check_complete(cube, 3)
    n, a, b = y.shape
    g = y.mean()
    m_s = y.mean(axis=(1, 2))[:, None, None]
    m_a = y.mean(axis=(0, 2))[None, :, None]
    m_b = y.mean(axis=(0, 1))[None, None, :]
    m_sa = y.mean(axis=2)[:, :, None]
    m_sb = y.mean(axis=1)[:, None, :]
    m_ab = y.mean(axis=0)[None, :, :]

    ss_a = n * b * np.sum((m_a - g) ** 2)
    ss_b = n * a * np.sum((m_b - g) ** 2)
    ss_ab = n * np.sum((m_ab - m_a - m_b + g) ** 2)
    ss_sa = b * np.sum((m_sa - m_s - m_a + g) ** 2)
    ss_sb = a * np.sum((m_sb - m_s - m_b + g) ** 2)
    ss_sab = np.sum((y - m_ab - m_sa - m_sb + m_a + m_b + m_s - g) ** 2)

    floor = _noise_floor(y)
    return AnovaTable(
        (
            _effect(names[0], ss_a, a - 1, ss_sa, (a - 1) * (n - 1), floor),
            _effect(names[1], ss_b, b - 1, ss_sb, (b - 1) * (n - 1), floor),
            _effect(
                "interaction", ss_ab, (a - 1) * (b - 1), ss_sab, (a - 1) * (b - 1) * (n - 1), floor
            ),
        )
    )


@dataclass(frozen=True)
class PairwiseResult:
    level_a: object
    level_b: object
    F: float
    df: tuple[int, int]
    p: float
    mean_a: float
    sd_a: float
    mean_b: float
    sd_b: float
    degenerate: bool = False


def pairwise_rm_f(values_a, values_b, level_a=None, level_b=None) -> PairwiseResult:
    """Paired contrast of two conditions as F(1, n-1) = t^2.

    With zero-variance differences the contrast is flagged ``degenerate``
    and ``p`` is reported as 0; ``F`` is infinite (or NaN when every
    difference is zero).
    """
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 paired observations")
    d = a - b
    mean_d = d.mean()
    sd_d = d.std(ddof=1)
    stats = dict(
        level_a=level_a,
        level_b=level_b,
        df=(1, n - 1),
        mean_a=float(a.mean()),
        sd_a=float(a.std(ddof=1)),
        mean_b=float(b.mean()),
        sd_b=float(b.std(ddof=1)),
    )
    if sd_d == 0:
        F = math.nan if mean_d == 0 else math.inf
        return PairwiseResult(F=F, p=0.0, degenerate=True, **stats)
    t = mean_d / (sd_d / math.sqrt(n))
    F = float(t * t)
    return PairwiseResult(F=F, p=f_tail(F, 1, n - 1), **stats)


def marginal_contrast(cube, axis: int, i: int, j: int, levels: Sequence | None = None) -> PairwiseResult:
    """Contrast levels ``i`` and ``j`` of factor ``axis`` (1 = band, 2 = window).

    Each subject's score for a level is its mean over the other factor.
    """
    cube = _check_complete(cube, 3)
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    other = 3 - axis
    marginal = cube.mean(axis=other)
    names = levels if levels is not None else range(marginal.shape[1])
    names = list(names)
    return pairwise_rm_f(marginal[:, i], marginal[:, j], names[i], names[j])
