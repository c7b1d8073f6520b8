"""Statistics toolkit: robust participant filtering, correlation, t-tests,
no-intercept OLS with diagnostics, difficulty ranking, confidence-accuracy
fit.

The t-test ships three modes.  The frozen default is the two-sample
unequal-variance (Welch) test: reconciling all candidate modes against the
bundled reference statistics table showed its p-values reproduce that
table exactly wherever the table is self-consistent, while the pooled and
paired variants do not (see tests/test_stats.py for the locked-down
values).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .special import student_t_ppf, student_t_two_sided
from .specs import KINDS, TransformSpec, full_sweep


class StatsError(ValueError):
    """Raised when a statistic is undefined for the given data."""


# -- robust filtering --------------------------------------------------------

def mad(values: Sequence[float]) -> float:
    """Median absolute deviation, median(|x - median(x)|)."""
    arr = np.asarray(values, dtype=np.float64)
    return float(np.median(np.abs(arr - np.median(arr))))


def mad_filter(values: Mapping[object, float] | Sequence[float]) -> list:
    """Retain subjects whose value exceeds median - 2 * MAD.

    Accepts a mapping of subject id -> value, or a plain sequence (ids are
    then the indices).  Returns retained ids in input order.  The cut is
    one-sided and strict, so with MAD == 0 (all values equal) everyone is
    excluded; that degenerate outcome is surfaced as a warning.
    """
    if isinstance(values, Mapping):
        ids = list(values.keys())
        vals = np.array([values[i] for i in ids], dtype=np.float64)
    else:
        vals = np.asarray(values, dtype=np.float64)
        ids = list(range(len(vals)))
    if len(ids) == 0:
        raise StatsError("mad_filter needs at least one subject")
    threshold = float(np.median(vals)) - 2.0 * mad(vals)
    retained = [i for i, v in zip(ids, vals) if v > threshold]
    if not retained:
        warnings.warn(
            "mad_filter retained no subjects (zero spread makes the strict "
            "cut exclude everyone)",
            stacklevel=2,
        )
    return retained


# -- correlation -------------------------------------------------------------

def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson product-moment correlation of two equal-length vectors."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise StatsError("pearson needs two 1-D vectors of equal length")
    if xa.size < 2:
        raise StatsError("pearson needs at least two points")
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    sxx = float(xd @ xd)
    syy = float(yd @ yd)
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("correlation undefined: zero variance")
    r = float(xd @ yd) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


# -- t-tests -----------------------------------------------------------------

T_TEST_MODES = ("paired", "two_sample_pooled", "two_sample_welch")
DEFAULT_T_MODE = "two_sample_welch"


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: float
    mode: str
    degenerate: bool = False


def t_test(
    x: Sequence[float],
    y: Sequence[float],
    mode: str = DEFAULT_T_MODE,
    df_override: float | None = None,
) -> TTestResult:
    """t statistic for mean(x) - mean(y) plus a two-sided p-value.

    The p-value uses the mode's natural degrees of freedom unless
    df_override is given.  An exactly-zero statistic with zero spread
    (x == y paired, or two identical constant samples) is returned as
    t = 0 with degenerate=True; zero spread around a nonzero difference
    is an error.
    """
    if mode not in T_TEST_MODES:
        raise ValueError(f"unknown t-test mode {mode!r}")
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise StatsError("t_test needs 1-D vectors")

    if mode == "paired":
        if xa.shape != ya.shape:
            raise StatsError("paired t-test needs equal-length vectors")
        if xa.size < 2:
            raise StatsError("paired t-test needs at least two pairs")
        d = xa - ya
        sd = d.std(ddof=1)
        df = float(xa.size - 1)
        if sd == 0.0:
            if np.all(d == 0.0):
                return TTestResult(0.0, 1.0, df_override or df, mode, degenerate=True)
            raise StatsError("undefined statistic: zero-variance differences")
        t = float(d.mean() / (sd / math.sqrt(d.size)))
    else:
        if xa.size < 2 or ya.size < 2:
            raise StatsError("two-sample t-test needs at least two points per sample")
        vx = xa.var(ddof=1)
        vy = ya.var(ddof=1)
        n1, n2 = xa.size, ya.size
        diff = float(xa.mean() - ya.mean())
        if mode == "two_sample_pooled":
            pooled = ((n1 - 1) * vx + (n2 - 1) * vy) / (n1 + n2 - 2)
            se = math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
            df = float(n1 + n2 - 2)
        else:
            q1, q2 = vx / n1, vy / n2
            se = math.sqrt(q1 + q2)
            if se > 0.0:
                df = (q1 + q2) ** 2 / (
                    q1**2 / (n1 - 1) + q2**2 / (n2 - 1)
                )
            else:
                df = float(n1 + n2 - 2)
        if se == 0.0:
            if diff == 0.0:
                return TTestResult(0.0, 1.0, df_override or df, mode, degenerate=True)
            raise StatsError("undefined statistic: zero variance in both samples")
        t = diff / se

    df_used = float(df_override) if df_override is not None else float(df)
    return TTestResult(t=t, p=student_t_two_sided(t, df_used), df=df_used, mode=mode)


# -- ordinary least squares --------------------------------------------------

@dataclass
class OlsReport:
    """No-intercept OLS fit with the report's standard diagnostic set."""

    names: list[str]
    coef: np.ndarray
    std_err: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    r2_uncentered: float
    adj_r2_uncentered: float
    f_stat: float
    log_likelihood: float
    aic: float
    bic: float
    durbin_watson: float
    jarque_bera: float
    skew: float
    kurtosis: float
    cond_number: float
    n_obs: int
    df_resid: int
    residuals: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "regressors": [
                {
                    "name": self.names[j],
                    "coef": float(self.coef[j]),
                    "std_err": float(self.std_err[j]),
                    "t": float(self.t_values[j]),
                    "p": float(self.p_values[j]),
                    "ci_low": float(self.ci_low[j]),
                    "ci_high": float(self.ci_high[j]),
                }
                for j in range(len(self.names))
            ],
            "r2_uncentered": self.r2_uncentered,
            "adj_r2_uncentered": self.adj_r2_uncentered,
            "f_stat": self.f_stat,
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "bic": self.bic,
            "durbin_watson": self.durbin_watson,
            "jarque_bera": self.jarque_bera,
            "skew": self.skew,
            "kurtosis": self.kurtosis,
            "cond_number": self.cond_number,
            "n_obs": self.n_obs,
            "df_resid": self.df_resid,
        }


def _offending_column(X: np.ndarray, names: list[str]) -> str:
    rank = 0
    for j in range(X.shape[1]):
        new_rank = np.linalg.matrix_rank(X[:, : j + 1])
        if new_rank == rank:
            return names[j]
        rank = new_rank
    return names[-1]


def ols(
    y: Sequence[float],
    X: np.ndarray,
    names: Sequence[str] | None = None,
) -> OlsReport:
    """Fit y = X b with no intercept via QR; report statsmodels-convention
    uncentered R^2, diagnostics and per-regressor inference.

    The normal-equations solve exists only as the test oracle; this
    production path stays orthogonal for conditioning.
    """
    ya = np.asarray(y, dtype=np.float64).reshape(-1)
    Xa = np.asarray(X, dtype=np.float64)
    if Xa.ndim == 1:
        Xa = Xa[:, None]
    n, k = Xa.shape
    if ya.size != n:
        raise StatsError("y length must match X rows")
    if n < k:
        raise StatsError(f"need at least as many observations ({n}) as regressors ({k})")
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if len(names) != k:
        raise StatsError("names length must match regressor count")

    singular = np.linalg.svd(Xa, compute_uv=False)
    if singular[-1] <= max(n, k) * np.finfo(np.float64).eps * singular[0]:
        raise StatsError(f"rank-deficient design: column {_offending_column(Xa, names)!r}")

    q, r = np.linalg.qr(Xa)
    coef = np.linalg.solve(r, q.T @ ya)
    resid = ya - Xa @ coef
    df_resid = n - k
    ssr = float(resid @ resid)
    sigma2 = ssr / df_resid if df_resid > 0 else float("nan")

    r_inv = np.linalg.solve(r, np.eye(k))
    cov = sigma2 * (r_inv @ r_inv.T)
    std_err = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_values = coef / std_err
    p_values = np.array([student_t_two_sided(float(t), df_resid) for t in t_values])
    t_crit = student_t_ppf(0.975, df_resid) if df_resid > 0 else float("nan")
    ci_low = coef - t_crit * std_err
    ci_high = coef + t_crit * std_err

    sst0 = float(ya @ ya)
    r2 = 1.0 - ssr / sst0 if sst0 > 0 else 0.0
    adj_r2 = 1.0 - (n / df_resid) * (1.0 - r2) if df_resid > 0 else float("nan")
    f_stat = (
        (r2 / k) / ((1.0 - r2) / df_resid)
        if df_resid > 0 and r2 < 1.0
        else float("inf")
    )
    llf = -0.5 * n * (math.log(2.0 * math.pi) + math.log(ssr / n) + 1.0) if ssr > 0 else float("inf")
    aic = -2.0 * llf + 2.0 * k
    bic = -2.0 * llf + k * math.log(n)

    dw = float(np.sum(np.diff(resid) ** 2) / ssr) if ssr > 0 else float("nan")
    m2 = float(np.mean(resid**2))
    if m2 > 0:
        skew = float(np.mean(resid**3)) / m2**1.5
        kurt = float(np.mean(resid**4)) / m2**2
    else:
        skew, kurt = 0.0, 3.0
    jb = n / 6.0 * (skew**2 + 0.25 * (kurt - 3.0) ** 2)
    cond = float(singular[0] / singular[-1])

    return OlsReport(
        names=names,
        coef=coef,
        std_err=std_err,
        t_values=t_values,
        p_values=p_values,
        ci_low=ci_low,
        ci_high=ci_high,
        r2_uncentered=r2,
        adj_r2_uncentered=adj_r2,
        f_stat=f_stat,
        log_likelihood=llf,
        aic=aic,
        bic=bic,
        durbin_watson=dw,
        jarque_bera=jb,
        skew=skew,
        kurtosis=kurt,
        cond_number=cond,
        n_obs=n,
        df_resid=df_resid,
        residuals=resid,
    )


# -- response tables and ranking ---------------------------------------------

HUMAN = "human"


@dataclass(frozen=True)
class ResponseRow:
    """Accuracy (percent) for one transform spec and one subject kind."""

    spec: TransformSpec
    subject: str  # "human" or "model:<name>"
    accuracy: float
    mean_confidence: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 100.0:
            raise ValueError(f"accuracy must be in [0, 100], got {self.accuracy}")


@dataclass(frozen=True)
class RankingRow:
    subject: str
    key: str  # transform kind, or canonical spec string at pair level
    mean_accuracy: float
    difficulty: float  # 100 - mean_accuracy; higher is harder
    rank: int  # 1 = easiest within the subject's cohort


_PAIR_ORDER = {spec.canonical(): i for i, spec in enumerate(full_sweep())}
_KIND_ORDER = {kind: i for i, kind in enumerate(KINDS)}


def difficulty_ranking(
    rows: Iterable[ResponseRow], level: str = "transform"
) -> list[RankingRow]:
    """Rank transforms (or parameter pairs) per subject by mean accuracy.

    Rank 1 is the highest mean accuracy (easiest); difficulty is
    100 - mean accuracy.  Ties break by canonical spec order.
    """
    if level not in ("transform", "parameter_pair"):
        raise ValueError(f"unknown ranking level {level!r}")
    rows = list(rows)
    if not rows:
        raise StatsError("difficulty_ranking needs a non-empty table")

    grouped: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        key = row.spec.kind if level == "transform" else row.spec.canonical()
        grouped.setdefault((row.subject, key), []).append(row.accuracy)

    def order_index(key: str) -> int:
        if level == "transform":
            return _KIND_ORDER.get(key, len(_KIND_ORDER))
        return _PAIR_ORDER.get(key, len(_PAIR_ORDER))

    out: list[RankingRow] = []
    subjects = sorted({subject for subject, _ in grouped})
    for subject in subjects:
        items = [
            (key, float(np.mean(vals)))
            for (subj, key), vals in grouped.items()
            if subj == subject
        ]
        items.sort(key=lambda kv: (-kv[1], order_index(kv[0])))
        for pos, (key, acc) in enumerate(items):
            out.append(
                RankingRow(
                    subject=subject,
                    key=key,
                    mean_accuracy=acc,
                    difficulty=100.0 - acc,
                    rank=pos + 1,
                )
            )
    return out


# -- confidence vs accuracy --------------------------------------------------

@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r: float


def confidence_accuracy_fit(points: Iterable[tuple[float, float]]) -> LineFit:
    """Least-squares line (confidence on accuracy) plus Pearson r."""
    pts = list(points)
    if len(pts) < 2:
        raise StatsError("confidence_accuracy_fit needs at least two points")
    acc = np.array([p[0] for p in pts], dtype=np.float64)
    conf = np.array([p[1] for p in pts], dtype=np.float64)
    r = pearson(acc, conf)
    ad = acc - acc.mean()
    slope = float((ad @ (conf - conf.mean())) / (ad @ ad))
    intercept = float(conf.mean() - slope * acc.mean())
    return LineFit(slope=slope, intercept=intercept, r=r)
