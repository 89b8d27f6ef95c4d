"""Censoring-aware evaluation: concordance index, relative absolute error,
normalized relative error and predictive-interval coverage.

Conventions
-----------
Concordance follows Harrell: a pair (i, j) is comparable when t_i < t_j and
record i is an event; the pair is concordant when the model assigns i the
higher risk, and prediction ties score 0.5. Censored-censored pairs and
pairs whose earlier time is censored are excluded.

Quantiles use linear interpolation between order statistics (interval widths
are convention-sensitive, so the convention is fixed here).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class PredictionSet:
    """Observed outcomes plus sampled time-to-event distributions.

    The point estimate of each record is the median of its sample vector;
    `t_max` is the event range of the full dataset and normalizes RAE/NRE.
    """

    t: np.ndarray  # observed time (event or censoring), shape (n,)
    l: np.ndarray  # event indicator, shape (n,)
    samples: np.ndarray  # sampled times, shape (n, s)
    t_max: float

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.l = np.asarray(self.l, dtype=np.int64)
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] != self.t.shape[0]:
            raise ValueError("samples must be (n_records, n_samples)")
        if self.samples.shape[1] < 1:
            raise ValueError("sample vectors must be nonempty")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")

    @property
    def point(self) -> np.ndarray:
        """Per-record point estimate: median over samples."""
        return np.median(self.samples, axis=1)


def concordance_index(
    t: np.ndarray, l: np.ndarray, risk: np.ndarray, higher_risk: str = "larger_score"
) -> float:
    """Harrell's C over comparable pairs.

    `risk` is any per-record score; `higher_risk` states its orientation:
    "larger_score" (e.g. a Cox linear predictor) or "smaller_time" when the
    score is a predicted event time.
    """
    t = np.asarray(t, dtype=np.float64)
    l = np.asarray(l)
    risk = np.asarray(risk, dtype=np.float64)
    if higher_risk == "smaller_time":
        risk = -risk
    elif higher_risk != "larger_score":
        raise ValueError(f"unknown risk orientation {higher_risk!r}")

    order = np.argsort(t, kind="stable")
    t_s, l_s, r_s = t[order], l[order], risk[order]
    n = t_s.shape[0]
    concordant = 0.0
    comparable = 0
    for i in range(n):
        if l_s[i] != 1:
            continue
        later = t_s > t_s[i]  # strict: ties in time are not comparable
        m = int(later.sum())
        if m == 0:
            continue
        comparable += m
        diffs = r_s[i] - r_s[later]
        concordant += float((diffs > 0).sum()) + 0.5 * float((diffs == 0).sum())
    if comparable == 0:
        raise ValueError("no comparable pairs")
    return concordant / comparable


def relative_absolute_error(pred: PredictionSet) -> np.ndarray:
    """Per-record RAE: |t_hat - t| / t_max for events, max(0, t - t_hat) / t_max
    for censored records (no error while the prediction exceeds the censoring
    point)."""
    t_hat = pred.point
    err = np.where(
        pred.l == 1,
        np.abs(t_hat - pred.t),
        np.maximum(0.0, pred.t - t_hat),
    )
    return err / pred.t_max


def normalized_relative_error(pred: PredictionSet) -> np.ndarray:
    """Per-record signed error (t_hat - t) / t_max; for censored records only
    underestimation counts: min(0, t_hat - t) / t_max."""
    t_hat = pred.point
    signed = t_hat - pred.t
    signed = np.where(pred.l == 1, signed, np.minimum(0.0, signed))
    return signed / pred.t_max


def coverage_intervals(pred: PredictionSet, level: float = 0.95) -> dict:
    """Per-record empirical central interval widths at `level`, plus the
    fraction of non-censored ground truths covered by their own interval."""
    if pred.samples.shape[1] < 20:
        raise ValueError("need at least 20 samples per record for interval estimates")
    alpha = (1.0 - level) / 2.0
    lo = np.quantile(pred.samples, alpha, axis=1)
    hi = np.quantile(pred.samples, 1.0 - alpha, axis=1)
    widths = hi - lo
    nc = pred.l == 1
    covered = (pred.t >= lo) & (pred.t <= hi)
    return {
        "widths": widths,
        "width_median_noncensored": _median_or_nan(widths[nc]),
        "width_median_censored": _median_or_nan(widths[~nc]),
        "coverage_fraction": float(covered[nc].mean()) if nc.any() else float("nan"),
    }


def _median_or_nan(values: np.ndarray) -> float:
    return float(np.median(values)) if values.size else float("nan")


def _quantiles_or_nan(values: np.ndarray, qs=(0.25, 0.5, 0.75)) -> list[float]:
    if values.size == 0:
        return [float("nan")] * len(qs)
    return [float(np.quantile(values, q)) for q in qs]


@dataclass
class MetricReport:
    """Full evaluation summary with fixed serialization field names."""

    ci: float
    rae_noncensored_median: float
    rae_noncensored_q25: float
    rae_noncensored_q75: float
    rae_censored_median: float
    rae_censored_q25: float
    rae_censored_q75: float
    nre_values: list[float]
    interval_width_median_noncensored: float
    interval_width_median_censored: float
    coverage_fraction: float

    def to_dict(self) -> dict:
        return {
            "ci": self.ci,
            "rae_noncensored_median": self.rae_noncensored_median,
            "rae_noncensored_q25": self.rae_noncensored_q25,
            "rae_noncensored_q75": self.rae_noncensored_q75,
            "rae_censored_median": self.rae_censored_median,
            "rae_censored_q25": self.rae_censored_q25,
            "rae_censored_q75": self.rae_censored_q75,
            "nre_values": self.nre_values,
            "interval_width_median_noncensored": self.interval_width_median_noncensored,
            "interval_width_median_censored": self.interval_width_median_censored,
            "coverage_fraction": self.coverage_fraction,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def evaluate_predictions(pred: PredictionSet, interval_level: float = 0.95) -> MetricReport:
    """Assemble the standard report from a prediction set."""
    rae = relative_absolute_error(pred)
    nre = normalized_relative_error(pred)
    cov = coverage_intervals(pred, interval_level)
    nc = pred.l == 1
    rae_nc = _quantiles_or_nan(rae[nc])
    rae_c = _quantiles_or_nan(rae[~nc])
    ci = concordance_index(pred.t, pred.l, pred.point, higher_risk="smaller_time")
    return MetricReport(
        ci=ci,
        rae_noncensored_median=rae_nc[1],
        rae_noncensored_q25=rae_nc[0],
        rae_noncensored_q75=rae_nc[2],
        rae_censored_median=rae_c[1],
        rae_censored_q25=rae_c[0],
        rae_censored_q75=rae_c[2],
        nre_values=[float(v) for v in nre],
        interval_width_median_noncensored=cov["width_median_noncensored"],
        interval_width_median_censored=cov["width_median_censored"],
        coverage_fraction=cov["coverage_fraction"],
    )
