"""Survival datasets: CSV ingestion with preprocessing, stratified splits,
synthetic data generation, and on-disk dataset artifacts.

Encoding rules
--------------
Continuous features are standardized with statistics of the *training* split
only (no leakage into validation/test). Missing continuous cells are imputed
with the train-split median. Categorical features are one-hot encoded over
all observed levels (full dummy coding, no reference level dropped); a
missing categorical cell encodes as the all-zero level. Every source column
containing missing values also contributes a 0/1 missingness indicator
column.

CSV expectations: UTF-8, header row, '.' decimal separator, empty cell means
missing.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .distributions import Exponential, Weibull

SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class SurvivalRecord:
    """One subject: encoded covariates, observed time, event indicator."""

    x: np.ndarray
    t: float
    l: int


@dataclass(frozen=True)
class FeatureInfo:
    name: str  # encoded column name, e.g. "age" or "sex=F" or "creatinine__missing"
    kind: str  # "continuous" | "categorical-level" | "missing-indicator"
    source: str  # source column in the raw table


@dataclass
class DatasetSchema:
    """Declares which CSV columns hold time/event and how to treat features."""

    time_column: str
    event_column: str
    features: dict[str, str]  # column -> "continuous" | "categorical"
    time_unit: str = "days"

    def __post_init__(self):
        for name, kind in self.features.items():
            if kind not in ("continuous", "categorical"):
                raise ValueError(f"feature {name!r}: unknown kind {kind!r}")

    @classmethod
    def from_json(cls, path) -> "DatasetSchema":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(
            time_column=raw["time_column"],
            event_column=raw["event_column"],
            features=dict(raw["features"]),
            time_unit=raw.get("time_unit", "days"),
        )

    def to_dict(self) -> dict:
        return {
            "time_column": self.time_column,
            "event_column": self.event_column,
            "features": dict(self.features),
            "time_unit": self.time_unit,
        }


# Schema for the public FLCHAIN serum free-light-chain study export
# (R `survival` package column names). The cause-of-death chapter column is
# excluded: it is populated only for deaths and would leak the outcome.
FLCHAIN_SCHEMA = DatasetSchema(
    time_column="futime",
    event_column="death",
    features={
        "age": "continuous",
        "sex": "categorical",
        "sample.yr": "categorical",
        "kappa": "continuous",
        "lambda": "continuous",
        "flc.grp": "categorical",
        "creatinine": "continuous",
        "mgus": "categorical",
    },
    time_unit="days",
)


class SurvivalDataset:
    """Encoded covariate matrix plus (time, event) pairs and split labels."""

    def __init__(
        self,
        X: np.ndarray,
        t: np.ndarray,
        l: np.ndarray,
        features: list[FeatureInfo],
        split: np.ndarray | None = None,
        time_unit: str = "days",
        preprocessing: dict | None = None,
        raw: pd.DataFrame | None = None,
        schema: DatasetSchema | None = None,
    ):
        self.X = np.asarray(X, dtype=np.float64)
        self.t = np.asarray(t, dtype=np.float64)
        self.l = np.asarray(l, dtype=np.int64)
        if np.any(self.t <= 0):
            raise ValueError("all times must be strictly positive")
        if not np.all(np.isin(self.l, (0, 1))):
            raise ValueError("event indicator must be 0 or 1")
        if self.X.shape[0] != self.t.shape[0] or self.t.shape[0] != self.l.shape[0]:
            raise ValueError("X, t, l must agree in length")
        if len(features) != self.X.shape[1]:
            raise ValueError("feature descriptors must match encoded width")
        self.features = list(features)
        self.split = None if split is None else np.asarray(split, dtype="<U10")
        self.time_unit = time_unit
        self.preprocessing = preprocessing or {}
        self.raw = raw
        self.schema = schema

    # -- basic accessors ---------------------------------------------------

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def t_max(self) -> float:
        return float(self.t.max())

    @property
    def event_fraction(self) -> float:
        return float(self.l.mean())

    def records(self):
        for i in range(self.n):
            yield SurvivalRecord(self.X[i], float(self.t[i]), int(self.l[i]))

    def subset(self, split_name: str) -> "SurvivalDataset":
        if self.split is None:
            raise ValueError("dataset has no split labels")
        if split_name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {split_name!r}")
        mask = self.split == split_name
        return SurvivalDataset(
            self.X[mask],
            self.t[mask],
            self.l[mask],
            self.features,
            split=None,
            time_unit=self.time_unit,
            preprocessing=self.preprocessing,
        )

    def preprocessing_hash(self) -> str:
        """Stable digest of the encoding statistics, used to verify that a
        checkpoint matches the dataset it is applied to."""
        payload = {
            "features": [(f.name, f.kind, f.source) for f in self.features],
            "stats": self.preprocessing,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_csv(self, path) -> None:
        """Write the raw (pre-encoding) table back to CSV."""
        if self.raw is None or self.schema is None:
            raise ValueError("dataset was not loaded from a raw table")
        frame = self.raw.copy()
        frame[self.schema.time_column] = self.t
        frame[self.schema.event_column] = self.l
        frame.to_csv(path, index=False)


# -- CSV ingestion -------------------------------------------------------------


def _validate_time_event(frame: pd.DataFrame, schema: DatasetSchema) -> tuple:
    for col in (schema.time_column, schema.event_column, *schema.features):
        if col not in frame.columns:
            raise ValueError(f"missing required column {col!r}")
    t = pd.to_numeric(frame[schema.time_column], errors="coerce")
    bad = np.flatnonzero(~np.isfinite(t.to_numpy()) | (t.to_numpy() <= 0))
    if bad.size:
        raise ValueError(
            f"column {schema.time_column!r}, row {bad[0]}: "
            f"time must be a positive number, got {frame[schema.time_column].iloc[bad[0]]!r}"
        )
    ev = pd.to_numeric(frame[schema.event_column], errors="coerce").to_numpy()
    bad = np.flatnonzero(~np.isin(ev, (0.0, 1.0)))
    if bad.size:
        raise ValueError(
            f"column {schema.event_column!r}, row {bad[0]}: "
            f"event must be 0 or 1, got {frame[schema.event_column].iloc[bad[0]]!r}"
        )
    return t.to_numpy(float), ev.astype(np.int64)


def fit_preprocessing(frame: pd.DataFrame, schema: DatasetSchema, train_mask: np.ndarray) -> dict:
    """Compute encoding statistics from the training rows only."""
    stats: dict = {"continuous": {}, "categorical": {}, "has_missing": {}}
    for name, kind in schema.features.items():
        col = frame[name]
        has_missing = bool(col.isna().any())
        stats["has_missing"][name] = has_missing
        if kind == "continuous":
            values = pd.to_numeric(col, errors="coerce")
            train_values = values[train_mask]
            median = float(train_values.median())
            imputed = train_values.fillna(median)
            mean = float(imputed.mean())
            std = float(imputed.std(ddof=0))
            stats["continuous"][name] = {
                "median": median,
                "mean": mean,
                "std": std if std > 0 else 1.0,
            }
        else:
            levels = sorted(str(v) for v in col.dropna().unique())
            stats["categorical"][name] = {"levels": levels}
    return stats


def encode_features(
    frame: pd.DataFrame, schema: DatasetSchema, stats: dict
) -> tuple[np.ndarray, list[FeatureInfo]]:
    columns: list[np.ndarray] = []
    infos: list[FeatureInfo] = []
    for name, kind in schema.features.items():
        col = frame[name]
        if kind == "continuous":
            s = stats["continuous"][name]
            values = pd.to_numeric(col, errors="coerce").to_numpy(float)
            values = np.where(np.isnan(values), s["median"], values)
            columns.append((values - s["mean"]) / s["std"])
            infos.append(FeatureInfo(name, "continuous", name))
        else:
            levels = stats["categorical"][name]["levels"]
            as_str = col.astype("string")
            for level in levels:
                columns.append((as_str == level).to_numpy(float))
                infos.append(FeatureInfo(f"{name}={level}", "categorical-level", name))
    for name in schema.features:
        if stats["has_missing"][name]:
            columns.append(frame[name].isna().to_numpy(float))
            infos.append(FeatureInfo(f"{name}__missing", "missing-indicator", name))
    X = np.column_stack(columns) if columns else np.empty((len(frame), 0))
    return X, infos


def load_csv(
    path,
    schema: DatasetSchema,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SurvivalDataset:
    """Read, validate, split and encode a survival CSV in one pass.

    The split is assigned before any statistics are computed so that
    standardization and imputation see training rows only.
    """
    frame = pd.read_csv(path)
    t, l = _validate_time_event(frame, schema)
    split = assign_split(l, fractions, seed)
    stats = fit_preprocessing(frame, schema, split == "train")
    X, infos = encode_features(frame, schema, stats)
    return SurvivalDataset(
        X,
        t,
        l,
        infos,
        split=split,
        time_unit=schema.time_unit,
        preprocessing=stats,
        raw=frame[list(schema.features)].copy(),
        schema=schema,
    )


# -- stratified splitting -------------------------------------------------------


def assign_split(
    events: np.ndarray,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> np.ndarray:
    """Assign train/validation/test labels, stratified by event status.

    Within each stratum (events, censored) records are shuffled and counts
    allocated by largest remainder; remainder units go to whichever split is
    furthest below its target total, which keeps tiny splits from starving.
    Deterministic given the seed.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != len(SPLIT_NAMES):
        raise ValueError("expected one fraction per split (train, validation, test)")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    events = np.asarray(events)
    n = events.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    labels = np.empty(n, dtype="<U10")
    targets = np.array([f * n for f in fractions])
    assigned = np.zeros(len(SPLIT_NAMES))
    for value in (1, 0):  # events first, then censored
        idx = np.flatnonzero(events == value)
        if idx.size == 0:
            continue
        rng.shuffle(idx)
        exact = np.array([f * idx.size for f in fractions])
        counts = np.floor(exact).astype(int)
        remainder = idx.size - counts.sum()
        if remainder > 0:
            frac_part = exact - np.floor(exact)
            deficit = targets - (assigned + counts)
            # prefer larger fractional part, break ties toward the larger deficit
            order = np.lexsort((-deficit, -frac_part))
            for k in order[:remainder]:
                counts[k] += 1
        start = 0
        for k, name in enumerate(SPLIT_NAMES):
            labels[idx[start : start + counts[k]]] = name
            start += counts[k]
        assigned += counts
    for k, name in enumerate(SPLIT_NAMES):
        if fractions[k] > 0 and not np.any(labels == name):
            raise ValueError(f"split {name!r} received zero records")
        if fractions[k] > 0 and not np.any(events[labels == name] == 1):
            warnings.warn(f"split {name!r} received zero events", stacklevel=2)
    return labels


def split_dataset(
    dataset: SurvivalDataset,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SurvivalDataset:
    """Return a copy of the dataset with fresh stratified split labels."""
    labels = assign_split(dataset.l, fractions, seed)
    return SurvivalDataset(
        dataset.X,
        dataset.t,
        dataset.l,
        dataset.features,
        split=labels,
        time_unit=dataset.time_unit,
        preprocessing=dataset.preprocessing,
        raw=dataset.raw,
        schema=dataset.schema,
    )


# -- synthetic data ------------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Recipe for a synthetic survival dataset with known ground truth.

    Event times follow the chosen family conditioned on x ~ N(0, I_p):
    log-normal uses the linear AFT form log t = x.beta + sigma*xi; exponential
    and Weibull use proportional hazards with rate multiplier exp(x.beta).
    """

    n: int
    p: int
    beta: tuple = ()
    family: str = "lognormal"
    sigma: float = 0.5  # log-normal noise scale
    base_rate: float = 1.0  # exponential baseline rate
    weibull_shape: float = 1.5
    weibull_scale: float = 1.0
    censoring: str = "exponential"  # "none" | "administrative" | "exponential"
    censor_time: float | None = None
    censor_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("lognormal", "exponential", "weibull"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.censoring not in ("none", "administrative", "exponential"):
            raise ValueError(f"unknown censoring mechanism {self.censoring!r}")
        if self.censoring == "exponential" and not 0.0 <= self.censor_fraction < 1.0:
            raise ValueError("target censor fraction must be in [0, 1)")
        if self.censoring == "administrative" and not self.censor_time:
            raise ValueError("administrative censoring requires censor_time")
        if len(self.beta) != self.p:
            raise ValueError("beta must have length p")


def _calibrate_censor_rate(t: np.ndarray, target: float) -> float:
    """Rate of an independent exponential censor giving E[fraction censored]
    = target, by bisection on mean(1 - exp(-rate * t))."""
    if target <= 0:
        return 0.0
    lo, hi = 0.0, 1.0 / t.mean()
    while np.mean(-np.expm1(-hi * t)) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.mean(-np.expm1(-mid * t)) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_synthetic(spec: SyntheticSpec) -> SurvivalDataset:
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(1,)))
    beta = np.asarray(spec.beta, dtype=np.float64)
    X = rng.standard_normal((spec.n, spec.p))
    eta = X @ beta
    u_stream = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(2,)))
    if spec.family == "lognormal":
        event_t = np.exp(eta + spec.sigma * u_stream.standard_normal(spec.n))
    elif spec.family == "exponential":
        rate = spec.base_rate * np.exp(eta)
        event_t = Exponential(1.0).sample(u_stream, size=spec.n) / rate
    else:
        base = Weibull(spec.weibull_shape, spec.weibull_scale)
        # proportional hazards: H(t|x) = exp(eta) * (t/scale)^shape
        event_t = base.sample(u_stream, size=spec.n) * np.exp(-eta / spec.weibull_shape)

    c_stream = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(3,)))
    if spec.censoring == "none":
        observed, l = event_t, np.ones(spec.n, dtype=np.int64)
    elif spec.censoring == "administrative":
        cutoff = float(spec.censor_time)
        l = (event_t <= cutoff).astype(np.int64)
        observed = np.minimum(event_t, cutoff)
    else:
        rate = _calibrate_censor_rate(event_t, spec.censor_fraction)
        if rate == 0.0:
            observed, l = event_t, np.ones(spec.n, dtype=np.int64)
        else:
            c = Exponential(rate).sample(c_stream, size=spec.n)
            l = (event_t <= c).astype(np.int64)
            observed = np.minimum(event_t, c)

    infos = [FeatureInfo(f"x{j}", "continuous", f"x{j}") for j in range(spec.p)]
    return SurvivalDataset(X, observed, l, infos, time_unit="synthetic")


# -- dataset artifacts -----------------------------------------------------------


def save_artifact(dataset: SurvivalDataset, out_dir, extra_meta: dict | None = None) -> dict:
    """Write the encoded dataset to a directory: .npy arrays + manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if dataset.split is None:
        raise ValueError("dataset must carry split labels before saving")
    np.save(out / "X.npy", dataset.X)
    np.save(out / "t.npy", dataset.t)
    np.save(out / "l.npy", dataset.l)
    np.save(out / "split.npy", dataset.split)
    manifest = {
        "n": dataset.n,
        "p": dataset.p,
        "t_max": dataset.t_max,
        "event_fraction": dataset.event_fraction,
        "time_unit": dataset.time_unit,
        "features": [(f.name, f.kind, f.source) for f in dataset.features],
        "preprocessing": dataset.preprocessing,
        "preprocessing_hash": dataset.preprocessing_hash(),
        "split_counts": {name: int((dataset.split == name).sum()) for name in SPLIT_NAMES},
    }
    manifest.update(extra_meta or {})
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest


def load_artifact(artifact_dir) -> SurvivalDataset:
    path = Path(artifact_dir)
    with open(path / "manifest.json", "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    infos = [FeatureInfo(*row) for row in manifest["features"]]
    return SurvivalDataset(
        np.load(path / "X.npy"),
        np.load(path / "t.npy"),
        np.load(path / "l.npy"),
        infos,
        split=np.load(path / "split.npy"),
        time_unit=manifest["time_unit"],
        preprocessing=manifest["preprocessing"],
    )
