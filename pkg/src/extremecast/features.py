"""Causal feature engineering and next-day-correlation feature selection.

Every derived series at day t uses rows <= t only.  Column sets where the
method description says "key variables" are declared here once:

* rolling stats, smoothing: tempmax, tempmin, temp, feelslike
* first differences: the four above plus sealevelpressure

Derived groups (FeatureSpec.enabled_groups): calendar, rolling, smoothing,
anomaly, interaction, diff.  Raw numeric columns always stay in the candidate
pool.  Feature modes: "full" keeps every group, "minimal" keeps only the four
cyclical calendar encodings, "raw_only" keeps no derived features.

Selection ranks candidates by |Pearson r| between feature(t) and target(t+1)
over train-partition rows, keeps the top k, breaks ties lexicographically,
and forces zero-variance features to rank last (r treated as 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import SplitSpec, TimeSeriesTable
from .errors import DataError

KEY_SERIES = ("tempmax", "tempmin", "temp", "feelslike")
DIFF_SERIES = KEY_SERIES + ("sealevelpressure",)
ALL_GROUPS = ("calendar", "rolling", "smoothing", "anomaly", "interaction", "diff")
CYCLICAL_CALENDAR = ("month_sin", "month_cos", "doy_sin", "doy_cos")


@dataclass
class FeatureSpec:
    enabled_groups: tuple = ALL_GROUPS
    mode: str = "full"               # full | minimal | raw_only
    rolling_windows: tuple = (7, 30)
    sg_window: int = 7
    sg_poly: int = 3
    zscore_flag_threshold: float = 2.0
    climatology_std_floor: float = 1e-8
    top_k: int = 30


def rolling_stat(x: np.ndarray, window: int, stat: str) -> np.ndarray:
    """Trailing statistic over the last `window` days, partial at the start.

    std uses ddof=1; a single-point window yields std 0.
    """
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        seg = x[max(0, i - window + 1):i + 1]
        if stat == "mean":
            out[i] = seg.mean()
        elif stat == "min":
            out[i] = seg.min()
        elif stat == "max":
            out[i] = seg.max()
        elif stat == "std":
            out[i] = seg.std(ddof=1) if seg.size > 1 else 0.0
        else:
            raise ValueError(f"unknown rolling stat {stat!r}")
    return out


def _sg_coeffs(n_pts: int, order: int) -> np.ndarray:
    """Weights reproducing the least-squares polynomial value at the right
    edge of an n_pts window.  Derived from the normal equations: with
    positions p = -(n_pts-1)..0 and Vandermonde A (columns p^0..p^order),
    the fitted value at p=0 is the constant coefficient of
    (A^T A)^{-1} A^T x, i.e. row 0 of that matrix dotted with the window."""
    p = np.arange(-(n_pts - 1), 1, dtype=np.float64)
    A = np.vander(p, order + 1, increasing=True)
    G = A.T @ A
    return np.linalg.solve(G, A.T)[0]


def savgol_causal(x: np.ndarray, window: int = 7, poly: int = 3) -> np.ndarray:
    """Causal Savitzky-Golay: value at t from the window ending at t.

    Start-of-series windows shrink and the polynomial order drops to
    n_pts - 1 when fewer points than poly + 1 are available.  Exact for
    polynomials up to `poly` once the window is full.
    """
    if window < 1 or poly < 0:
        raise ValueError("window must be >= 1 and poly >= 0")
    n = x.shape[0]
    coeffs = {m: _sg_coeffs(m, min(poly, m - 1)) for m in range(1, min(window, n) + 1)}
    out = np.empty(n)
    for i in range(n):
        m = min(i + 1, window)
        out[i] = coeffs[m] @ x[i - m + 1:i + 1]
    return out


@dataclass
class Climatology:
    """Per day-of-year mean/std per column, fitted on train rows only."""
    mean: dict[str, np.ndarray]   # indexed by day-of-year 1..366 at [doy]
    std: dict[str, np.ndarray]
    observed: dict[str, np.ndarray]


def day_of_year(dates) -> np.ndarray:
    return np.array([d.timetuple().tm_yday for d in dates], dtype=np.int64)


def fit_climatology(table: TimeSeriesTable, columns, train_slice: slice,
                    std_floor: float = 1e-8) -> Climatology:
    doy = day_of_year(table.dates)[train_slice]
    mean, std, observed = {}, {}, {}
    for name in columns:
        col = table.columns[name][train_slice]
        m = np.zeros(367)
        s = np.zeros(367)
        obs = np.zeros(367, dtype=bool)
        glob_m = float(col.mean())
        glob_s = max(float(col.std()), std_floor)
        for d in range(1, 367):
            vals = col[doy == d]
            if vals.size:
                m[d] = vals.mean()
                s[d] = max(float(vals.std()), std_floor)
                obs[d] = True
        # day 366 borrows day 365; any other unobserved day falls back to
        # the global train statistics
        for d in range(1, 367):
            if obs[d]:
                continue
            if d == 366 and obs[365]:
                m[d], s[d] = m[365], s[365]
            else:
                m[d], s[d] = glob_m, glob_s
        mean[name], std[name], observed[name] = m, s, obs
    return Climatology(mean, std, observed)


def climatology_anomaly(x: np.ndarray, doy: np.ndarray, clim: Climatology,
                        name: str, flag_threshold: float):
    m = clim.mean[name][doy]
    s = clim.std[name][doy]
    anom = x - m
    z = anom / s
    flag = (np.abs(z) > flag_threshold).astype(np.float64)
    return anom, z, flag


def first_diff(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    out[0] = 0.0
    out[1:] = x[1:] - x[:-1]
    return out


def build_features(table: TimeSeriesTable, split: SplitSpec,
                   spec: FeatureSpec) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """All candidate series (raw + derived) and their group labels."""
    if spec.mode not in ("full", "minimal", "raw_only"):
        raise DataError(f"unknown feature mode {spec.mode!r}")
    n = table.n_days
    feats: dict[str, np.ndarray] = {}
    groups: dict[str, str] = {}

    def put(name, values, group):
        feats[name] = np.asarray(values, dtype=np.float64)
        groups[name] = group

    for name, col in table.columns.items():
        put(name, col.copy(), "raw")

    if spec.mode == "raw_only":
        return feats, groups

    enabled = set(spec.enabled_groups)
    if spec.mode == "minimal":
        enabled = {"calendar"}

    doy = day_of_year(table.dates)

    if "calendar" in enabled:
        dates = table.dates
        month = np.array([d.month for d in dates], dtype=np.float64)
        put("month_sin", np.sin(2 * np.pi * month / 12.0), "calendar")
        put("month_cos", np.cos(2 * np.pi * month / 12.0), "calendar")
        put("doy_sin", np.sin(2 * np.pi * doy / 365.25), "calendar")
        put("doy_cos", np.cos(2 * np.pi * doy / 365.25), "calendar")
        if spec.mode != "minimal":
            put("year", [d.year for d in dates], "calendar")
            put("month", month, "calendar")
            put("day_of_year", doy, "calendar")
            put("day_of_week", [d.weekday() for d in dates], "calendar")
            put("quarter", [(d.month - 1) // 3 + 1 for d in dates], "calendar")
            put("week_of_year", [d.isocalendar()[1] for d in dates], "calendar")
    if spec.mode == "minimal":
        return feats, groups

    if "rolling" in enabled:
        for name in KEY_SERIES:
            if name not in table.columns:
                continue
            for w in spec.rolling_windows:
                for stat in ("mean", "min", "max", "std"):
                    put(f"{name}_{w}d_{stat}",
                        rolling_stat(table.columns[name], w, stat), "rolling")
        if "tempmax" in table.columns and "tempmin" in table.columns:
            rng_ = table.columns["tempmax"] - table.columns["tempmin"]
            put("temp_range", rng_, "rolling")
            for w in spec.rolling_windows:
                put(f"temp_range_vol_{w}", rolling_stat(rng_, w, "std"), "rolling")

    if "smoothing" in enabled:
        for name in KEY_SERIES:
            if name in table.columns:
                put(f"{name}_smooth",
                    savgol_causal(table.columns[name], spec.sg_window, spec.sg_poly),
                    "smoothing")

    if "anomaly" in enabled:
        clim = fit_climatology(table, sorted(table.columns), split.slice_("train"),
                               spec.climatology_std_floor)
        for name in sorted(table.columns):
            anom, z, flag = climatology_anomaly(
                table.columns[name], doy, clim, name, spec.zscore_flag_threshold)
            put(f"{name}_anom", anom, "anomaly")
            put(f"{name}_zscore", z, "anomaly")
            put(f"{name}_extreme_flag", flag, "anomaly")

    if "interaction" in enabled:
        cols = table.columns
        if "temp" in cols and "humidity" in cols:
            put("heat_index_proxy", cols["temp"] + 0.1 * cols["humidity"], "interaction")
        if "tempmax" in cols and "precip" in cols:
            drought = cols["tempmax"] - 2.0 * cols["precip"]
            put("drought_index", drought, "interaction")
            put("drought_index_30d", rolling_stat(drought, 30, "mean"), "interaction")

    if "diff" in enabled:
        for name in DIFF_SERIES:
            if name in table.columns:
                put(f"{name}_diff", first_diff(table.columns[name]), "diff")

    assert all(v.shape == (n,) for v in feats.values())
    return feats, groups


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Plain Pearson correlation; 0 when either side has zero variance."""
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0.0:
        return 0.0
    return float((da * db).sum() / denom)


@dataclass
class SelectionResult:
    selected: list            # ordered by rank
    correlations: dict[str, float]
    groups: dict[str, str] = field(default_factory=dict)

    def audit_rows(self):
        ranked = sorted(self.correlations,
                        key=lambda n: (-abs(self.correlations[n]), n))
        chosen = set(self.selected)
        return [(name, self.groups.get(name, ""), self.correlations[name],
                 name in chosen) for name in ranked]


def select_features(candidates: dict[str, np.ndarray], target: np.ndarray,
                    split: SplitSpec, k: int,
                    groups: dict[str, str] | None = None) -> SelectionResult:
    """Top-k candidates by |corr(feature_t, target_{t+1})| on train rows.

    Ties break lexicographically; zero-variance features score 0 and thus
    sort last (before the lexicographic key).  Returns min(k, n_candidates).
    """
    if k < 1:
        raise DataError(f"top_k must be >= 1, got {k}")
    lo, hi = split.train
    if hi - lo < 3:
        raise DataError("train partition too short for selection")
    corr = {}
    for name, x in candidates.items():
        corr[name] = pearson(x[lo:hi - 1], target[lo + 1:hi])
    ranked = sorted(corr, key=lambda n: (-abs(corr[n]), n))
    return SelectionResult(ranked[:min(k, len(ranked))], corr, dict(groups or {}))
