"""Empirical quantities from finished graphs: degree shares, histograms, tail fits
and the finite-(t, k) glass-ceiling statistic."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from ._io import atomic_write_text, fmt_num
from .errors import DegenerateSupport, EmptyGraph, InsufficientTail
from .model import Color, ThetaPair

MIN_TAIL = 10
GAMMA_BOUNDS = (1.0 + 1e-6, 30.0)


class Direction(str, enum.Enum):
    IN = "in"
    OUT = "out"


class FitMethod(str, enum.Enum):
    MLE = "DiscreteMLE"
    CCDF = "CCDFRegression"


def empirical_theta(graph) -> ThetaPair:
    m = graph.n_edges
    if m == 0:
        raise EmptyGraph("theta is undefined on a graph with no edges")
    return ThetaPair(graph.d_in_red / m, graph.d_out_red / m)


def _degrees(graph, group: Color | None, direction: Direction) -> np.ndarray:
    deg = graph.in_degree if Direction(direction) is Direction.IN else graph.out_degree
    if group is None:
        return np.asarray(deg)
    return np.asarray(deg)[np.asarray(graph.colors) == int(group)]


@dataclass(frozen=True)
class DegreeHistogram:
    group: Color
    direction: Direction
    counts: dict
    total: int

    def degrees(self) -> np.ndarray:
        """Expand back into a degree sample (order is by degree)."""
        if not self.counts:
            return np.zeros(0, dtype=np.int64)
        ks = np.fromiter(self.counts.keys(), dtype=np.int64)
        ms = np.fromiter(self.counts.values(), dtype=np.int64)
        return np.repeat(ks, ms)

    def to_csv(self) -> str:
        rows = ["k,count"] + [f"{k},{c}" for k, c in sorted(self.counts.items())]
        return "\n".join(rows) + "\n"


def degree_histogram(graph, group: Color, direction: Direction) -> DegreeHistogram:
    deg = _degrees(graph, group, direction)
    ks, ms = np.unique(deg, return_counts=True)
    return DegreeHistogram(Color(group), Direction(direction),
                           dict(zip(ks.tolist(), ms.tolist())), int(deg.size))


# -- power-law fits -----------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    gamma_hat: float
    k_min: int
    n_tail: int
    stderr: float
    method: FitMethod
    ks_distance: float = math.nan

    def pmf(self, k) -> np.ndarray:
        """Fitted ``p(k) = k^-gamma / zeta(gamma, k_min)`` for ``k >= k_min``, else 0."""
        k = np.asarray(k, dtype=float)
        val = k ** -self.gamma_hat / special.zeta(self.gamma_hat, self.k_min)
        return np.where(k >= self.k_min, val, 0.0)

    def pmf_ratio(self, k) -> np.ndarray:
        """``p(k) / p(k-1)`` on the fitted law, valid for ``k > k_min``."""
        k = np.asarray(k, dtype=float)
        return self.pmf(k) / self.pmf(k - 1)


def _mle_gamma(sum_log: float, n: int, k_min: int) -> float:
    def nll(g):
        return g * sum_log + n * math.log(special.zeta(g, k_min))

    res = optimize.minimize_scalar(nll, bounds=GAMMA_BOUNDS, method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x)


def _ks_distance(tail_sorted: np.ndarray, gamma: float, k_min: int) -> float:
    ks, counts = np.unique(tail_sorted, return_counts=True)
    n = tail_sorted.size
    emp_cdf = np.cumsum(counts) / n
    # model P(K <= k) = 1 - zeta(gamma, k+1) / zeta(gamma, k_min)
    model_cdf = 1.0 - special.zeta(gamma, ks + 1.0) / special.zeta(gamma, k_min)
    emp_below = np.concatenate(([0.0], emp_cdf[:-1]))
    model_below = 1.0 - special.zeta(gamma, ks.astype(float)) / special.zeta(gamma, k_min)
    return float(max(np.abs(emp_cdf - model_cdf).max(), np.abs(emp_below - model_below).max()))


def fit_power_law_sample(degrees, k_min: int | None = None,
                         method: FitMethod = FitMethod.MLE,
                         max_candidates: int = 500) -> PowerLawFit:
    """Fit ``p(k) ∝ k^-gamma`` on ``k >= k_min``; degree-0 entries are ignored.

    With ``k_min=None`` the cutoff minimises the KS distance between the tail
    and its own MLE fit, scanning the smallest ``max_candidates`` distinct
    degrees that leave at least ``MIN_TAIL`` points.
    """
    x = np.sort(np.asarray(degrees, dtype=np.int64))
    x = x[x >= 1]
    if FitMethod(method) is FitMethod.CCDF:
        return _fit_ccdf(x, k_min)

    if k_min is not None:
        tail = x[x >= k_min]
        _require_tail(tail)
        g = _mle_gamma(float(np.log(tail).sum()), tail.size, int(k_min))
        return PowerLawFit(g, int(k_min), int(tail.size), (g - 1) / math.sqrt(tail.size),
                           FitMethod.MLE, _ks_distance(tail, g, int(k_min)))

    _require_tail(x)
    uniq = np.unique(x)
    logs = np.log(x)
    # suffix sums so each candidate's log-likelihood is O(1)
    suffix_log = np.concatenate((np.cumsum(logs[::-1])[::-1], [0.0]))
    best = None
    for kmin in uniq[:max_candidates].tolist():
        start = int(np.searchsorted(x, kmin, side="left"))
        n_tail = x.size - start
        if n_tail < MIN_TAIL:
            break
        if x[start] == x[-1]:
            break
        g = _mle_gamma(float(suffix_log[start]), n_tail, kmin)
        d = _ks_distance(x[start:], g, kmin)
        if best is None or d < best.ks_distance:
            best = PowerLawFit(g, kmin, n_tail, (g - 1) / math.sqrt(n_tail), FitMethod.MLE, d)
    if best is None:
        raise DegenerateSupport("every admissible tail has a single distinct degree")
    return best


def _require_tail(tail: np.ndarray) -> None:
    if tail.size < MIN_TAIL:
        raise InsufficientTail(f"{tail.size} tail samples, need at least {MIN_TAIL}")
    if tail[0] == tail[-1]:
        raise DegenerateSupport(f"all {tail.size} tail degrees equal {int(tail[0])}")


def _fit_ccdf(x: np.ndarray, k_min: int | None) -> PowerLawFit:
    k_min = int(k_min) if k_min is not None else (int(x[0]) if x.size else 1)
    tail = x[x >= k_min]
    _require_tail(tail)
    ks, counts = np.unique(tail, return_counts=True)
    ccdf = np.cumsum(counts[::-1])[::-1] / tail.size
    # CCDF of a k^-gamma law falls as k^-(gamma-1)
    slope, _ = np.polyfit(np.log(ks), np.log(ccdf), 1)
    g = 1.0 - float(slope)
    return PowerLawFit(g, k_min, int(tail.size), (g - 1) / math.sqrt(tail.size), FitMethod.CCDF)


def fit_power_law(hist: DegreeHistogram, k_min: int | None = None,
                  method: FitMethod = FitMethod.MLE) -> PowerLawFit:
    return fit_power_law_sample(hist.degrees(), k_min, method)


def discrete_power_law_sample(gamma: float, n: int, rng: np.random.Generator,
                              k_min: int = 1, table_size: int = 100_000) -> np.ndarray:
    """Inverse-CDF draws from ``p(k) = k^-gamma / zeta(gamma, k_min)``.

    Exact up to ``k_min + table_size``; beyond that the continuous tail
    approximation is used (its mass is below ``table_size^(1-gamma)``).
    """
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    ks = np.arange(k_min, k_min + table_size, dtype=float)
    ccdf = special.zeta(gamma, ks) / special.zeta(gamma, k_min)   # P(K >= k)
    u = rng.random(n)
    # K = largest k with P(K >= k) >= u
    idx = np.searchsorted(-ccdf, -u, side="right") - 1
    out = (k_min + idx).astype(np.int64)
    far = u < ccdf[-1]
    if far.any():
        k_last = ks[-1]
        ratio = u[far] / ccdf[-1]
        out[far] = np.floor((k_last - 0.5) * ratio ** (-1.0 / (gamma - 1.0)) + 0.5).astype(np.int64)
    return out


# -- glass ceiling statistic --------------------------------------------------


def _ratio(a: int, b: int) -> float:
    if b == 0:
        return math.nan if a == 0 else math.inf
    return a / b


@dataclass(frozen=True)
class GceStatistic:
    k: int
    top_out_red: int
    top_in_red: int
    top_out_blue: int
    top_in_blue: int
    ratio: float

    @property
    def indeterminate(self) -> bool:
        return math.isnan(self.ratio)

    def ratio_literal(self) -> str:
        return "indeterminate" if self.indeterminate else fmt_num(float(self.ratio))


def gce_statistic(graph, k: int) -> GceStatistic:
    """``(top_out(R)/top_in(R)) * (top_in(B)/top_out(B))`` with ``top`` = count of degree >= k.

    A vanishing value means red faces the glass ceiling, an exploding one blue.
    A 0/0 factor, or 0 times infinity, is reported as indeterminate (nan).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    red = np.asarray(graph.colors) == 1
    din, dout = np.asarray(graph.in_degree), np.asarray(graph.out_degree)
    tor = int((dout[red] >= k).sum())
    tir = int((din[red] >= k).sum())
    tob = int((dout[~red] >= k).sum())
    tib = int((din[~red] >= k).sum())
    f_red = _ratio(tor, tir)
    f_blue = _ratio(tib, tob)
    if math.isnan(f_red) or math.isnan(f_blue):
        ratio = math.nan
    elif (f_red == 0 and math.isinf(f_blue)) or (f_blue == 0 and math.isinf(f_red)):
        ratio = math.nan
    else:
        ratio = f_red * f_blue
    return GceStatistic(k, tor, tir, tob, tib, ratio)


def gce_curve(graph, k_grid) -> list:
    return [gce_statistic(graph, k) for k in k_grid]


def gce_curve_csv(curve) -> str:
    rows = ["k,ratio"] + [f"{s.k},{s.ratio_literal()}" for s in curve]
    return "\n".join(rows) + "\n"


class CurveTrend(str, enum.Enum):
    TO_ZERO = "toward_0"
    TO_INF = "toward_inf"
    FLAT = "toward_1"
    UNKNOWN = "indeterminate"


def curve_trend(curve, band: float = 0.1) -> CurveTrend:
    """Classify the large-k end of a glass-ceiling ratio curve.

    Uses the largest-k determinate point: above ``1 + band`` (or infinite)
    reads as growth, below ``1 / (1 + band)`` as decay.
    """
    vals = [s.ratio for s in curve if not math.isnan(s.ratio)]
    if not vals:
        return CurveTrend.UNKNOWN
    v = vals[-1]
    if v > 1 + band:
        return CurveTrend.TO_INF
    if v < 1 / (1 + band):
        return CurveTrend.TO_ZERO
    return CurveTrend.FLAT


# -- analytic vs empirical ----------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    group: Color
    direction: Direction
    gamma_analytic: float
    gamma_fit: float
    abs_diff: float
    stderr: float
    k_min: int | None
    n_tail: int | None
    theta_star: float
    theta_hat: float
    note: str = ""

    COLUMNS = ("group", "direction", "gamma_analytic", "gamma_fit", "abs_diff", "stderr",
               "k_min", "n_tail", "theta_star", "theta_hat", "note")

    def cells(self):
        def num(x):
            if x is None or (isinstance(x, float) and math.isnan(x) and self.note):
                return "n/a"
            return fmt_num(x)

        return [self.group.letter if isinstance(self.group, Color) else str(self.group),
                self.direction.value if isinstance(self.direction, Direction) else str(self.direction),
                fmt_num(self.gamma_analytic), num(self.gamma_fit), num(self.abs_diff),
                num(self.stderr), num(self.k_min), num(self.n_tail),
                fmt_num(self.theta_star), num(self.theta_hat), self.note]


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple

    def to_csv(self, extra_columns=()) -> str:
        head = [c for c, _ in extra_columns] + list(ComparisonRow.COLUMNS)
        prefix = [fmt_num(v) for _, v in extra_columns]
        lines = [",".join(head)] + [",".join(prefix + r.cells()) for r in self.rows]
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())

    def cell(self, group: Color, direction: Direction) -> ComparisonRow:
        for r in self.rows:
            if r.group == group and r.direction == direction:
                return r
        raise KeyError((group, direction))


def compare_analytic_empirical(report, graph, k_min: int | None = None) -> ComparisonTable:
    """One row per (group, direction); fit failures become ``n/a`` cells."""
    try:
        th = empirical_theta(graph)
        hat = {Color.RED: th, Color.BLUE: ThetaPair(th.blue_in, th.blue_out)}
    except EmptyGraph:
        hat = None
    star = {Color.RED: report.theta_star,
            Color.BLUE: ThetaPair(report.theta_star.blue_in, report.theta_star.blue_out)}
    rows = []
    for group, consts in ((Color.RED, report.red), (Color.BLUE, report.blue)):
        for direction in (Direction.IN, Direction.OUT):
            g_an = consts.gamma_in if direction is Direction.IN else consts.gamma_out
            t_star = star[group].theta_in if direction is Direction.IN else star[group].theta_out
            if hat is None:
                t_hat = math.nan
            else:
                t_hat = hat[group].theta_in if direction is Direction.IN else hat[group].theta_out
            try:
                fit = fit_power_law_sample(_degrees(graph, group, direction), k_min)
                rows.append(ComparisonRow(group, direction, g_an, fit.gamma_hat,
                                          abs(fit.gamma_hat - g_an), fit.stderr, fit.k_min,
                                          fit.n_tail, t_star, t_hat))
            except (InsufficientTail, DegenerateSupport) as exc:
                rows.append(ComparisonRow(group, direction, g_an, math.nan, math.nan, math.nan,
                                          None, None, t_star, t_hat, type(exc).__name__))
    return ComparisonTable(tuple(rows))


def pooled_estimate(values, stderrs):
    """Inverse-variance weighted mean and its standard error; nan entries are skipped."""
    v = np.asarray(values, dtype=float)
    s = np.asarray(stderrs, dtype=float)
    ok = np.isfinite(v) & np.isfinite(s) & (s > 0)
    if not ok.any():
        return math.nan, math.nan
    w = 1.0 / s[ok] ** 2
    return float((w * v[ok]).sum() / w.sum()), float(1.0 / math.sqrt(w.sum()))


__all__ = [
    "Direction", "FitMethod", "empirical_theta", "DegreeHistogram", "degree_histogram",
    "PowerLawFit", "fit_power_law", "fit_power_law_sample", "discrete_power_law_sample",
    "GceStatistic", "gce_statistic", "gce_curve", "gce_curve_csv", "CurveTrend", "curve_trend",
    "ComparisonRow", "ComparisonTable", "compare_analytic_empirical", "pooled_estimate",
]
