"""Backtesting the three-state trading rule.

At each period ``t`` the trader holds ``L * sign(alpha_t)`` when
``|alpha_t| > K * s_t`` and nothing otherwise, where ``alpha_t`` and ``s_t``
are the conditional mean and standard deviation of the next return. The
position earns ``h_t * r_{t+1}`` and is scored with the budget-threshold
utility ``min(pnl_t, h_t * alpha_t)``.

The moments are either supplied with the series (``alpha`` and ``s``
columns) or estimated causally from past returns. :func:`calibrate_k` sweeps
``K`` and picks the value with the largest total realized utility.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, TextIO

import numpy as np
import numpy.typing as npt

from .allocator import check_k_const, risk_cost_factor, sigma_from_std
from .ged_dist import GedParams, ParameterError, check_kappa, check_positive, sample, std_dev

__all__ = [
    "BacktestReport",
    "Calibration",
    "InsufficientDataError",
    "ReturnSeries",
    "SeriesFormatError",
    "StrategyConfig",
    "calibrate_k",
    "estimate_conditional_moments",
    "format_number",
    "read_series_csv",
    "run_strategy",
    "semi_empirical_positions",
    "simulate_conditional_series",
    "simulate_series",
    "write_series_csv",
]

ESTIMATORS = ("rolling_mean_sd", "ewma")


class InsufficientDataError(ValueError):
    """The series is too short for the requested warmup."""


class SeriesFormatError(ValueError):
    """A return-series CSV could not be parsed."""


def format_number(x: float) -> str:
    """Fixed 9-significant-digit rendering used by every text output."""
    x = float(x)
    if x == 0.0:
        return "0"
    return f"{x:.9g}"


def _parse_timestamp(raw: str):
    try:
        return int(raw)
    except ValueError:
        return datetime.fromisoformat(raw)


@dataclass(frozen=True)
class ReturnSeries:
    """Realized per-period simple returns with optional conditional moments.

    ``alpha[t]`` and ``s[t]`` are the forecast mean and standard deviation of
    ``returns[t + 1]``, formed with information up to ``t``.
    """

    timestamps: tuple
    returns: np.ndarray
    alpha: np.ndarray | None = None
    s: np.ndarray | None = None

    def __post_init__(self) -> None:
        r = np.asarray(self.returns, dtype=float)
        n = r.size
        if r.ndim != 1 or n == 0:
            raise ParameterError("returns must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(r)):
            raise ParameterError("returns must be finite")
        ts = tuple(self.timestamps)
        if len(ts) != n:
            raise ParameterError("timestamps and returns differ in length")
        keys = [_parse_timestamp(str(t)) for t in ts]
        kinds = {type(k) for k in keys}
        if len(kinds) > 1:
            raise ParameterError("timestamps mix integer indices and dates")
        if any(b <= a for a, b in zip(keys[:-1], keys[1:])):
            raise ParameterError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", tuple(str(t) for t in ts))
        object.__setattr__(self, "returns", r)
        if (self.alpha is None) != (self.s is None):
            raise ParameterError("alpha and s must be supplied together")
        if self.alpha is not None:
            a = np.asarray(self.alpha, dtype=float)
            s = np.asarray(self.s, dtype=float)
            if a.shape != r.shape or s.shape != r.shape:
                raise ParameterError("alpha and s must match the returns in length")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(s))):
                raise ParameterError("alpha and s must be finite")
            if np.any(s <= 0):
                raise ParameterError("supplied s must be positive")
            object.__setattr__(self, "alpha", a)
            object.__setattr__(self, "s", s)

    @classmethod
    def from_returns(cls, returns: npt.ArrayLike, alpha=None, s=None) -> "ReturnSeries":
        """Series indexed ``0, 1, 2, ...``."""
        r = np.asarray(returns, dtype=float)
        return cls(tuple(str(i) for i in range(r.size)), r, alpha, s)

    def __len__(self) -> int:
        return self.returns.size

    @property
    def has_moments(self) -> bool:
        return self.alpha is not None

    def scaled(self, c: float) -> "ReturnSeries":
        """Every return, alpha and s multiplied by ``c > 0``."""
        c = check_positive("c", c)
        if self.has_moments:
            return ReturnSeries(self.timestamps, self.returns * c, self.alpha * c, self.s * c)
        return ReturnSeries(self.timestamps, self.returns * c)


def read_series_csv(path: str | os.PathLike | TextIO) -> ReturnSeries:
    """Read ``timestamp,return[,alpha,s]``.

    Raises :class:`SeriesFormatError` naming the offending line.
    """
    if hasattr(path, "read"):
        text = path.read()
        name = getattr(path, "name", "<stream>")
    else:
        name = os.fspath(path)
        with open(name, newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise SeriesFormatError(f"{name}: empty file")
    header = [h.strip() for h in rows[0]]
    if header not in (["timestamp", "return"], ["timestamp", "return", "alpha", "s"]):
        raise SeriesFormatError(
            f"{name}, line 1: expected header 'timestamp,return[,alpha,s]', got {','.join(header)!r}"
        )
    ncol = len(header)
    ts, cols = [], [[] for _ in range(ncol - 1)]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != ncol:
            raise SeriesFormatError(f"{name}, line {lineno}: expected {ncol} fields, got {len(row)}")
        stamp = row[0].strip()
        try:
            _parse_timestamp(stamp)
        except ValueError:
            raise SeriesFormatError(f"{name}, line {lineno}: bad timestamp {stamp!r}") from None
        ts.append(stamp)
        for j, raw in enumerate(row[1:]):
            try:
                v = float(raw)
            except ValueError:
                raise SeriesFormatError(
                    f"{name}, line {lineno}: non-numeric {header[j + 1]} {raw.strip()!r}"
                ) from None
            if not math.isfinite(v):
                raise SeriesFormatError(f"{name}, line {lineno}: non-finite {header[j + 1]}")
            if header[j + 1] == "s" and v <= 0:
                raise SeriesFormatError(f"{name}, line {lineno}: s must be positive")
            cols[j].append(v)
    if not ts:
        raise SeriesFormatError(f"{name}: no data rows")
    try:
        if ncol == 4:
            return ReturnSeries(tuple(ts), np.array(cols[0]), np.array(cols[1]), np.array(cols[2]))
        return ReturnSeries(tuple(ts), np.array(cols[0]))
    except ParameterError as exc:
        raise SeriesFormatError(f"{name}: {exc}") from None


def write_series_csv(series: ReturnSeries, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    if series.has_moments:
        w.writerow(["timestamp", "return", "alpha", "s"])
        for row in zip(series.timestamps, series.returns, series.alpha, series.s):
            w.writerow([row[0], *map(format_number, row[1:])])
    else:
        w.writerow(["timestamp", "return"])
        for t, r in zip(series.timestamps, series.returns):
            w.writerow([t, format_number(r)])


@dataclass(frozen=True)
class StrategyConfig:
    """Trading-rule and estimator settings.

    ``warmup`` defaults to the estimator window when moments are estimated and
    to zero when they are supplied with the series.
    """

    k_const: float = 0.4
    limit: float = 1.0
    estimator_window: int = 250
    estimator_kind: str = "rolling_mean_sd"
    warmup: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_const", check_k_const(self.k_const))
        object.__setattr__(self, "limit", check_positive("limit", self.limit))
        if int(self.estimator_window) < 2:
            raise ParameterError("estimator_window must be at least 2")
        if self.estimator_kind not in ESTIMATORS:
            raise ParameterError(f"estimator_kind must be one of {ESTIMATORS}")
        if self.warmup is not None and int(self.warmup) < 0:
            raise ParameterError("warmup must be non-negative")

    def effective_warmup(self, estimating: bool) -> int:
        if self.warmup is None:
            return self.estimator_window if estimating else 0
        if estimating and self.estimator_kind == "rolling_mean_sd" and self.warmup < self.estimator_window:
            raise ParameterError("warmup must be at least the estimator window")
        return int(self.warmup)


def estimate_conditional_moments(
    series: ReturnSeries, cfg: StrategyConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Causal mean and standard deviation forecasts.

    Entry ``t`` uses ``returns[:t + 1]`` only. ``rolling_mean_sd`` uses the
    trailing ``estimator_window`` returns (sample standard deviation) and is
    NaN until the first full window; ``ewma`` uses decay
    ``2 / (window + 1)`` seeded at the first return. A window of identical
    returns yields ``s_t = 0`` exactly.
    """
    r = series.returns
    w = int(cfg.estimator_window)
    warmup = cfg.effective_warmup(estimating=True)
    if r.size <= warmup:
        raise InsufficientDataError(f"series of length {r.size} does not exceed warmup {warmup}")
    n = r.size
    alpha = np.full(n, np.nan)
    s = np.full(n, np.nan)
    if cfg.estimator_kind == "rolling_mean_sd":
        if n >= w:
            win = np.lib.stride_tricks.sliding_window_view(r, w)
            m = win.mean(axis=1)
            sd = win.std(axis=1, ddof=1)
            flat = win.max(axis=1) == win.min(axis=1)
            m[flat] = win[flat, 0]
            sd[flat] = 0.0
            alpha[w - 1:] = m
            s[w - 1:] = sd
    else:
        lam = 2.0 / (w + 1.0)
        m, v = r[0], 0.0
        alpha[0], s[0] = m, 0.0
        for t in range(1, n):
            d = r[t] - m
            m = m + lam * d
            v = (1.0 - lam) * (v + lam * d * d)
            alpha[t], s[t] = m, math.sqrt(v)
    return alpha, s


def semi_empirical_positions(
    alpha: np.ndarray, s: np.ndarray, limit: float, k_const: float
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized three-state rule.

    Returns ``(positions, degenerate)``; periods with ``s_t <= 0`` or missing
    moments are flat and flagged.
    """
    alpha = np.asarray(alpha, dtype=float)
    s = np.asarray(s, dtype=float)
    degenerate = ~(np.isfinite(alpha) & np.isfinite(s) & (s > 0))
    with np.errstate(invalid="ignore"):
        live = ~degenerate & (np.abs(alpha) > k_const * s)
    pos = np.where(live, np.copysign(limit, alpha), 0.0)
    return pos, degenerate


@dataclass
class BacktestReport:
    """Per-period records of one run plus aggregates."""

    timestamps: tuple
    alpha: np.ndarray
    s: np.ndarray
    position: np.ndarray
    next_return: np.ndarray
    pnl: np.ndarray
    realized_utility: np.ndarray
    degenerate: np.ndarray
    config: StrategyConfig
    warmup: int
    estimated: bool
    baselines: dict = field(default_factory=dict)
    k_sweep: list | None = None

    def __len__(self) -> int:
        return self.position.size

    @property
    def total_pnl(self) -> float:
        return float(np.sum(self.pnl))

    @property
    def total_realized_utility(self) -> float:
        return float(np.sum(self.realized_utility))

    @property
    def trades(self) -> int:
        """Number of position changes, counting the first entry from flat."""
        prev = np.concatenate([[0.0], self.position[:-1]])
        return int(np.count_nonzero(self.position != prev))

    @property
    def time_in_market(self) -> float:
        return float(np.count_nonzero(self.position)) / len(self) if len(self) else 0.0

    def summary(self) -> dict:
        cfg = self.config
        out = {
            "periods": len(self),
            "warmup": self.warmup,
            "moments": "estimated" if self.estimated else "supplied",
            "estimator": cfg.estimator_kind if self.estimated else "none",
            "window": cfg.estimator_window if self.estimated else 0,
            "k_const": cfg.k_const,
            "limit": cfg.limit,
            "total_pnl": self.total_pnl,
            "total_realized_utility": self.total_realized_utility,
            "trades": self.trades,
            "time_in_market": self.time_in_market,
            "degenerate_periods": int(np.count_nonzero(self.degenerate)),
        }
        out.update(self.baselines)
        return out

    def write_records(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["timestamp", "alpha", "s", "position", "next_return", "pnl",
                    "realized_utility", "degenerate"])
        for i in range(len(self)):
            w.writerow([
                self.timestamps[i],
                *(format_number(v[i]) for v in (self.alpha, self.s, self.position,
                                                 self.next_return, self.pnl,
                                                 self.realized_utility)),
                int(self.degenerate[i]),
            ])

    def write_summary(self, out: TextIO) -> None:
        """``key = value`` lines, numbers at 9 significant digits."""
        for key, value in self.summary().items():
            if isinstance(value, float):
                value = format_number(value)
            out.write(f"{key} = {value}\n")

    def write_json(self, out: TextIO) -> None:
        def num(v):
            return float(format_number(v))

        doc = {
            "summary": {k: (num(v) if isinstance(v, float) else v) for k, v in self.summary().items()},
            "records": [
                {
                    "timestamp": self.timestamps[i],
                    "alpha": num(self.alpha[i]),
                    "s": num(self.s[i]),
                    "position": num(self.position[i]),
                    "next_return": num(self.next_return[i]),
                    "pnl": num(self.pnl[i]),
                    "realized_utility": num(self.realized_utility[i]),
                    "degenerate": int(self.degenerate[i]),
                }
                for i in range(len(self))
            ],
        }
        json.dump(doc, out, indent=1)
        out.write("\n")


def _moments(series: ReturnSeries, cfg: StrategyConfig):
    estimating = not series.has_moments
    warmup = cfg.effective_warmup(estimating)
    if len(series) <= warmup + 1:
        raise InsufficientDataError(
            f"series of length {len(series)} leaves no periods after warmup {warmup}"
        )
    if estimating:
        alpha, s = estimate_conditional_moments(series, cfg)
    else:
        alpha, s = series.alpha, series.s
    return alpha, s, warmup, estimating


def _score(alpha, s, nxt, limit, k):
    pos, degenerate = semi_empirical_positions(alpha, s, limit, k)
    pnl = pos * nxt
    with np.errstate(invalid="ignore"):
        budget = np.where(pos != 0.0, pos * alpha, 0.0)
    return pos, degenerate, pnl, np.minimum(pnl, budget)


def run_strategy(series: ReturnSeries, cfg: StrategyConfig) -> BacktestReport:
    """Run the three-state rule over the series.

    Positions are taken at ``t = warmup, ..., n - 2`` and booked against
    ``returns[t + 1]``. The summary carries the binary (``K = 0``) and flat
    baselines on the same moments.
    """
    alpha, s, warmup, estimating = _moments(series, cfg)
    sl = slice(warmup, len(series) - 1)
    a, sd = alpha[sl], s[sl]
    nxt = series.returns[warmup + 1:]
    pos, degenerate, pnl, ru = _score(a, sd, nxt, cfg.limit, cfg.k_const)
    _, _, bin_pnl, bin_ru = _score(a, sd, nxt, cfg.limit, 0.0)
    baselines = {
        "binary_total_pnl": float(np.sum(bin_pnl)),
        "binary_total_realized_utility": float(np.sum(bin_ru)),
        "flat_total_pnl": 0.0,
        "flat_total_realized_utility": 0.0,
    }
    return BacktestReport(
        timestamps=series.timestamps[sl],
        alpha=a,
        s=sd,
        position=pos,
        next_return=nxt,
        pnl=pnl,
        realized_utility=ru,
        degenerate=degenerate,
        config=cfg,
        warmup=warmup,
        estimated=estimating,
        baselines=baselines,
    )


@dataclass(frozen=True)
class Calibration:
    """K sweep rows ``(k, total_pnl, total_realized_utility, trades)`` and the best K."""

    table: list
    best_k: float

    def write_csv(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["k", "total_pnl", "total_realized_utility", "trades"])
        for k, pnl, ru, trades in self.table:
            w.writerow([format_number(k), format_number(pnl), format_number(ru), trades])

    def write_json(self, out: TextIO) -> None:
        doc = {
            "best_k": float(format_number(self.best_k)),
            "k_sweep": [
                {
                    "k": float(format_number(k)),
                    "total_pnl": float(format_number(pnl)),
                    "total_realized_utility": float(format_number(ru)),
                    "trades": trades,
                }
                for k, pnl, ru, trades in self.table
            ],
        }
        json.dump(doc, out, indent=1)
        out.write("\n")


def calibrate_k(series: ReturnSeries, cfg: StrategyConfig, k_grid: Iterable[float]) -> Calibration:
    """Sweep ``K`` over ``k_grid`` and pick the largest total realized utility.

    Moments are computed once. Rows come out in ascending ``K``; ties go to
    the smaller ``K``.
    """
    grid = sorted({float(k) for k in k_grid})
    if not grid:
        raise ParameterError("k_grid must not be empty")
    if any(not (k > 0) for k in grid):
        raise ParameterError("k_grid values must be positive")
    alpha, s, warmup, _ = _moments(series, cfg)
    sl = slice(warmup, len(series) - 1)
    a, sd = alpha[sl], s[sl]
    nxt = series.returns[warmup + 1:]
    table = []
    best_k, best_u = grid[0], -math.inf
    for k in grid:
        pos, _, pnl, ru = _score(a, sd, nxt, cfg.limit, k)
        total_u = float(np.sum(ru))
        prev = np.concatenate([[0.0], pos[:-1]])
        table.append((k, float(np.sum(pnl)), total_u, int(np.count_nonzero(pos != prev))))
        if total_u > best_u:
            best_k, best_u = k, total_u
    return Calibration(table, best_k)


def simulate_series(p: GedParams, n: int, seed: int, with_moments: bool = False) -> ReturnSeries:
    """I.i.d. GED returns indexed ``0..n-1``.

    With ``with_moments`` the true mean and standard deviation are attached as
    the ``alpha`` and ``s`` columns.
    """
    r = sample(p, n, seed)
    if with_moments:
        return ReturnSeries.from_returns(r, np.full(r.size, p.mu), np.full(r.size, std_dev(p)))
    return ReturnSeries.from_returns(r)


def simulate_conditional_series(
    n: int,
    kappa: float,
    seed: int,
    *,
    s_level: float = 0.01,
    alpha_spread: float = 1.0,
    vol_of_vol: float = 0.25,
) -> ReturnSeries:
    """Returns with known, time-varying conditional moments.

    Each period draws a volatility ``s_t = s_level * exp(vol_of_vol * N(0,1))``
    and a standardized alpha ``alpha_t / s_t ~ U(-alpha_spread, alpha_spread)``;
    the next return is ``GED(alpha_t, sigma_t, kappa)`` with ``sigma_t`` chosen
    so that its standard deviation is ``s_t``. The first return has zero mean.
    The generating law is stationary, so the utility-maximizing ``K`` is the
    parametric risk-cost factor for ``kappa``.
    """
    kappa = check_kappa(kappa)
    n = int(n)
    if n < 2:
        raise ParameterError("n must be at least 2")
    moments_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.Generator(np.random.PCG64(moments_seed))
    s = s_level * np.exp(vol_of_vol * rng.standard_normal(n))
    alpha = s * rng.uniform(-alpha_spread, alpha_spread, n)
    z = sample(GedParams(0.0, 1.0, kappa), n, noise_seed)
    sigma = s * sigma_from_std(1.0, kappa)
    r = np.empty(n)
    r[0] = sigma[0] * z[0]
    r[1:] = alpha[:-1] + sigma[:-1] * z[1:]
    return ReturnSeries.from_returns(r, alpha, s)


def parametric_k(kappa: float) -> float:
    """Risk cost per unit standard deviation; the model value of ``K``."""
    return risk_cost_factor(kappa)
