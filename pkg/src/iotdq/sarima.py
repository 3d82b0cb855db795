"""Seasonal ARIMA fitting and short-horizon forecasting.

Estimation minimizes the conditional sum of squares (CSS) of one-step-ahead
residuals on the differenced series with a derivative-free simplex search.
Stationarity and invertibility are kept as soft constraints: the CSS is
penalized whenever an AR/MA polynomial root falls inside the unit circle.

Fitted models are immutable and safe to share across threads for
forecasting; they round-trip through a JSON document so a streaming run can
reuse a model trained offline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .entities import format_timestamp, parse_timestamp
from .errors import FitError, InputError
from .imputation import TimeSeriesPoint

__all__ = [
    "SarimaSpec",
    "TrainingLog",
    "SarimaModel",
    "ForecastResult",
    "ExtendedPoint",
    "sarima_fit",
    "sarima_forecast",
    "extend_dataset",
    "difference",
    "integrate",
    "DifferenceState",
]

MAX_ITERATIONS = 500
RELATIVE_CSS_TOL = 1e-8


@dataclass(frozen=True)
class SarimaSpec:
    """Model orders: (p, d, q) non-seasonal, (P, D, Q) seasonal, period s."""

    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 1

    def __post_init__(self) -> None:
        if min(self.p, self.d, self.q, self.P, self.D, self.Q) < 0:
            raise InputError("all orders must be >= 0")
        if self.s < 1:
            raise InputError("seasonal period must be >= 1")

    def __str__(self) -> str:
        return f"({self.p},{self.d},{self.q})({self.P},{self.D},{self.Q})[{self.s}]"

    @property
    def methodology(self) -> str:
        return f"SARIMA{self}"

    @property
    def n_params(self) -> int:
        return self.p + self.q + self.P + self.Q

    def min_length(self) -> int:
        return (
            self.s * (self.D + 2)
            + self.d
            + max(self.p, self.q)
            + self.s * max(self.P, self.Q)
        )


@dataclass(frozen=True)
class TrainingLog:
    iterations: int
    converged: bool
    css: float


@dataclass(frozen=True)
class DifferenceState:
    """Initial values dropped by differencing, enough to invert it exactly."""

    d: int
    D: int
    s: int
    seasonal_heads: tuple[tuple[float, ...], ...]
    regular_heads: tuple[float, ...]


def difference(x: Sequence[float], d: int, D: int, s: int) -> tuple[np.ndarray, DifferenceState]:
    """Apply D seasonal then d regular differences, keeping inversion state."""
    series = np.asarray(x, dtype=float)
    seasonal_heads = []
    for _ in range(D):
        if series.size <= s:
            raise InputError("series too short for seasonal differencing")
        seasonal_heads.append(tuple(series[:s]))
        series = series[s:] - series[:-s]
    regular_heads = []
    for _ in range(d):
        if series.size <= 1:
            raise InputError("series too short for regular differencing")
        regular_heads.append(float(series[0]))
        series = np.diff(series)
    state = DifferenceState(d, D, s, tuple(seasonal_heads), tuple(regular_heads))
    return series, state


def integrate(w: Sequence[float], state: DifferenceState) -> np.ndarray:
    """Exact inverse of :func:`difference` (restores the dropped heads)."""
    series = np.asarray(w, dtype=float)
    for head in reversed(state.regular_heads):
        series = np.concatenate(([head], head + np.cumsum(series)))
    for heads in reversed(state.seasonal_heads):
        n = series.size + state.s
        out = np.empty(n)
        out[: state.s] = heads
        for phase in range(state.s):
            out[phase + state.s :: state.s] = heads[phase] + np.cumsum(series[phase::state.s])
        series = out
    return series


def _poly(coeffs: Sequence[float], sign: float, stride: int = 1) -> np.ndarray:
    """Lag polynomial 1 + sign * (c1 B^stride + c2 B^(2 stride) + ...)."""
    out = np.zeros(len(coeffs) * stride + 1)
    out[0] = 1.0
    for i, c in enumerate(coeffs, start=1):
        out[i * stride] = sign * c
    return out


def _combined_polys(spec: SarimaSpec, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    phi = params[: spec.p]
    theta = params[spec.p : spec.p + spec.q]
    sphi = params[spec.p + spec.q : spec.p + spec.q + spec.P]
    stheta = params[spec.p + spec.q + spec.P :]
    ar = np.convolve(_poly(phi, -1.0), _poly(sphi, -1.0, spec.s))
    ma = np.convolve(_poly(theta, +1.0), _poly(stheta, +1.0, spec.s))
    return np.trim_zeros(ar, "b"), np.trim_zeros(ma, "b")


def _unit_root_penalty(spec: SarimaSpec, params: np.ndarray) -> float:
    penalty = 0.0
    splits = (spec.p, spec.q, spec.P, spec.Q)
    signs = (-1.0, 1.0, -1.0, 1.0)
    offset = 0
    for count, sign in zip(splits, signs):
        coeffs = params[offset : offset + count]
        offset += count
        if count == 0 or not np.any(coeffs):
            continue
        poly = _poly(coeffs, sign)
        roots = np.roots(poly[::-1])
        for r in roots:
            mag = abs(r)
            if mag < 1.0:
                penalty += (1.0 - mag) ** 2
    return penalty


def _css_residuals(w: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> np.ndarray:
    pa = ar.size - 1
    if w.size <= pa:
        raise FitError("differenced series shorter than the AR lag depth")
    z = np.convolve(w, ar)[pa : w.size] if pa else w * ar[0]
    return lfilter([1.0], ma, z)


def _css(w: np.ndarray, spec: SarimaSpec, params: np.ndarray) -> float:
    ar, ma = _combined_polys(spec, params)
    eps = _css_residuals(w, ar, ma)
    return float(eps @ eps)


@dataclass(frozen=True)
class ForecastResult:
    """Point forecasts with a residual sigma per step."""

    values: np.ndarray
    sigmas: np.ndarray
    timestamps: tuple[datetime, ...]


@dataclass(frozen=True)
class ExtendedPoint:
    """One point of a synthetically extended series."""

    t: datetime
    v: float
    synthetic: bool
    methodology: str | None = None


@dataclass(frozen=True)
class SarimaModel:
    """Fitted seasonal ARIMA model with the tail state needed to forecast."""

    spec: SarimaSpec
    phi: tuple[float, ...]
    theta: tuple[float, ...]
    seasonal_phi: tuple[float, ...]
    seasonal_theta: tuple[float, ...]
    sigma2: float
    mu: float
    step_seconds: float
    t_end: datetime
    w_tail: tuple[float, ...]
    eps_tail: tuple[float, ...]
    regular_tails: tuple[float, ...]
    seasonal_tails: tuple[tuple[float, ...], ...]
    log: TrainingLog

    @property
    def params(self) -> np.ndarray:
        return np.array(self.phi + self.theta + self.seasonal_phi + self.seasonal_theta)

    def forecast(self, horizon: int) -> ForecastResult:
        return sarima_forecast(self, horizon)

    def save(self, path: str | Path) -> None:
        doc = {
            "kind": "sarima",
            "spec": [self.spec.p, self.spec.d, self.spec.q,
                     self.spec.P, self.spec.D, self.spec.Q, self.spec.s],
            "phi": list(self.phi),
            "theta": list(self.theta),
            "seasonal_phi": list(self.seasonal_phi),
            "seasonal_theta": list(self.seasonal_theta),
            "sigma2": self.sigma2,
            "mu": self.mu,
            "step_seconds": self.step_seconds,
            "t_end": format_timestamp(self.t_end),
            "w_tail": list(self.w_tail),
            "eps_tail": list(self.eps_tail),
            "regular_tails": list(self.regular_tails),
            "seasonal_tails": [list(t) for t in self.seasonal_tails],
            "log": {
                "iterations": self.log.iterations,
                "converged": self.log.converged,
                "css": self.log.css,
            },
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SarimaModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("kind") != "sarima":
            raise InputError(f"{path} is not a SARIMA model file")
        p, d, q, P, D, Q, s = doc["spec"]
        return cls(
            spec=SarimaSpec(p, d, q, P, D, Q, s),
            phi=tuple(doc["phi"]),
            theta=tuple(doc["theta"]),
            seasonal_phi=tuple(doc["seasonal_phi"]),
            seasonal_theta=tuple(doc["seasonal_theta"]),
            sigma2=doc["sigma2"],
            mu=doc["mu"],
            step_seconds=doc["step_seconds"],
            t_end=parse_timestamp(doc["t_end"]),
            w_tail=tuple(doc["w_tail"]),
            eps_tail=tuple(doc["eps_tail"]),
            regular_tails=tuple(doc["regular_tails"]),
            seasonal_tails=tuple(tuple(t) for t in doc["seasonal_tails"]),
            log=TrainingLog(**doc["log"]),
        )


def _check_uniform(series: Sequence[TimeSeriesPoint]) -> float:
    times = np.array([p.t.timestamp() for p in series])
    steps = np.diff(times)
    if steps.size == 0:
        raise FitError("series too short")
    step = steps[0]
    if step <= 0 or not np.allclose(steps, step, rtol=0.0, atol=1e-3):
        raise InputError("series must be uniformly spaced; resample first")
    return float(step)


def sarima_fit(series: Sequence[TimeSeriesPoint], spec: SarimaSpec) -> SarimaModel:
    """Fit the model by conditional-sum-of-squares simplex minimization.

    Deterministic: the optimizer starts from all-zero coefficients with a
    fixed initial simplex and the data contain no randomness.
    """
    n = len(series)
    if n < spec.min_length():
        raise FitError(
            f"series length {n} below the minimum {spec.min_length()} for {spec}"
        )
    step_seconds = _check_uniform(series)
    x = np.array([p.v for p in series], dtype=float)
    if not np.isfinite(x).all():
        raise InputError("series values must be finite")
    mu = float(x.mean()) if (spec.d + spec.D) == 0 else 0.0
    w, diff_state = difference(x - mu, spec.d, spec.D, spec.s)

    n_params = spec.n_params
    if n_params == 0:
        params = np.empty(0)
        css0 = _css(w, spec, params)
        log = TrainingLog(iterations=0, converged=True, css=css0)
        best = params
        css = css0
    else:
        css0 = max(_css(w, spec, np.zeros(n_params)), 1e-12)

        def objective(p: np.ndarray) -> float:
            value = _css(w, spec, p)
            penalty = _unit_root_penalty(spec, p)
            return value * (1.0 + 100.0 * penalty)

        simplex = np.zeros((n_params + 1, n_params))
        for i in range(n_params):
            simplex[i + 1, i] = 0.25
        result = minimize(
            objective,
            np.zeros(n_params),
            method="Nelder-Mead",
            options={
                "maxiter": MAX_ITERATIONS,
                "xatol": 1e-6,
                "fatol": RELATIVE_CSS_TOL * css0,
                "initial_simplex": simplex,
            },
        )
        best = result.x
        css = _css(w, spec, best)
        log = TrainingLog(iterations=int(result.nit), converged=bool(result.success), css=css)

    ar, ma = _combined_polys(spec, best)
    eps = _css_residuals(w, ar, ma)
    sigma2 = float(css / eps.size) if eps.size else 0.0

    pa, pm = ar.size - 1, ma.size - 1
    # Tails at each differencing level, for exact forecast integration.
    stage = x - mu
    seasonal_tails = []
    for _ in range(spec.D):
        seasonal_tails.append(tuple(stage[-spec.s:]))
        stage = stage[spec.s:] - stage[:-spec.s]
    regular_tails = []
    for _ in range(spec.d):
        regular_tails.append(float(stage[-1]))
        stage = np.diff(stage)

    return SarimaModel(
        spec=spec,
        phi=tuple(best[: spec.p]),
        theta=tuple(best[spec.p : spec.p + spec.q]),
        seasonal_phi=tuple(best[spec.p + spec.q : spec.p + spec.q + spec.P]),
        seasonal_theta=tuple(best[spec.p + spec.q + spec.P :]),
        sigma2=sigma2,
        mu=mu,
        step_seconds=step_seconds,
        t_end=series[-1].t,
        w_tail=tuple(w[-pa:]) if pa else (),
        eps_tail=tuple(eps[-pm:]) if pm else (),
        regular_tails=tuple(regular_tails),
        seasonal_tails=tuple(seasonal_tails),
        log=log,
    )


def _psi_weights(spec: SarimaSpec, ar: np.ndarray, ma: np.ndarray, horizon: int) -> np.ndarray:
    """MA(infinity) weights of the fully integrated process."""
    full_ar = ar.copy()
    for _ in range(spec.d):
        full_ar = np.convolve(full_ar, [1.0, -1.0])
    seasonal_diff = np.zeros(spec.s + 1)
    seasonal_diff[0], seasonal_diff[-1] = 1.0, -1.0
    for _ in range(spec.D):
        full_ar = np.convolve(full_ar, seasonal_diff)
    psi = np.zeros(horizon)
    psi[0] = 1.0
    for j in range(1, horizon):
        value = ma[j] if j < ma.size else 0.0
        upper = min(j, full_ar.size - 1)
        for i in range(1, upper + 1):
            value -= full_ar[i] * psi[j - i]
        psi[j] = value
    return psi


def sarima_forecast(model: SarimaModel, horizon: int) -> ForecastResult:
    """Recursive point forecasts integrated back to the original scale."""
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    spec = model.spec
    ar, ma = _combined_polys(spec, model.params)
    alpha = -ar[1:]
    m = ma[1:]
    w_hist = list(model.w_tail)
    eps_hist = list(model.eps_tail)
    regular_tails = list(model.regular_tails)
    seasonal_tails = [list(t) for t in model.seasonal_tails]
    pos = 0
    values = np.empty(horizon)
    for k in range(horizon):
        w_pred = 0.0
        for i in range(1, alpha.size + 1):
            if i <= len(w_hist):
                w_pred += alpha[i - 1] * w_hist[-i]
        for j in range(1, m.size + 1):
            if j <= len(eps_hist):
                w_pred += m[j - 1] * eps_hist[-j]
        w_hist.append(w_pred)
        eps_hist.append(0.0)
        v = w_pred
        for j in range(spec.d - 1, -1, -1):
            v += regular_tails[j]
            regular_tails[j] = v
        for l in range(spec.D - 1, -1, -1):
            v += seasonal_tails[l][pos]
            seasonal_tails[l][pos] = v
        if spec.D:
            pos = (pos + 1) % spec.s
        values[k] = v + model.mu
    psi = _psi_weights(spec, ar, ma, horizon)
    sigmas = np.sqrt(model.sigma2 * np.cumsum(psi ** 2))
    step = timedelta(seconds=model.step_seconds)
    timestamps = tuple(model.t_end + step * (k + 1) for k in range(horizon))
    return ForecastResult(values=values, sigmas=sigmas, timestamps=timestamps)


def extend_dataset(
    series: Sequence[TimeSeriesPoint], spec: SarimaSpec, horizon_steps: int
) -> list[ExtendedPoint]:
    """Append model forecasts to a clean series, marking them synthetic."""
    if horizon_steps < 0:
        raise InputError("horizon must be >= 0")
    out = [ExtendedPoint(p.t, p.v, synthetic=False) for p in series]
    if horizon_steps == 0:
        return out
    model = sarima_fit(series, spec)
    forecast = sarima_forecast(model, horizon_steps)
    methodology = spec.methodology
    for t, v in zip(forecast.timestamps, forecast.values):
        out.append(ExtendedPoint(t, float(v), synthetic=True, methodology=methodology))
    return out
