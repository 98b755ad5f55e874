"""Timescales, transition-time detection, Reynolds sweeps and power-law fits."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    BlowUpError,
    ConfigError,
    DegenerateDesignError,
    DomainError,
    InsufficientDataError,
)
from .field_core import FlowParams
from .leray_diagnostics import h1_norm_sq, indicator_series
from .spectral_solver import (
    InitialCondition,
    SolverConfig,
    Timeline,
    _sample_times,
    analytic_taylor_green,
    simulate,
)

MIN_CONFIDENT_POINTS = 5


@dataclass(frozen=True)
class Timescales:
    t_c: float
    t_nu: float
    re: float


def timescales(params):
    """Convective time ``L/U``, viscous time ``L^2/nu`` and ``Re = U L / nu``."""
    U, L, nu = params.u_char, params.l_char, params.nu
    if not (U > 0 and L > 0 and nu > 0):
        raise DomainError("U, L and nu must all be positive")
    return Timescales(t_c=L / U, t_nu=L * L / nu, re=U * L / nu)


@dataclass(frozen=True)
class TransitionResult:
    t_trans: float
    tau_trans: float
    re: float
    hit: bool
    method: str = "threshold_crossing"


def crossing_time(times, indicator, theta):
    """First time ``indicator`` falls to ``theta``, linearly interpolated.

    Returns ``None`` when the threshold is never reached.
    """
    for k, value in enumerate(indicator):
        if value <= theta:
            if k == 0:
                return float(times[0])
            i0, i1 = indicator[k - 1], value
            frac = (i0 - theta) / (i0 - i1)
            return float(times[k - 1] + frac * (times[k] - times[k - 1]))
    return None


def detect_transition_time(timeline, theta=0.5):
    """Time at which the relative H1 norm first drops to ``theta``."""
    if not 0 < theta <= 1:
        raise DomainError(f"theta must lie in (0, 1], got {theta}")
    ind = indicator_series(timeline)
    ts = timescales(timeline.params)
    t = crossing_time(timeline.times, ind, theta)
    if t is None:
        return TransitionResult(math.nan, math.nan, ts.re, False)
    return TransitionResult(t, t / ts.t_c, ts.re, True)


@dataclass(frozen=True)
class FitResult:
    exponent: float
    prefactor_k1: float
    r_squared: float
    n_points: int
    residual_std: float
    k1_fixed: float = math.nan

    @property
    def low_count(self):
        return self.n_points < MIN_CONFIDENT_POINTS

    def to_dict(self):
        return {"exponent": self.exponent, "prefactor_k1": self.prefactor_k1,
                "r_squared": self.r_squared, "n_points": self.n_points,
                "residual_std": self.residual_std}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _centered_log(values):
    """``log(values) - mean(log(values))``, exactly invariant under scaling
    by powers of two.

    The binary exponent is split off and centred in integer arithmetic, so
    only the mantissa logs go through floating-point rounding.
    """
    mant, expo = np.frexp(values)
    n = len(values)
    lm = np.log(mant)
    de = (n * expo.astype(np.int64) - int(expo.astype(np.int64).sum())) / n
    return (lm - lm.mean()) + math.log(2.0) * de


def powerlaw_fit(points, reference_exponent=-1.0):
    """Least-squares line through ``(log x, log y)``.

    ``points`` is a sequence of ``(x, y)`` pairs, typically ``(Re, tau)``.
    The slope is the exponent, ``exp(intercept)`` the prefactor and R^2 the
    coefficient of determination in log space.  ``residual_std`` is the
    standard deviation of the log residuals with two degrees of freedom
    removed (0 for two points).

    ``k1_fixed`` is the prefactor with the exponent pinned at
    ``reference_exponent``, i.e. the geometric mean of ``y / x**p``.  It is
    far better conditioned than ``exp(intercept)`` when the data sit decades
    away from ``x = 1``.
    """
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        raise InsufficientDataError(f"need at least 2 points, got {n}")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise DomainError("power-law fit needs finite positive values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    dx = _centered_log(pts[:, 0])
    dy = _centered_log(pts[:, 1])
    sxx = float(dx @ dx)
    if sxx == 0.0 or np.all(pts[:, 0] == pts[0, 0]):
        raise DegenerateDesignError("all x values are equal")
    slope = float(dx @ dy) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    resid = dy - slope * dx
    ss_res = float(resid @ resid)
    ss_tot = float(dy @ dy)
    r2 = 1.0 if ss_tot == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    resid_std = math.sqrt(ss_res / (n - 2)) if n > 2 else 0.0
    k1_fixed = math.exp(float(np.mean(ly - reference_exponent * lx)))
    fit = FitResult(slope, math.exp(intercept), r2, n, resid_std, k1_fixed)
    if fit.low_count:
        warnings.warn(f"power-law fit uses only {n} points", RuntimeWarning, stacklevel=2)
    return fit


def synth_sk_dataset(k1, noise_rel, re_values, seed):
    """Synthetic ``tau = (k1/Re) * exp(eps)`` with ``eps ~ N(0, noise_rel)``."""
    re = np.asarray(re_values, dtype=float)
    if not (k1 > 0 and noise_rel >= 0) or re.size == 0 or np.any(~(re > 0)):
        raise DomainError("need k1 > 0, noise_rel >= 0 and positive Reynolds numbers")
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, noise_rel, size=re.shape) if noise_rel > 0 else np.zeros(re.shape)
    tau = (k1 / re) * np.exp(eps)
    return [(float(r), float(t)) for r, t in zip(re, tau)]


@dataclass(frozen=True)
class SweepConfig:
    """Reynolds sweep around a solver template.

    ``vary='nu'`` keeps ``U`` and ``L`` from the template and sets
    ``nu = U L / Re``; ``vary='u'`` keeps ``nu`` and ``L`` and sets
    ``U = Re nu / L``.  The initial amplitude always follows ``U``.
    ``mode='analytic'`` replaces the solver by exact Taylor-Green snapshots.
    ``fit_against`` picks the regression: ``'re'`` fits tau_trans against Re,
    ``'t_nu'`` fits t_trans against L^2/nu.
    """

    re_values: tuple
    template: SolverConfig
    theta: float = 0.5
    vary: str = "nu"
    mode: str = "simulate"
    fit_against: str = "re"
    stop_on_transition: bool = True

    def __post_init__(self):
        if len(self.re_values) == 0:
            raise ConfigError("re_values must not be empty", field="re_values")
        if any(not (isinstance(r, (int, float)) and not isinstance(r, bool) and r > 0)
               for r in self.re_values):
            raise ConfigError("re_values must be positive numbers", field="re_values")
        if not 0 < self.theta < 1:
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}", field="theta")
        if self.vary not in ("nu", "u"):
            raise ConfigError(f"vary must be 'nu' or 'u', got {self.vary!r}", field="vary")
        if self.mode not in ("simulate", "analytic"):
            raise ConfigError(f"mode must be 'simulate' or 'analytic', got {self.mode!r}", field="mode")
        if self.fit_against not in ("re", "t_nu"):
            raise ConfigError(f"fit_against must be 're' or 't_nu', got {self.fit_against!r}",
                              field="fit_against")
        if self.mode == "analytic" and self.template.initial_condition.kind != "taylor_green":
            raise ConfigError("analytic mode needs a taylor_green initial condition",
                              field="template.initial_condition")

    def config_for(self, re):
        p = self.template.params
        if self.vary == "nu":
            params = replace(p, nu=p.u_char * p.l_char / re)
        else:
            params = replace(p, u_char=re * p.nu / p.l_char)
        ic = self.template.initial_condition
        if ic.kind != "file":
            ic = replace(ic, amplitude=params.u_char)
        return replace(self.template, params=params, initial_condition=ic)

    @classmethod
    def from_dict(cls, doc):
        allowed = {"re_values", "template", "theta", "vary", "mode", "fit_against",
                   "stop_on_transition"}
        if not isinstance(doc, dict):
            raise ConfigError("sweep config must be a JSON object")
        for key in doc:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r}", field=key)
        for key in ("re_values", "template"):
            if key not in doc:
                raise ConfigError(f"missing required key {key!r}", field=key)
        if not isinstance(doc["re_values"], list):
            raise ConfigError("re_values must be a list", field="re_values")
        try:
            template = SolverConfig.from_dict(doc["template"])
        except ConfigError as exc:
            name = f"template.{exc.field}" if exc.field else "template"
            raise ConfigError(f"template: {exc}", field=name) from None
        stop = doc.get("stop_on_transition", True)
        if not isinstance(stop, bool):
            raise ConfigError("stop_on_transition must be a boolean", field="stop_on_transition")
        theta = doc.get("theta", 0.5)
        if isinstance(theta, bool) or not isinstance(theta, (int, float)):
            raise ConfigError("theta must be a number", field="theta")
        return cls(re_values=tuple(doc["re_values"]), template=template, theta=float(theta),
                   vary=doc.get("vary", "nu"), mode=doc.get("mode", "simulate"),
                   fit_against=doc.get("fit_against", "re"), stop_on_transition=stop)

    def to_dict(self):
        return {"re_values": list(self.re_values), "template": self.template.to_dict(),
                "theta": self.theta, "vary": self.vary, "mode": self.mode,
                "fit_against": self.fit_against, "stop_on_transition": self.stop_on_transition}

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc)


@dataclass(frozen=True)
class SweepRow:
    re: float
    nu: float
    u_char: float
    l_char: float
    t_trans: float
    tau_trans: float
    hit: bool
    failure_time: float = math.nan

    @property
    def t_nu(self):
        return self.l_char ** 2 / self.nu


def analytic_timeline(config):
    """Exact Taylor-Green timeline sampled like :func:`simulate` would."""
    amp = config.initial_condition.amplitude
    snaps = [analytic_taylor_green(config.grid, amp, config.params.nu, t)
             for t in _sample_times(config.t_end, config.snapshot_interval)]
    return Timeline(snaps, config.params)


def _theta_stopper(theta):
    ref = []

    def stop(snapshot):
        h1 = h1_norm_sq(snapshot.velocity)
        if not ref:
            ref.append(h1)
            return False
        return ref[0] > 0 and math.sqrt(max(h1, 0.0) / ref[0]) <= theta

    return stop


def run_single(sweep, re):
    """Simulate (or evaluate) one Reynolds number and detect its transition."""
    config = sweep.config_for(re)
    p = config.params
    failure = math.nan
    try:
        if sweep.mode == "analytic":
            timeline = analytic_timeline(config)
        else:
            stop = _theta_stopper(sweep.theta) if sweep.stop_on_transition else None
            timeline = simulate(config, stop_when=stop)
        result = detect_transition_time(timeline, sweep.theta)
    except BlowUpError as exc:
        failure = exc.time
        result = TransitionResult(math.nan, math.nan, timescales(p).re, False)
    return SweepRow(re=float(re), nu=p.nu, u_char=p.u_char, l_char=p.l_char,
                    t_trans=result.t_trans, tau_trans=result.tau_trans, hit=result.hit,
                    failure_time=failure)


def reynolds_sweep(sweep, jobs=1):
    """Run every Reynolds number of ``sweep``; rows come back sorted by Re.

    With ``jobs > 1`` runs execute in separate processes; results do not
    depend on completion order.
    """
    values = list(sweep.re_values)
    if jobs > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(values))) as pool:
            rows = list(pool.map(run_single, [sweep] * len(values), values))
    else:
        rows = [run_single(sweep, re) for re in values]
    return sorted(rows, key=lambda r: r.re)


def sweep_fit_points(rows, fit_against="re"):
    """(x, y) pairs for the sweep regression, skipping failed runs."""
    ok = [r for r in rows if r.hit and r.t_trans > 0]
    if fit_against == "t_nu":
        return [(r.t_nu, r.t_trans) for r in ok]
    return [(r.re, r.tau_trans) for r in ok]
