"""Energy, Sobolev-norm and criticality diagnostics over flow timelines.

Timelines are consumed by duck typing: anything with ``.snapshots`` (time
ordered :class:`~nstransition.field_core.Snapshot` objects) and ``.params``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _fourier
from .errors import (
    DomainError,
    FieldValidationError,
    InsufficientDataError,
    ShapeError,
    UndefinedReferenceError,
)
from .field_core import ScalarField

_RESIDUAL_FLOOR = 1e-300
_CRITICAL_FLOOR = 1e-14


class Regime(str, enum.Enum):
    LAMINAR = "Laminar"
    CRITICAL_EQUILIBRIUM = "CriticalEquilibrium"
    SINGULARITY_ONSET = "SingularityOnset"
    TRANSITION_INSTANT = "TransitionInstant"
    FULLY_TURBULENT = "FullyTurbulent"

    @property
    def stage(self):
        return _STAGE_ORDER.index(self)


_STAGE_ORDER = list(Regime)


@dataclass(frozen=True)
class DiagnosticRecord:
    time: float
    kinetic_energy: float
    h1_norm_sq: float
    identity_residual: float | None
    identity_residual_normalized: float | None
    critical_fraction: float
    singularity_indicator: float
    regime_label: Regime


def kinetic_energy(f):
    """Return ``0.5 * integral |u|^2``; the uniform node rule is exact for
    band-limited periodic integrands."""
    return 0.5 * float(np.sum(f.u * f.u + f.v * f.v)) * f.grid.cell_area


def l2_norm(f):
    return math.sqrt(2.0 * kinetic_energy(f))


def h1_norm_sq(f):
    """Return ``integral grad u_i . grad u_i`` using spectral gradients."""
    ux, uy = _fourier.gradient(f.u, f.grid)
    vx, vy = _fourier.gradient(f.v, f.grid)
    return float(np.sum(ux * ux + uy * uy + vx * vx + vy * vy)) * f.grid.cell_area


def _require_same_grid(a, b):
    if a.grid != b.grid:
        raise ShapeError(f"grid mismatch: {a.grid} vs {b.grid}")


def mechanical_energy_field(f, p_over_rho, params):
    """Nodewise ``E = p/rho + (u^2 + v^2)/2 + g*y``."""
    _require_same_grid(f, p_over_rho)
    _, Y = f.grid.coordinates()
    return ScalarField(f.grid, p_over_rho.data + 0.5 * (f.u * f.u + f.v * f.v) + params.g * Y)


def streamwise_energy_derivative(f, e, gradient=None):
    """Nodewise ``u . grad E`` with spectral gradients of ``E``.

    ``gradient`` may supply ``(dE/dx, dE/dy)`` evaluated some other way, for
    energies that are not periodic (a mean pressure gradient, say).
    """
    _require_same_grid(f, e)
    ex, ey = _fourier.gradient(e.data, e.grid) if gradient is None else gradient
    return ScalarField(f.grid, f.u * ex + f.v * ey)


def critical_set(f, e, tol_rel, params=None, derivative=None):
    """Mask of nodes where ``|u . grad E| <= tol_rel * max|u . grad E|``.

    When the domain maximum is below ``1e-14 * U^3 / L`` (``U = L = 1`` if no
    ``params``), the whole domain counts as critical.  ``derivative`` may be
    passed to reuse a precomputed :func:`streamwise_energy_derivative`.

    Returns ``(mask, critical_fraction)``.
    """
    if not tol_rel > 0:
        raise DomainError(f"tol_rel must be > 0, got {tol_rel}")
    if derivative is None:
        derivative = streamwise_energy_derivative(f, e)
    mag = np.abs(derivative.data)
    peak = float(mag.max())
    u_char, l_char = (params.u_char, params.l_char) if params is not None else (1.0, 1.0)
    if peak < _CRITICAL_FLOOR * u_char**3 / l_char:
        mask = np.ones(mag.shape, dtype=bool)
    else:
        mask = mag <= tol_rel * max(peak, np.finfo(float).tiny)
    return mask, float(mask.mean())


def _series(timeline, fn):
    return np.array([fn(s.velocity) for s in timeline.snapshots])


def energy_identity_residual(timeline, k, h1=None, ke=None):
    """Centered-difference residual of ``dKE/dt + nu * ||grad u||^2``.

    ``KE`` is half the squared L2 norm, so the residual vanishes for an exact
    unforced solution.  Returns ``(raw, normalized)``; ``h1``/``ke`` may hold
    precomputed per-snapshot series.
    """
    n = len(timeline.snapshots)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 snapshots, got {n}")
    if not 1 <= k <= n - 2:
        raise IndexError(f"snapshot index {k} has no neighbours on both sides (len {n})")
    snaps = timeline.snapshots
    nu = timeline.params.nu
    ke_prev = ke[k - 1] if ke is not None else kinetic_energy(snaps[k - 1].velocity)
    ke_next = ke[k + 1] if ke is not None else kinetic_energy(snaps[k + 1].velocity)
    h1_k = h1[k] if h1 is not None else h1_norm_sq(snaps[k].velocity)
    dissipation = nu * h1_k
    raw = (ke_next - ke_prev) / (snaps[k + 1].time - snaps[k - 1].time) + dissipation
    return raw, raw / max(dissipation, _RESIDUAL_FLOOR)


def _indicator_from_series(h1, k):
    ref = h1[0]
    if not ref > 0:
        raise UndefinedReferenceError("initial H1 norm is zero; indicator undefined")
    return min(1.0, max(0.0, math.sqrt(max(h1[k], 0.0) / ref)))


def singularity_indicator(timeline, k, theta, h1=None):
    """Relative H1 norm ``sqrt(h1(k)/h1(0))`` clamped to [0, 1].

    Returns ``(global_hit, indicator)`` with ``global_hit = indicator <= theta``.
    """
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    if h1 is None:
        snaps = timeline.snapshots
        h1 = {0: h1_norm_sq(snaps[0].velocity), k: h1_norm_sq(snaps[k].velocity)}
    value = _indicator_from_series(h1, k)
    return value <= theta, value


def indicator_series(timeline, h1=None):
    if h1 is None:
        h1 = _series(timeline, h1_norm_sq)
    return np.array([_indicator_from_series(h1, k) for k in range(len(h1))])


def critical_fractions(timeline, tol_rel):
    params = timeline.params
    out = []
    for s in timeline.snapshots:
        e = mechanical_energy_field(s.velocity, s.pressure, params)
        out.append(critical_set(s.velocity, e, tol_rel, params)[1])
    return np.array(out)


def classify_series(indicator, critical_fraction, h1, theta=0.5, theta_hi=0.9,
                    window=3, var_window=5, var_tol=0.01, critical_threshold=0.5):
    """Label each snapshot from precomputed diagnostic series.

    Before onset a snapshot is Laminar while the indicator exceeds
    ``theta_hi`` and fewer than ``critical_threshold`` of the nodes are
    critical, CriticalEquilibrium otherwise.  The first index with
    ``indicator <= theta`` is SingularityOnset, the following ``window``
    snapshots are TransitionInstant, and after that the flow is FullyTurbulent
    once ``var(h1)/mean(h1)^2`` over the trailing ``var_window`` snapshots
    exceeds ``var_tol``.  Labels never move backwards in stage order.
    """
    labels = []
    current = Regime.LAMINAR
    onset = None
    h1 = np.asarray(h1, dtype=float)
    for k in range(len(indicator)):
        if onset is None:
            if indicator[k] <= theta:
                onset = k
                proposed = Regime.SINGULARITY_ONSET
            elif indicator[k] > theta_hi and critical_fraction[k] < critical_threshold:
                proposed = Regime.LAMINAR
            else:
                proposed = Regime.CRITICAL_EQUILIBRIUM
        elif k - onset <= window:
            proposed = Regime.TRANSITION_INSTANT
        else:
            proposed = current
            if k + 1 >= var_window:
                seg = h1[k + 1 - var_window:k + 1]
                mean = seg.mean()
                if mean > 0 and seg.var() / mean**2 > var_tol:
                    proposed = Regime.FULLY_TURBULENT
        if proposed.stage > current.stage:
            current = proposed
        labels.append(current)
    return labels


def classify_regime(timeline, theta=0.5, residual_tol=1e-3, theta_hi=0.9, window=3,
                    var_window=5, var_tol=0.01, critical_tol=1e-3):
    """Per-snapshot regime labels for ``timeline``.

    ``residual_tol`` is accepted for interface stability; the label rules
    depend on the indicator, critical fraction and H1 variability only.
    """
    if not 0 < theta < 1 or not 0 < residual_tol < 1:
        raise DomainError("theta and residual_tol must lie in (0, 1)")
    h1 = _series(timeline, h1_norm_sq)
    return classify_series(indicator_series(timeline, h1), critical_fractions(timeline, critical_tol),
                           h1, theta=theta, theta_hi=theta_hi, window=window,
                           var_window=var_window, var_tol=var_tol)


def diagnose_timeline(timeline, theta=0.5, critical_tol=1e-3, **classify_kw):
    """Compute one :class:`DiagnosticRecord` per snapshot.

    Endpoint residuals (and all residuals when fewer than three snapshots
    exist) are ``None``.
    """
    snaps = timeline.snapshots
    if not snaps:
        raise InsufficientDataError("timeline is empty")
    ke = _series(timeline, kinetic_energy)
    h1 = _series(timeline, h1_norm_sq)
    ind = indicator_series(timeline, h1)
    frac = critical_fractions(timeline, critical_tol)
    labels = classify_series(ind, frac, h1, theta=theta, **classify_kw)
    records = []
    for k, s in enumerate(snaps):
        raw = norm = None
        if len(snaps) >= 3 and 1 <= k <= len(snaps) - 2:
            raw, norm = energy_identity_residual(timeline, k, h1=h1, ke=ke)
        records.append(DiagnosticRecord(s.time, float(ke[k]), float(h1[k]), raw, norm,
                                        float(frac[k]), float(ind[k]), labels[k]))
    return records


def leray_membership(timeline):
    """Return ``(sup_t ||u||_L2, trapezoid integral of ||grad u||^2 dt)``.

    Both must be finite for a timeline to sit in the bounded-energy,
    square-integrable-gradient class; otherwise :class:`FieldValidationError`.
    """
    snaps = timeline.snapshots
    if not snaps:
        raise InsufficientDataError("timeline is empty")
    l2 = _series(timeline, l2_norm)
    h1 = _series(timeline, h1_norm_sq)
    times = np.array([s.time for s in snaps])
    sup_l2 = float(l2.max())
    integral = float(np.trapezoid(h1, times)) if len(snaps) > 1 else 0.0
    if not (math.isfinite(sup_l2) and math.isfinite(integral)):
        raise FieldValidationError("timeline leaves the finite-energy class")
    return sup_l2, integral
