"""Soliton extraction and the guidance-law velocity decomposition.

Given snapshots of the full nonlinear wave psi_nl and the linear pilot
wave psi_l, the soliton factor is the masked pointwise ratio
phi = psi_nl / psi_l.  Its barycentre x0 drifts with velocity

    v_drift = v_dbb + v_int

where v_dbb = (hbar/m) * grad(arg psi_l) at x0 is the de Broglie-Bohm
velocity of the pilot and v_int = Re<phi|(hbar/i m) d/dx|phi> / <phi|phi>
is the soliton's internal velocity.  The soliton norm and the pilot
amplitude at the barycentre satisfy the reciprocity
<phi|phi>(t) * A_L^2(x0(t), t) = const, and the norm rate obeys

    d<phi|phi>/dt ~ (hbar/m) lap(arg psi_l)(x0) <phi|phi>
                    - 2 (grad A_L / A_L)(x0) * <phi|(hbar/i m) d/dx|phi>.

All analysis runs on output-time snapshots, so it is independent of the
integrator's internal stepping, and is pure (parallelizable across time
samples and runs).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ExtractionError
from .fields import (
    MASK_RELATIVE_THRESHOLD,
    PhaseAmplitude,
    WaveField,
    phase_amplitude,
    spectral_gradient,
)
from .potentials import PhysParams

logger = logging.getLogger(__name__)

# below this fraction of masked nodes the soliton has left the pilot support
MIN_VALID_FRACTION = 0.01
# avoids 0/0 in relative residuals during quiescent phases
RESIDUAL_FLOOR = 1e-12

CSV_COLUMNS = (
    "t,x0,v_drift,v_dbb,v_int,residual_p1,norm_sq_phi,A_L_sq_at_x0,"
    "p2_product,norm_rate_residual,width,valid_fraction"
)


@dataclass(frozen=True)
class SolitonState:
    """Extracted soliton factor with its low-order shape data."""

    phi: WaveField
    x0: float
    norm_sq: float
    width: float
    valid_fraction: float
    valid: np.ndarray


@dataclass(frozen=True)
class VelocityDecomposition:
    """One output-time row of the guidance analysis."""

    t: float
    x0: float
    v_drift: float
    v_dbb: float
    v_int: float
    residual_p1: float
    norm_sq_phi: float
    a_l_sq_at_x0: float
    p2_product: float
    norm_rate_residual: float
    width: float
    valid_fraction: float


def extract_soliton(psi_nl: WaveField, psi_l: WaveField) -> SolitonState:
    """Masked ratio psi_nl / psi_l with barycentre, norm and rms width.

    The mask keeps nodes where |psi_l| exceeds the relative threshold;
    the ratio is zero outside.  Extraction fails when the mask shrinks
    below MIN_VALID_FRACTION of the domain or the barycentre leaves it.
    """
    if psi_nl.grid != psi_l.grid:
        raise ExtractionError("psi_nl and psi_l live on different grids")
    grid = psi_l.grid
    amp_l = np.abs(psi_l.values)
    valid = amp_l > MASK_RELATIVE_THRESHOLD * amp_l.max(initial=0.0)
    valid_fraction = float(valid.sum()) / grid.n_points
    if valid_fraction < MIN_VALID_FRACTION:
        raise ExtractionError(
            f"valid fraction {valid_fraction:.4f} below {MIN_VALID_FRACTION}; "
            "the soliton escaped the pilot wave's support"
        )
    ratio = np.zeros_like(psi_nl.values)
    np.divide(psi_nl.values, psi_l.values, out=ratio, where=valid)
    phi = WaveField(grid, ratio)
    rho = ratio.real**2 + ratio.imag**2
    dx = grid.dx
    norm_sq = float(rho.sum() * dx)
    if norm_sq <= 0.0:
        raise ExtractionError("extracted soliton has zero norm")
    x = grid.nodes
    x0 = float((rho * x).sum() * dx / norm_sq)
    var = float((rho * (x - x0) ** 2).sum() * dx / norm_sq)
    width = float(np.sqrt(max(var, 0.0)))
    i = int(np.clip(np.floor((x0 - grid.x_min) / dx), 0, grid.n_points - 2))
    if not (valid[i] and valid[i + 1]):
        raise ExtractionError(f"barycentre x0={x0:.6g} left the valid region")
    return SolitonState(phi, x0, norm_sq, width, valid_fraction, valid)


def _interp_valid(grid, values: np.ndarray, valid: np.ndarray, x: float) -> float:
    """Linear interpolation at x, requiring both bracketing nodes valid."""
    pos = (x - grid.x_min) / grid.dx
    i = int(np.floor(pos))
    if i < 0 or i + 1 >= grid.n_points:
        raise ExtractionError(f"x={x:.6g} outside the grid")
    if not (valid[i] and valid[i + 1]):
        raise ExtractionError(f"x={x:.6g} outside the valid mask")
    frac = pos - i
    return float((1.0 - frac) * values[i] + frac * values[i + 1])


def v_dbb(psi_l: WaveField, x0: float, phys: PhysParams = PhysParams()) -> float:
    """Pilot guidance velocity (hbar/m) grad(arg psi_l) at the barycentre."""
    pa = phase_amplitude(psi_l)
    grad = _interp_valid(psi_l.grid, pa.phase_gradient, pa.valid, x0)
    return phys.hbar / phys.mass * grad


def v_int(state: SolitonState, phys: PhysParams = PhysParams()) -> float:
    """Internal velocity Re<phi|(hbar/i m) d/dx|phi> / <phi|phi>.

    The imaginary part of the expectation is a pure boundary/quadrature
    artifact; it is checked against a 1e-8 relative budget and logged.
    """
    phi = state.phi
    dphi = spectral_gradient(phi).values
    integral = complex(np.sum(np.conj(phi.values) * dphi) * phi.grid.dx)
    scale = phys.hbar / (phys.mass * state.norm_sq)
    value = scale * integral.imag
    spurious = scale * integral.real
    denom = max(abs(value), RESIDUAL_FLOOR)
    if abs(spurious) > 1e-8 * max(denom, 1.0):
        logger.warning(
            "v_int imaginary part %.3e is not negligible (value %.3e)",
            spurious, value,
        )
    return value


def v_drift_series(times: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """Second-order finite-difference velocity of the barycentre series.

    Central differences inside, one-sided second-order stencils at the
    endpoints; accuracy is set by the output stride, not the solver dt.
    """
    times = np.asarray(times, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if len(times) < 3:
        raise ExtractionError("v_drift needs at least 3 consecutive samples")
    if np.any(np.diff(times) <= 0):
        raise ExtractionError("times must be strictly increasing")
    h = times[1] - times[0]
    out = np.empty_like(x0)
    out[1:-1] = (x0[2:] - x0[:-2]) / (times[2:] - times[:-2])
    out[0] = (-3.0 * x0[0] + 4.0 * x0[1] - x0[2]) / (2.0 * h)
    h_end = times[-1] - times[-2]
    out[-1] = (3.0 * x0[-1] - 4.0 * x0[-2] + x0[-3]) / (2.0 * h_end)
    return out


def norm_rate_residual(
    psi_l: WaveField,
    state: SolitonState,
    measured_rate: float,
    phys: PhysParams = PhysParams(),
) -> float:
    """Relative residual of the norm-rate law at one time.

    Compares the measured d<phi|phi>/dt against
    (hbar/m) lap(arg psi_l)(x0) <phi|phi> - 2 (grad A/A)(x0) m v_int
    <phi|phi> / m, normalized by the larger of the two sides.
    """
    pa = phase_amplitude(psi_l)
    rhs = _norm_rate_rhs(pa, psi_l.grid, state, v_int(state, phys), phys)
    denom = max(abs(measured_rate), abs(rhs), RESIDUAL_FLOOR)
    return (measured_rate - rhs) / denom


def _norm_rate_rhs(pa: PhaseAmplitude, grid, state: SolitonState,
                   vint: float, phys: PhysParams) -> float:
    lap = _interp_valid(grid, pa.phase_laplacian, pa.valid, state.x0)
    log_grad = _interp_valid(grid, pa.log_amp_gradient, pa.valid, state.x0)
    # <phi|(hbar/i m) d/dx|phi> = v_int * <phi|phi>
    return (
        phys.hbar / phys.mass * lap * state.norm_sq
        - 2.0 * log_grad * vint * state.norm_sq
    )


def decompose_run(
    times: Sequence[float],
    pilot_fields: Sequence[WaveField],
    full_fields: Sequence[WaveField],
    phys: PhysParams = PhysParams(),
    velocity_perturbation: Optional[Callable[[float, float], float]] = None,
    collect_crossterms: bool = False,
):
    """Full guidance analysis over one run's snapshot series.

    Returns the list of VelocityDecomposition rows; with
    ``collect_crossterms`` also a list of dicts sizing the barycentre-
    frozen approximations (the terms the velocity law neglects).

    ``velocity_perturbation`` is an experimental hook for stochastic
    velocity studies: called as f(t, v_drift) it returns an additive
    perturbation to the recorded drift.  It ships disabled (None).
    """
    if not (len(times) == len(pilot_fields) == len(full_fields)):
        raise ExtractionError("times and snapshot series differ in length")
    times = np.asarray(times, dtype=float)
    states = [extract_soliton(fn, fl) for fn, fl in zip(full_fields, pilot_fields)]
    pas = [phase_amplitude(fl) for fl in pilot_fields]
    grid = pilot_fields[0].grid

    x0s = np.array([s.x0 for s in states])
    norms = np.array([s.norm_sq for s in states])
    vints = np.array([v_int(s, phys) for s in states])
    vdbbs = np.array([
        phys.hbar / phys.mass * _interp_valid(grid, pa.phase_gradient, pa.valid, s.x0)
        for pa, s in zip(pas, states)
    ])
    a_l_at_x0 = np.array([
        _interp_valid(grid, pa.amplitude, pa.valid, s.x0)
        for pa, s in zip(pas, states)
    ])
    a_l_sq = a_l_at_x0**2

    vdrift = v_drift_series(times, x0s)
    if velocity_perturbation is not None:
        vdrift = vdrift + np.array(
            [velocity_perturbation(t, v) for t, v in zip(times, vdrift)]
        )
    residual_p1 = vdrift - (vdbbs + vints)

    p2_raw = norms * a_l_sq
    p2 = p2_raw / p2_raw[0]

    norm_rates = v_drift_series(times, norms)
    rhs = np.array([
        _norm_rate_rhs(pa, grid, s, vi, phys)
        for pa, s, vi in zip(pas, states, vints)
    ])
    denom = np.maximum(np.maximum(np.abs(norm_rates), np.abs(rhs)), RESIDUAL_FLOOR)
    nr_resid = (norm_rates - rhs) / denom

    rows = [
        VelocityDecomposition(
            t=float(times[i]),
            x0=float(x0s[i]),
            v_drift=float(vdrift[i]),
            v_dbb=float(vdbbs[i]),
            v_int=float(vints[i]),
            residual_p1=float(residual_p1[i]),
            norm_sq_phi=float(norms[i]),
            a_l_sq_at_x0=float(a_l_sq[i]),
            p2_product=float(p2[i]),
            norm_rate_residual=float(nr_resid[i]),
            width=float(states[i].width),
            valid_fraction=float(states[i].valid_fraction),
        )
        for i in range(len(times))
    ]
    _report_stability(rows)
    if collect_crossterms:
        cross = [
            _crossterm_sizes(pa, grid, s, phys)
            for pa, s in zip(pas, states)
        ]
        return rows, cross
    return rows


def _report_stability(rows: List[VelocityDecomposition]):
    """Operational soliton-stability criterion; reported, never fatal."""
    w0 = rows[0].width
    worst = max(r.width for r in rows)
    if worst > 3.0 * w0:
        logger.warning(
            "soliton width grew to %.3g times its initial value; the "
            "peaked-soliton assumption is degrading", worst / w0
        )


def _crossterm_sizes(pa: PhaseAmplitude, grid, state: SolitonState,
                     phys: PhysParams) -> dict:
    """Sizes of the terms dropped by freezing pilot data at the barycentre.

    Both compare a full quadrature against its barycentre-frozen value:
    the phase-Laplacian moment and the log-amplitude-gradient flux term.
    """
    phi = state.phi.values
    rho = phi.real**2 + phi.imag**2
    dx = grid.dx
    x = grid.nodes
    scale = phys.hbar / phys.mass
    lap_local = float((pa.phase_laplacian * rho * x).sum() * dx)
    lap_frozen = (
        _interp_valid(grid, pa.phase_laplacian, pa.valid, state.x0)
        * state.x0 * state.norm_sq
    )
    dphi = spectral_gradient(state.phi).values
    current = (np.conj(phi) * dphi).imag  # |phi|^2 grad(arg phi)
    flux_local = float((pa.log_amp_gradient * x * current).sum() * dx)
    flux_frozen = (
        _interp_valid(grid, pa.log_amp_gradient, pa.valid, state.x0)
        * state.x0 * float(current.sum() * dx)
    )
    return {
        "crossterm_laplacian": scale * (lap_local - lap_frozen) / state.norm_sq,
        "crossterm_log_amp": 2.0 * scale * (flux_local - flux_frozen) / state.norm_sq,
    }


def guidance_law_report(rows: Sequence[VelocityDecomposition]):
    """Max |v_drift - (v_dbb + v_int)| relative to max |v_drift|."""
    resid = np.array([r.residual_p1 for r in rows])
    vmax = max(np.max(np.abs([r.v_drift for r in rows])), RESIDUAL_FLOOR)
    series = np.abs(resid) / vmax
    return float(series.max()), series


def reciprocity_report(rows: Sequence[VelocityDecomposition]):
    """Max deviation of the normalized product <phi|phi> A_L^2(x0) from 1."""
    series = np.abs(np.array([r.p2_product for r in rows]) - 1.0)
    return float(series.max()), series


def norm_rate_report(rows: Sequence[VelocityDecomposition]):
    """Max |relative norm-rate residual| over the run."""
    series = np.abs(np.array([r.norm_rate_residual for r in rows]))
    return float(series.max()), series


def write_guidance_csv(rows: Sequence[VelocityDecomposition], path):
    """Machine-readable decomposition, one row per output time."""
    with open(path, "w", newline="") as fh:
        fh.write(CSV_COLUMNS + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for r in rows:
            writer.writerow([
                f"{v:.17g}" for v in (
                    r.t, r.x0, r.v_drift, r.v_dbb, r.v_int, r.residual_p1,
                    r.norm_sq_phi, r.a_l_sq_at_x0, r.p2_product,
                    r.norm_rate_residual, r.width, r.valid_fraction,
                )
            ])
