"""Declarative scenario configs, run orchestration and file emission.

Configs are flat ``key = value`` text with ``#`` comments.  Every
scenario bakes in physically consistent defaults so the headline runs
are one-liners (``run figure1``); any key can be overridden.  Runs are
deterministic: repeated runs produce byte-identical CSV/TSV output.

The figure1 scenario realizes the oscillating-soliton configuration:
stiffness ratio k_self/k_ext = 1000, the soliton starting at the
stationary width of the combined stiffness, and the pilot a thousand
times wider in variance.  Those constraints tie the pilot's breathing
cycle to the soliton width (the pilot waist equals the soliton width a
quarter external-trap period in), so the analysis window defaults to two
periods of the soliton's own trap, well clear of the waist degeneracy.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .choquard import (
    RadialGrid,
    append_result_record,
    solve_ground_state,
    spectrum_value,
)
from .errors import ConfigError, SimulationError
from .fields import Grid1D, WaveField, gaussian_packet, moments, squared_norm
from .guidance import (
    decompose_run,
    guidance_law_report,
    norm_rate_report,
    reciprocity_report,
    write_guidance_csv,
)
from .oracles import (
    ClassicalState,
    GaussianMoments,
    classical_trajectory,
    gaussian_moment_flow,
    write_moment_csv,
    write_series_csv,
)
from .potentials import (
    HarmonicModelParams,
    PhysParams,
    harmonic_external,
    load_kernel_table,
    self_stiffness,
    sphere_quadratic_kernel,
    validate_self_stiffness,
)
from .propagate import (
    EvolutionSpec,
    evolve_kernel,
    evolve_linear,
    evolve_self_harmonic,
    imaginary_time_relax,
    write_snapshots,
)

logger = logging.getLogger(__name__)

SCENARIOS = ("figure1", "ground-state", "choquard", "ehrenfest", "boost", "custom")
KERNELS = ("none", "sphere-quadratic", "custom-table")

# acceptance tolerances for the oscillating-soliton run
P1_TOL = 0.02
P2_TOL = 0.02
CLASSICAL_TOL = 0.01
NORM_RATE_TOL = 0.05
ORACLE_TOL = 1e-3
EHRENFEST_TOL = 1e-5
NORM_DRIFT_TOL = 1e-10
E0_MATCH_TOL = 0.10
SCALING_RATIO_TOL = 0.01
BOOST_DEFORMATION_TOL = 1e-4
BOOST_VELOCITY_TOL = 1e-6
FREE_EHRENFEST_TOL = 5e-6


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete declarative description of one run.

    ``None`` fields are derived by the scenario builder; everything is
    overridable from the config file.
    """

    scenario: str = "figure1"
    n_points: Optional[int] = None
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    mass: float = 1.0
    G: float = 1.0
    norm_sq: float = 1.0
    k_ext: Optional[float] = None
    k_self: Optional[float] = None
    stiffness_ratio: Optional[float] = None
    sphere_mass: Optional[float] = None
    sphere_radius: Optional[float] = None
    kernel: str = "none"
    kernel_file: Optional[str] = None
    dt: Optional[float] = None
    t_end: Optional[float] = None
    output_stride: int = 1
    scheme: str = "strang_split"
    self_consistency: str = "midpoint_predictor"
    init_center: Optional[float] = None
    init_width: Optional[float] = None
    init_velocity: float = 0.0
    pilot_center: float = 0.0
    pilot_chirp: float = -0.05
    pilot_width: Optional[float] = None
    variance_ratio: float = 1e-3
    radial_points: int = 4096
    r_max: float = 50.0
    relax_tol: float = 1e-10
    snapshots: bool = False


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}
_INT_KEYS = {"n_points", "output_stride", "radial_points"}
_BOOL_KEYS = {"snapshots"}
_STR_KEYS = {"scenario", "kernel", "kernel_file", "scheme", "self_consistency"}
_TRUE_WORDS = {"on", "true", "yes", "1"}
_FALSE_WORDS = {"off", "false", "no", "0"}


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a flat key=value config, reporting all errors."""
    errors: List[str] = []
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _FIELD_TYPES:
            errors.append(f"line {lineno}: unknown key '{key}'")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key '{key}'")
            continue
        if key in _STR_KEYS:
            values[key] = val
        elif key in _BOOL_KEYS:
            low = val.lower()
            if low in _TRUE_WORDS:
                values[key] = True
            elif low in _FALSE_WORDS:
                values[key] = False
            else:
                errors.append(f"line {lineno}: {key} must be on/off")
        elif key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                errors.append(f"line {lineno}: {key} must be an integer")
        else:
            try:
                parsed = float(val)
            except ValueError:
                errors.append(f"line {lineno}: {key} must be numeric")
            else:
                if not math.isfinite(parsed):
                    errors.append(f"line {lineno}: {key} must be finite")
                else:
                    values[key] = parsed
    # report line-level and rule-level problems together so a config can
    # be fixed in one pass
    cfg = ScenarioConfig(**values)
    errors += validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def validate_config(cfg: ScenarioConfig) -> List[str]:
    """All rule violations of a config, empty when valid."""
    errors: List[str] = []

    def positive(name):
        v = getattr(cfg, name)
        if v is not None and v <= 0:
            errors.append(f"{name} must be > 0")

    def non_negative(name):
        v = getattr(cfg, name)
        if v is not None and v < 0:
            errors.append(f"{name} must be >= 0")

    if cfg.scenario not in SCENARIOS:
        errors.append(f"scenario must be one of {', '.join(SCENARIOS)}")
    if cfg.kernel not in KERNELS:
        errors.append(f"kernel must be one of {', '.join(KERNELS)}")
    if cfg.scheme not in ("strang_split", "imaginary_time"):
        errors.append("scheme must be strang_split or imaginary_time")
    if cfg.self_consistency not in ("frozen", "midpoint_predictor"):
        errors.append("self_consistency must be frozen or midpoint_predictor")
    for name in ("mass", "G", "norm_sq", "stiffness_ratio", "sphere_mass",
                 "sphere_radius", "dt", "t_end", "init_width", "pilot_width",
                 "r_max", "relax_tol"):
        positive(name)
    for name in ("k_ext", "k_self"):
        non_negative(name)
    if cfg.n_points is not None:
        n = cfg.n_points
        if n <= 0 or (n & (n - 1)) != 0:
            errors.append("n_points must be a power of two")
    if cfg.output_stride < 1:
        errors.append("output_stride must be >= 1")
    if cfg.radial_points < 8:
        errors.append("radial_points must be >= 8")
    if not (0.0 < cfg.variance_ratio < 1.0):
        errors.append("variance_ratio must lie in (0, 1)")
    if cfg.x_min is not None and cfg.x_max is not None and cfg.x_min >= cfg.x_max:
        errors.append("x_min must be below x_max")
    if cfg.kernel == "custom-table" and not cfg.kernel_file:
        errors.append("kernel_file is required for kernel = custom-table")
    if (
        cfg.k_self is not None
        and cfg.stiffness_ratio is not None
        and cfg.k_ext is not None
    ):
        implied = cfg.stiffness_ratio * cfg.k_ext
        scale = max(abs(implied), abs(cfg.k_self))
        if scale > 0 and abs(implied - cfg.k_self) > 1e-12 * scale:
            errors.append(
                f"k_self={cfg.k_self!r} disagrees with "
                f"stiffness_ratio*k_ext={implied!r}"
            )
    if (
        cfg.k_self is not None
        and cfg.sphere_mass is not None
        and cfg.sphere_radius is not None
    ):
        derived = self_stiffness(cfg.G, cfg.sphere_mass, cfg.sphere_radius,
                                 cfg.norm_sq)
        scale = max(abs(derived), abs(cfg.k_self))
        if scale > 0 and abs(derived - cfg.k_self) > 1e-12 * scale:
            errors.append(
                f"k_self={cfg.k_self!r} disagrees with the sphere value "
                f"G*M^2*N^2/(2R^3)={derived!r}"
            )
    return errors


def render_config(cfg: ScenarioConfig) -> str:
    """Config text that parses back to an equivalent config."""
    lines = []
    for f in dataclasses.fields(ScenarioConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name in _BOOL_KEYS:
            v = "on" if v else "off"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    note: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        out = (f"{tag} {self.name}: value={self.value:.6g} "
               f"threshold={self.threshold:.6g}")
        if self.note:
            out += f" ({self.note})"
        return out


@dataclass
class RunReport:
    scenario: str
    checks: List[CheckResult]
    metrics: dict
    wall_time: float
    outputs: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _check(name, value, threshold, note="") -> CheckResult:
    return CheckResult(name, bool(value <= threshold), float(value),
                       float(threshold), note)


def _resolve_phys(cfg: ScenarioConfig) -> PhysParams:
    return PhysParams(mass=cfg.mass, G=cfg.G, norm_sq=cfg.norm_sq)


def _resolve_model(cfg: ScenarioConfig, default_k_ext, default_ratio=None,
                   default_k_self=None) -> HarmonicModelParams:
    k_ext = cfg.k_ext if cfg.k_ext is not None else default_k_ext
    if cfg.k_self is not None:
        k_self = cfg.k_self
    elif cfg.stiffness_ratio is not None:
        k_self = cfg.stiffness_ratio * k_ext
    elif cfg.sphere_mass is not None and cfg.sphere_radius is not None:
        k_self = self_stiffness(cfg.G, cfg.sphere_mass, cfg.sphere_radius,
                                cfg.norm_sq)
    elif default_ratio is not None:
        k_self = default_ratio * k_ext
    elif default_k_self is not None:
        k_self = default_k_self
    else:
        raise ConfigError("k_self is undetermined: set k_self or stiffness_ratio")
    model = HarmonicModelParams(k_ext=k_ext, k_self=k_self,
                                sphere_mass=cfg.sphere_mass,
                                sphere_radius=cfg.sphere_radius)
    validate_self_stiffness(model, _resolve_phys(cfg))
    return model


def _second_derivative_5pt(series: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order interior second derivative; loses two points per end."""
    s = np.asarray(series, dtype=float)
    return (
        -s[:-4] + 16.0 * s[1:-3] - 30.0 * s[2:-2] + 16.0 * s[3:-1] - s[4:]
    ) / (12.0 * h * h)


@dataclass
class Figure1Result:
    cfg: ScenarioConfig
    phys: PhysParams
    model: HarmonicModelParams
    grid: Grid1D
    spec: EvolutionSpec
    times: np.ndarray
    pilot_log: object
    full_log: object
    pilot_final: WaveField
    full_final: WaveField
    rows: list
    metrics: dict
    moment_flow: object = None
    classical: tuple = None

    def checks(self) -> List[CheckResult]:
        m = self.metrics
        return [
            _check("guidance-law-residual", m["residual_p1_rel"], P1_TOL),
            _check("reciprocity-deviation", m["p2_max_dev"], P2_TOL),
            _check("classical-trajectory", m["classical_dev"], CLASSICAL_TOL),
            _check("ehrenfest-residual", m["ehrenfest_rel"], EHRENFEST_TOL),
            _check("norm-rate-residual", m["norm_rate_max"], NORM_RATE_TOL),
            _check("oracle-mean", m["oracle_mean_dev"], ORACLE_TOL),
            _check("oracle-variance", m["oracle_var_dev"], ORACLE_TOL),
            _check("norm-conservation", m["norm_drift"], NORM_DRIFT_TOL),
        ]


def soliton_width_param(model: HarmonicModelParams, phys: PhysParams) -> float:
    """Stationary Gaussian width sqrt(hbar / sqrt((k_ext + k_self) m))."""
    k_total = model.k_ext + model.k_self
    return math.sqrt(phys.hbar / math.sqrt(k_total * phys.mass))


def build_figure1(cfg: ScenarioConfig) -> Figure1Result:
    """Run the oscillating-soliton configuration and analyze it."""
    phys = _resolve_phys(cfg)
    model = _resolve_model(cfg, default_k_ext=1.0, default_ratio=1000.0)
    if model.k_ext <= 0:
        raise ConfigError("figure1 needs k_ext > 0")
    k_total = model.k_ext + model.k_self
    omega_fast = math.sqrt(k_total / phys.mass)

    a_phi = cfg.init_width if cfg.init_width is not None else soliton_width_param(model, phys)
    sigma_phi_sq = 0.5 * a_phi**2
    if cfg.pilot_width is not None:
        a_l = cfg.pilot_width
        sigma_l_sq = 0.5 * a_l**2
    else:
        sigma_l_sq = sigma_phi_sq / cfg.variance_ratio
        a_l = math.sqrt(2.0 * sigma_l_sq)
    x_c = cfg.init_center if cfg.init_center is not None else 1.0

    if cfg.x_min is not None and cfg.x_max is not None:
        x_min, x_max = cfg.x_min, cfg.x_max
    else:
        half = math.ceil(9.0 * math.sqrt(sigma_l_sq) + 4.0 * (abs(x_c) + 1.0))
        x_min, x_max = -half, half
    n = cfg.n_points if cfg.n_points is not None else 4096
    grid = Grid1D(n, x_min, x_max)

    t_end = cfg.t_end if cfg.t_end is not None else 2.0 * (2.0 * math.pi / omega_fast)
    # 200 steps per fast period keeps the width dynamics (the stiffest
    # observable) within the 1e-3 oracle-equivalence budget
    dt_nominal = cfg.dt if cfg.dt is not None else 2.0 * math.pi / (200.0 * omega_fast)
    n_steps = max(3, math.ceil(t_end / dt_nominal - 1e-9))
    dt = t_end / n_steps
    spec = EvolutionSpec(dt=dt, t_end=t_end, output_stride=cfg.output_stride,
                         self_consistency=cfg.self_consistency,
                         store_fields=True)

    pilot0 = gaussian_packet(grid, cfg.pilot_center, a_l, chirp=cfg.pilot_chirp,
                             norm_sq=1.0, hbar=phys.hbar, mass=phys.mass)
    soliton0 = gaussian_packet(grid, x_c, a_phi, norm_sq=1.0,
                               hbar=phys.hbar, mass=phys.mass)
    product = pilot0.values * soliton0.values
    full0 = WaveField(grid, product)
    full0 = full0.with_values(
        full0.values * math.sqrt(phys.norm_sq / squared_norm(full0))
    )

    v_ext = harmonic_external(grid, model.k_ext)
    pilot_log, pilot_final = evolve_linear(pilot0, v_ext, spec, phys)
    full_log, full_final = evolve_self_harmonic(full0, model, spec, phys)

    times = np.asarray(full_log.times)
    rows = decompose_run(times, pilot_log.fields, full_log.fields, phys)

    p1_max, _ = guidance_law_report(rows)
    p2_max, _ = reciprocity_report(rows)
    nr_max, _ = norm_rate_report(rows)

    # exact-closure oracle, integrated at a tenth of the output stride
    m0 = moments(full0, hbar=phys.hbar)
    init = GaussianMoments(m0.mean, m0.momentum, m0.variance,
                           2.0 * m0.covariance / phys.mass)
    stride_dt = times[1] - times[0]
    flow = gaussian_moment_flow(init, model, phys, stride_dt / 10.0, t_end)
    mean_o = flow.mean[::10]
    var_o = flow.variance[::10]
    mean_g = np.asarray(full_log.mean_x)
    var_g = np.asarray(full_log.mean_x2) - mean_g**2
    oracle_mean_dev = float(np.max(np.abs(mean_g - mean_o)) / np.max(np.abs(mean_o)))
    oracle_var_dev = float(np.max(np.abs(var_g - var_o)) / np.max(np.abs(var_o)))

    # classical reference for the soliton barycentre
    x0s = np.array([r.x0 for r in rows])
    vdrift0 = rows[0].v_drift
    _, xs_cl, _ = classical_trajectory(
        ClassicalState(x0s[0], vdrift0), model.k_ext, stride_dt / 10.0, t_end,
        mass=phys.mass,
    )
    amplitude = float(np.max(np.abs(x0s)))
    classical_dev = float(np.max(np.abs(x0s - xs_cl[::10])) / amplitude)

    # mean-motion law of the full wave: m <x>'' + k_ext <x> = 0
    acc = _second_derivative_5pt(mean_g, stride_dt)
    ehrenfest_res = phys.mass * acc + model.k_ext * mean_g[2:-2]
    ehrenfest_rel = float(
        np.max(np.abs(ehrenfest_res)) / np.max(np.abs(model.k_ext * mean_g))
    )

    norms = np.concatenate([np.asarray(pilot_log.norm_sq),
                            np.asarray(full_log.norm_sq)])
    n_refs = np.concatenate([
        np.full(len(pilot_log.norm_sq), pilot_log.norm_sq[0]),
        np.full(len(full_log.norm_sq), full_log.norm_sq[0]),
    ])
    norm_drift = float(np.max(np.abs(norms - n_refs) / n_refs))

    metrics = {
        "residual_p1_rel": p1_max,
        "p2_max_dev": p2_max,
        "classical_dev": classical_dev,
        "ehrenfest_rel": ehrenfest_rel,
        "norm_rate_max": nr_max,
        "oracle_mean_dev": oracle_mean_dev,
        "oracle_var_dev": oracle_var_dev,
        "norm_drift": norm_drift,
        "max_v_drift": float(np.max(np.abs([r.v_drift for r in rows]))),
        "soliton_width0": rows[0].width,
    }
    classical = (times, xs_cl[::10])
    return Figure1Result(cfg, phys, model, grid, spec, times, pilot_log,
                         full_log, pilot_final, full_final, rows, metrics,
                         moment_flow=flow, classical=classical)


@dataclass
class BoostResult:
    cfg: ScenarioConfig
    phys: PhysParams
    model: HarmonicModelParams
    grid: Grid1D
    log: object
    final: WaveField
    velocity: float
    metrics: dict

    def checks(self) -> List[CheckResult]:
        return [
            _check("boost-deformation", self.metrics["deformation"],
                   BOOST_DEFORMATION_TOL),
            _check("boost-velocity", self.metrics["velocity_dev"],
                   BOOST_VELOCITY_TOL),
            _check("norm-conservation", self.metrics["norm_drift"],
                   NORM_DRIFT_TOL),
        ]


def build_boost(cfg: ScenarioConfig) -> BoostResult:
    """Boosted self-trapped ground state translating without external trap."""
    phys = _resolve_phys(cfg)
    model = _resolve_model(cfg, default_k_ext=0.0, default_k_self=1000.0)
    if model.k_ext != 0.0:
        raise ConfigError("boost scenario requires k_ext = 0")
    a = (phys.hbar**2 / (model.k_self * phys.mass)) ** 0.25
    n = cfg.n_points if cfg.n_points is not None else 4096
    if cfg.x_min is not None and cfg.x_max is not None:
        x_min, x_max = cfg.x_min, cfg.x_max
    else:
        x_min, x_max = -16.0, 16.0
    grid = Grid1D(n, x_min, x_max)
    center = cfg.init_center if cfg.init_center is not None else -0.5

    period = 2.0 * math.pi / math.sqrt(model.k_self / phys.mass)
    t_end = cfg.t_end if cfg.t_end is not None else period
    n_steps = math.ceil(t_end / (cfg.dt if cfg.dt is not None else period / 2000.0) - 1e-9)
    dt = t_end / n_steps
    stride = cfg.output_stride if cfg.output_stride != 1 else max(1, n_steps // 50)
    spec = EvolutionSpec(dt=dt, t_end=t_end, output_stride=stride,
                         self_consistency=cfg.self_consistency,
                         store_fields=True)

    # snap the boost to a grid wavenumber so the phase stays periodic
    v_req = cfg.init_velocity if cfg.init_velocity != 0.0 else 5.0
    dk = 2.0 * math.pi / grid.length
    velocity = round(v_req * phys.mass / (phys.hbar * dk)) * dk * phys.hbar / phys.mass
    psi0 = gaussian_packet(grid, center, a, velocity=velocity,
                           norm_sq=phys.norm_sq, hbar=phys.hbar, mass=phys.mass)
    log, final = evolve_self_harmonic(psi0, model, spec, phys)

    times, mean_x, _, norm_sq, _ = log.as_arrays()
    slope = (mean_x[-1] - mean_x[0]) / (times[-1] - times[0])
    velocity_dev = abs(slope - velocity) / abs(velocity)

    # the exact solution is the rigidly translating ground-state envelope
    amp0 = math.sqrt(phys.norm_sq / (a * math.sqrt(math.pi)))
    deformation = 0.0
    for t, fld in zip(times, log.fields):
        u = grid.nodes - (center + velocity * t)
        ref = amp0 * np.exp(-(u * u) / (2.0 * a * a))
        deformation = max(
            deformation,
            float(np.max(np.abs(np.abs(fld.values) - ref)) / ref.max()),
        )
    norm_drift = float(np.max(np.abs(norm_sq - norm_sq[0]) / norm_sq[0]))
    metrics = {
        "deformation": deformation,
        "velocity_dev": velocity_dev,
        "norm_drift": norm_drift,
        "velocity": velocity,
    }
    return BoostResult(cfg, phys, model, grid, log, final, velocity, metrics)


@dataclass
class GroundStateResult1D:
    cfg: ScenarioConfig
    phys: PhysParams
    model: HarmonicModelParams
    field: WaveField
    eigenvalue: float
    energy: float
    iters: int
    history: list
    metrics: dict

    def checks(self) -> List[CheckResult]:
        return [
            _check("ground-width", self.metrics["width_dev"], 1e-4),
            _check("ground-eigenvalue", self.metrics["eigenvalue_dev"], 1e-6),
            _check("energy-monotone", self.metrics["energy_increase"], 0.0),
        ]


def build_ground_state(cfg: ScenarioConfig) -> GroundStateResult1D:
    """Imaginary-time relaxation of the 1D trapped self-attracting packet."""
    phys = _resolve_phys(cfg)
    model = _resolve_model(cfg, default_k_ext=0.0, default_k_self=10.0)
    k_total = model.k_ext + model.k_self
    if k_total <= 0.0:
        raise ConfigError("ground-state scenario needs a confining potential")
    a_pred = (phys.hbar**2 / (k_total * phys.mass)) ** 0.25
    n = cfg.n_points if cfg.n_points is not None else 4096
    half = max(16.0, 12.0 * a_pred)
    if cfg.x_min is not None and cfg.x_max is not None:
        x_min, x_max = cfg.x_min, cfg.x_max
    else:
        x_min, x_max = -half, half
    grid = Grid1D(n, x_min, x_max)
    seed = gaussian_packet(grid, 0.0, 2.0 * a_pred, norm_sq=phys.norm_sq,
                           hbar=phys.hbar, mass=phys.mass)

    v_ext = harmonic_external(grid, model.k_ext)
    x = grid.nodes
    dx = grid.dx

    def potential_builder(f: WaveField) -> np.ndarray:
        if model.k_self == 0.0:
            return v_ext
        rho = np.abs(f.values) ** 2
        xbar = float((rho * x).sum() / rho.sum())
        return v_ext + 0.5 * model.k_self * (x - xbar) ** 2

    def energy_fn(f: WaveField) -> float:
        from .propagate import _kinetic_energy

        rho = np.abs(f.values) ** 2
        n2 = float(rho.sum() * dx)
        xbar = float((rho * x).sum() * dx / n2)
        var = float((rho * (x - xbar) ** 2).sum() * dx / n2)
        return (
            _kinetic_energy(f.values, grid, phys)
            + float(np.sum(v_ext * rho) * dx)
            + 0.5 * model.k_self * n2 * var
        )

    result = imaginary_time_relax(seed, potential_builder, phys.norm_sq,
                                  tol=cfg.relax_tol, phys=phys,
                                  energy_fn=energy_fn)
    m = moments(result.field, hbar=phys.hbar)
    a_meas = math.sqrt(2.0 * m.variance)
    width_dev = abs(a_meas / a_pred - 1.0)
    e_pred = 0.5 * phys.hbar * math.sqrt(k_total / phys.mass)
    eigenvalue_dev = abs(result.eigenvalue - e_pred) / e_pred
    increases = max(
        (b - a) for a, b in zip(result.history, result.history[1:])
    ) if len(result.history) > 1 else 0.0
    metrics = {
        "width_dev": width_dev,
        "eigenvalue_dev": eigenvalue_dev,
        "energy_increase": max(0.0, increases),
        "eigenvalue": result.eigenvalue,
        "energy": result.energy,
        "iters": float(result.iters),
    }
    return GroundStateResult1D(cfg, phys, model, result.field,
                               result.eigenvalue, result.energy, result.iters,
                               result.history, metrics)


@dataclass
class ChoquardScenarioResult:
    cfg: ScenarioConfig
    phys: PhysParams
    results: list
    metrics: dict
    matched: str

    def checks(self) -> List[CheckResult]:
        return [
            _check("choquard-e0", self.metrics["e0_dev"], E0_MATCH_TOL,
                   note=f"matched by {self.matched} energy"),
            _check("choquard-n3-scaling", self.metrics["scaling_dev"],
                   SCALING_RATIO_TOL),
        ]


def build_choquard(cfg: ScenarioConfig) -> ChoquardScenarioResult:
    """Radial ground states at N^2 and 2 N^2 plus the published-fit checks."""
    phys = _resolve_phys(cfg)
    grid = RadialGrid(cfg.radial_points, cfg.r_max)
    base = solve_ground_state(phys, cfg.norm_sq, tol=cfg.relax_tol, grid=grid)
    doubled = solve_ground_state(phys, 2.0 * cfg.norm_sq, tol=cfg.relax_tol,
                                 grid=grid)
    e_expected = spectrum_value(0)
    # the published constants describe the unit-norm family; the scaling
    # law (eigenvalue ~ N^4, functional ~ N^6 in the squared norm N^2)
    # maps any norm back to it
    dev_eig = abs(abs(base.eigenvalue) / cfg.norm_sq**2 / e_expected - 1.0)
    dev_func = abs(
        abs(base.functional_energy) / cfg.norm_sq**3 / e_expected - 1.0
    )
    if dev_eig <= dev_func:
        matched, e0_dev = "eigenvalue", dev_eig
    else:
        matched, e0_dev = "functional", dev_func
    logger.info("dimensionless ground level matched by the %s energy "
                "(dev %.3g)", matched, e0_dev)
    ratio = doubled.functional_energy / base.functional_energy
    scaling_dev = abs(ratio / 8.0 - 1.0)
    metrics = {
        "e0_dev": e0_dev,
        "scaling_dev": scaling_dev,
        "eigenvalue": base.eigenvalue,
        "functional_energy": base.functional_energy,
        "extent": base.extent,
        "energy_ratio": ratio,
        "iters": float(base.iters),
    }
    return ChoquardScenarioResult(cfg, phys, [base, doubled], metrics, matched)


@dataclass
class EhrenfestResult:
    cfg: ScenarioConfig
    phys: PhysParams
    metrics: dict

    def checks(self) -> List[CheckResult]:
        return [
            _check("free-mean-acceleration", self.metrics["free_acc_max"],
                   FREE_EHRENFEST_TOL),
            _check("trapped-ehrenfest", self.metrics["trapped_rel"],
                   EHRENFEST_TOL),
            _check("norm-conservation", self.metrics["norm_drift"],
                   NORM_DRIFT_TOL),
        ]


def _resolve_kernel(cfg: ScenarioConfig, phys: PhysParams,
                    model: HarmonicModelParams):
    if cfg.kernel == "sphere-quadratic":
        return sphere_quadratic_kernel(phys, model)
    if cfg.kernel == "custom-table":
        return load_kernel_table(cfg.kernel_file, phys)
    raise ConfigError(f"scenario needs a self-interaction kernel, got '{cfg.kernel}'")


def build_ehrenfest(cfg: ScenarioConfig) -> EhrenfestResult:
    """Mean-motion checks for a kernel self-interaction.

    Free flight: the self-force averages to zero, so the packet mean
    moves on a straight line.  In a trap the mean obeys the classical
    oscillator equation exactly.
    """
    phys = _resolve_phys(cfg)
    if cfg.kernel == "none":
        cfg = dataclasses.replace(cfg, kernel="sphere-quadratic")
    if cfg.sphere_mass is None:
        cfg = dataclasses.replace(cfg, sphere_mass=1.0, sphere_radius=5.0)
    k_self = self_stiffness(phys.G, cfg.sphere_mass, cfg.sphere_radius,
                            phys.norm_sq)
    model = HarmonicModelParams(k_ext=cfg.k_ext if cfg.k_ext is not None else 1.0,
                                k_self=k_self, sphere_mass=cfg.sphere_mass,
                                sphere_radius=cfg.sphere_radius)
    kernel = _resolve_kernel(cfg, phys, model)
    n = cfg.n_points if cfg.n_points is not None else 4096
    grid = Grid1D(n, cfg.x_min if cfg.x_min is not None else -32.0,
                  cfg.x_max if cfg.x_max is not None else 32.0)
    t_end = cfg.t_end if cfg.t_end is not None else 2.0
    dt_nominal = cfg.dt if cfg.dt is not None else 2e-3
    n_steps = math.ceil(t_end / dt_nominal - 1e-9)
    dt = t_end / n_steps
    stride = cfg.output_stride if cfg.output_stride != 1 else max(1, n_steps // 200)
    spec = EvolutionSpec(dt=dt, t_end=t_end, output_stride=stride,
                         self_consistency=cfg.self_consistency,
                         store_fields=False)
    width = cfg.init_width if cfg.init_width is not None else 1.0
    dk = 2.0 * math.pi / grid.length
    v_snap = round(1.0 * phys.mass / (phys.hbar * dk)) * dk * phys.hbar / phys.mass

    zero_pot = np.zeros(grid.n_points)
    psi_free = gaussian_packet(grid, -2.0, width, velocity=v_snap,
                               norm_sq=phys.norm_sq, hbar=phys.hbar,
                               mass=phys.mass)
    log_free, _ = evolve_kernel(psi_free, kernel, zero_pot, spec, phys)
    t_free, mean_free, _, norm_free, _ = log_free.as_arrays()
    h = t_free[1] - t_free[0]
    free_acc = _second_derivative_5pt(mean_free, h)
    free_acc_max = float(np.max(np.abs(free_acc)))

    v_ext = harmonic_external(grid, model.k_ext)
    psi_trap = gaussian_packet(grid, 1.5, width, norm_sq=phys.norm_sq,
                               hbar=phys.hbar, mass=phys.mass)
    log_trap, _ = evolve_kernel(psi_trap, kernel, v_ext, spec, phys)
    t_trap, mean_trap, _, norm_trap, _ = log_trap.as_arrays()
    acc = _second_derivative_5pt(mean_trap, h)
    resid = phys.mass * acc + model.k_ext * mean_trap[2:-2]
    trapped_rel = float(np.max(np.abs(resid)) /
                        np.max(np.abs(model.k_ext * mean_trap)))

    norm_drift = max(
        float(np.max(np.abs(norm_free - norm_free[0]) / norm_free[0])),
        float(np.max(np.abs(norm_trap - norm_trap[0]) / norm_trap[0])),
    )
    metrics = {
        "free_acc_max": free_acc_max,
        "trapped_rel": trapped_rel,
        "norm_drift": norm_drift,
    }
    return EhrenfestResult(cfg, phys, metrics)


def build_custom(cfg: ScenarioConfig):
    """Generic single-wave run driven entirely by the config."""
    phys = _resolve_phys(cfg)
    required = {"n_points": cfg.n_points, "x_min": cfg.x_min,
                "x_max": cfg.x_max, "dt": cfg.dt, "t_end": cfg.t_end,
                "init_center": cfg.init_center, "init_width": cfg.init_width}
    missing = [k for k, v in required.items() if v is None]
    if missing:
        raise ConfigError([f"custom scenario requires key '{k}'" for k in missing])
    grid = Grid1D(cfg.n_points, cfg.x_min, cfg.x_max)
    spec = EvolutionSpec(dt=cfg.dt, t_end=cfg.t_end,
                         output_stride=cfg.output_stride,
                         self_consistency=cfg.self_consistency,
                         store_fields=cfg.snapshots)
    psi0 = gaussian_packet(grid, cfg.init_center, cfg.init_width,
                           velocity=cfg.init_velocity, norm_sq=phys.norm_sq,
                           hbar=phys.hbar, mass=phys.mass)
    k_ext = cfg.k_ext if cfg.k_ext is not None else 0.0
    v_ext = harmonic_external(grid, k_ext)
    if cfg.kernel != "none":
        model = _resolve_model(cfg, default_k_ext=k_ext, default_k_self=0.0)
        kernel = _resolve_kernel(cfg, phys, model)
        log, final = evolve_kernel(psi0, kernel, v_ext, spec, phys)
    elif cfg.k_self is not None and cfg.k_self > 0.0:
        model = _resolve_model(cfg, default_k_ext=k_ext)
        log, final = evolve_self_harmonic(psi0, model, spec, phys)
    else:
        log, final = evolve_linear(psi0, v_ext, spec, phys)
    norms = np.asarray(log.norm_sq)
    norm_drift = float(np.max(np.abs(norms - norms[0]) / norms[0]))
    metrics = {"norm_drift": norm_drift}
    checks = [_check("norm-conservation", norm_drift, NORM_DRIFT_TOL)]
    return log, final, metrics, checks


def _write_trajectory_tsv(log, path):
    times, mean_x, mean_x2, norm_sq, energy = log.as_arrays()
    with open(path, "w") as fh:
        fh.write("t\tmean_x\tmean_x2\tnorm_sq\tenergy\n")
        for row in zip(times, mean_x, mean_x2, norm_sq, energy):
            fh.write("\t".join(f"{v:.17g}" for v in row) + "\n")


def run_scenario(cfg: ScenarioConfig, out_dir) -> RunReport:
    """Execute one scenario, write its artifacts, and report pass/fail."""
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    outputs: List[str] = []

    if cfg.scenario == "figure1":
        result = build_figure1(cfg)
        csv_path = out / "guidance.csv"
        write_guidance_csv(result.rows, csv_path)
        outputs.append(str(csv_path))
        moments_path = out / "oracle_moments.csv"
        write_moment_csv(result.moment_flow, moments_path)
        outputs.append(str(moments_path))
        classical_path = out / "classical.csv"
        write_series_csv(classical_path, "t,x_classical", result.classical)
        outputs.append(str(classical_path))
        if cfg.snapshots:
            outputs += [str(p) for p in write_snapshots(result.pilot_log, out / "pilot")]
            outputs += [str(p) for p in write_snapshots(result.full_log, out / "full")]
        checks = result.checks()
        metrics = result.metrics
    elif cfg.scenario == "boost":
        result = build_boost(cfg)
        checks = result.checks()
        metrics = result.metrics
    elif cfg.scenario == "ground-state":
        result = build_ground_state(cfg)
        checks = result.checks()
        metrics = result.metrics
    elif cfg.scenario == "choquard":
        result = build_choquard(cfg)
        tsv = out / "choquard_results.tsv"
        for r in result.results:
            append_result_record(tsv, r)
        outputs.append(str(tsv))
        checks = result.checks()
        metrics = result.metrics
    elif cfg.scenario == "ehrenfest":
        result = build_ehrenfest(cfg)
        checks = result.checks()
        metrics = result.metrics
    elif cfg.scenario == "custom":
        log, final, metrics, checks = build_custom(cfg)
        tsv = out / "trajectory.tsv"
        _write_trajectory_tsv(log, tsv)
        outputs.append(str(tsv))
        if cfg.snapshots:
            outputs += [str(p) for p in write_snapshots(log, out / "snapshots")]
    else:
        raise ConfigError(f"unknown scenario '{cfg.scenario}'")

    wall = time.perf_counter() - start
    report = RunReport(cfg.scenario, checks, metrics, wall, outputs)
    report_path = out / "report.txt"
    with open(report_path, "w") as fh:
        fh.write(f"scenario: {cfg.scenario}\n")
        for c in checks:
            fh.write(c.line() + "\n")
        for k, v in metrics.items():
            fh.write(f"metric {k} = {v:.17g}\n")
        fh.write(f"wall_time_s = {wall:.3f}\n")
    report.outputs.append(str(report_path))
    logger.info("scenario %s finished in %.2fs: %s", cfg.scenario, wall,
                "PASS" if report.passed else "FAIL")
    return report


NUMERIC_SWEEP_KEYS = {
    f.name for f in dataclasses.fields(ScenarioConfig)
    if f.name not in _STR_KEYS and f.name not in _BOOL_KEYS
}


def resolve_sweep_window(cfg: ScenarioConfig) -> ScenarioConfig:
    """Pin the template's derived window and pilot so members are comparable.

    Stiffness sweeps then vary only the model: each member's soliton
    sits at its own stationary width inside the same pilot, so the
    soliton/pilot scale separation (and with it the guidance-law
    residual) genuinely tracks the stiffness ratio.
    """
    if cfg.scenario != "figure1":
        return cfg
    updates = {}
    if cfg.t_end is None or cfg.pilot_width is None:
        phys = _resolve_phys(cfg)
        model = _resolve_model(cfg, default_k_ext=1.0, default_ratio=1000.0)
        omega_fast = math.sqrt((model.k_ext + model.k_self) / phys.mass)
        if cfg.t_end is None:
            updates["t_end"] = 2.0 * (2.0 * math.pi / omega_fast)
        if cfg.pilot_width is None:
            a_phi = (cfg.init_width if cfg.init_width is not None
                     else soliton_width_param(model, phys))
            updates["pilot_width"] = math.sqrt(a_phi**2 / cfg.variance_ratio)
    return dataclasses.replace(cfg, **updates) if updates else cfg


def sweep(cfg: ScenarioConfig, param: str, values: Sequence[float],
          out_dir, jobs: int = 1) -> tuple[list, bool]:
    """Run one scenario per value concurrently and aggregate a TSV.

    Per-value failures are recorded in their row; the sweep itself never
    aborts.  Rows come back sorted by value regardless of completion
    order.
    """
    if param not in NUMERIC_SWEEP_KEYS:
        raise ConfigError(f"'{param}' is not a numeric config key")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    cfg = resolve_sweep_window(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(value):
        member = dataclasses.replace(
            cfg, **{param: int(value) if param in _INT_KEYS else float(value)}
        )
        run_dir = out / f"{param}_{value:g}"
        try:
            report = run_scenario(member, run_dir)
            return value, report, None
        except SimulationError as exc:
            logger.warning("sweep member %s=%g failed: %s", param, value, exc)
            return value, None, str(exc)

    jobs = max(1, min(jobs, len(values)))
    if jobs == 1:
        raw = [one(v) for v in values]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(one, values))
    raw.sort(key=lambda item: item[0])

    metric_keys: List[str] = []
    for _, report, _ in raw:
        if report is not None:
            metric_keys = list(report.metrics.keys())
            break
    tsv_path = out / "sweep.tsv"
    with open(tsv_path, "w") as fh:
        fh.write("\t".join([param, "passed"] + metric_keys + ["error"]) + "\n")
        for value, report, err in raw:
            if report is None:
                cells = [f"{value:.17g}", "no"] + ["nan"] * len(metric_keys)
                cells.append(err or "")
            else:
                cells = [f"{value:.17g}", "yes" if report.passed else "no"]
                cells += [f"{report.metrics.get(k, float('nan')):.17g}"
                          for k in metric_keys]
                cells.append("")
            fh.write("\t".join(cells) + "\n")
    all_passed = all(r is not None and r.passed for _, r, _ in raw)
    return raw, all_passed
