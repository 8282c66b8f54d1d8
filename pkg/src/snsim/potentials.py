"""External and nonlinear potential evaluation.

Three potential families appear in the 1D model:

* an external harmonic trap V_ext = k_ext x^2 / 2,
* the mean-field self-trap V_self = k_self (x - <x>)^2 / 2 that a uniform
  sphere of mass M and radius R generates for its own centre-of-mass
  packet once the packet is much narrower than R (position-independent
  offsets of the expansion are dropped),
* a generic distance-kernel self-interaction
  V(x) = -G m^2 * integral |psi(x')|^2 F(|x - x'|) dx'.

The sphere stiffness is k_self = G M^2 N^2 / (2 R^3) with N^2 the squared
norm of the wave.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError
from .fields import Grid1D, WaveField, mean_position

logger = logging.getLogger(__name__)

# relative agreement required between an explicit k_self and the sphere formula
STIFFNESS_CONSISTENCY_RTOL = 1e-12


@dataclass(frozen=True)
class PhysParams:
    """Dimensionless physical constants; hbar and the mass default to 1."""

    hbar: float = 1.0
    mass: float = 1.0
    G: float = 1.0
    norm_sq: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "G", "norm_sq"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class HarmonicModelParams:
    """Stiffnesses of the trapped self-gravitating sphere model.

    k_self may be given directly or derived from the sphere data with
    :func:`self_stiffness`; when both routes are available they must
    agree (see :func:`validate_self_stiffness`).
    """

    k_ext: float
    k_self: float
    sphere_mass: Optional[float] = None
    sphere_radius: Optional[float] = None

    def __post_init__(self):
        if self.k_ext < 0.0:
            raise ConfigError("k_ext must be >= 0")
        if self.k_self < 0.0:
            raise ConfigError("k_self must be >= 0")
        if self.sphere_mass is not None and self.sphere_mass <= 0.0:
            raise ConfigError("sphere_mass must be > 0")
        if self.sphere_radius is not None and self.sphere_radius <= 0.0:
            raise ConfigError("sphere_radius must be > 0")


def self_stiffness(G: float, sphere_mass: float, sphere_radius: float,
                   norm_sq: float) -> float:
    """Sphere-model stiffness k_self = G M^2 N^2 / (2 R^3)."""
    return G * sphere_mass**2 * norm_sq / (2.0 * sphere_radius**3)


def validate_self_stiffness(model: HarmonicModelParams, phys: PhysParams):
    """Check an explicit k_self against the sphere formula when possible."""
    if model.sphere_mass is None or model.sphere_radius is None:
        return
    derived = self_stiffness(phys.G, model.sphere_mass, model.sphere_radius,
                             phys.norm_sq)
    scale = max(abs(derived), abs(model.k_self))
    if scale == 0.0:
        return
    if abs(derived - model.k_self) > STIFFNESS_CONSISTENCY_RTOL * scale:
        raise ConfigError(
            f"k_self={model.k_self!r} disagrees with the sphere value "
            f"G*M^2*N^2/(2R^3)={derived!r}"
        )


@dataclass(frozen=True)
class ConvolutionKernel:
    """Distance kernel F(u) with the coupling prefactor -G m^2.

    ``fn`` maps an array of non-negative distances to F values; the
    self-potential is coupling * (|psi|^2 convolved with F).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    coupling: float
    name: str = "custom"

    def sample(self, distances: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fn(np.abs(distances)), dtype=float)
        if not np.all(np.isfinite(out)):
            raise ConfigError(f"kernel '{self.name}' is not finite on the grid")
        return out


def zero_kernel(phys: PhysParams) -> ConvolutionKernel:
    return ConvolutionKernel(lambda u: np.zeros_like(u),
                             -phys.G * phys.mass**2, name="zero")


def sphere_quadratic_kernel(phys: PhysParams, model: HarmonicModelParams) -> ConvolutionKernel:
    """Quadratic expansion of the uniform-sphere self interaction.

    Scaled so the convolution route reproduces the mean-field potential
    k_self (x - <x>)^2 / 2 (plus position-independent offsets) with
    k_self = G M^2 N^2 / (2 R^3).
    """
    if model.sphere_mass is None or model.sphere_radius is None:
        raise ConfigError("sphere-quadratic kernel needs sphere_mass and sphere_radius")
    m2 = phys.mass**2
    msq = model.sphere_mass**2
    radius = model.sphere_radius
    def fn(u):
        return (msq / m2) * (3.0 / (5.0 * radius) - u * u / (4.0 * radius**3))
    return ConvolutionKernel(fn, -phys.G * m2, name="sphere-quadratic")


def load_kernel_table(path, phys: PhysParams) -> ConvolutionKernel:
    """Tabulated kernel from a two-column text file (u, F(u))."""
    data = np.loadtxt(path, ndmin=2)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigError(f"kernel table {path} must have two columns")
    u, f = data[:, 0], data[:, 1]
    if not np.all(np.diff(u) > 0):
        raise ConfigError(f"kernel table {path} must have strictly increasing u")
    if not np.all(np.isfinite(f)):
        raise ConfigError(f"kernel table {path} contains non-finite values")
    u_max = u[-1]

    def fn(dist):
        d = np.abs(dist)
        if d.max(initial=0.0) > u_max:
            raise ConfigError(
                f"kernel table covers u <= {u_max:g} but the grid needs "
                f"distances up to {d.max():g}"
            )
        return np.interp(d, u, f)

    return ConvolutionKernel(fn, -phys.G * phys.mass**2, name="custom-table")


def harmonic_external(grid: Grid1D, k_ext: float) -> np.ndarray:
    """Trap potential k_ext x^2 / 2 sampled on the grid."""
    if k_ext < 0.0:
        raise ConfigError("k_ext must be >= 0")
    x = grid.nodes
    return 0.5 * k_ext * x * x


def self_harmonic(f: WaveField, model: HarmonicModelParams) -> np.ndarray:
    """Mean-field self-trap k_self (x - <x>_f)^2 / 2.

    The packet centre is the |f|^2-weighted mean, so the |f|^2-weighted
    mean force of this potential vanishes identically.
    """
    xbar = mean_position(f)  # raises DegenerateInputError on zero norm
    u = f.grid.nodes - xbar
    return 0.5 * model.k_self * u * u


def convolution_self_potential(f: WaveField, kernel: ConvolutionKernel) -> np.ndarray:
    """Self potential coupling * (|f|^2 conv F) by linear FFT convolution.

    Zero padding makes this the open-boundary (non-circular) convolution,
    exact to quadrature for densities supported inside the domain.
    """
    v = f.values
    rho = v.real * v.real + v.imag * v.imag
    n = f.grid.n_points
    dx = f.grid.dx
    offsets = dx * np.arange(-(n - 1), n)
    samples = kernel.sample(offsets)
    # 'valid' of (2n-1) against (n) yields exactly the n sums
    # sum_m rho_m F(|x_i - x_m|)
    full = fftconvolve(samples, rho, mode="valid")
    return kernel.coupling * full * dx


def scaling_check(f: WaveField, lam: complex, kernel: ConvolutionKernel) -> float:
    """Max-norm residual of V(lam f) - |lam|^2 V(f).

    Zero up to roundoff for any kernel: the potential is quadratic in the
    field amplitude and blind to its phase.
    """
    base = convolution_self_potential(f, kernel)
    scaled = convolution_self_potential(f.with_values(lam * f.values), kernel)
    return float(np.max(np.abs(scaled - abs(lam) ** 2 * base)))


def sphere_validity_ratio(f: WaveField, model: HarmonicModelParams) -> Optional[float]:
    """Packet rms width over sphere radius, or None without sphere data.

    The quadratic sphere expansion assumes this ratio is small; callers
    assert it at t=0 and only warn if it degrades later.
    """
    if model.sphere_radius is None:
        return None
    from .fields import moments

    m = moments(f)
    return float(np.sqrt(m.variance) / model.sphere_radius)
