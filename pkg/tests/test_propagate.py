import numpy as np
import pytest

from snsim.errors import (
    BoundaryLeakError,
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
)
from snsim.fields import Grid1D, WaveField, gaussian_packet, moments
from snsim.oracles import GaussianMoments, coherent_state, gaussian_moment_flow
from snsim.potentials import (
    ConvolutionKernel,
    HarmonicModelParams,
    PhysParams,
    harmonic_external,
    self_stiffness,
    sphere_quadratic_kernel,
)
from snsim.propagate import (
    EvolutionSpec,
    evolve_kernel,
    evolve_linear,
    evolve_self_harmonic,
    imaginary_time_relax,
    read_snapshot,
    write_snapshots,
)

GRID = Grid1D(2048, -24.0, 24.0)
PHYS = PhysParams()


def align_phase(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotate b onto a's global phase (the phase itself is unphysical)."""
    overlap = np.vdot(b, a)
    return b * (overlap / abs(overlap))


class TestEvolutionSpec:
    def test_integer_step_count(self):
        with pytest.raises(ConfigError):
            EvolutionSpec(dt=0.3, t_end=1.0)

    def test_enums_validated(self):
        with pytest.raises(ConfigError):
            EvolutionSpec(dt=0.1, t_end=1.0, scheme="leapfrog")
        with pytest.raises(ConfigError):
            EvolutionSpec(dt=0.1, t_end=1.0, self_consistency="implicit")

    def test_step_count(self):
        assert EvolutionSpec(dt=0.01, t_end=1.0).n_steps == 100


class TestEvolveLinear:
    def test_plane_wave_phase_advance(self):
        k = GRID.wavenumbers[40]
        psi0 = WaveField(GRID, np.exp(1j * k * GRID.nodes))
        spec = EvolutionSpec(dt=1e-3, t_end=0.5, output_stride=500)
        _, final = evolve_linear(psi0, np.zeros(GRID.n_points), spec, PHYS)
        expected = psi0.values * np.exp(-1j * 0.5 * k * k * 0.5)
        assert np.max(np.abs(final.values - expected)) < 1e-10

    def test_coherent_state_oscillation(self):
        omega = 1.0
        period = 2.0 * np.pi / omega
        psi0, _ = coherent_state(GRID, omega**2, 1.0, 0.0, PHYS)
        v_ext = harmonic_external(GRID, omega**2)
        spec = EvolutionSpec(dt=period / 6400, t_end=period, output_stride=64)
        log, _ = evolve_linear(psi0, v_ext, spec, PHYS)
        times = np.asarray(log.times)
        assert np.max(np.abs(np.asarray(log.mean_x) - np.cos(times))) < 1e-6

    def test_coherent_state_field_matches_closed_form(self):
        # validates the propagator and the analytic solution against
        # each other, global phase included
        omega = 1.0
        psi0, _ = coherent_state(GRID, omega**2, 1.0, 0.0, PHYS)
        v_ext = harmonic_external(GRID, omega**2)
        t_end = 1.4
        spec = EvolutionSpec(dt=2e-4, t_end=t_end, output_stride=7000)
        _, final = evolve_linear(psi0, v_ext, spec, PHYS)
        ref, _ = coherent_state(GRID, omega**2, 1.0, t_end, PHYS)
        assert np.max(np.abs(final.values - ref.values)) < 1e-7

    def test_trap_ground_state_stationary(self):
        # the width carries O(dt^2) splitting error, so dt must be small
        # for the 1e-8 constancy bound
        psi0, _ = coherent_state(GRID, 1.0, 0.0, 0.0, PHYS)
        v_ext = harmonic_external(GRID, 1.0)
        spec = EvolutionSpec(dt=2e-4, t_end=2.0, output_stride=1000)
        log, _ = evolve_linear(psi0, v_ext, spec, PHYS)
        mean = np.asarray(log.mean_x)
        var = np.asarray(log.mean_x2) - mean**2
        assert np.max(np.abs(mean)) < 1e-10
        assert np.max(np.abs(var - var[0])) < 1e-8

    def test_norm_conserved_per_step(self):
        psi0, _ = coherent_state(GRID, 1.0, 1.0, 0.0, PHYS)
        v_ext = harmonic_external(GRID, 1.0)
        spec = EvolutionSpec(dt=1e-3, t_end=1.0, output_stride=1)
        log, _ = evolve_linear(psi0, v_ext, spec, PHYS)
        norms = np.asarray(log.norm_sq)
        per_step = np.abs(np.diff(norms)) / norms[:-1]
        assert np.max(per_step) < 1e-12

    def test_time_reversal(self):
        psi0, _ = coherent_state(GRID, 1.0, 1.2, 0.0, PHYS)
        v_ext = harmonic_external(GRID, 1.0)
        fwd = EvolutionSpec(dt=2e-3, t_end=1.0, output_stride=500)
        bwd = EvolutionSpec(dt=-2e-3, t_end=1.0, output_stride=500)
        _, mid = evolve_linear(psi0, v_ext, fwd, PHYS)
        _, back = evolve_linear(mid, v_ext, bwd, PHYS)
        assert np.max(np.abs(back.values - psi0.values)) < 1e-8

    def test_boundary_leak_detected(self):
        # a fast packet reaches the wall well within the run
        k = GRID.wavenumbers[300]
        psi0 = gaussian_packet(GRID, 0.0, 1.0, velocity=k)
        spec = EvolutionSpec(dt=1e-3, t_end=2.0, output_stride=100)
        with pytest.raises(BoundaryLeakError):
            evolve_linear(psi0, np.zeros(GRID.n_points), spec, PHYS)

    def test_plane_wave_bypasses_leak_check(self):
        k = GRID.wavenumbers[10]
        psi0 = WaveField(GRID, np.exp(1j * k * GRID.nodes))
        spec = EvolutionSpec(dt=1e-3, t_end=0.1, output_stride=10)
        evolve_linear(psi0, np.zeros(GRID.n_points), spec, PHYS)  # no raise


class TestEvolveSelfHarmonic:
    def test_reduces_to_linear_without_self_term(self):
        model = HarmonicModelParams(k_ext=1.0, k_self=0.0)
        psi0, _ = coherent_state(GRID, 1.0, 1.0, 0.0, PHYS)
        spec = EvolutionSpec(dt=1e-3, t_end=0.5, output_stride=500)
        _, a = evolve_self_harmonic(psi0, model, spec, PHYS)
        _, b = evolve_linear(psi0, harmonic_external(GRID, 1.0), spec, PHYS)
        assert np.max(np.abs(a.values - b.values)) < 1e-12

    def test_boosted_soliton_translates(self):
        # exact solution: the self-trapped ground state under a boost
        k_self = 50.0
        model = HarmonicModelParams(k_ext=0.0, k_self=k_self)
        a = (PHYS.hbar**2 / (k_self * PHYS.mass)) ** 0.25
        dk = 2.0 * np.pi / GRID.length
        v = 64 * dk
        psi0 = gaussian_packet(GRID, -2.0, a, velocity=v)
        period = 2.0 * np.pi / np.sqrt(k_self / PHYS.mass)
        t_end = 3.0 * period
        spec = EvolutionSpec(dt=t_end / 3000, t_end=t_end, output_stride=300)
        log, final = evolve_self_harmonic(psi0, model, spec, PHYS)
        amp0 = np.sqrt(1.0 / (a * np.sqrt(np.pi)))
        for t, fld in zip(log.times, log.fields):
            u = GRID.nodes - (-2.0 + v * t)
            ref = amp0 * np.exp(-(u * u) / (2.0 * a * a))
            assert np.max(np.abs(np.abs(fld.values) - ref)) < 1e-5

    def test_matches_moment_oracle(self):
        model = HarmonicModelParams(k_ext=1.0, k_self=100.0)
        k_total = model.k_ext + model.k_self
        a = (PHYS.hbar**2 / (k_total * PHYS.mass)) ** 0.25
        psi0 = gaussian_packet(GRID, 1.0, 1.1 * a)
        omega_fast = np.sqrt(k_total)
        t_end = 4.0 * np.pi / omega_fast
        n_steps = 600
        spec = EvolutionSpec(dt=t_end / n_steps, t_end=t_end, output_stride=6)
        log, _ = evolve_self_harmonic(psi0, model, spec, PHYS)
        m0 = moments(psi0)
        init = GaussianMoments(m0.mean, m0.momentum, m0.variance,
                               2.0 * m0.covariance / PHYS.mass)
        stride_dt = log.times[1] - log.times[0]
        flow = gaussian_moment_flow(init, model, PHYS, stride_dt / 10.0, t_end)
        mean_o, var_o = flow.mean[::10], flow.variance[::10]
        mean_g = np.asarray(log.mean_x)
        var_g = np.asarray(log.mean_x2) - mean_g**2
        assert np.max(np.abs(mean_g - mean_o)) / np.max(np.abs(mean_o)) < 1e-3
        assert np.max(np.abs(var_g - var_o)) / np.max(np.abs(var_o)) < 1e-3

    def test_generalized_mean_motion(self):
        # quadratic external trap: m <x>'' + k_ext <x> = 0 regardless of
        # the self-interaction strength
        model = HarmonicModelParams(k_ext=1.0, k_self=200.0)
        a = (PHYS.hbar**2 / (201.0 * PHYS.mass)) ** 0.25
        psi0 = gaussian_packet(GRID, 1.0, a)
        t_end = 1.0
        spec = EvolutionSpec(dt=2.5e-4, t_end=t_end, output_stride=4)
        log, _ = evolve_self_harmonic(psi0, model, spec, PHYS)
        mean = np.asarray(log.mean_x)
        h = log.times[1] - log.times[0]
        acc = (-mean[:-4] + 16 * mean[1:-3] - 30 * mean[2:-2]
               + 16 * mean[3:-1] - mean[4:]) / (12.0 * h * h)
        resid = PHYS.mass * acc + model.k_ext * mean[2:-2]
        assert np.max(np.abs(resid)) / np.max(np.abs(mean)) < 1e-5

    def test_zero_norm_rejected(self):
        model = HarmonicModelParams(k_ext=1.0, k_self=1.0)
        psi0 = WaveField(GRID, np.zeros(GRID.n_points))
        spec = EvolutionSpec(dt=1e-3, t_end=0.1)
        with pytest.raises(DegenerateInputError):
            evolve_self_harmonic(psi0, model, spec, PHYS)

    def test_dt_accuracy_bound(self):
        model = HarmonicModelParams(k_ext=1.0, k_self=1000.0)
        psi0 = gaussian_packet(GRID, 0.0, 0.2)
        spec = EvolutionSpec(dt=0.1, t_end=1.0)
        with pytest.raises(ConfigError):
            evolve_self_harmonic(psi0, model, spec, PHYS)

    def test_norm_conserved(self):
        model = HarmonicModelParams(k_ext=1.0, k_self=100.0)
        psi0 = gaussian_packet(GRID, 0.8, 0.35)
        spec = EvolutionSpec(dt=2e-4, t_end=0.5, output_stride=100)
        log, _ = evolve_self_harmonic(psi0, model, spec, PHYS)
        norms = np.asarray(log.norm_sq)
        assert np.max(np.abs(norms - norms[0]) / norms[0]) < 1e-10

    def test_second_order_convergence(self):
        model = HarmonicModelParams(k_ext=1.0, k_self=10.0)
        psi0 = gaussian_packet(GRID, 1.0, 0.8)

        def final(dt):
            spec = EvolutionSpec(dt=dt, t_end=1.0, output_stride=10**6)
            _, out = evolve_self_harmonic(psi0, model, spec, PHYS)
            return out.values

        ref = final(1.25e-4)
        ratio = (np.max(np.abs(final(1e-3) - ref))
                 / np.max(np.abs(final(5e-4) - ref)))
        assert 3.5 <= ratio <= 4.5


class TestEvolveKernel:
    def test_zero_kernel_equals_linear(self):
        kernel = ConvolutionKernel(lambda u: np.zeros_like(u), -1.0)
        psi0, _ = coherent_state(GRID, 1.0, 1.0, 0.0, PHYS)
        v_ext = harmonic_external(GRID, 1.0)
        spec = EvolutionSpec(dt=1e-3, t_end=0.3, output_stride=300)
        _, a = evolve_kernel(psi0, kernel, v_ext, spec, PHYS)
        _, b = evolve_linear(psi0, v_ext, spec, PHYS)
        assert np.max(np.abs(a.values - b.values)) < 1e-12

    def test_sphere_kernel_matches_mean_field(self):
        # same model through two code paths; the potentials differ by a
        # time-dependent spatial constant, i.e. a global phase
        phys = PhysParams()
        sphere_mass, sphere_radius = 1.0, 5.0
        k_self = self_stiffness(phys.G, sphere_mass, sphere_radius,
                                phys.norm_sq)
        model = HarmonicModelParams(k_ext=1.0, k_self=k_self,
                                    sphere_mass=sphere_mass,
                                    sphere_radius=sphere_radius)
        kernel = sphere_quadratic_kernel(phys, model)
        psi0 = gaussian_packet(GRID, 1.0, 0.9)
        v_ext = harmonic_external(GRID, model.k_ext)
        spec = EvolutionSpec(dt=1e-3, t_end=0.5, output_stride=500)
        _, a = evolve_kernel(psi0, kernel, v_ext, spec, phys)
        _, b = evolve_self_harmonic(psi0, model, spec, phys)
        aligned = align_phase(b.values, a.values)
        assert np.max(np.abs(aligned - b.values)) < 1e-8

    def test_free_particle_mean_motion(self):
        kernel = ConvolutionKernel(lambda u: np.exp(-0.5 * u * u), -1.0)
        dk = 2.0 * np.pi / GRID.length
        v = 32 * dk
        psi0 = gaussian_packet(GRID, -3.0, 1.0, velocity=v)
        spec = EvolutionSpec(dt=2e-3, t_end=2.0, output_stride=20)
        log, _ = evolve_kernel(psi0, kernel, np.zeros(GRID.n_points), spec, PHYS)
        mean = np.asarray(log.mean_x)
        h = log.times[1] - log.times[0]
        acc = (-mean[:-4] + 16 * mean[1:-3] - 30 * mean[2:-2]
               + 16 * mean[3:-1] - mean[4:]) / (12.0 * h * h)
        assert np.max(np.abs(acc)) < 5e-6


class TestImaginaryTime:
    def test_harmonic_ground_state(self):
        v_ext = harmonic_external(GRID, 1.0)
        seed = gaussian_packet(GRID, 0.3, 1.7)
        result = imaginary_time_relax(seed, lambda f: v_ext, 1.0,
                                      tol=1e-12, phys=PHYS)
        assert result.eigenvalue == pytest.approx(0.5, abs=1e-6)
        m = moments(result.field)
        assert np.sqrt(2.0 * m.variance) == pytest.approx(1.0, abs=1e-4)

    def test_self_trapped_ground_state(self):
        k = 10.0
        x = GRID.nodes

        def builder(f):
            rho = np.abs(f.values) ** 2
            xbar = float((rho * x).sum() / rho.sum())
            return 0.5 * k * (x - xbar) ** 2

        seed = gaussian_packet(GRID, 0.0, 1.5)
        result = imaginary_time_relax(seed, builder, 1.0, tol=1e-12, phys=PHYS)
        a_pred = (PHYS.hbar**2 / (k * PHYS.mass)) ** 0.25
        m = moments(result.field)
        assert np.sqrt(2.0 * m.variance) == pytest.approx(a_pred, rel=1e-4)

    def test_energy_monotone(self):
        v_ext = harmonic_external(GRID, 1.0)
        seed = gaussian_packet(GRID, 1.0, 2.5)
        result = imaginary_time_relax(seed, lambda f: v_ext, 1.0,
                                      tol=1e-10, phys=PHYS)
        history = np.asarray(result.history)
        assert np.all(np.diff(history) <= 1e-14 * np.abs(history[:-1]) + 1e-30)

    def test_non_convergence_raises(self):
        v_ext = harmonic_external(GRID, 1.0)
        seed = gaussian_packet(GRID, 0.0, 2.0)
        with pytest.raises(ConvergenceError) as err:
            imaginary_time_relax(seed, lambda f: v_ext, 1.0, tol=1e-30,
                                 phys=PHYS, max_iters=5)
        assert len(err.value.history) > 0


class TestSnapshots:
    def test_round_trip(self, tmp_path):
        psi0, _ = coherent_state(GRID, 1.0, 1.0, 0.0, PHYS)
        v_ext = harmonic_external(GRID, 1.0)
        spec = EvolutionSpec(dt=1e-2, t_end=0.1, output_stride=5)
        log, _ = evolve_linear(psi0, v_ext, spec, PHYS)
        paths = write_snapshots(log, tmp_path / "run")
        assert len(paths) == len(log.times)
        assert paths[1].name == "snap_00001.dat"
        t, x, vals = read_snapshot(paths[1])
        assert t == pytest.approx(log.times[1])
        assert np.allclose(x, GRID.nodes)
        assert np.max(np.abs(vals - log.fields[1].values)) < 1e-16


class TestSchemeAndWarnings:
    def test_linear_rejects_imaginary_scheme(self):
        psi0, _ = coherent_state(GRID, 1.0, 0.0, 0.0, PHYS)
        spec = EvolutionSpec(dt=1e-3, t_end=0.01, scheme="imaginary_time")
        with pytest.raises(ConfigError):
            evolve_linear(psi0, np.zeros(GRID.n_points), spec, PHYS)

    def test_sphere_validity_warning(self, caplog):
        # packet comparable to the sphere radius: the quadratic
        # expansion is out of its regime and must warn, not fail
        phys = PhysParams()
        k_self = self_stiffness(phys.G, 1.0, 0.5, phys.norm_sq)
        model = HarmonicModelParams(k_ext=1.0, k_self=k_self,
                                    sphere_mass=1.0, sphere_radius=0.5)
        psi0 = gaussian_packet(GRID, 0.0, 1.0)
        spec = EvolutionSpec(dt=1e-3, t_end=0.01, output_stride=10)
        with caplog.at_level("WARNING", logger="snsim.propagate"):
            evolve_self_harmonic(psi0, model, spec, phys)
        assert any("sphere" in rec.message for rec in caplog.records)
