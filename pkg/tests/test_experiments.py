"""Kelvin-wave fields and experiment helpers."""

import numpy as np
import pytest

from src.config import ExperimentConfig
from src.dynamics.stepper import build_stepper, run
from src.experiments.commands import build_mesh, courant_time_step, gaussian_streamfunction
from src.experiments.kelvin import ChannelKelvinWave, CircularKelvinWave
from src.mesh.build import build_rectangle_mesh
from src.operators.assembly import assemble_operators
from src.spaces.function_space import l2_error

EPS = 1e-5


def _residuals(wave, x, y, t, ro, fr):
    """Pointwise residuals of the three linear equations (central differences)."""
    def fields(x, y, t):
        h = wave.thickness(t)(x, y)
        u, v = wave.velocity(t)(x, y)
        return np.asarray(u), np.asarray(v), np.asarray(h)

    u, v, h = fields(x, y, t)
    u_t, v_t, h_t = [(a - b) / (2 * EPS) for a, b in zip(fields(x, y, t + EPS), fields(x, y, t - EPS))]
    ux, vx, hx = [(a - b) / (2 * EPS) for a, b in zip(fields(x + EPS, y, t), fields(x - EPS, y, t))]
    uy, vy, hy = [(a - b) / (2 * EPS) for a, b in zip(fields(x, y + EPS, t), fields(x, y - EPS, t))]
    momentum_x = u_t - v / ro + hx / fr ** 2
    momentum_y = v_t + u / ro + hy / fr ** 2
    continuity = h_t + ux + vy
    return momentum_x, momentum_y, continuity


@pytest.mark.parametrize("ro, fr", [(0.1, 1.0), (0.5, 0.5), (1.0, 2.0)])
def test_channel_wave_solves_equations(ro, fr):
    wave = ChannelKelvinWave(ro=ro, fr=fr)
    rng = np.random.default_rng(0)
    x = rng.uniform(-8, 2, 40)
    y = rng.uniform(0, 0.5, 40)
    for residual in _residuals(wave, x, y, 1.3, ro, fr):
        assert np.abs(residual).max() < 1e-6


def test_channel_wave_travels_with_coast_on_right():
    wave = ChannelKelvinWave(ro=0.1, fr=0.5)
    h0 = wave.thickness(0.0)
    h1 = wave.thickness(2.0)
    # Speed 1/Fr in +x
    assert h1(-5.0 + 4.0, 0.0) == pytest.approx(h0(-5.0, 0.0))
    assert wave.decay_length == pytest.approx(0.2)
    assert h0(-5.0, 0.2) == pytest.approx(np.exp(-1.0))


def test_circular_wave_balanced_across_coast():
    ro, fr = 0.1, 1.0
    wave = CircularKelvinWave(ro=ro, fr=fr)
    theta = np.linspace(0, 2 * np.pi, 17)
    r = 0.95
    x, y = r * np.cos(theta), r * np.sin(theta)
    u, v = wave.velocity()(x, y)
    # No radial flow
    np.testing.assert_allclose(u * np.cos(theta) + v * np.sin(theta), 0.0, atol=1e-14)
    # Radial pressure gradient balances the Coriolis force on the azimuthal flow
    h = wave.thickness()
    dh_dr = (h((r + EPS) * np.cos(theta), (r + EPS) * np.sin(theta))
             - h((r - EPS) * np.cos(theta), (r - EPS) * np.sin(theta))) / (2 * EPS)
    u_theta = -u * np.sin(theta) + v * np.cos(theta)
    np.testing.assert_allclose(u_theta / ro, dh_dr / fr ** 2, atol=1e-6)


def test_zero_amplitude_stays_zero():
    ops = assemble_operators(build_rectangle_mesh((-1, 1), (-1, 1), 0.5))
    config = ExperimentConfig(ro=0.1, fr=1.0, dt=0.05)
    state = CircularKelvinWave(ro=0.1, fr=1.0, amplitude=0.0).state(ops)
    out = run(build_stepper(ops, config.system()), state, 0.5)
    assert not out.coefficients().any()


def test_channel_discrete_solution_tracks_exact():
    config = ExperimentConfig(domain="rectangle", x_min=-4, x_max=4, y_min=0, y_max=1.5,
                              ro=0.5, fr=1.0, t_end=1.0, courant=0.1, kelvin_x0=-1.0)
    wave = ChannelKelvinWave(ro=config.ro, fr=config.fr, x0=config.kelvin_x0)
    errors = []
    for h in (0.4, 0.2):
        mesh = build_mesh(config, h)
        ops = assemble_operators(mesh)
        dt = courant_time_step(config, mesh)
        final = run(build_stepper(ops, config.system(dt=dt)), wave.state(ops), config.t_end)
        assert final.t == pytest.approx(1.0)
        errors.append(l2_error(final.h, wave.thickness(final.t)))
    assert errors[1] < errors[0] / 2.5


def test_courant_time_step_divides_end_time():
    config = ExperimentConfig(domain="rectangle", x_min=0, x_max=1, y_min=0, y_max=1,
                              t_end=10.0, courant=0.1, fr=1.0)
    mesh = build_mesh(config, 0.25)
    dt = courant_time_step(config, mesh)
    assert dt <= 0.1 * mesh.edge_lengths.min() + 1e-15
    n = config.t_end / dt
    assert n == pytest.approx(round(n), abs=1e-9)


def test_build_mesh_variants(tmp_path):
    disk = build_mesh(ExperimentConfig(domain="disk", radius=2.0, edge_length=0.5))
    assert np.hypot(*disk.vertices[disk.boundary_vertices].T).max() == pytest.approx(2.0)
    plain = build_mesh(ExperimentConfig(domain="rectangle", edge_length=0.25))
    distorted = build_mesh(ExperimentConfig(domain="rectangle", edge_length=0.25,
                                            distortion=0.2, seed=4))
    assert plain.n_triangles == distorted.n_triangles
    assert not np.array_equal(plain.vertices, distorted.vertices)


def test_gaussian_streamfunction_peak():
    ops = assemble_operators(build_rectangle_mesh((-1, 1), (-1, 1), 0.25))
    psi = gaussian_streamfunction(ops, (0.0, 0.0), 0.5)
    centre = np.flatnonzero(np.all(ops.s_space.node_coords == 0.0, axis=1))
    assert psi.coefficients[centre] == pytest.approx(1.0)
    assert psi.coefficients.max() == pytest.approx(1.0)
