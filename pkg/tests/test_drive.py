import dataclasses

import numpy as np
import pytest

from photonlimits.analytic_bounds import lower_bound
from photonlimits.drive import (FourierWavepacket, ReconstructionError, SineWavepacket,
                                SmallMarginWarning, omega_ode_residual, reconstruct_drive,
                                reconstruct_drive_real, verify_drive)
from photonlimits.dynamics import DriveContext, uniform_grid
from photonlimits.model import critical_time
from photonlimits.optimizer import OptimizationTarget, optimize

from conftest import lambda_system


@pytest.fixture(scope="module")
def setup():
    p = lambda_system(1.0)
    T = 2.5 * critical_time(p)
    wp = SineWavepacket(lower_bound(p, T))
    return p, T, wp, uniform_grid(T, 2000)


def test_round_trip_reproduces_wavepacket(setup):
    p, T, wp, grid = setup
    ctx = DriveContext(chi=0.05)
    pulse = reconstruct_drive(wp, p, ctx, grid)
    report = verify_drive(pulse, p, ctx, wp)
    assert report.passes()
    assert report.dynamic_l2_error < 1e-4
    assert report.algebraic_residual < 1e-3
    assert report.simulated_emission == pytest.approx(report.target_emission, rel=1e-4)
    assert report.imag_fraction < 1e-8


def test_literal_drive_equation_satisfied(setup):
    p, T, wp, grid = setup
    ctx = DriveContext(chi=0.05)
    pulse = reconstruct_drive(wp, p, ctx, grid)
    assert omega_ode_residual(pulse, wp, p, ctx) < 1e-4


def test_real_path_agrees(setup):
    p, T, wp, grid = setup
    ctx = DriveContext(chi=0.05)
    a = reconstruct_drive(wp, p, ctx, grid)
    b = reconstruct_drive_real(wp, p, ctx, grid)
    assert np.max(np.abs(a.Omega - b.Omega)) < 1e-4 * np.max(np.abs(a.Omega))


def test_initial_phase_only_rotates_drive(setup):
    p, T, wp, grid = setup
    base = reconstruct_drive(wp, p, DriveContext(chi=0.05), grid)
    for th in (1.0, 3.0):
        ctx = DriveContext(chi=0.05, theta_0=th)
        pulse = reconstruct_drive(wp, p, ctx, grid)
        assert np.allclose(pulse.Omega, base.Omega * np.exp(-1j * th), atol=1e-10)
        assert verify_drive(pulse, p, ctx, wp).dynamic_l2_error < 1e-4


def test_perturbed_drive_fails_verification(setup):
    p, T, wp, grid = setup
    ctx = DriveContext(chi=0.05)
    pulse = reconstruct_drive(wp, p, ctx, grid)
    bad = dataclasses.replace(pulse, Omega=1.1 * pulse.Omega)
    assert not verify_drive(bad, p, ctx, wp).passes()


def test_small_margin_warns(setup):
    p, T, wp, grid = setup
    with pytest.warns(SmallMarginWarning):
        reconstruct_drive(wp, p, DriveContext(chi=0.005), grid)


def test_unreachable_wavepacket_rejected(setup):
    p, T, wp, grid = setup
    # more than the whole population would have to be emitted
    with pytest.raises(ReconstructionError) as err:
        reconstruct_drive(wp.scaled(1.5), p, DriveContext(chi=0.05), grid)
    assert err.value.time is not None


def test_detuned_reconstruction_round_trip(setup):
    p, T, wp, grid = setup
    ctx = DriveContext(chi=0.05, Delta_u=0.7, Delta_e=-0.4)
    pulse = reconstruct_drive(wp, p, ctx, grid)
    assert verify_drive(pulse, p, ctx, wp).dynamic_l2_error < 1e-3
    assert omega_ode_residual(pulse, wp, p, ctx) < 1e-3


def test_optimized_wavepacket_round_trip():
    p = lambda_system(1.0)
    T = 2.5 * critical_time(p)
    sol = optimize(p, OptimizationTarget.emission(T))
    wp = FourierWavepacket(sol.coefficients, sol.basis, p)
    ctx = DriveContext(chi=0.05)
    pulse = reconstruct_drive(wp, p, ctx, uniform_grid(T, 2000))
    assert verify_drive(pulse, p, ctx, wp).dynamic_l2_error < 0.01


def test_pulse_csv(setup, tmp_path):
    p, T, wp, grid = setup
    pulse = reconstruct_drive(wp, p, DriveContext(chi=0.05), uniform_grid(T, 20))
    path = tmp_path / "drive.csv"
    pulse.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,re_Omega,im_Omega"
    assert len(lines) == 1 + len(pulse.times)
