import numpy as np
import pytest
from hypothesis import given, strategies as st

from photonlimits.projection import (DegeneracyError, build_projection, constraint_vectors,
                                     project_matrix, projection_for)
from photonlimits.spectral import build_basis, probability_matrix, synthesize_time_domain

from conftest import lambda_system, three_level_system, zeeman_system


def initial_amplitudes(proj, basis, params, rng, count=20):
    out = []
    for _ in range(count):
        w = rng.normal(size=proj.projected_dim) + 1j * rng.normal(size=proj.projected_dim)
        w /= np.linalg.norm(w)
        c = proj.lift(w)
        out.append([abs(synthesize_time_domain(c, params, j, [0.0], basis=basis)[0])
                    for j in range(1, params.n_channels + 1)])
    return np.array(out)


@pytest.mark.parametrize("params", [lambda_system(1.0), zeeman_system(5.0), three_level_system()])
def test_unitary_and_vacant_start(params, rng):
    b = build_basis(5.0, 6.25, 24, params)
    proj = projection_for(b, params)
    assert proj.j_M_d == params.n_channels
    assert np.abs(proj.U @ proj.U.conj().T - np.eye(b.size)).max() < 1e-12
    assert initial_amplitudes(proj, b, params, rng).max() < 1e-10


def test_last_rows_span_constraints():
    p = zeeman_system(5.0)
    b = build_basis(5.0, 6.25, 16, p)
    proj = projection_for(b, p)
    span = proj.U[proj.projected_dim:].conj().T  # orthonormal columns
    for phi in proj.constraint_vectors:
        resid = phi - span @ (span.conj().T @ phi)
        assert np.linalg.norm(resid) < 1e-10 * np.linalg.norm(phi)


def test_degenerate_channels_collapse(rng):
    p = zeeman_system(0.0)
    b = build_basis(5.0, 6.25, 16, p)
    proj = projection_for(b, p)
    assert proj.j_M_d == 1
    assert initial_amplitudes(proj, b, p, rng).max() < 1e-10


def test_near_degenerate_pair_keeps_both_constraints(rng):
    p = zeeman_system(1e-6)
    b = build_basis(5.0, 6.25, 64, p)
    proj = projection_for(b, p)
    assert proj.j_M_d == 2
    assert initial_amplitudes(proj, b, p, rng).max() < 1e-10


def test_dependent_vectors_rejected():
    p = zeeman_system(0.0)
    b = build_basis(5.0, 6.25, 8, p)
    phi = constraint_vectors(b, lambda_system(1.0))[0]
    with pytest.raises(DegeneracyError):
        build_projection([phi, 2 * phi], b)


def test_project_reverse_roundtrip(rng):
    p = zeeman_system(3.0)
    b = build_basis(5.0, 6.25, 8, p)
    proj = projection_for(b, p)
    w = rng.normal(size=proj.projected_dim) + 0j
    assert np.allclose(proj.project(proj.lift(w)), w)
    assert np.allclose(proj.U.conj().T @ proj.reverse(w), proj.lift(w))


@given(st.integers(0, 2 ** 32 - 1))
def test_projected_matrix_preserves_quadratic_form(seed):
    rng = np.random.default_rng(seed)
    p = zeeman_system(3.0)
    b = build_basis(5.0, 6.25, 8, p)
    proj = projection_for(b, p)
    M = probability_matrix(b, p, "total", 2.0)
    Mp = project_matrix(M, proj)
    w = rng.normal(size=proj.projected_dim) + 1j * rng.normal(size=proj.projected_dim)
    c = proj.lift(w)
    assert np.vdot(w, Mp @ w).real == pytest.approx(np.vdot(c, M @ c).real, rel=1e-10)
