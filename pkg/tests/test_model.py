import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qubitstep import model
from qubitstep.model import InfoMatrix, ParamPoint

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)


def oracle_state(theta, gamma):
    """U|0> by dense matrix exponential."""
    h = np.cos(theta) * SX + np.sin(theta) * SZ
    return expm(-1j * gamma * h) @ np.array([1.0, 0.0])


def fd_qfim(theta, gamma, h=1e-5):
    """Pure-state QFIM from central differences of the oracle state."""
    psi = oracle_state(theta, gamma)
    d = [
        (oracle_state(theta + h, gamma) - oracle_state(theta - h, gamma)) / (2 * h),
        (oracle_state(theta, gamma + h) - oracle_state(theta, gamma - h)) / (2 * h),
    ]
    q = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            q[i, j] = 4 * np.real(np.vdot(d[i], d[j]) - np.vdot(d[i], psi) * np.vdot(psi, d[j]))
    return q


@pytest.mark.parametrize("theta,gamma", [(0.3, 0.2), (np.pi / 3, np.pi / 9), (1.2, -0.7), (2.9, 2.0)])
def test_amplitudes_match_expm(theta, gamma):
    s = model.evolve(ParamPoint(theta, gamma))
    np.testing.assert_allclose(s.vector, oracle_state(theta, gamma), atol=1e-13)


def test_probabilities_vectorized_against_expm():
    rng = np.random.default_rng(1)
    th = rng.uniform(-np.pi, np.pi, 300)
    ga = rng.uniform(-np.pi, np.pi, 300)
    p0 = model.prob0(th, ga)
    want = np.array([abs(oracle_state(t, g)[0]) ** 2 for t, g in zip(th, ga)])
    np.testing.assert_allclose(p0, want, atol=1e-12)


@given(angles, angles)
def test_state_is_normalized(theta, gamma):
    p0, p1 = model.outcome_probs((theta, gamma))
    assert p0 + p1 == pytest.approx(1.0, abs=1e-14)
    assert 0.0 <= p0 <= 1.0


def test_horizontal_axis_is_an_eigenstate():
    # theta = pi/2 gives U = exp(-i gamma sz); |0> only picks up a phase
    for gamma in np.linspace(-3, 3, 13):
        assert model.outcome_probs((np.pi / 2, gamma))[0] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("theta,gamma", [(0.4, 0.3), (np.pi / 3, np.pi / 9), (1.0, 1.1), (2.2, -0.5)])
def test_qfim_matches_finite_differences(theta, gamma):
    np.testing.assert_allclose(model.qfim((theta, gamma)).array, fd_qfim(theta, gamma), atol=1e-8)


@pytest.mark.parametrize("theta,gamma", [(0.4, 0.3), (1.1, 0.8)])
def test_qfim_gamma_entry_from_fidelity(theta, gamma):
    # |<psi(g)|psi(g + h)>|^2 = 1 - Q_gg h^2 / 4 + O(h^4)
    h = 1e-4
    f = abs(np.vdot(oracle_state(theta, gamma), oracle_state(theta, gamma + h))) ** 2
    assert 4 * (1 - f) / h**2 == pytest.approx(model.qfim((theta, gamma)).m22, rel=1e-5)


def test_qfim_determinant_identity():
    th, ga = np.meshgrid(np.linspace(0, np.pi, 101), np.linspace(-np.pi / 2, np.pi / 2, 101), indexing="ij")
    q = model.qfim_array(th, ga)
    det = q[..., 0, 0] * q[..., 1, 1] - q[..., 0, 1] ** 2
    assert np.max(np.abs(det - 16 * np.sin(ga) ** 4 * np.cos(th) ** 2)) < 1e-9


def test_qfim_closed_form_entries():
    th, ga = 0.7, 0.45
    q = model.qfim((th, ga))
    # hand-derived from the Bloch vector
    assert q.m11 == pytest.approx(4 * np.sin(ga) ** 2 * (1 - np.cos(ga) ** 2 * np.cos(th) ** 2), rel=1e-12)
    assert q.m12 == pytest.approx(-np.sin(2 * ga) * np.sin(2 * th), rel=1e-12)
    assert q.m22 == pytest.approx(4 * np.cos(th) ** 2, rel=1e-12)


def test_cfim_matches_finite_differences():
    th, ga, h = 0.6, 0.5, 1e-6
    p = lambda t, g: np.array(model.outcome_probs((t, g)))
    dp = np.stack([(p(th + h, ga) - p(th - h, ga)) / (2 * h), (p(th, ga + h) - p(th, ga - h)) / (2 * h)], 1)
    want = dp.T @ np.diag(1 / p(th, ga)) @ dp
    np.testing.assert_allclose(model.cfim_z((th, ga)).array, want, rtol=1e-7)


def test_cfim_is_rank_one_and_dominated_by_qfim():
    rng = np.random.default_rng(3)
    th = rng.uniform(0, np.pi, 200)
    ga = rng.uniform(-1.5, 1.5, 200)
    f = model.cfim_array(th, ga)
    q = model.qfim_array(th, ga)
    assert np.all(np.abs(np.linalg.det(f)) < 1e-9 * (1 + np.einsum("...ii", f) ** 2))
    assert np.all(np.linalg.eigvalsh(q - f) > -1e-9)


def test_cfim_is_zero_where_outcome_is_certain():
    # cos(pi/2) is 6e-17 in floating point, hence the absolute tolerance
    np.testing.assert_allclose(model.cfim_z((np.pi / 2, 0.3)).array, np.zeros((2, 2)), atol=1e-30)


def test_bloch_vector_consistent_with_state():
    th, ga = 0.8, 0.3
    psi = oracle_state(th, ga)
    rho = np.outer(psi, psi.conj())
    sy = np.array([[0, -1j], [1j, 0]])
    want = [np.trace(rho @ s).real for s in (SX, sy, SZ)]
    r, dr_t, dr_g = model.bloch_vector(th, ga)
    np.testing.assert_allclose(r, want, atol=1e-13)
    # pure-state QFIM is the Gram matrix of the Bloch derivatives
    gram = np.array([[dr_t @ dr_t, dr_t @ dr_g], [dr_g @ dr_t, dr_g @ dr_g]])
    np.testing.assert_allclose(gram, model.qfim((th, ga)).array, atol=1e-12)


@settings(max_examples=50)
@given(angles, angles)
def test_normalized_point_is_the_same_physical_state(theta, gamma):
    p = ParamPoint(theta, gamma)
    c = p.normalized()
    assert 0.0 <= c.theta < np.pi and -np.pi / 2 <= c.gamma < np.pi / 2
    overlap = abs(np.vdot(oracle_state(p.theta, p.gamma), oracle_state(c.theta, c.gamma)))
    assert overlap == pytest.approx(1.0, abs=1e-9)


def test_point_keeps_raw_values():
    assert ParamPoint(4.0, 2.0).theta == 4.0
    assert ParamPoint(4.0, 2.0).swapped() == (2.0, 4.0)


def test_info_matrix_reordering():
    m = InfoMatrix(1.0, 0.5, 3.0)
    assert m.in_order("theta") is m
    s = m.in_order("gamma")
    assert (s.m11, s.m12, s.m22, s.order) == (3.0, 0.5, 1.0, ("gamma", "theta"))
    assert s.det == m.det and s.trace == m.trace
    with pytest.raises(ValueError):
        m.in_order("phi")
