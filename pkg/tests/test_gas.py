import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from igesdse import gas
from igesdse.errors import SingularModel
from igesdse.model import GasNetworkSpec, GasNode, Pipeline
from oracles import direct_residuals


def path3(dt=600.0, sound_speed=340.0):
    nodes = (GasNode(1, "source", 34.0), GasNode(2, "sink"), GasNode(3, "sink"))
    pipes = (Pipeline(1, 2, 10000.0, 0.5), Pipeline(2, 3, 15000.0, 0.4))
    return GasNetworkSpec(nodes, pipes, dt=dt, sound_speed=sound_speed)


def single_pipe():
    return GasNetworkSpec((GasNode(1, "source", 34.0), GasNode(2, "sink")),
                          (Pipeline(1, 2, 10000.0, 0.5),))


def test_coefficients_hand_values():
    net = single_pipe()
    xi, beta, gamma = gas.pipe_coefficients(net)
    a = math.pi * 0.25 / 4
    assert a == pytest.approx(0.19635, abs=1e-5)
    assert xi[0] == pytest.approx(0.30558, abs=1e-5)
    assert beta[0] == pytest.approx(1361.9, abs=0.05)
    assert gamma[0] == pytest.approx(114.59, abs=0.005)


def test_zero_time_step_degenerates():
    a11, a12, a21, a22 = gas.assemble_pde_blocks(path3(dt=0.0))
    assert not a12.any() and not a21.any()
    np.testing.assert_array_equal(a22, [[-1, 1, 0, 0], [0, 0, -1, 1]])
    np.testing.assert_array_equal(a11, [[1, 1, 0], [0, 1, 1]])


def test_incidence_and_signs():
    net = path3()
    a11, a12, a21, a22 = gas.assemble_pde_blocks(net)
    xi, beta, gamma = gas.pipe_coefficients(net)
    assert a11.shape == (2, 3)
    assert a11[:, 1].sum() == 2
    np.testing.assert_allclose(a12[1], [0, 0, -xi[1], xi[1]])
    np.testing.assert_allclose(a21[0], [-beta[0], beta[0], 0])
    np.testing.assert_allclose(a22[0], [gamma[0] - 1, gamma[0] + 1, 0, 0])


def test_boundary_blocks_three_node():
    b11, b22 = gas.assemble_boundary_blocks(path3())
    np.testing.assert_array_equal(b11, [[1, 0, 0]])
    np.testing.assert_array_equal(b22, [[0, 1, -1, 0], [0, 0, 0, 1]])
    _, b22 = gas.assemble_boundary_blocks(single_pipe())
    np.testing.assert_array_equal(b22, [[0, 1]])


def test_transition_matches_dense_solve():
    net = path3()
    tr = gas.build_transition(net)
    a_mat, b_mat, _ = gas.stacked_matrices(net)
    assert a_mat.shape == (net.n_states, net.n_states)
    np.testing.assert_allclose(tr.f_matrix, np.linalg.solve(a_mat, b_mat), atol=1e-10)


def test_singular_matrix_raises():
    with pytest.raises(SingularModel):
        gas._factor(np.ones((3, 3)), "test matrix")


def test_boundary_vector_layout():
    u = gas.boundary_vector(path3(), [34.0], [0.0, 10.0])
    np.testing.assert_array_equal(u, [0, 0, 0, 0, 34.0, 0.0, 10.0])
    with pytest.raises(ValueError):
        gas.boundary_vector(path3(), [34.0], [1.0])


def test_source_densities_from_pressure(iges):
    c2 = iges.gas.sound_speed ** 2
    u = gas.boundary_vector(iges.gas, iges.gas.source_densities(), np.zeros(len(iges.gas.sinks)))
    r0 = 2 * iges.gas.n_pipes
    np.testing.assert_allclose(u[r0:r0 + 2], [41.48e5 / c2, 41.63e5 / c2], rtol=1e-14)


def test_steady_state_is_fixed_point():
    net = path3()
    tr = gas.build_transition(net)
    x = gas.solve_steady(net, [34.0], [2.0, 10.0])
    u = gas.boundary_vector(net, [34.0], [2.0, 10.0])
    np.testing.assert_allclose(gas.step_gas(tr, x, u).vector,
                               x.vector, atol=1e-9)


def test_zero_state_zero_boundary():
    net = path3()
    tr = gas.build_transition(net)
    out = gas.step_gas(tr, np.zeros(net.n_states), np.zeros(net.n_states))
    np.testing.assert_array_equal(out, 0.0)


def test_step_enforces_sink_balance():
    net = path3()
    tr = gas.build_transition(net)
    rng = np.random.default_rng(0)
    x = rng.normal(size=net.n_states)
    out = gas.step_gas(tr, x, gas.boundary_vector(net, [34.0], [3.0, 7.5]))
    np.testing.assert_allclose(tr.blocks["B22"] @ out[3:], [3.0, 7.5], atol=1e-9)
    assert out[0] == pytest.approx(34.0, abs=1e-12)


def test_steady_single_pipe_closed_form():
    net = single_pipe()
    x = gas.solve_steady(net, [34.0], [10.0])
    rho, m = x.densities, x.pipe_flows
    np.testing.assert_allclose(m, [10.0, 10.0], atol=1e-12)
    # momentum balance at rest in time: beta*(rho_j - rho_i) = -2*gamma*m
    _, beta, gamma = gas.pipe_coefficients(net)
    assert rho[0] - rho[1] == pytest.approx(2 * gamma[0] * 10.0 / beta[0], rel=1e-12)
    assert rho[0] > rho[1]


def test_steady_zero_and_doubling():
    net = path3()
    x0 = gas.solve_steady(net, [34.0], [0.0, 0.0])
    np.testing.assert_allclose(x0.densities, 34.0, atol=1e-12)
    np.testing.assert_allclose(x0.pipe_flows, 0.0, atol=1e-12)
    x1 = gas.solve_steady(net, [34.0], [1.0, 2.0]).pipe_flows
    x2 = gas.solve_steady(net, [34.0], [2.0, 4.0]).pipe_flows
    np.testing.assert_allclose(x2, 2 * x1, atol=1e-12)


def test_measurement_matrix():
    net = path3()
    h = gas.gas_measurement_matrix(net)
    assert h.shape == (6, 7)
    np.testing.assert_allclose(h[:3, :3], 340.0 ** 2 * np.eye(3))
    np.testing.assert_array_equal(h[3:, 3:], [[-1, 0, 0, 0], [0, 1, -1, 0], [0, 0, 0, 1]])
    assert np.allclose(gas.gas_measurement_matrix(path3(sound_speed=1.0))[:3, :3], np.eye(3))
    x = gas.solve_steady(single_pipe(), [34.0], [10.0]).vector
    assert (gas.gas_measurement_matrix(single_pipe()) @ x)[3] == pytest.approx(10.0, abs=1e-12)


@pytest.mark.parametrize("which", ["three", "iges"])
def test_assembly_residuals_match_direct(which, iges):
    net = path3() if which == "three" else iges.gas
    a_mat, b_mat, _ = gas.stacked_matrices(net)
    rng = np.random.default_rng(1)
    n_p = net.n_pipes
    for _ in range(100):
        x0 = rng.normal(size=net.n_states)
        x1 = rng.normal(size=net.n_states)
        res = a_mat @ x1 - b_mat @ x0
        direct = direct_residuals(net, x0, x1)
        np.testing.assert_allclose(res[:n_p], direct[:, 0], rtol=0, atol=1e-12 * max(1, np.abs(direct).max()))
        np.testing.assert_allclose(res[n_p:2 * n_p], direct[:, 1], rtol=0,
                                   atol=1e-12 * max(1, np.abs(direct).max()))


def test_dimension_identity(iges, three_node):
    for net in (iges.gas, three_node.gas, path3()):
        a_mat, _, _ = gas.stacked_matrices(net)
        assert a_mat.shape[0] == net.n_nodes + 2 * net.n_pipes


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 31))
def test_step_linearity(a, b, seed):
    net = path3()
    tr = gas.build_transition(net)
    rng = np.random.default_rng(seed)
    x, y, u, v = (rng.normal(size=net.n_states) for _ in range(4))
    lhs = gas.step_gas(tr, a * x + b * y, a * u + b * v)
    rhs = a * gas.step_gas(tr, x, u) + b * gas.step_gas(tr, y, v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_lu_applier_matches_inverse():
    net = path3()
    tr = gas.build_transition(net)
    u = np.arange(net.n_states, dtype=float)
    np.testing.assert_allclose(tr.apply_inverse(u), linalg.solve(tr.a_matrix, u), atol=1e-12)
