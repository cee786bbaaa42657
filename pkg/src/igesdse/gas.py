"""Discretized linear gas pipeline network model.

State layout for ``n_N`` nodes and ``n_P`` pipelines::

    x = [rho_1 .. rho_nN, m_1i, m_1j, m_2i, m_2j, ..]

where pipeline ``l`` (zero based) owns flow slots ``2l`` (mass flow at its
lower-numbered end) and ``2l + 1`` (at its higher-numbered end), both
counted positive in the direction of increasing node number.
"""
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import SingularModel

log = logging.getLogger(__name__)

RCOND_MIN = 1e-12


@dataclass(frozen=True)
class GasState:
    densities: np.ndarray
    pipe_flows: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.densities, self.pipe_flows])

    @classmethod
    def from_vector(cls, x, n_nodes):
        x = np.asarray(x, dtype=float)
        return cls(x[:n_nodes].copy(), x[n_nodes:].copy())


def pipe_coefficients(net):
    """Per-pipeline discretization coefficients ``(xi, beta, gamma)``."""
    dt, c2 = net.dt, net.sound_speed ** 2
    xi, beta, gamma = [], [], []
    for p in net.pipelines:
        a = p.cross_section
        xi.append(dt / (p.length * a))
        beta.append(a * dt * c2 / p.length)
        gamma.append(net.friction * p.avg_velocity * dt / (4.0 * p.diameter * a))
    return np.array(xi), np.array(beta), np.array(gamma)


def assemble_pde_blocks(net):
    """Blocks of the pipe mass and momentum equations.

    Returns ``(A11, A12, A21, A22)``; one row per pipeline in each pair.
    """
    n_n, n_p = net.n_nodes, net.n_pipes
    xi, beta, gamma = pipe_coefficients(net)
    a11 = np.zeros((n_p, n_n))
    a12 = np.zeros((n_p, 2 * n_p))
    a21 = np.zeros((n_p, n_n))
    a22 = np.zeros((n_p, 2 * n_p))
    for l, p in enumerate(net.pipelines):
        i, j = p.from_node - 1, p.to_node - 1
        a11[l, i] = a11[l, j] = 1.0
        a12[l, 2 * l] = -xi[l]
        a12[l, 2 * l + 1] = xi[l]
        lo, hi = min(i, j), max(i, j)
        a21[l, lo] = -beta[l]
        a21[l, hi] = beta[l]
        a22[l, 2 * l] = gamma[l] - 1.0
        a22[l, 2 * l + 1] = gamma[l] + 1.0
    return a11, a12, a21, a22


def assemble_boundary_blocks(net):
    """Source-density selector ``B11`` and sink mass-balance rows ``B22``."""
    sources, sinks = net.sources, net.sinks
    b11 = np.zeros((len(sources), net.n_nodes))
    for r, s in enumerate(sources):
        b11[r, s - 1] = 1.0
    row = {node: r for r, node in enumerate(sinks)}
    b22 = np.zeros((len(sinks), 2 * net.n_pipes))
    for l, p in enumerate(net.pipelines):
        if p.to_node in row:
            b22[row[p.to_node], 2 * l + 1] += 1.0
        if p.from_node in row:
            b22[row[p.from_node], 2 * l] -= 1.0
    return b11, b22


@dataclass(frozen=True)
class GasTransition:
    """Gas transition ``x_{t+1} = F x_t + A^-1 U_{t+1}`` with its building blocks."""

    f_matrix: np.ndarray
    a_matrix: np.ndarray
    b_matrix: np.ndarray
    lu: tuple
    blocks: dict
    n_nodes: int

    def apply_inverse(self, u_vec):
        return linalg.lu_solve(self.lu, np.asarray(u_vec, dtype=float))

    @property
    def n_states(self):
        return self.f_matrix.shape[0]


def stacked_matrices(net):
    a11, a12, a21, a22 = assemble_pde_blocks(net)
    b11, b22 = assemble_boundary_blocks(net)
    n_n, n_p = net.n_nodes, net.n_pipes
    n_s, n_si = b11.shape[0], b22.shape[0]
    a_mat = np.block([
        [a11, a12],
        [a21, a22],
        [b11, np.zeros((n_s, 2 * n_p))],
        [np.zeros((n_si, n_n)), b22],
    ])
    b_mat = np.block([
        [a11, -a12],
        [-a21, -a22],
        [np.zeros((n_s + n_si, n_n + 2 * n_p))],
    ])
    blocks = dict(A11=a11, A12=a12, A21=a21, A22=a22, B11=b11, B22=b22)
    return a_mat, b_mat, blocks


def _factor(mat, what):
    if mat.shape[0] != mat.shape[1]:
        raise SingularModel(f"{what} is {mat.shape[0]}x{mat.shape[1]}, not square")
    with warnings.catch_warnings():
        # singularity is reported below through the condition estimate
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu = linalg.lu_factor(mat, check_finite=True)
    # 1-norm reciprocal condition estimate from the LU factors
    rcond = 1.0 / np.linalg.cond(mat, 1) if np.all(np.isfinite(lu[0])) else 0.0
    if not rcond >= RCOND_MIN:
        raise SingularModel(f"{what} is numerically singular (rcond={rcond:.3g})")
    log.debug("%s condition number %.3e", what, 1.0 / rcond)
    return lu


def build_transition(net):
    a_mat, b_mat, blocks = stacked_matrices(net)
    lu = _factor(a_mat, "gas system matrix")
    f_mat = linalg.lu_solve(lu, b_mat)
    return GasTransition(f_mat, a_mat, b_mat, lu, blocks, net.n_nodes)


def boundary_vector(net, source_densities, sink_outflows):
    """Right-hand side ``U``: zeros on the pipe rows, then boundary values."""
    source_densities = np.atleast_1d(np.asarray(source_densities, dtype=float))
    sink_outflows = np.atleast_1d(np.asarray(sink_outflows, dtype=float))
    if source_densities.shape != (len(net.sources),):
        raise ValueError(f"expected {len(net.sources)} source densities, got {source_densities.shape}")
    if sink_outflows.shape != (len(net.sinks),):
        raise ValueError(f"expected {len(net.sinks)} sink outflows, got {sink_outflows.shape}")
    return np.concatenate([np.zeros(2 * net.n_pipes), source_densities, sink_outflows])


def step_gas(tr, x, u_vec):
    """Advance one time step; accepts a :class:`GasState` or a flat vector."""
    vec = x.vector if isinstance(x, GasState) else np.asarray(x, dtype=float)
    nxt = tr.f_matrix @ vec + tr.apply_inverse(u_vec)
    if isinstance(x, GasState):
        return GasState.from_vector(nxt, tr.n_nodes)
    return nxt


def solve_steady(net, source_densities, sink_outflows):
    """Fixed point of :func:`step_gas` for constant boundary values."""
    a_mat, b_mat, _ = stacked_matrices(net)
    lu = _factor(a_mat - b_mat, "steady-state gas system")
    x = linalg.lu_solve(lu, boundary_vector(net, source_densities, sink_outflows))
    return GasState.from_vector(x, net.n_nodes)


def node_flow_matrix(net):
    """``H'``: each node's metered net mass flow (arrivals minus departures)."""
    h = np.zeros((net.n_nodes, 2 * net.n_pipes))
    for l, p in enumerate(net.pipelines):
        h[p.to_node - 1, 2 * l + 1] += 1.0
        h[p.from_node - 1, 2 * l] -= 1.0
    return h


def gas_measurement_matrix(net):
    """Pressures (Pa) of every node, then every node's net mass flow (kg/s)."""
    n_n, n_p = net.n_nodes, net.n_pipes
    h = np.zeros((2 * n_n, n_n + 2 * n_p))
    h[:n_n, :n_n] = net.sound_speed ** 2 * np.eye(n_n)
    h[n_n:, n_n:] = node_flow_matrix(net)
    return h
