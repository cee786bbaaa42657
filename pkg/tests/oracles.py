"""Independent reference computations shared by unit and acceptance tests."""
import numpy as np
from scipy import linalg

from igesdse import gas, scenario
from igesdse.estimator import KalmanState


def direct_residuals(net, x_now, x_next):
    """Pipe equations evaluated term by term, independent of the block assembly."""
    xi, beta, gamma = gas.pipe_coefficients(net)
    n = net.n_nodes
    out = []
    for l, p in enumerate(net.pipelines):
        i, j = p.from_node - 1, p.to_node - 1
        ri0, rj0, ri1, rj1 = x_now[i], x_now[j], x_next[i], x_next[j]
        mi0, mj0 = x_now[n + 2 * l], x_now[n + 2 * l + 1]
        mi1, mj1 = x_next[n + 2 * l], x_next[n + 2 * l + 1]
        cont = (ri1 + rj1) - (ri0 + rj0) + xi[l] * ((mj1 - mi1) + (mj0 - mi0))
        mom = ((mj1 - mi1) + (mj0 - mi0) + beta[l] * ((rj1 - ri1) + (rj0 - ri0))
               + gamma[l] * ((mi1 + mj1) + (mi0 + mj0)))
        out.append((cont, mom))
    return np.array(out)


def gas_only_problem(three_node, three_joint, n_steps=5, seed=11):
    """Gas block of the three-node fixture with a fixed input series."""
    truth = scenario.simulate_truth(three_node, three_joint)[:n_steps, three_joint.n_electric:]
    net = three_node.gas
    tr = gas.build_transition(net)
    f, h = tr.f_matrix, gas.gas_measurement_matrix(net)
    u = np.zeros_like(truth)
    b22 = tr.blocks["B22"]
    for t in range(1, n_steps):
        outflows = b22 @ truth[t, net.n_nodes:]
        u[t] = tr.apply_inverse(gas.boundary_vector(net, net.source_densities(), outflows))
    scale = np.concatenate([np.full(3, 41.48e5), np.full(3, 5.0)])
    r = (0.02 * scale) ** 2
    q = np.full(f.shape[0], 1e-3)
    rng = np.random.default_rng(seed)
    z = truth @ h.T + rng.normal(size=(n_steps, h.shape[0])) * np.sqrt(r)
    init = KalmanState(truth[0] + 0.1, 1e-1 * np.eye(f.shape[0]))
    return f, h, u, q, r, z, init


def batch_map(f, h, u, q, r, z, init, n_steps):
    """Stacked whitened least squares over x_0..x_{T-1}; returns the last state."""
    n = f.shape[0]
    rows, rhs = [], []
    w0 = linalg.cholesky(np.linalg.inv(init.covariance))
    blk = np.zeros((n, n * n_steps))
    blk[:, :n] = w0
    rows.append(blk)
    rhs.append(w0 @ init.estimate)
    wq = np.diag(1 / np.sqrt(q))
    wr = np.diag(1 / np.sqrt(r))
    for t in range(n_steps):
        blk = np.zeros((h.shape[0], n * n_steps))
        blk[:, t * n:(t + 1) * n] = wr @ h
        rows.append(blk)
        rhs.append(wr @ z[t])
        if t > 0:
            blk = np.zeros((n, n * n_steps))
            blk[:, t * n:(t + 1) * n] = wq
            blk[:, (t - 1) * n:t * n] = -wq @ f
            rows.append(blk)
            rhs.append(wq @ u[t])
    x, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    return x[-n:]
