"""Linear Kalman filter over the joint model."""
import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NumericFailure


@dataclass(frozen=True)
class KalmanState:
    estimate: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class NoiseCov:
    """Diagonal process (``q``) and measurement (``r``) covariances, stored as vectors."""

    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        q, r = np.asarray(self.q), np.asarray(self.r)
        q_diag = np.diag(q) if q.ndim == 2 else q
        r_diag = np.diag(r) if r.ndim == 2 else r
        if np.any(q_diag <= 0) or np.any(r_diag <= 0):
            raise ValueError("covariance diagonals must be strictly positive")


def _as_cov(c, n):
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        return np.full(n, float(c))
    return c


def _add_cov(p, c):
    c = np.asarray(c, dtype=float)
    if c.ndim == 2:
        return p + c
    out = p.copy()
    out[np.diag_indices_from(out)] += c
    return out


def kf_predict(kf, f, u, q):
    """``x <- F x + u``; ``P <- F P F' + Q``. ``q`` may be a matrix, a diagonal or a scalar."""
    x = f @ kf.estimate + u
    p = _add_cov(f @ kf.covariance @ f.T, _as_cov(q, f.shape[0]))
    return KalmanState(x, 0.5 * (p + p.T))


def kf_update(kf, z, h, r):
    """Joseph-form measurement update. ``r`` may be a matrix, a diagonal or a scalar."""
    x, p = kf.estimate, kf.covariance
    r = _as_cov(r, h.shape[0])
    r_mat = r if r.ndim == 2 else np.diag(r)
    ph = p @ h.T
    s = _add_cov(h @ ph, r)
    s = 0.5 * (s + s.T)
    # judge definiteness on the unit-diagonal form so channel units do not matter
    d = np.sqrt(np.diag(s))
    if not np.all(d > 0) or not np.all(np.isfinite(d)):
        raise NumericFailure("innovation covariance has a non-positive diagonal")
    try:
        cho = linalg.cho_factor(s / np.outer(d, d), check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericFailure(f"innovation covariance is not positive definite: {exc}") from None
    if np.min(np.diag(cho[0])) ** 2 < 1e-15:
        raise NumericFailure("innovation covariance is numerically singular")
    gain = (linalg.cho_solve(cho, ph.T / d[:, None]) / d[:, None]).T
    x_new = x + gain @ (np.asarray(z, dtype=float) - h @ x)
    ikh = np.eye(p.shape[0]) - gain @ h
    p_new = ikh @ p @ ikh.T + gain @ r_mat @ gain.T
    return KalmanState(x_new, 0.5 * (p_new + p_new.T))


class _FixedInputs:
    def __init__(self, inputs):
        self.inputs = np.asarray(inputs, dtype=float)
        self.t = 0

    def observe(self, x, z):
        self.t += 1

    def input(self):
        return self.inputs[self.t]


def filter_series(f, h, measurements, cov, init, inputs, timings=None):
    """Filter a measurement series.

    ``init`` is the prior at step 0; step 0 is an update only, later steps
    predict then update. ``inputs`` is either an object with
    ``observe(x_filtered, z)`` and ``input()`` methods or an array whose row
    ``t`` is the control input used to predict step ``t`` (row 0 unused).
    Returns the filtered estimates and the final :class:`KalmanState`.
    When ``timings`` is a list, the wall time of each predict+update is appended.
    """
    measurements = np.asarray(measurements, dtype=float)
    n_steps = measurements.shape[0] if measurements.size else 0
    out = np.empty((n_steps, f.shape[0]))
    if n_steps == 0:
        return out, init
    if not hasattr(inputs, "observe"):
        inputs = _FixedInputs(inputs)
    kf = init
    for t in range(n_steps):
        try:
            start = time.perf_counter()
            if t > 0:
                kf = kf_predict(kf, f, inputs.input(), cov.q)
            kf = kf_update(kf, measurements[t], h, cov.r)
            if timings is not None:
                timings.append(time.perf_counter() - start)
        except NumericFailure as exc:
            raise NumericFailure(str(exc), step=t) from None
        if not np.all(np.isfinite(kf.estimate)):
            raise NumericFailure("estimate is not finite", step=t)
        out[t] = kf.estimate
        inputs.observe(kf.estimate, measurements[t])
    return out, kf


def least_squares_init(h, z, r, p0):
    """Weighted least-squares state from one measurement vector, with ``P = p0 I``."""
    w = 1.0 / np.sqrt(_as_cov(r, h.shape[0]))
    x, *_ = np.linalg.lstsq(h * w[:, None], z * w, rcond=None)
    return KalmanState(x, p0 * np.eye(h.shape[1]))


def offtake_noise(jm, variance):
    """Gas process covariance induced by independent sink-offtake forecast errors.

    Each sink boundary row of ``U`` gets ``variance`` (kg/s)^2, mapped into the
    state through the inverse of the implicit-step matrix.
    """
    net = jm.model.gas
    row0 = 2 * net.n_pipes + len(net.sources)
    cols = np.zeros((net.n_states, len(net.sinks)))
    cols[row0 + np.arange(len(net.sinks)), np.arange(len(net.sinks))] = 1.0
    m = jm.transition.apply_inverse(cols)
    return variance * (m @ m.T)


def default_noise_cov(jm, r):
    """Process covariance from the scenario's tuning plus measurement variances ``r``.

    Diagonal unless the scenario sets ``q_offtake``, in which case the gas
    block also carries :func:`offtake_noise` and ``q`` is a full matrix.
    """
    sc = jm.model.scenario
    q = np.concatenate([np.full(jm.n_electric, sc.q_electric),
                        np.full(jm.n_states - jm.n_electric, sc.q_gas)])
    if sc.q_offtake > 0:
        q = np.diag(q)
        g = jm.gas_slice
        q[g, g] += offtake_noise(jm, sc.q_offtake)
    return NoiseCov(q, np.asarray(r, dtype=float))


def initial_state(jm, z0, r):
    """Prior at step 0 built from the first measurement vector.

    Voltages come from weighted least squares on the electric rows. The gas
    rows do not determine individual pipe-end flows, so the gas block is the
    steady state for the metered sink offtakes; passive junctions get zero.
    """
    from . import gas

    m = jm.model
    z0 = np.asarray(z0, dtype=float)
    r = _as_cov(r, jm.n_measurements)
    n_he = jm.h_electric.shape[0]
    x_e = least_squares_init(jm.h_electric, z0[:n_he], r[:n_he], 1.0).estimate
    loaded = set(jm.loaded_sinks())
    flow0 = n_he + m.gas.n_nodes
    outflows = []
    for s in m.gas.sinks:
        gtu = m.gtu_for_sink(s)
        if gtu is not None or s in loaded:
            outflows.append(z0[flow0 + s - 1])
        else:
            outflows.append(0.0)
    x_g = gas.solve_steady(m.gas, m.gas.source_densities(), outflows).vector
    x0 = np.concatenate([x_e, x_g])
    return KalmanState(x0, m.scenario.p0 * np.eye(jm.n_states))


def run_dse(jm, measurements, cov, init=None, inputs=None, timings=None, load_source="filtered"):
    """Run the filter over the joint model; returns ``(estimates, final_state)``."""
    measurements = np.asarray(measurements, dtype=float)
    if measurements.size == 0:
        return np.empty((0, jm.n_states)), init
    if init is None:
        init = initial_state(jm, measurements[0], cov.r)
    if inputs is None:
        inputs = jm.input_builder(load_source)
    return filter_series(jm.f_matrix, jm.h_matrix, measurements, cov, init, inputs, timings)
