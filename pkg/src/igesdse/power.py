"""Power grid model: admittance, Newton-Raphson power flow, linear current
measurements in rectangular coordinates and Holt exponential smoothing.

Voltage states are interleaved ``(e_1, f_1, e_2, f_2, ...)`` in per unit.
"""
from dataclasses import dataclass, replace

import numpy as np

from .errors import NonConvergence
from .model import PQ, PV, SLACK

MISMATCH_TOL = 1e-8
MAX_ITER = 20


@dataclass(frozen=True)
class Admittance:
    g: np.ndarray
    b: np.ndarray

    @property
    def y(self):
        return self.g + 1j * self.b


@dataclass(frozen=True)
class BranchAdmittance:
    """Two-port admittances of every branch (from/to end currents)."""

    yff: np.ndarray
    yft: np.ndarray
    ytf: np.ndarray
    ytt: np.ndarray
    f: np.ndarray
    t: np.ndarray


def branch_admittance(grid):
    n_l = grid.n_branches
    yff = np.zeros(n_l, complex)
    yft = np.zeros(n_l, complex)
    ytf = np.zeros(n_l, complex)
    ytt = np.zeros(n_l, complex)
    f = np.zeros(n_l, int)
    t = np.zeros(n_l, int)
    for k, br in enumerate(grid.branches):
        ys = 1.0 / complex(br.r, br.x)
        half = 0.5j * br.b
        tap = br.tap
        yff[k] = (ys + half) / tap ** 2
        yft[k] = -ys / tap
        ytf[k] = -ys / tap
        ytt[k] = ys + half
        f[k], t[k] = br.from_bus - 1, br.to_bus - 1
    return BranchAdmittance(yff, yft, ytf, ytt, f, t)


def build_admittance(grid):
    """Bus admittance matrix from the pi model of each branch plus bus shunts."""
    n = grid.n_buses
    y = np.zeros((n, n), complex)
    ba = branch_admittance(grid)
    for k in range(grid.n_branches):
        i, j = ba.f[k], ba.t[k]
        y[i, i] += ba.yff[k]
        y[i, j] += ba.yft[k]
        y[j, i] += ba.ytf[k]
        y[j, j] += ba.ytt[k]
    for bus in grid.buses:
        y[bus.id - 1, bus.id - 1] += complex(bus.gs, bus.bs) / grid.base_mva
    return Admittance(y.real.copy(), y.imag.copy())


def to_rectangular(v):
    """Complex voltages -> interleaved ``(e, f)`` vector."""
    v = np.asarray(v, complex)
    x = np.empty(2 * v.size)
    x[0::2] = v.real
    x[1::2] = v.imag
    return x


def to_complex(x):
    x = np.asarray(x, float)
    return x[0::2] + 1j * x[1::2]


def scheduled_injection(grid, loads=None, gens=None):
    """Net scheduled complex power per bus in per unit.

    ``loads`` maps bus id -> (P MW, Q MVAr) and defaults to the bus table;
    ``gens`` maps bus id -> P MW and defaults to the generator table.
    """
    n = grid.n_buses
    s = np.zeros(n, complex)
    if loads is None:
        loads = {b.id: (b.pd, b.qd) for b in grid.buses}
    if gens is None:
        gens = {}
        for g in grid.generators:
            gens[g.bus] = gens.get(g.bus, 0.0) + g.pg
    for bid, (p, q) in loads.items():
        s[bid - 1] -= complex(p, q)
    for bid, p in gens.items():
        s[bid - 1] += p
    return s / grid.base_mva


def _flat_start(grid, vset):
    v = np.ones(grid.n_buses, complex)
    for bus in grid.buses:
        if bus.kind in (PV, SLACK):
            v[bus.id - 1] = vset.get(bus.id, bus.v_setpoint)
    return v


def _newton(y, s_sched, v, pv, pq, tol, max_iter):
    pvpq = np.concatenate([pv, pq])
    n_pvpq = len(pvpq)
    for it in range(max_iter + 1):
        mis = v * np.conj(y @ v) - s_sched
        f = np.concatenate([mis[pvpq].real, mis[pq].imag])
        if f.size == 0 or np.max(np.abs(f)) < tol:
            return v, it, True
        if it == max_iter or not np.all(np.isfinite(f)):
            break
        ibus = y @ v
        vnorm = v / np.abs(v)
        ds_dva = 1j * np.diag(v) @ np.conj(np.diag(ibus) - y * v)
        ds_dvm = np.diag(v) @ np.conj(y * vnorm) + np.diag(np.conj(ibus) * vnorm)
        jac = np.block([
            [ds_dva[np.ix_(pvpq, pvpq)].real, ds_dvm[np.ix_(pvpq, pq)].real],
            [ds_dva[np.ix_(pq, pvpq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        va = np.angle(v)
        vm = np.abs(v)
        va[pvpq] += dx[:n_pvpq]
        vm[pq] += dx[n_pvpq:]
        v = vm * np.exp(1j * va)
    return v, max_iter, False


def power_flow(grid, loads=None, gens=None, vset=None, v_prev=None, adm=None,
               tol=MISMATCH_TOL, max_iter=MAX_ITER):
    """Solve the AC power flow; returns interleaved rectangular voltages.

    Starts flat (setpoint magnitudes, zero angles). If that fails and
    ``v_prev`` (a previous rectangular solution) is given, retries once from
    it before raising :class:`NonConvergence`.
    """
    y = (adm or build_admittance(grid)).y
    vset = vset or {}
    s_sched = scheduled_injection(grid, loads, gens)
    kinds = {b.id - 1: b.kind for b in grid.buses}
    pv = np.array([i for i, k in kinds.items() if k == PV], int)
    pq = np.array([i for i, k in kinds.items() if k == PQ], int)
    v0 = _flat_start(grid, vset)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v, _, ok = _newton(y, s_sched, v0, pv, pq, tol, max_iter)
    if not ok and v_prev is not None:
        start = to_complex(v_prev)
        # hold voltage magnitude setpoints at generator buses
        for i in np.concatenate([pv, [grid.slack - 1]]):
            start[i] = abs(v0[i]) * np.exp(1j * np.angle(start[i]))
        start[grid.slack - 1] = v0[grid.slack - 1]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v, _, ok = _newton(y, s_sched, start, pv, pq, tol, max_iter)
    if not ok:
        raise NonConvergence(f"power flow did not converge in {max_iter} iterations")
    return to_rectangular(v)


def power_mismatch(grid, x, loads=None, gens=None, adm=None):
    """Complex mismatch ``S_injected - S_scheduled`` per bus (per unit)."""
    y = (adm or build_admittance(grid)).y
    v = to_complex(x)
    return v * np.conj(y @ v) - scheduled_injection(grid, loads, gens)


# --------------------------------------------------------------------------
# measurement model


@dataclass(frozen=True)
class ElectricMeterPlan:
    voltage_meters: tuple
    branch_current_meters: tuple
    injection_meters: tuple

    @classmethod
    def full(cls, grid):
        return cls(
            tuple(b.id for b in grid.buses),
            tuple((k, end) for k in range(grid.n_branches) for end in ("from", "to")),
            tuple(b.id for b in grid.buses),
        )


def _complex_rows(h, row, col, y):
    """Write the real/imag rows of ``I += y * V_col`` into ``h[row:row+2]``."""
    h[row, 2 * col] += y.real
    h[row, 2 * col + 1] -= y.imag
    h[row + 1, 2 * col] += y.imag
    h[row + 1, 2 * col + 1] += y.real


def electric_measurement_matrix(grid, adm, plan=None):
    """Stack voltage, branch-current and injected-current rows into ``H_E``."""
    plan = plan or ElectricMeterPlan.full(grid)
    n = grid.n_buses
    rows = 2 * (len(plan.voltage_meters) + len(plan.branch_current_meters) + len(plan.injection_meters))
    h = np.zeros((rows, 2 * n))
    r = 0
    for bus in plan.voltage_meters:
        i = bus - 1
        h[r, 2 * i] = 1.0
        h[r + 1, 2 * i + 1] = 1.0
        r += 2
    ba = branch_admittance(grid)
    for k, end in plan.branch_current_meters:
        f, t = ba.f[k], ba.t[k]
        if end == "from":
            _complex_rows(h, r, f, ba.yff[k])
            _complex_rows(h, r, t, ba.yft[k])
        else:
            _complex_rows(h, r, f, ba.ytf[k])
            _complex_rows(h, r, t, ba.ytt[k])
        r += 2
    y = adm.y
    for bus in plan.injection_meters:
        i = bus - 1
        for j in np.flatnonzero(y[i]):
            _complex_rows(h, r, j, y[i, j])
        r += 2
    return h


def meter_channel_names(grid, plan=None):
    plan = plan or ElectricMeterPlan.full(grid)
    label = {b.id: b.label or str(b.id) for b in grid.buses}
    names = []
    for bus in plan.voltage_meters:
        names += [f"bus{label[bus]}.e", f"bus{label[bus]}.f"]
    for k, end in plan.branch_current_meters:
        br = grid.branches[k]
        tag = f"branch{k + 1}_{label[br.from_bus]}_{label[br.to_bus]}"
        side = "i" if end == "from" else "j"
        names += [f"{tag}.ir_{side}", f"{tag}.ii_{side}"]
    for bus in plan.injection_meters:
        names += [f"bus{label[bus]}.inj_ir", f"bus{label[bus]}.inj_ii"]
    return names


# --------------------------------------------------------------------------
# Holt exponential smoothing


@dataclass(frozen=True)
class HoltState:
    level: np.ndarray
    trend: np.ndarray
    alpha: float
    beta: float


def holt_init(x1, x2, alpha, beta):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError(f"shape mismatch {x1.shape} vs {x2.shape}")
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("smoothing parameters must lie in (0, 1)")
    return HoltState(x2.copy(), x2 - x1, alpha, beta)


def holt_predict(h):
    return h.level + h.trend


def holt_step(h, observed):
    """Absorb ``observed`` and forecast one step ahead.

    Returns ``(new_state, predicted_next, u_next)`` with
    ``predicted_next == alpha * observed + u_next``.
    """
    observed = np.asarray(observed, dtype=float)
    if observed.shape != h.level.shape:
        raise ValueError(f"shape mismatch {observed.shape} vs {h.level.shape}")
    a, b = h.alpha, h.beta
    level = a * observed + (1.0 - a) * (h.level + h.trend)
    trend = b * (level - h.level) + (1.0 - b) * h.trend
    predicted = level + trend
    u_next = predicted - a * observed
    return replace(h, level=level, trend=trend), predicted, u_next
