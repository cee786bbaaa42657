"""Gas turbine coupling and the joint electric/gas state-space model."""
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import gas, power


def gtu_power_to_flow(p_out, eta):
    """Gas mass flow (kg/s) burnt by a GTU producing ``p_out`` MW."""
    if not eta > 0:
        raise ValueError("eta must be > 0")
    return p_out / eta


def injected_power(x, adm, bus):
    """Real power injected at ``bus`` (1-based) in per unit for rectangular state ``x``."""
    i = bus - 1
    e, f = np.asarray(x)[0::2], np.asarray(x)[1::2]
    g, b = adm.g[i], adm.b[i]
    return float(np.sum(e[i] * (g * e - b * f) + f[i] * (g * f + b * e)))


def gtu_predicted_offtake(x, adm, gtu, base_mva):
    """Sink offtake (kg/s) implied by the GTU bus injection in state ``x``."""
    return injected_power(x, adm, gtu.bus) * base_mva / gtu.eta


@dataclass(frozen=True)
class JointModel:
    """Block-diagonal joint model ``x' = F x + u``, ``z = H x``.

    Electric states come first (``2 n_B`` interleaved voltages), then gas
    densities and pipe-end flows.
    """

    model: object
    f_matrix: np.ndarray
    h_matrix: np.ndarray
    transition: gas.GasTransition
    admittance: power.Admittance
    h_electric: np.ndarray
    h_gas: np.ndarray
    channel_names: tuple
    channel_groups: tuple
    state_names: tuple
    n_electric: int
    alpha: float
    beta: float
    _gtu_rows: dict = field(default_factory=dict, repr=False)

    @property
    def n_states(self):
        return self.f_matrix.shape[0]

    @property
    def n_measurements(self):
        return self.h_matrix.shape[0]

    @property
    def gas_slice(self):
        return slice(self.n_electric, self.n_states)

    @property
    def electric_slice(self):
        return slice(0, self.n_electric)

    def sink_offtakes(self, x):
        """Net offtake of every sink node for joint state ``x`` (kg/s)."""
        b22 = self.transition.blocks["B22"]
        return b22 @ np.asarray(x)[self.n_electric + self.model.gas.n_nodes:]

    def loaded_sinks(self):
        """Sinks whose offtake is a forecast gas load (not GTU, not passive)."""
        loads = dict(self.model.scenario.gas_loads)
        return [s for s in self.model.gas.sinks
                if self.model.gtu_for_sink(s) is None and s in loads]

    def control_input(self, x_prev, predicted_voltages, predicted_loads):
        """Control input ``u`` such that ``F x_prev + u`` is the forecast state.

        ``predicted_loads`` maps loaded sink node ids to forecast offtakes; GTU
        sinks are forecast from ``predicted_voltages``; remaining sinks are
        passive junctions with zero offtake.
        """
        m = self.model
        x_prev = np.asarray(x_prev, dtype=float)
        u_e = np.asarray(predicted_voltages, dtype=float) - self.alpha * x_prev[:self.n_electric]
        outflows = []
        for s in m.gas.sinks:
            gtu = m.gtu_for_sink(s)
            if gtu is not None:
                outflows.append(gtu_predicted_offtake(predicted_voltages, self.admittance, gtu,
                                                      m.grid.base_mva))
            else:
                outflows.append(predicted_loads.get(s, 0.0))
        u_vec = gas.boundary_vector(m.gas, m.gas.source_densities(), outflows)
        return np.concatenate([u_e, self.transition.apply_inverse(u_vec)])

    def input_builder(self, load_source="filtered"):
        return InputBuilder(self, load_source)


def gas_channel_names(net):
    names, groups = [], []
    for n in net.nodes:
        names.append(f"node{n.label}.pressure")
        groups.append("pressure")
    for n in net.nodes:
        names.append(f"node{n.label}.mflow")
        groups.append("mass_flow")
    return names, groups


def _electric_groups(names):
    groups = []
    for name in names:
        suffix = name.rsplit(".", 1)[1]
        if suffix in ("e", "f"):
            groups.append(suffix)
        elif suffix.startswith("inj"):
            groups.append("injection_current")
        else:
            groups.append("branch_current")
    return groups


def state_names(model):
    names = []
    for b in model.grid.buses:
        names += [f"bus{b.label}.e", f"bus{b.label}.f"]
    for n in model.gas.nodes:
        names.append(f"node{n.label}.density")
    for p in model.gas.pipelines:
        tag = p.label or f"{model.gas.node(p.from_node).label}_{model.gas.node(p.to_node).label}"
        names += [f"pipe{tag}.mflow_i", f"pipe{tag}.mflow_j"]
    return names


def build_joint(model, tr=None, h_e=None, h_g=None, plan=None):
    """Assemble the block-diagonal joint model from its component models."""
    tr = tr or gas.build_transition(model.gas)
    adm = power.build_admittance(model.grid)
    h_e = h_e if h_e is not None else power.electric_measurement_matrix(model.grid, adm, plan)
    h_g = h_g if h_g is not None else gas.gas_measurement_matrix(model.gas)
    n_e = 2 * model.grid.n_buses
    n_g = model.gas.n_states
    if h_e.shape[1] != n_e or h_g.shape[1] != n_g or tr.n_states != n_g:
        raise ValueError("component model dimensions do not match the joint layout")
    alpha = model.scenario.alpha
    f_mat = linalg.block_diag(alpha * np.eye(n_e), tr.f_matrix)
    h_mat = linalg.block_diag(h_e, h_g)
    e_names = power.meter_channel_names(model.grid, plan)
    g_names, g_groups = gas_channel_names(model.gas)
    return JointModel(
        model=model, f_matrix=f_mat, h_matrix=h_mat, transition=tr, admittance=adm,
        h_electric=h_e, h_gas=h_g,
        channel_names=tuple(e_names + g_names),
        channel_groups=tuple(_electric_groups(e_names) + g_groups),
        state_names=tuple(state_names(model)), n_electric=n_e,
        alpha=alpha, beta=model.scenario.beta,
    )


class InputBuilder:
    """Per-run forecaster producing the control input of each prediction step.

    Voltage forecasts run Holt smoothing on the filtered voltage estimates.
    Gas-load forecasts run one Holt smoother per loaded sink, fed either by the
    filtered offtake estimates (``load_source="filtered"``) or by the metered
    net node flows (``"measured"``). Until two observations exist the forecast
    is persistence.
    """

    def __init__(self, jm, load_source="filtered"):
        if load_source not in ("filtered", "measured"):
            raise ValueError("load_source must be 'filtered' or 'measured'")
        self.jm = jm
        self.load_source = load_source
        self.sinks = jm.loaded_sinks()
        n_n = jm.model.gas.n_nodes
        flow_row0 = jm.h_electric.shape[0] + n_n
        self._meter_rows = np.array([flow_row0 + s - 1 for s in self.sinks], int)
        sink_pos = {s: k for k, s in enumerate(jm.model.gas.sinks)}
        self._sink_pos = np.array([sink_pos[s] for s in self.sinks], int)
        self._history = []
        self._volt = None
        self._load = None
        self._last = None

    def _load_obs(self, x, z):
        if self.load_source == "measured":
            return np.asarray(z, dtype=float)[self._meter_rows]
        return self.jm.sink_offtakes(x)[self._sink_pos]

    def observe(self, x_filtered, z):
        x_filtered = np.asarray(x_filtered, dtype=float)
        volt = x_filtered[:self.jm.n_electric]
        load = self._load_obs(x_filtered, z)
        a, b = self.jm.alpha, self.jm.beta
        if self._volt is None and len(self._history) < 1:
            self._history.append((volt, load))
            self._pred = (volt.copy(), load.copy())
        elif self._volt is None:
            (v1, l1) = self._history[0]
            self._volt = power.holt_init(v1, volt, a, b)
            self._load = power.holt_init(l1, load, a, b)
            self._pred = (power.holt_predict(self._volt), power.holt_predict(self._load))
        else:
            self._volt, pv, _ = power.holt_step(self._volt, volt)
            self._load, pl, _ = power.holt_step(self._load, load)
            self._pred = (pv, pl)
        self._last = x_filtered

    def input(self):
        """Control input for predicting the next state from the last observed one."""
        if self._last is None:
            raise RuntimeError("observe() must be called before input()")
        pv, pl = self._pred
        return self.jm.control_input(self._last, pv, dict(zip(self.sinks, pl)))
