"""Ground-truth trajectories and synthetic measurements.

Random streams are derived from the scenario seed with
``numpy.random.SeedSequence``: stream 0 drives load perturbations, stream 1
drives measurement noise. Gaussian draws use ``Generator.standard_normal``
(PCG64 bit generator); Laplace samples use the inverse CDF
``loc - b * sign(u) * log(1 - 2|u|)`` and Cauchy samples the tangent
transform ``loc + s * tan(pi * u)``, both on ``u = Generator.random() - 0.5``.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from . import gas, power
from .coupling import gtu_power_to_flow, injected_power
from .errors import NumericFailure
from .model import BAR, PV, NoiseSpec

ELECTRIC_GROUPS = ("e", "f", "branch_current", "injection_current")


def daily_shape(hour, peak_hour=18.0, trough_hour=4.0):
    """Smooth 24 h load shape in [-1, 1]: -1 at ``trough_hour``, +1 at ``peak_hour``."""
    rise = (peak_hour - trough_hour) % 24.0
    h = (hour - trough_hour) % 24.0
    if h <= rise:
        return -math.cos(math.pi * h / rise)
    return math.cos(math.pi * (h - rise) / (24.0 - rise))


def _rngs(seed):
    seq = np.random.SeedSequence(seed)
    profile, noise = seq.spawn(2)
    return np.random.Generator(np.random.PCG64(profile)), np.random.Generator(np.random.PCG64(noise))


@dataclass(frozen=True)
class Schedule:
    """Per-step electric loads (MW/MVAr), generator dispatch (MW) and gas loads (kg/s)."""

    bus_loads: np.ndarray      # (S, n_B, 2)
    gen_power: np.ndarray      # (S, n_B), zero where no generator
    gtu_power: np.ndarray      # (S, n_gtu)
    gas_loads: np.ndarray      # (S, n_sink) offtake of non-GTU sinks


def gtu_nominal(model):
    nominal = dict(model.scenario.gtu_power)
    out = []
    for g in model.gtus:
        default = sum(gen.pg for gen in model.grid.generators if gen.bus == g.bus)
        out.append(nominal.get(g.bus, default))
    return np.array(out)


def build_schedule(model):
    """Load and dispatch profiles for every step of the horizon.

    Loads follow the daily shape with a seeded multiplicative perturbation.
    Generator dispatch other than GTUs and the slack covers the remaining
    load in proportion to each unit's case dispatch; the slack covers losses.
    """
    sc, grid = model.scenario, model.grid
    rng, _ = _rngs(sc.seed)
    n_steps, n_b = sc.horizon_steps, grid.n_buses
    sinks = model.gas.sinks
    gtu_buses = [g.bus for g in model.gtus]
    gtu_nom = gtu_nominal(model)
    gas_nom = np.array([sc.gas_load(s) if model.gtu_for_sink(s) is None else 0.0 for s in sinks])
    pd = np.array([b.pd for b in grid.buses])
    qd = np.array([b.qd for b in grid.buses])
    case_gen = np.zeros(n_b)
    for g in grid.generators:
        case_gen[g.bus - 1] += g.pg
    slack = grid.slack - 1
    movable = np.array([b.kind == PV and b.id not in gtu_buses for b in grid.buses])
    share = np.where(movable, case_gen, 0.0)
    share = share / share.sum() if share.sum() > 0 else share

    loads = np.zeros((n_steps, n_b, 2))
    gens = np.zeros((n_steps, n_b))
    gtu = np.zeros((n_steps, len(model.gtus)))
    gas_loads = np.zeros((n_steps, len(sinks)))
    for t in range(n_steps):
        hour = t * model.gas.dt / 3600.0
        lf = 1.0 + sc.load_amplitude * daily_shape(hour, sc.peak_hour, sc.trough_hour)
        el = lf * (1.0 + sc.perturbation * rng.standard_normal(n_b))
        loads[t, :, 0] = pd * el
        loads[t, :, 1] = qd * el
        gtu[t] = gtu_nom * lf * (1.0 + sc.perturbation * rng.standard_normal(len(gtu_nom)))
        gas_loads[t] = gas_nom * lf * (1.0 + sc.perturbation * rng.standard_normal(len(sinks)))
        gens[t, slack] = case_gen[slack] * lf
        for k, bus in enumerate(gtu_buses):
            gens[t, bus - 1] = gtu[t, k]
        remaining = loads[t, :, 0].sum() - gens[t].sum()
        gens[t] += share * remaining
    return Schedule(loads, gens, gtu, gas_loads)


def simulate_truth(model, jm=None, schedule=None):
    """Simulate the true joint state trajectory, shape ``(S, n_states)``.

    Each step solves the power flow for the scheduled loads, converts the GTU
    bus injections of the solved flow into sink offtakes, and advances the
    gas network from a steady initial state.
    """
    from .coupling import build_joint

    jm = jm or build_joint(model)
    schedule = schedule or build_schedule(model)
    grid, net = model.grid, model.gas
    n_steps = model.scenario.horizon_steps
    sinks = net.sinks
    sink_pos = {s: k for k, s in enumerate(sinks)}
    rho_c = net.source_densities()
    src = np.array(net.sources) - 1
    truth = np.empty((n_steps, jm.n_states))
    x_e = None
    x_g = None
    for t in range(n_steps):
        loads = {b.id: tuple(schedule.bus_loads[t, b.id - 1]) for b in grid.buses}
        gens = {b.id: schedule.gen_power[t, b.id - 1] for b in grid.buses if b.kind != "pq"}
        x_e = power.power_flow(grid, loads, gens, v_prev=x_e, adm=jm.admittance)
        outflows = schedule.gas_loads[t].copy()
        for g in model.gtus:
            p_mw = injected_power(x_e, jm.admittance, g.bus) * grid.base_mva
            outflows[sink_pos[g.gas_sink]] = gtu_power_to_flow(p_mw, g.eta)
        if x_g is None:
            x_g = gas.solve_steady(net, rho_c, outflows).vector
        else:
            x_g = gas.step_gas(jm.transition, x_g, gas.boundary_vector(net, rho_c, outflows))
        # source rows read rho = rho_C; drop the LU round-off so they stay exact
        x_g[src] = rho_c
        if np.any(x_g[:net.n_nodes] <= 0):
            raise NumericFailure("gas density became non-positive", step=t)
        truth[t, :jm.n_electric] = x_e
        truth[t, jm.n_electric:] = x_g
    return truth


def channel_scales(jm, units="relative"):
    """Normalization of every measurement channel.

    Electric channels are per unit already (scale 1). Pressure channels are
    scaled by the highest source pressure and flow channels by the peak
    scheduled sink offtake implied by the configured nominal loads.
    """
    m = jm.model
    scales = np.ones(jm.n_measurements)
    if units == "absolute":
        return scales
    c2 = m.gas.sound_speed ** 2
    p_nom = c2 * max(m.gas.source_densities())
    sc = m.scenario
    peak = 1.0 + sc.load_amplitude
    flows = [v for _, v in sc.gas_loads]
    flows += [p / g.eta for p, g in zip(gtu_nominal(m), m.gtus)]
    f_nom = peak * max(flows) if flows and max(flows) > 0 else 1.0
    for k, group in enumerate(jm.channel_groups):
        if group == "pressure":
            scales[k] = p_nom
        elif group == "mass_flow":
            scales[k] = f_nom
    return scales


def resolve_specs(jm, specs):
    """Index of the governing spec per channel (last match wins, -1 for none)."""
    owner = np.full(jm.n_measurements, -1)
    names = list(jm.channel_names)
    for k, spec in enumerate(specs):
        if spec.target == "all":
            owner[:] = k
        elif spec.target in jm.channel_groups:
            owner[[i for i, g in enumerate(jm.channel_groups) if g == spec.target]] = k
        elif spec.target in ("electric", "gas"):
            want = spec.target == "electric"
            owner[[i for i, g in enumerate(jm.channel_groups) if (g in ELECTRIC_GROUPS) == want]] = k
        elif spec.target in names:
            owner[names.index(spec.target)] = k
        else:
            raise ValueError(f"noise target {spec.target!r} matches no channel")
    return owner


def gaussian_variance(spec):
    """Variance the filter assumes for a channel governed by ``spec``."""
    if spec.kind == "laplace":
        return 2.0 * spec.scale ** 2
    return spec.scale ** 2


def measurement_variances(jm, specs, units="relative"):
    owner = resolve_specs(jm, specs)
    if np.any(owner < 0):
        missing = [jm.channel_names[i] for i in np.flatnonzero(owner < 0)][:3]
        raise ValueError(f"channels without a noise spec: {missing}")
    scales = channel_scales(jm, units)
    return np.array([gaussian_variance(specs[o]) for o in owner]) * scales ** 2


def sample_noise(specs, owner, shape, seed):
    """Normalized noise matrix of ``shape = (S, m)``."""
    _, rng = _rngs(seed)
    normal = rng.standard_normal(shape)
    uni = rng.random(shape) - 0.5
    w = np.zeros(shape)
    for k, spec in enumerate(specs):
        cols = owner == k
        if not np.any(cols):
            continue
        if spec.kind == "gaussian":
            w[:, cols] = spec.location + spec.scale * normal[:, cols]
        elif spec.kind == "biased_gaussian":
            w[:, cols] = spec.location + spec.bias + spec.scale * normal[:, cols]
        elif spec.kind == "laplace":
            u = uni[:, cols]
            w[:, cols] = spec.location - spec.scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
        elif spec.kind == "cauchy":
            w[:, cols] = spec.location + spec.scale * np.tan(math.pi * uni[:, cols])
        else:
            raise ValueError(f"unknown noise kind {spec.kind!r}")
    return w


def synthesize_measurements(truth, jm, specs, seed, units="relative"):
    """``z_t = H x_t + w_t`` with ``w_t`` drawn per channel spec and scaled to channel units."""
    owner = resolve_specs(jm, specs)
    z_true = np.asarray(truth) @ jm.h_matrix.T
    w = sample_noise(specs, owner, z_true.shape, seed)
    return z_true + w * channel_scales(jm, units)


# --------------------------------------------------------------------------
# run artifacts and CSV formats


@dataclass
class RunArtifacts:
    """Aligned series in measurement-channel space (plus state-space copies)."""

    truth: np.ndarray
    measurements: np.ndarray
    estimates: np.ndarray
    channel_names: tuple
    channel_groups: tuple
    scales: np.ndarray
    truth_states: np.ndarray = None
    estimate_states: np.ndarray = None


def make_artifacts(jm, truth_states, measurements, estimate_states, units="relative"):
    return RunArtifacts(
        truth=truth_states @ jm.h_matrix.T,
        measurements=np.asarray(measurements),
        estimates=estimate_states @ jm.h_matrix.T,
        channel_names=jm.channel_names,
        channel_groups=jm.channel_groups,
        scales=channel_scales(jm, units),
        truth_states=truth_states,
        estimate_states=estimate_states,
    )


def state_io_columns(jm):
    """CSV column names and multipliers for state files (densities shown as pressure in bar)."""
    c2 = jm.model.gas.sound_speed ** 2
    names, factors = [], []
    for name in jm.state_names:
        if name.endswith(".density"):
            names.append(name[:-len(".density")] + ".pressure_bar")
            factors.append(c2 / BAR)
        else:
            names.append(name)
            factors.append(1.0)
    return names, np.array(factors)


def measurement_io_columns(jm):
    names, factors = [], []
    for name, group in zip(jm.channel_names, jm.channel_groups):
        if group == "pressure":
            names.append(name + "_bar")
            factors.append(1.0 / BAR)
        else:
            names.append(name)
            factors.append(1.0)
    return names, np.array(factors)


def write_series(path, columns, values):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + list(columns))
        for t, row in enumerate(values):
            writer.writerow([t] + [repr(float(v)) for v in row])


def read_series(path, columns=None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row[1:]] for row in reader if row]
    if header[0] != "step":
        raise ValueError(f"{path}: first column must be 'step'")
    if columns is not None and header[1:] != list(columns):
        raise ValueError(f"{path}: columns do not match the model's channel layout")
    return header[1:], np.array(rows).reshape(len(rows), len(header) - 1)


def write_states(path, jm, states):
    names, factors = state_io_columns(jm)
    write_series(path, names, np.asarray(states) * factors)


def read_states(path, jm):
    names, factors = state_io_columns(jm)
    _, values = read_series(path, names)
    return values / factors


def to_io_measurements(jm, z):
    return np.asarray(z) * measurement_io_columns(jm)[1]


def from_io_measurements(jm, values):
    return np.asarray(values) / measurement_io_columns(jm)[1]


def write_measurements(path, jm, z):
    names, _ = measurement_io_columns(jm)
    write_series(path, names, to_io_measurements(jm, z))


def read_measurements(path, jm):
    names, _ = measurement_io_columns(jm)
    _, values = read_series(path, names)
    return from_io_measurements(jm, values)


PRESET_BIAS_TARGETS = ("node14.pressure", "node21.mflow", "bus11.e", "bus11.f")


def noise_preset(name, sigma=0.02, bias=0.02, bias_targets=PRESET_BIAS_TARGETS):
    """Noise spec lists for the named measurement-error conditions.

    ``laplace`` uses scale ``sigma / sqrt(2)`` (standard deviation ``sigma``);
    ``cauchy`` uses scale ``sigma``.
    """
    if name == "gaussian":
        return (NoiseSpec("gaussian", sigma),)
    if name == "biased":
        return (NoiseSpec("gaussian", sigma),) + tuple(
            NoiseSpec("biased_gaussian", sigma, bias=bias, target=t) for t in bias_targets)
    if name == "laplace":
        return (NoiseSpec("laplace", sigma / math.sqrt(2.0)),)
    if name == "cauchy":
        return (NoiseSpec("cauchy", sigma),)
    raise ValueError(f"unknown scenario {name!r}")
