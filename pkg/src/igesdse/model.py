"""Integrated gas/electric system description: data types, loading and validation.

Units: gas quantities are SI (kg/m^3, kg/s, Pa, m); electric quantities are
per unit on ``base_mva`` except loads and generation, which are stored in
MW/MVAr as in MATPOWER case tables. Pressures are given in bar only in
files (1 bar = 1e5 Pa).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .errors import ParseError, ValidationError
from . import matpower

BAR = 1.0e5

SOURCE = "source"
SINK = "sink"
SLACK, PV, PQ = "slack", "pv", "pq"


@dataclass(frozen=True)
class Issue:
    code: str
    field: str
    message: str

    def __str__(self):
        return f"{self.code} [{self.field}]: {self.message}"


@dataclass(frozen=True)
class GasNode:
    id: int
    kind: str
    fixed_density: Optional[float] = None
    label: str = ""

    @property
    def is_source(self):
        return self.kind == SOURCE


@dataclass(frozen=True)
class Pipeline:
    from_node: int
    to_node: int
    length: float
    diameter: float
    avg_velocity: float = 5.0
    label: str = ""

    @property
    def cross_section(self):
        return math.pi * self.diameter ** 2 / 4.0


@dataclass(frozen=True)
class GasNetworkSpec:
    nodes: tuple
    pipelines: tuple
    friction: float = 0.015
    sound_speed: float = 340.0
    dt: float = 600.0

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_pipes(self):
        return len(self.pipelines)

    @property
    def n_states(self):
        return self.n_nodes + 2 * self.n_pipes

    @property
    def sources(self):
        return [n.id for n in self.nodes if n.kind == SOURCE]

    @property
    def sinks(self):
        return [n.id for n in self.nodes if n.kind == SINK]

    def node(self, node_id):
        return self.nodes[node_id - 1]

    def source_densities(self):
        return [n.fixed_density for n in self.nodes if n.kind == SOURCE]


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = PQ
    v_setpoint: float = 1.0
    pd: float = 0.0
    qd: float = 0.0
    gs: float = 0.0
    bs: float = 0.0
    label: str = ""


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0


@dataclass(frozen=True)
class Generator:
    bus: int
    pg: float
    vg: float = 1.0


@dataclass(frozen=True)
class PowerGridSpec:
    buses: tuple
    branches: tuple
    generators: tuple = ()
    base_mva: float = 100.0

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_branches(self):
        return len(self.branches)

    @property
    def slack(self):
        return next(b.id for b in self.buses if b.kind == SLACK)


@dataclass(frozen=True)
class GtuCoupling:
    bus: int
    gas_sink: int
    eta: float = 20.148


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement error model for a set of channels.

    ``kind`` is one of ``gaussian``, ``biased_gaussian``, ``cauchy`` or
    ``laplace``. For Gaussian kinds ``scale`` is the standard deviation; for
    Cauchy and Laplace it is the distribution scale parameter. ``target`` is
    ``all``, a channel group name, or a single channel name.
    """

    kind: str = "gaussian"
    scale: float = 0.02
    bias: float = 0.0
    location: float = 0.0
    target: str = "all"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "gaussian"
    horizon_steps: int = 144
    seed: int = 42
    alpha: float = 0.8
    beta: float = 0.7
    load_amplitude: float = 0.3
    peak_hour: float = 18.0
    trough_hour: float = 4.0
    perturbation: float = 0.01
    gas_loads: tuple = ()
    gtu_power: tuple = ()
    noise: tuple = (NoiseSpec(),)
    noise_units: str = "relative"
    q_electric: float = 1e-6
    q_gas: float = 1e-4
    p0: float = 1e-2
    q_offtake: float = 0.0
    warmup: int = 2

    def gas_load(self, node_id):
        return dict(self.gas_loads).get(node_id, 0.0)


@dataclass(frozen=True)
class IgesModel:
    gas: GasNetworkSpec
    grid: PowerGridSpec
    gtus: tuple = ()
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def gtu_for_sink(self, node_id):
        for g in self.gtus:
            if g.gas_sink == node_id:
                return g
        return None


# --------------------------------------------------------------------------
# validation


def _connected(n, edges):
    adj = {i: set() for i in range(1, n + 1)}
    for i, j in edges:
        if i in adj and j in adj:
            adj[i].add(j)
            adj[j].add(i)
    if n == 0:
        return True
    seen = {1}
    stack = [1]
    while stack:
        for k in adj[stack.pop()]:
            if k not in seen:
                seen.add(k)
                stack.append(k)
    return len(seen) == n


def _validate_gas(gas):
    issues = []
    ids = [n.id for n in gas.nodes]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        issues.append(Issue("DuplicateNodeId", "gas_network.nodes", f"duplicate node ids {dup}"))
    elif ids != list(range(1, len(ids) + 1)):
        issues.append(Issue("NodeIdsNotDense", "gas_network.nodes", "node ids must be 1..n_N in order"))
    known = set(ids)
    for n in gas.nodes:
        if n.kind not in (SOURCE, SINK):
            issues.append(Issue("NodeKind", f"gas_network.nodes[{n.id}].kind", f"unknown kind {n.kind!r}"))
        elif n.kind == SOURCE and not (n.fixed_density is not None and n.fixed_density > 0):
            issues.append(Issue("SourceDensity", f"gas_network.nodes[{n.id}]", "source node needs a positive fixed density"))
        elif n.kind == SINK and n.fixed_density is not None:
            issues.append(Issue("SinkDensity", f"gas_network.nodes[{n.id}]", "sink node cannot carry a fixed density"))
    for k, p in enumerate(gas.pipelines):
        where = f"gas_network.pipelines[{k}]"
        if p.from_node not in known or p.to_node not in known:
            issues.append(Issue("UnknownPipelineNode", where, f"endpoint {p.from_node}-{p.to_node} not a node"))
        if p.from_node >= p.to_node:
            issues.append(Issue("PipelineOrientation", where, f"from ({p.from_node}) must be < to ({p.to_node})"))
        for name in ("length", "diameter", "avg_velocity"):
            if not getattr(p, name) > 0:
                issues.append(Issue("NonPositivePipeParameter", f"{where}.{name}", f"{name} must be > 0"))
    for name in ("friction", "sound_speed", "dt"):
        if not getattr(gas, name) > 0:
            issues.append(Issue("NonPositiveConstant", f"gas_network.{name}", f"{name} must be > 0"))
    if not any(n.kind == SOURCE for n in gas.nodes):
        issues.append(Issue("NoSource", "gas_network.nodes", "network needs at least one source node"))
    if not issues and not _connected(len(ids), [(p.from_node, p.to_node) for p in gas.pipelines]):
        issues.append(Issue("Disconnected", "gas_network.pipelines", "pipeline graph is not connected"))
    return issues


def _validate_grid(grid):
    issues = []
    ids = [b.id for b in grid.buses]
    if len(set(ids)) != len(ids):
        issues.append(Issue("DuplicateBusId", "power_grid.buses", "duplicate bus ids"))
    elif ids != list(range(1, len(ids) + 1)):
        issues.append(Issue("BusIdsNotDense", "power_grid.buses", "bus ids must be 1..n_B in order"))
    for b in grid.buses:
        if b.kind not in (SLACK, PV, PQ):
            issues.append(Issue("BusKind", f"power_grid.buses[{b.id}].kind", f"unknown kind {b.kind!r}"))
    n_slack = sum(b.kind == SLACK for b in grid.buses)
    if n_slack != 1:
        issues.append(Issue("SlackCount", "power_grid.buses", f"expected exactly one slack bus, found {n_slack}"))
    known = set(ids)
    for k, br in enumerate(grid.branches):
        if br.from_bus not in known or br.to_bus not in known:
            issues.append(Issue("UnknownBranchBus", f"power_grid.branches[{k}]", "branch endpoint is not a bus"))
        if br.r == 0 and br.x == 0:
            issues.append(Issue("ZeroImpedance", f"power_grid.branches[{k}]", "branch impedance is zero"))
        if not br.tap > 0:
            issues.append(Issue("NonPositiveTap", f"power_grid.branches[{k}].tap", "tap ratio must be > 0"))
    for k, g in enumerate(grid.generators):
        if g.bus not in known:
            issues.append(Issue("UnknownGeneratorBus", f"power_grid.generators[{k}]", "generator bus does not exist"))
    if not grid.base_mva > 0:
        issues.append(Issue("NonPositiveConstant", "power_grid.base_mva", "base_mva must be > 0"))
    return issues


def _validate_coupling(model):
    issues = []
    nodes = {n.id: n for n in model.gas.nodes}
    buses = {b.id: b for b in model.grid.buses}
    for k, g in enumerate(model.gtus):
        where = f"gtus[{k}]"
        node = nodes.get(g.gas_sink)
        if node is None:
            issues.append(Issue("GtuUnknownNode", f"{where}.gas_sink", f"node {g.gas_sink} does not exist"))
        elif node.kind != SINK:
            issues.append(Issue("GtuSinkNotSink", f"{where}.gas_sink", f"node {g.gas_sink} is not a sink"))
        bus = buses.get(g.bus)
        if bus is None:
            issues.append(Issue("GtuUnknownBus", f"{where}.bus", f"bus {g.bus} does not exist"))
        elif bus.pd != 0 or bus.qd != 0:
            issues.append(Issue("GtuBusHasLoad", f"{where}.bus", "GTU bus must carry no load so its injection is the GTU output"))
        elif bus.kind == PQ:
            issues.append(Issue("GtuBusKind", f"{where}.bus", "GTU bus must be a generator (pv or slack) bus"))
        if not g.eta > 0:
            issues.append(Issue("NonPositiveEta", f"{where}.eta", "eta must be > 0"))
    sinks = [g.gas_sink for g in model.gtus]
    if len(set(sinks)) != len(sinks):
        issues.append(Issue("GtuSharedSink", "gtus", "two GTUs draw from the same sink node"))
    return issues


def _validate_scenario(model):
    sc = model.scenario
    issues = []
    if not (0 < sc.alpha < 1 and 0 < sc.beta < 1):
        issues.append(Issue("SmoothingRange", "scenario.smoothing", "alpha and beta must lie in (0, 1)"))
    if sc.horizon_steps < 3:
        issues.append(Issue("HorizonTooShort", "scenario.horizon_steps", "need at least 3 steps"))
    sinks = set(model.gas.sinks)
    for node_id, _ in sc.gas_loads:
        if node_id not in sinks:
            issues.append(Issue("LoadOnNonSink", f"scenario.gas_loads[{node_id}]", "gas load assigned to a non-sink node"))
    gtu_buses = {g.bus for g in model.gtus}
    for bus, _ in sc.gtu_power:
        if bus not in gtu_buses:
            issues.append(Issue("UnknownGtu", f"scenario.gtu_power[{bus}]", "no GTU at this bus"))
    for k, spec in enumerate(sc.noise):
        if spec.kind not in ("gaussian", "biased_gaussian", "cauchy", "laplace"):
            issues.append(Issue("NoiseKind", f"scenario.noise[{k}].kind", f"unknown kind {spec.kind!r}"))
        if not spec.scale > 0:
            issues.append(Issue("NoiseScale", f"scenario.noise[{k}].scale", "scale must be > 0"))
    if sc.noise_units not in ("relative", "absolute"):
        issues.append(Issue("NoiseUnits", "scenario.noise_units", "must be 'relative' or 'absolute'"))
    if not (sc.q_electric > 0 and sc.q_gas > 0 and sc.p0 > 0):
        issues.append(Issue("NonPositiveCovariance", "scenario.process_noise", "covariances must be > 0"))
    if sc.q_offtake < 0:
        issues.append(Issue("NonPositiveCovariance", "scenario.process_noise.offtake", "must be >= 0"))
    if sc.warmup < 0 or sc.warmup >= sc.horizon_steps:
        issues.append(Issue("WarmupRange", "scenario.warmup", "warmup must lie in [0, horizon_steps)"))
    return issues


def validate(model):
    """Return the list of invariant violations; empty iff the model is valid."""
    issues = _validate_gas(model.gas) + _validate_grid(model.grid)
    issues += _validate_coupling(model)
    issues += _validate_scenario(model)
    return issues


# --------------------------------------------------------------------------
# loading


def _get(d, key, where, default=...):
    if key in d:
        return d[key]
    if default is ...:
        raise ParseError(f"missing field '{where}.{key}'")
    return default


def _num(value, where):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"field '{where}' must be a number, got {value!r}") from None


def _parse_gas(d):
    if not isinstance(d, dict):
        raise ParseError("'gas_network' must be an object")
    c = _num(d.get("sound_speed", 340.0), "gas_network.sound_speed")
    nodes = []
    for k, nd in enumerate(_get(d, "nodes", "gas_network")):
        where = f"gas_network.nodes[{k}]"
        kind = str(_get(nd, "kind", where)).lower()
        density = None
        if "density" in nd:
            density = _num(nd["density"], where + ".density")
        elif "pressure_bar" in nd:
            density = _num(nd["pressure_bar"], where + ".pressure_bar") * BAR / c ** 2
        node_id = _get(nd, "id", where)
        nodes.append(GasNode(node_id, kind, density, str(nd.get("label", node_id))))
    pipes, segments = [], []
    for k, pd in enumerate(_get(d, "pipelines", "gas_network")):
        where = f"gas_network.pipelines[{k}]"
        segments.append(int(pd.get("segments", 1)))
        pipes.append(Pipeline(
            _get(pd, "from", where), _get(pd, "to", where),
            _num(_get(pd, "length", where), where + ".length"),
            _num(_get(pd, "diameter", where), where + ".diameter"),
            _num(pd.get("avg_velocity", 5.0), where + ".avg_velocity"),
            str(pd.get("label", "")),
        ))
    gas = GasNetworkSpec(
        tuple(nodes), tuple(pipes),
        friction=_num(d.get("friction", 0.015), "gas_network.friction"),
        sound_speed=c,
        dt=_num(d.get("dt", 600.0), "gas_network.dt"),
    )
    return gas, segments


def _parse_grid(d, base_dir):
    if not isinstance(d, dict):
        raise ParseError("'power_grid' must be an object")
    if "case" in d:
        path = Path(d["case"])
        if not path.is_absolute():
            path = base_dir / path
        return matpower.load_case(path)
    buses = []
    for k, bd in enumerate(_get(d, "buses", "power_grid")):
        where = f"power_grid.buses[{k}]"
        buses.append(Bus(
            _get(bd, "id", where), str(bd.get("kind", PQ)).lower(),
            _num(bd.get("v_setpoint", 1.0), where + ".v_setpoint"),
            _num(bd.get("pd", 0.0), where + ".pd"), _num(bd.get("qd", 0.0), where + ".qd"),
            _num(bd.get("gs", 0.0), where + ".gs"), _num(bd.get("bs", 0.0), where + ".bs"),
            str(bd.get("label", bd["id"])),
        ))
    branches = []
    for k, bd in enumerate(d.get("branches", [])):
        where = f"power_grid.branches[{k}]"
        branches.append(Branch(
            _get(bd, "from", where), _get(bd, "to", where),
            _num(bd.get("r", 0.0), where + ".r"), _num(_get(bd, "x", where), where + ".x"),
            _num(bd.get("b", 0.0), where + ".b"), _num(bd.get("tap", 1.0), where + ".tap"),
        ))
    gens = []
    for k, gd in enumerate(d.get("generators", [])):
        where = f"power_grid.generators[{k}]"
        gens.append(Generator(_get(gd, "bus", where), _num(gd.get("pg", 0.0), where + ".pg"),
                              _num(gd.get("vg", 1.0), where + ".vg")))
    return PowerGridSpec(tuple(buses), tuple(branches), tuple(gens),
                         _num(d.get("base_mva", 100.0), "power_grid.base_mva"))


def _parse_noise(items):
    specs = []
    for k, nd in enumerate(items):
        where = f"scenario.noise[{k}]"
        kind = str(nd.get("kind", "gaussian")).lower()
        scale = nd.get("scale", nd.get("sigma", 0.02))
        specs.append(NoiseSpec(kind, _num(scale, where + ".scale"),
                               _num(nd.get("bias", 0.0), where + ".bias"),
                               _num(nd.get("location", 0.0), where + ".location"),
                               str(nd.get("target", "all"))))
    return tuple(specs)


def _parse_scenario(d):
    if d is None:
        return ScenarioConfig()
    if not isinstance(d, dict):
        raise ParseError("'scenario' must be an object")
    sm = d.get("smoothing", {})
    prof = d.get("load_profile", {})
    pn = d.get("process_noise", {})
    base = ScenarioConfig()
    kw = dict(
        name=str(d.get("name", base.name)),
        horizon_steps=int(d.get("horizon_steps", base.horizon_steps)),
        seed=int(d.get("seed", base.seed)),
        alpha=_num(sm.get("alpha", base.alpha), "scenario.smoothing.alpha"),
        beta=_num(sm.get("beta", base.beta), "scenario.smoothing.beta"),
        load_amplitude=_num(prof.get("amplitude", base.load_amplitude), "scenario.load_profile.amplitude"),
        peak_hour=_num(prof.get("peak_hour", base.peak_hour), "scenario.load_profile.peak_hour"),
        trough_hour=_num(prof.get("trough_hour", base.trough_hour), "scenario.load_profile.trough_hour"),
        perturbation=_num(prof.get("perturbation", base.perturbation), "scenario.load_profile.perturbation"),
        gas_loads=tuple(sorted((int(k), _num(v, f"scenario.gas_loads.{k}"))
                               for k, v in d.get("gas_loads", {}).items())),
        gtu_power=tuple(sorted((int(k), _num(v, f"scenario.gtu_power.{k}"))
                               for k, v in d.get("gtu_power", {}).items())),
        noise_units=str(d.get("noise_units", base.noise_units)),
        q_electric=_num(pn.get("electric", base.q_electric), "scenario.process_noise.electric"),
        q_gas=_num(pn.get("gas", base.q_gas), "scenario.process_noise.gas"),
        p0=_num(pn.get("initial", base.p0), "scenario.process_noise.initial"),
        q_offtake=_num(pn.get("offtake", base.q_offtake), "scenario.process_noise.offtake"),
        warmup=int(d.get("warmup", base.warmup)),
    )
    if "noise" in d:
        kw["noise"] = _parse_noise(d["noise"])
    return ScenarioConfig(**kw)


def _canonicalize_gas(gas, segments):
    """Map node ids to 1..n in sorted order and expand subdivided pipelines.

    A pipeline split into ``k`` segments gets ``k - 1`` passive sink nodes
    (zero offtake) placed directly after its lower endpoint in the ordering,
    which keeps every segment oriented from the smaller to the larger id.
    """
    order = sorted(n.id for n in gas.nodes)
    inserts = {nid: [] for nid in order}
    for p, segs in zip(gas.pipelines, segments):
        name = p.label or f"{p.from_node}_{p.to_node}"
        for s in range(1, segs):
            inserts[p.from_node].append(f"{name}s{s}")
    sequence = []
    for nid in order:
        sequence.append(nid)
        sequence.extend(inserts[nid])
    new_id = {key: k + 1 for k, key in enumerate(sequence)}
    by_id = {n.id: n for n in gas.nodes}
    nodes = []
    for key in sequence:
        if key in by_id:
            n = by_id[key]
            nodes.append(GasNode(new_id[key], n.kind, n.fixed_density, n.label or str(key)))
        else:
            nodes.append(GasNode(new_id[key], SINK, None, key))
    pipes = []
    for p, segs in zip(gas.pipelines, segments):
        name = p.label or f"{p.from_node}_{p.to_node}"
        chain = [p.from_node] + [f"{name}s{s}" for s in range(1, segs)] + [p.to_node]
        for s in range(segs):
            label = name if segs == 1 else f"{name}s{s + 1}"
            pipes.append(Pipeline(new_id[chain[s]], new_id[chain[s + 1]], p.length / segs,
                                  p.diameter, p.avg_velocity, label))
    return replace(gas, nodes=tuple(nodes), pipelines=tuple(pipes)), new_id


def _canonicalize_grid(grid):
    order = sorted(b.id for b in grid.buses)
    new_id = {bid: k + 1 for k, bid in enumerate(order)}
    by_id = {b.id: b for b in grid.buses}
    buses = tuple(replace(by_id[bid], id=new_id[bid], label=by_id[bid].label or str(bid)) for bid in order)
    branches = tuple(replace(br, from_bus=new_id[br.from_bus], to_bus=new_id[br.to_bus]) for br in grid.branches)
    gens = tuple(replace(g, bus=new_id[g.bus]) for g in grid.generators)
    return replace(grid, buses=buses, branches=branches, generators=gens), new_id


def _raw_issues(gas, segments, grid, gtus):
    """Checks that must run on file ids, before canonicalization."""
    issues = []
    ids = [n.id for n in gas.nodes]
    if any(not isinstance(i, int) for i in ids):
        issues.append(Issue("NodeIdType", "gas_network.nodes", "node ids must be integers"))
        return issues
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        issues.append(Issue("DuplicateNodeId", "gas_network.nodes", f"duplicate node ids {dup}"))
    known = set(ids)
    for k, (p, segs) in enumerate(zip(gas.pipelines, segments)):
        where = f"gas_network.pipelines[{k}]"
        if p.from_node not in known or p.to_node not in known:
            issues.append(Issue("UnknownPipelineNode", where, f"endpoint {p.from_node}-{p.to_node} not a node"))
        elif p.from_node >= p.to_node:
            issues.append(Issue("PipelineOrientation", where, f"from ({p.from_node}) must be < to ({p.to_node})"))
        if segs < 1:
            issues.append(Issue("SegmentCount", where + ".segments", "segments must be >= 1"))
    bids = [b.id for b in grid.buses]
    if len(set(bids)) != len(bids):
        issues.append(Issue("DuplicateBusId", "power_grid.buses", "duplicate bus ids"))
    bknown = set(bids)
    for k, br in enumerate(grid.branches):
        if br.from_bus not in bknown or br.to_bus not in bknown:
            issues.append(Issue("UnknownBranchBus", f"power_grid.branches[{k}]", "branch endpoint is not a bus"))
    for k, g in enumerate(grid.generators):
        if g.bus not in bknown:
            issues.append(Issue("UnknownGeneratorBus", f"power_grid.generators[{k}]", "generator bus does not exist"))
    for k, g in enumerate(gtus):
        if g.gas_sink not in known:
            issues.append(Issue("GtuUnknownNode", f"gtus[{k}].gas_sink", f"node {g.gas_sink} does not exist"))
        if g.bus not in bknown:
            issues.append(Issue("GtuUnknownBus", f"gtus[{k}].bus", f"bus {g.bus} does not exist"))
    return issues


def model_from_dict(data, base_dir=Path(".")):
    """Build and validate an :class:`IgesModel` from a parsed config mapping."""
    if not isinstance(data, dict):
        raise ParseError("config root must be an object")
    for key in ("gas_network", "power_grid"):
        if key not in data:
            raise ParseError(f"missing top-level key '{key}'")
    gas, segments = _parse_gas(data["gas_network"])
    grid = _parse_grid(data["power_grid"], Path(base_dir))
    gtus = []
    for k, gd in enumerate(data.get("gtus", [])):
        where = f"gtus[{k}]"
        gtus.append(GtuCoupling(_get(gd, "bus", where), _get(gd, "gas_sink", where),
                                _num(gd.get("eta", 20.148), where + ".eta")))
    scenario = _parse_scenario(data.get("scenario"))

    issues = _raw_issues(gas, segments, grid, gtus)
    if issues:
        raise ValidationError(issues)
    gas, node_map = _canonicalize_gas(gas, segments)
    grid, bus_map = _canonicalize_grid(grid)
    gtus = tuple(GtuCoupling(bus_map[g.bus], node_map[g.gas_sink], g.eta) for g in gtus)
    try:
        scenario = replace(
            scenario,
            gas_loads=tuple(sorted((node_map[n], v) for n, v in scenario.gas_loads)),
            gtu_power=tuple(sorted((bus_map[b], v) for b, v in scenario.gtu_power)),
        )
    except KeyError as exc:
        raise ValidationError([Issue("UnknownScenarioReference", "scenario", f"unknown id {exc.args[0]}")]) from None
    model = IgesModel(gas, grid, gtus, scenario)
    issues = validate(model)
    if issues:
        raise ValidationError(issues)
    return model


def load_model(path):
    """Read a JSON config file and return a validated :class:`IgesModel`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return model_from_dict(data, path.parent)


def to_dict(model):
    """Serialize a model to the config mapping accepted by :func:`model_from_dict`."""
    gas, grid, sc = model.gas, model.grid, model.scenario
    nodes = []
    for n in gas.nodes:
        nd = {"id": n.id, "kind": n.kind, "label": n.label}
        if n.fixed_density is not None:
            nd["density"] = n.fixed_density
        nodes.append(nd)
    return {
        "gas_network": {
            "friction": gas.friction, "sound_speed": gas.sound_speed, "dt": gas.dt,
            "nodes": nodes,
            "pipelines": [{"from": p.from_node, "to": p.to_node, "length": p.length,
                           "diameter": p.diameter, "avg_velocity": p.avg_velocity,
                           "label": p.label} for p in gas.pipelines],
        },
        "power_grid": {
            "base_mva": grid.base_mva,
            "buses": [{"id": b.id, "kind": b.kind, "v_setpoint": b.v_setpoint, "pd": b.pd,
                       "qd": b.qd, "gs": b.gs, "bs": b.bs, "label": b.label} for b in grid.buses],
            "branches": [{"from": br.from_bus, "to": br.to_bus, "r": br.r, "x": br.x,
                          "b": br.b, "tap": br.tap} for br in grid.branches],
            "generators": [{"bus": g.bus, "pg": g.pg, "vg": g.vg} for g in grid.generators],
        },
        "gtus": [{"bus": g.bus, "gas_sink": g.gas_sink, "eta": g.eta} for g in model.gtus],
        "scenario": {
            "name": sc.name, "horizon_steps": sc.horizon_steps, "seed": sc.seed,
            "smoothing": {"alpha": sc.alpha, "beta": sc.beta},
            "load_profile": {"amplitude": sc.load_amplitude, "peak_hour": sc.peak_hour,
                             "trough_hour": sc.trough_hour, "perturbation": sc.perturbation},
            "gas_loads": {str(k): v for k, v in sc.gas_loads},
            "gtu_power": {str(k): v for k, v in sc.gtu_power},
            "noise": [{"kind": s.kind, "scale": s.scale, "bias": s.bias, "location": s.location,
                       "target": s.target} for s in sc.noise],
            "noise_units": sc.noise_units,
            "process_noise": {"electric": sc.q_electric, "gas": sc.q_gas, "initial": sc.p0,
                              "offtake": sc.q_offtake},
            "warmup": sc.warmup,
        },
    }


def save_model(model, path):
    Path(path).write_text(json.dumps(to_dict(model), indent=2))
