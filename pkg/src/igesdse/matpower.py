"""Reader for MATPOWER-style ``.m`` case files (bus, gen and branch tables)."""
import re
from pathlib import Path

import numpy as np

from .errors import ParseError

_MATRIX = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_SCALAR = re.compile(r"mpc\.(\w+)\s*=\s*([-+0-9.eE]+)\s*;")

# column indices, zero based
BUS_I, BUS_TYPE, PD, QD, GS, BS = 0, 1, 2, 3, 4, 5
VM, VA = 7, 8
GEN_BUS, PG, QG, VG, GEN_STATUS = 0, 1, 2, 5, 7
F_BUS, T_BUS, BR_R, BR_X, BR_B, TAP, SHIFT, BR_STATUS = 0, 1, 2, 3, 4, 8, 9, 10

_KIND = {1: "pq", 2: "pv", 3: "slack"}


def _rows(body):
    body = re.sub(r"%[^\n]*", "", body)
    rows = []
    for line in re.split(r"[;\n]", body):
        vals = line.replace(",", " ").split()
        if vals:
            rows.append([float(v) for v in vals])
    width = max(len(r) for r in rows)
    if any(len(r) != width for r in rows):
        raise ValueError("ragged table")
    return np.array(rows)


def read_tables(path):
    """Return ``baseMVA`` and the raw numeric tables of a case file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read case file {path}: {exc}") from exc
    tables = {}
    for name, body in _MATRIX.findall(text):
        try:
            tables[name] = _rows(body)
        except ValueError as exc:
            raise ParseError(f"{path}: malformed table mpc.{name}: {exc}") from None
    for name, value in _SCALAR.findall(text):
        tables[name] = float(value)
    for key in ("baseMVA", "bus", "gen", "branch"):
        if key not in tables:
            raise ParseError(f"{path}: missing mpc.{key}")
    return tables


def load_case(path):
    """Parse a case file into a :class:`~igesdse.model.PowerGridSpec`.

    Generator voltage setpoints override the bus voltage column for PV and
    slack buses. Out-of-service generators and branches are dropped.
    """
    from .model import Branch, Bus, Generator, PowerGridSpec

    t = read_tables(path)
    gen = t["gen"]
    gen = gen[gen[:, GEN_STATUS] > 0] if gen.shape[1] > GEN_STATUS else gen
    vset = {int(g[GEN_BUS]): g[VG] for g in gen}
    buses = []
    for row in t["bus"]:
        bid, kind = int(row[BUS_I]), int(row[BUS_TYPE])
        if kind not in _KIND:
            raise ParseError(f"{path}: bus {bid} has unsupported type {kind}")
        v = vset.get(bid, row[VM]) if kind in (2, 3) else 1.0
        buses.append(Bus(bid, _KIND[kind], float(v), float(row[PD]), float(row[QD]),
                         float(row[GS]), float(row[BS]), str(bid)))
    branches = []
    for row in t["branch"]:
        if row.shape[0] > BR_STATUS and row[BR_STATUS] == 0:
            continue
        if row.shape[0] > SHIFT and row[SHIFT] != 0:
            raise ParseError(f"{path}: phase-shifting branch {int(row[F_BUS])}-{int(row[T_BUS])} is not supported")
        tap = row[TAP] if row.shape[0] > TAP and row[TAP] != 0 else 1.0
        branches.append(Branch(int(row[F_BUS]), int(row[T_BUS]), float(row[BR_R]),
                               float(row[BR_X]), float(row[BR_B]), float(tap)))
    gens = tuple(Generator(int(g[GEN_BUS]), float(g[PG]), float(g[VG])) for g in gen)
    return PowerGridSpec(tuple(buses), tuple(branches), gens, float(t["baseMVA"]))
