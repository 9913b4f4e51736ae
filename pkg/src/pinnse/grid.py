"""Bus/branch network model and admittance matrix construction."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


class GridModelError(ValueError):
    """Malformed network data or unparseable case file."""


class BusKind(enum.Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"


@dataclass(frozen=True)
class Bus:
    """Single bus. Powers are per-unit on the system base; shunt_g/shunt_b
    are the shunt admittance in pu at 1.0 pu voltage."""

    index: int
    kind: BusKind
    load_p: float = 0.0
    load_q: float = 0.0
    gen_p: float = 0.0
    v_setpoint: float = 1.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0


@dataclass(frozen=True)
class Branch:
    """Pi-model branch with an ideal tap transformer at the from side.

    tap is the off-nominal ratio magnitude (1.0 when nominal), shift the
    phase shift in radians. b_charging is the TOTAL line charging
    susceptance, split half per end.
    """

    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    tap: float = 1.0
    shift: float = 0.0


@dataclass(frozen=True, eq=False)
class AdmittanceMatrix:
    """Dense complex nodal admittance matrix."""

    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def g(self) -> np.ndarray:
        return self.matrix.real

    @property
    def b(self) -> np.ndarray:
        return self.matrix.imag


def build_admittance(buses: tuple[Bus, ...], branches: tuple[Branch, ...]) -> AdmittanceMatrix:
    """Stamp branches and bus shunts into the nodal admittance matrix.

    Per branch with series admittance ys = 1/(r + jx), total charging b and
    complex ratio tau = tap * exp(j*shift):

        Y[f,f] += (ys + jb/2) / tap**2
        Y[f,t] += -ys / conj(tau)
        Y[t,f] += -ys / tau
        Y[t,t] += ys + jb/2
    """
    n = len(buses)
    y = np.zeros((n, n), dtype=complex)
    for br in branches:
        ys = 1.0 / complex(br.r, br.x)
        bc = 0.5j * br.b_charging
        tau = br.tap * np.exp(1j * br.shift)
        f, t = br.from_bus, br.to_bus
        y[f, f] += (ys + bc) / br.tap**2
        y[f, t] += -ys / np.conj(tau)
        y[t, f] += -ys / tau
        y[t, t] += ys + bc
    for bus in buses:
        y[bus.index, bus.index] += complex(bus.shunt_g, bus.shunt_b)
    y.setflags(write=False)
    return AdmittanceMatrix(y)


@dataclass(frozen=True, eq=False)
class GridModel:
    """Immutable network: buses, branches, prebuilt admittance matrix."""

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    y_bus: AdmittanceMatrix
    base_mva: float = 100.0

    @classmethod
    def from_components(cls, buses, branches, base_mva: float = 100.0) -> "GridModel":
        """Validate the component lists and construct the model."""
        buses = tuple(buses)
        branches = tuple(branches)
        n = len(buses)
        if n == 0:
            raise GridModelError("grid has no buses")
        for pos, bus in enumerate(buses):
            if bus.index != pos:
                raise GridModelError(
                    f"bus at position {pos} has index {bus.index}; indices must be 0..n-1 in order"
                )
            if bus.v_setpoint <= 0.0:
                raise GridModelError(f"bus {bus.index}: voltage setpoint must be positive")
        n_slack = sum(1 for b in buses if b.kind is BusKind.SLACK)
        if n_slack != 1:
            raise GridModelError(f"grid must have exactly one slack bus, found {n_slack}")
        for k, br in enumerate(branches):
            if not (0 <= br.from_bus < n and 0 <= br.to_bus < n):
                raise GridModelError(f"branch {k}: endpoint out of range ({br.from_bus}, {br.to_bus})")
            if br.from_bus == br.to_bus:
                raise GridModelError(f"branch {k}: from and to bus are both {br.from_bus}")
            if math.hypot(br.r, br.x) == 0.0:
                raise GridModelError(f"branch {k}: series impedance is zero")
            if br.tap <= 0.0:
                raise GridModelError(f"branch {k}: tap ratio must be positive, got {br.tap}")
        return cls(buses, branches, build_admittance(buses, branches), base_mva)

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def slack_index(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.kind is BusKind.SLACK)

    @property
    def pv_indices(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses) if b.kind is BusKind.PV], dtype=int)

    @property
    def pq_indices(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses) if b.kind is BusKind.PQ], dtype=int)

    @property
    def load_p(self) -> np.ndarray:
        return np.array([b.load_p for b in self.buses])

    @property
    def load_q(self) -> np.ndarray:
        return np.array([b.load_q for b in self.buses])

    @property
    def gen_p(self) -> np.ndarray:
        return np.array([b.gen_p for b in self.buses])

    @property
    def v_setpoints(self) -> np.ndarray:
        return np.array([b.v_setpoint for b in self.buses])

    def base_injections(self) -> tuple[np.ndarray, np.ndarray]:
        """Net scheduled injections (gen - load) in pu. The P entry is
        meaningful at pv/pq buses, the Q entry at pq buses."""
        return self.gen_p - self.load_p, -self.load_q


_SECTIONS = ("BASEMVA", "BUS", "GEN", "BRANCH")
_BUS_COLS = 7
_GEN_COLS = 2
_BRANCH_COLS = 7


def parse_case(text: str) -> GridModel:
    """Parse a sectioned plain-text case file.

    Sections: ``BASEMVA <value>`` on one line, then ``BUS``, ``GEN`` and
    ``BRANCH`` blocks. Columns are
    ``id kind pd_mw qd_mvar gs_mw bs_mvar vm`` for buses,
    ``bus pg_mw`` for generators and
    ``from to r_pu x_pu b_pu tap shift_deg`` for branches.
    ``#`` starts a comment, blank lines are skipped, a tap of 0 means the
    nominal ratio 1.0. Powers are MW/Mvar on the system base and converted
    to per-unit here. Unknown section names and malformed rows are rejected
    with the offending line number.
    """
    base_mva = None
    section = None
    bus_rows: list[tuple[int, list[str]]] = []
    gen_rows: list[tuple[int, list[str]]] = []
    branch_rows: list[tuple[int, list[str]]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0].upper()
        if not _is_number(tokens[0]):
            if head not in _SECTIONS:
                raise GridModelError(f"line {lineno}: unknown section {tokens[0]!r}")
            if head == "BASEMVA":
                if len(tokens) != 2 or not _is_number(tokens[1]):
                    raise GridModelError(f"line {lineno}: BASEMVA needs a single numeric value")
                base_mva = float(tokens[1])
                section = None
            else:
                if len(tokens) != 1:
                    raise GridModelError(f"line {lineno}: section header {head} takes no values")
                section = head
            continue
        if section == "BUS":
            if len(tokens) != _BUS_COLS:
                raise GridModelError(f"line {lineno}: bus row needs {_BUS_COLS} columns, got {len(tokens)}")
            bus_rows.append((lineno, tokens))
        elif section == "GEN":
            if len(tokens) != _GEN_COLS:
                raise GridModelError(f"line {lineno}: gen row needs {_GEN_COLS} columns, got {len(tokens)}")
            gen_rows.append((lineno, tokens))
        elif section == "BRANCH":
            if len(tokens) != _BRANCH_COLS:
                raise GridModelError(
                    f"line {lineno}: branch row needs {_BRANCH_COLS} columns, got {len(tokens)}"
                )
            branch_rows.append((lineno, tokens))
        else:
            raise GridModelError(f"line {lineno}: data before any section header")

    if base_mva is None:
        raise GridModelError("missing BASEMVA section")
    if base_mva <= 0:
        raise GridModelError("BASEMVA must be positive")
    if not bus_rows:
        raise GridModelError("missing BUS section")

    kind_map = {"slack": BusKind.SLACK, "pv": BusKind.PV, "pq": BusKind.PQ}
    raw_buses: dict[int, Bus] = {}
    for lineno, tok in bus_rows:
        bus_id = _parse_int(tok[0], lineno, "bus id")
        kind = kind_map.get(tok[1].lower())
        if kind is None:
            raise GridModelError(f"line {lineno}: bus kind must be slack/pv/pq, got {tok[1]!r}")
        vals = [_parse_float(t, lineno, "bus column") for t in tok[2:]]
        if bus_id in raw_buses:
            raise GridModelError(f"line {lineno}: duplicate bus id {bus_id}")
        raw_buses[bus_id] = Bus(
            index=bus_id,  # provisional, remapped below
            kind=kind,
            load_p=vals[0] / base_mva,
            load_q=vals[1] / base_mva,
            v_setpoint=vals[4],
            shunt_g=vals[2] / base_mva,
            shunt_b=vals[3] / base_mva,
        )

    ids = sorted(raw_buses)
    if ids != list(range(1, len(ids) + 1)):
        raise GridModelError(f"bus ids must be exactly 1..{len(ids)}, got {ids}")
    id_to_index = {bus_id: bus_id - 1 for bus_id in ids}

    gen_p = dict.fromkeys(ids, 0.0)
    for lineno, tok in gen_rows:
        bus_id = _parse_int(tok[0], lineno, "gen bus id")
        if bus_id not in raw_buses:
            raise GridModelError(f"line {lineno}: generator at unknown bus {bus_id}")
        gen_p[bus_id] += _parse_float(tok[1], lineno, "gen pg") / base_mva

    buses = tuple(
        Bus(
            index=id_to_index[bus_id],
            kind=raw_buses[bus_id].kind,
            load_p=raw_buses[bus_id].load_p,
            load_q=raw_buses[bus_id].load_q,
            gen_p=gen_p[bus_id],
            v_setpoint=raw_buses[bus_id].v_setpoint,
            shunt_g=raw_buses[bus_id].shunt_g,
            shunt_b=raw_buses[bus_id].shunt_b,
        )
        for bus_id in ids
    )

    branches = []
    for lineno, tok in branch_rows:
        f_id = _parse_int(tok[0], lineno, "branch from bus")
        t_id = _parse_int(tok[1], lineno, "branch to bus")
        for bus_id in (f_id, t_id):
            if bus_id not in id_to_index:
                raise GridModelError(f"line {lineno}: branch endpoint {bus_id} is not a bus")
        vals = [_parse_float(t, lineno, "branch column") for t in tok[2:]]
        tap = vals[3] if vals[3] != 0.0 else 1.0
        branches.append(
            Branch(
                from_bus=id_to_index[f_id],
                to_bus=id_to_index[t_id],
                r=vals[0],
                x=vals[1],
                b_charging=vals[2],
                tap=tap,
                shift=math.radians(vals[4]),
            )
        )

    return GridModel.from_components(buses, tuple(branches), base_mva)


def load_case(path: str | Path) -> GridModel:
    """Parse a case file from disk."""
    return parse_case(Path(path).read_text())


def load_case14() -> GridModel:
    """The bundled IEEE 14-bus test system."""
    text = resources.files("pinnse.data").joinpath("case14.txt").read_text()
    return parse_case(text)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _parse_int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise GridModelError(f"line {lineno}: {what} must be an integer, got {token!r}") from None


def _parse_float(token: str, lineno: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise GridModelError(f"line {lineno}: {what} must be numeric, got {token!r}") from None
