"""Declarative experiment descriptions and their golden expected tables.

A scenario is an event DAG over labeled systems: prepared states (with an
optional seeding interaction that fixes preferred bases), measurement
couplings onto fresh apparatuses, explicit two-system couplings,
single-system evolutions, and meetings.  ``run`` executes the events in
causal order on an engine state and returns a structured report.

Scenario files use UTF-8 JSON, schema ``pl-scenario/1``; complex numbers
are ``[re, im]`` pairs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import continuum, oracle
from .engine import (
    EngineError,
    EventId,
    LifeClass,
    PairingTable,
    SimState,
    SplitRow,
    SplitTable,
)
from .qmath import (
    Basis,
    Ket,
    Unitary,
    angle_basis,
    computational_basis,
    hadamard_matrix,
    indicator_basis,
    measurement_coupling,
)

SCHEMA = "pl-scenario/1"
REPORT_SCHEMA = "pl-report/1"


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# spec model


@dataclass(frozen=True)
class BasisSpec:
    kind: str  # computational | angle | vectors
    labels: tuple[str, ...]
    theta: float | None = None
    vectors: tuple[tuple[complex, ...], ...] | None = None

    def build(self, system: str, dim: int) -> Basis:
        if self.kind == "computational":
            return computational_basis(system, dim, self.labels)
        if self.kind == "angle":
            if dim != 2:
                raise ScenarioError("angle basis needs a qubit")
            return angle_basis(float(self.theta), system, self.labels)
        if self.kind == "vectors":
            return Basis(system, dim, [np.array(v, dtype=np.complex128)
                                       for v in self.vectors], self.labels)
        raise ScenarioError(f"unknown basis kind {self.kind!r}")


@dataclass(frozen=True)
class UnitarySpec:
    kind: str  # matrix | hadamard
    matrix: tuple[tuple[complex, ...], ...] | None = None

    def build(self, space) -> Unitary:
        if self.kind == "hadamard":
            return Unitary(space, hadamard_matrix())
        if self.kind == "matrix":
            return Unitary(space, np.array(self.matrix, dtype=np.complex128))
        raise ScenarioError(f"unknown unitary kind {self.kind!r}")


@dataclass(frozen=True)
class SystemDecl:
    label: str
    dim: int


@dataclass(frozen=True)
class InitialDecl:
    systems: tuple[str, ...]
    amplitudes: tuple[complex, ...]
    seed_tag: str | None = None
    seed_ordinal: int | None = None
    seed_bases: tuple[tuple[str, BasisSpec], ...] = ()


@dataclass(frozen=True)
class EventDecl:
    ordinal: int
    tag: str
    kind: str  # measure | couple | meet
    participants: tuple[str, ...]
    basis: BasisSpec | None = None          # measure: system basis
    unitary: UnitarySpec | None = None      # couple
    bases: tuple[tuple[str, BasisSpec], ...] = ()  # couple: new preferred bases


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    systems: tuple[SystemDecl, ...]
    initials: tuple[InitialDecl, ...]
    events: tuple[EventDecl, ...]

    def dims(self) -> dict[str, int]:
        return {s.label: s.dim for s in self.systems}

    def event(self, tag: str) -> EventDecl:
        for e in self.events:
            if e.tag == tag:
                return e
        raise ScenarioError(f"no event {tag!r} in {self.name!r}")


def validate(spec: ScenarioSpec) -> None:
    dims = spec.dims()
    if len(dims) != len(spec.systems):
        raise ScenarioError("duplicate system label")
    covered: set[str] = set()
    for init in spec.initials:
        for lab in init.systems:
            if lab not in dims:
                raise ScenarioError(f"initial state on unknown system {lab!r}")
            if lab in covered:
                raise ScenarioError(f"system {lab!r} in two initial states")
            covered.add(lab)
        want = math.prod(dims[lab] for lab in init.systems)
        if len(init.amplitudes) != want:
            raise ScenarioError(
                f"initial state on {init.systems} has {len(init.amplitudes)} "
                f"amplitudes, needs {want}")
        if init.seed_tag is not None:
            bases = dict(init.seed_bases)
            for lab in init.systems:
                if lab not in bases:
                    raise ScenarioError(f"seed on {init.systems} lacks basis for {lab!r}")
    ordinals = [e.ordinal for e in spec.events]
    if len(set(ordinals)) != len(ordinals):
        raise ScenarioError("event ordinals must be unique")
    tags = [e.tag for e in spec.events]
    if len(set(tags)) != len(tags):
        raise ScenarioError("event tags must be unique")
    seed_ordinals = [i.seed_ordinal for i in spec.initials if i.seed_tag is not None]
    for e in spec.events:
        if seed_ordinals and e.ordinal <= max(s for s in seed_ordinals):
            raise ScenarioError(f"event {e.tag!r} does not follow the seed events")
        for p in e.participants:
            if p not in dims:
                raise ScenarioError(f"event {e.tag!r} involves unknown system {p!r}")
        if e.kind == "measure":
            if len(e.participants) != 2:
                raise ScenarioError(f"measure event {e.tag!r} needs (system, apparatus)")
            sys_lab, app = e.participants
            if e.basis is None:
                raise ScenarioError(f"measure event {e.tag!r} lacks a basis")
            if dims[app] < len(e.basis.labels) + 1:
                raise ScenarioError(
                    f"apparatus {app!r} of dim {dims[app]} cannot register "
                    f"{len(e.basis.labels)} outcomes plus a ready state")
        elif e.kind == "couple":
            if e.unitary is None:
                raise ScenarioError(f"couple event {e.tag!r} lacks a unitary")
            if len(e.participants) == 2 and not e.bases:
                raise ScenarioError(f"couple event {e.tag!r} needs new preferred bases")
            if len(e.participants) not in (1, 2):
                raise ScenarioError("couple events take one or two participants")
        elif e.kind == "meet":
            if len(e.participants) != 2:
                raise ScenarioError(f"meet event {e.tag!r} needs two participants")
        else:
            raise ScenarioError(f"unknown event kind {e.kind!r}")


def execution_orders_equivalent(spec: ScenarioSpec, order: Sequence[str]) -> bool:
    """True when ``order`` respects the causal order: events touching a
    common system appear in increasing ordinal."""
    pos = {tag: i for i, tag in enumerate(order)}
    if set(pos) != {e.tag for e in spec.events} or len(pos) != len(spec.events):
        return False
    by_system: dict[str, list[EventDecl]] = {}
    for e in spec.events:
        for p in e.participants:
            by_system.setdefault(p, []).append(e)
    for events in by_system.values():
        events = sorted(events, key=lambda e: e.ordinal)
        for a, b in zip(events, events[1:]):
            if pos[a.tag] > pos[b.tag]:
                return False
    return True


# ---------------------------------------------------------------------------
# report


@dataclass
class RunReport:
    scenario: ScenarioSpec
    split_tables: dict[str, SplitTable] = field(default_factory=dict)
    pairing_tables: dict[str, PairingTable] = field(default_factory=dict)
    final_classes: dict[str, list[LifeClass]] = field(default_factory=dict)
    reduced: dict[str, dict[str, float]] = field(default_factory=dict)
    oracle_checks: list[dict[str, Any]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    censuses: dict[str, dict[tuple, int]] | None = None
    attachments: dict[str, Any] = field(default_factory=dict)

    def max_oracle_deviation(self) -> float:
        return max((c["max_dev"] for c in self.oracle_checks), default=0.0)

    def to_jsonable(self) -> dict:
        def records_json(records):
            return [
                {"event": {"ordinal": r.event.ordinal, "tag": r.event.tag},
                 "outcomes": {sys: lab for sys, lab in r.outcomes}}
                for r in records
            ]

        tables = {}
        for tag, t in self.split_tables.items():
            tables[tag] = {
                "kind": "split",
                "systems": list(t.systems),
                "rows": [
                    {"prior": records_json(r.prior), "prior_mass": r.prior_mass,
                     "outcomes": list(r.outcomes), "weight": r.weight,
                     "mass": r.mass}
                    for r in t.rows
                ],
            }
        for tag, t in self.pairing_tables.items():
            tables[tag] = {
                "kind": "pairing",
                "systems": list(t.systems),
                "rows": [
                    {"history_a": records_json(r.history_a),
                     "history_b": records_json(r.history_b),
                     "outcomes": [r.outcome_a, r.outcome_b], "mass": r.mass}
                    for r in t.rows
                ],
                "warnings": list(t.warnings),
            }
        out = {
            "schema": REPORT_SCHEMA,
            "scenario": self.scenario.name,
            "tables": tables,
            "classes": {
                lab: [
                    {"history": records_json(c.records), "mass": c.mass,
                     "outcome": c.latest_label()}
                    for c in classes
                ]
                for lab, classes in self.final_classes.items()
            },
            "reduced": self.reduced,
            "oracle_checks": self.oracle_checks,
            "notes": list(self.notes),
            "attachments": _jsonable(self.attachments),
        }
        if self.censuses is not None:
            out["censuses"] = {
                lab: [{"history": list(map(list, key)), "count": n}
                      for key, n in counts.items()]
                for lab, counts in self.censuses.items()
            }
        return out


def _jsonable(value):
    if isinstance(value, continuum.DensityProfile):
        return {
            "grid": {"x_min": value.grid.x_min, "x_max": value.grid.x_max,
                     "bins": value.grid.bins},
            "values": value.values.tolist(),
        }
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Fraction):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# runner


def run(spec: ScenarioSpec, order: Sequence[str] | None = None,
        lives: int | None = None) -> RunReport:
    """Execute the scenario's events in a causal order and collect tables.

    ``order`` may name any topological reordering of the event DAG;
    space-like-concurrent orderings give identical reports.
    """
    validate(spec)
    dims = spec.dims()
    state = SimState()
    covered: set[str] = set()
    for init in spec.initials:
        kets = Ket(tuple((lab, dims[lab]) for lab in init.systems),
                   np.array(init.amplitudes, dtype=np.complex128))
        if init.seed_tag is None:
            if len(init.systems) == 1:
                state.add_product_system(init.systems[0], kets)
            else:
                state.add_joint_systems(init.systems, kets)
        else:
            bases = {lab: bs.build(lab, dims[lab]) for lab, bs in init.seed_bases}
            event = EventId(init.seed_ordinal, init.seed_tag)
            state.add_joint_systems(init.systems, kets, (event, bases))
        covered.update(init.systems)
    for s in spec.systems:
        if s.label not in covered:
            # apparatus: a single ready-state class; ready index is last
            amps = np.zeros(s.dim, dtype=np.complex128)
            amps[s.dim - 1] = 1.0
            state.add_product_system(s.label, Ket(((s.label, s.dim),), amps))

    if order is None:
        ordered = sorted(spec.events, key=lambda e: e.ordinal)
    else:
        if not execution_orders_equivalent(spec, order):
            raise ScenarioError(f"{list(order)} is not a causal order of {spec.name!r}")
        ordered = [spec.event(tag) for tag in order]

    report = RunReport(scenario=spec)
    for e in ordered:
        event = EventId(e.ordinal, e.tag)
        try:
            if e.kind == "measure":
                sys_lab, app = e.participants
                sys_basis = e.basis.build(sys_lab, dims[sys_lab])
                u = measurement_coupling(sys_basis, app, dims[app])
                app_basis = indicator_basis(sys_basis, app, dims[app])
                table = state.interact(sys_lab, app, u, sys_basis, app_basis, event)
                report.split_tables[e.tag] = table
            elif e.kind == "couple":
                if len(e.participants) == 1:
                    lab = e.participants[0]
                    u = e.unitary.build(((lab, dims[lab]),))
                    state.evolve(lab, u, event)
                else:
                    p1, p2 = e.participants
                    u = e.unitary.build(((p1, dims[p1]), (p2, dims[p2])))
                    bases = dict(e.bases)
                    b1 = bases[p1].build(p1, dims[p1])
                    b2 = bases[p2].build(p2, dims[p2])
                    table = state.interact(p1, p2, u, b1, b2, event)
                    report.split_tables[e.tag] = table
            else:  # meet
                p1, p2 = e.participants
                pairing = state.meet(p1, p2, event)
                report.pairing_tables[e.tag] = pairing
                report.notes.extend(pairing.warnings)
        except EngineError as err:
            raise ScenarioError(f"event {e.tag!r}: {err}") from err

    for lab, st in state.systems.items():
        report.final_classes[lab] = list(st.classes)
        if st.basis is not None and any(c.latest_label() is not None for c in st.classes):
            masses = state.reduced_distribution(lab)
            report.reduced[lab] = masses
            rho_pred = oracle.reduced_prediction(
                st.memory.relative_wavefunction(), lab, st.basis)
            dev = max(abs(masses[k] - rho_pred.get(k, 0.0)) for k in masses)
            report.oracle_checks.append(
                {"kind": "reduced", "system": lab, "max_dev": dev})

    for tag, pairing in report.pairing_tables.items():
        sys_a, sys_b = pairing.systems
        st_a, st_b = state.systems[sys_a], state.systems[sys_b]
        if st_a.basis is None or st_b.basis is None:
            continue
        psi = st_a.memory.relative_wavefunction()
        dist = oracle.born_joint(psi, {sys_a: st_a.basis, sys_b: st_b.basis})
        joint = pairing.outcome_joint()
        keys = set(joint) | {(a, b) for (a, b) in
                             ((ka, kb) for ka in st_a.basis.labels
                              for kb in st_b.basis.labels)}
        dev = max(abs(joint.get(k, 0.0) -
                      dist.prob(*(k if dist.systems == (sys_a, sys_b) else (k[1], k[0]))))
                  for k in keys)
        report.oracle_checks.append({"kind": "pairing", "event": tag, "max_dev": dev})

    if lives is not None:
        report.censuses = {}
        for lab in state.systems:
            report.censuses[lab] = state.finite_census(lab, lives)

    _attach(spec, state, report)
    report.attachments = dict(sorted(report.attachments.items()))
    return report


# ---------------------------------------------------------------------------
# builtin catalog


def _seed(tag: str, ordinal: int, bases: Mapping[str, BasisSpec]):
    return dict(seed_tag=tag, seed_ordinal=ordinal,
                seed_bases=tuple(sorted(bases.items())))


def _comp(labels: Sequence[str]) -> BasisSpec:
    return BasisSpec("computational", tuple(labels))


def _angle(theta: float, labels: Sequence[str]) -> BasisSpec:
    return BasisSpec("angle", tuple(labels), theta=theta)


def _vectors(vectors, labels) -> BasisSpec:
    return BasisSpec("vectors", tuple(labels),
                     vectors=tuple(tuple(complex(c) for c in v) for v in vectors))


PLUS_MINUS = _angle(math.pi / 2.0, ("+", "-"))
XY_BASIS = _vectors([(0.6, 0.8), (0.8, -0.6)], ("x", "y"))

EQ_STATE = (0.8, 0.0, 0.0, 0.6)  # (4|00> + 3|11>)/5
SINGLET = (0.0, 1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0), 0.0)

MERMIN_THETAS = {1: 0.0, 2: 2.0 * math.pi / 3.0, 3: 4.0 * math.pi / 3.0}


def mermin_setting(setting: int, system: str, mirrored: bool = False) -> BasisSpec:
    theta = MERMIN_THETAS[setting]
    if mirrored:
        theta = -theta
    return _angle(theta, ("s1", "s2"))


def _two_qubit_bell_scenario(name: str, state, seed_bases, basis_a, basis_b
                             ) -> ScenarioSpec:
    systems = (SystemDecl("q1", 2), SystemDecl("q2", 2),
               SystemDecl("A", 3), SystemDecl("B", 3))
    if seed_bases is None:
        initials = (InitialDecl(("q1", "q2"), tuple(state)),)
    else:
        initials = (InitialDecl(("q1", "q2"), tuple(state),
                                **_seed("source", 1, seed_bases)),)
    events = (
        EventDecl(2, "alice", "measure", ("q1", "A"), basis=basis_a),
        EventDecl(3, "bob", "measure", ("q2", "B"), basis=basis_b),
        EventDecl(4, "compare", "meet", ("A", "B")),
    )
    return ScenarioSpec(name, systems, initials, events)


def _builtin_example0(basis_a=PLUS_MINUS, basis_b=PLUS_MINUS, state=EQ_STATE):
    a = BasisSpec(basis_a.kind, ("a+", "a-"), basis_a.theta, basis_a.vectors)
    b = BasisSpec(basis_b.kind, ("b+", "b-"), basis_b.theta, basis_b.vectors)
    return _two_qubit_bell_scenario("example0", tuple(state), None, a, b)


def _builtin_example1():
    comp = {"q1": _comp(("0", "1")), "q2": _comp(("0", "1"))}
    return _two_qubit_bell_scenario("example1", EQ_STATE, comp,
                                    _comp(("0", "1")), _comp(("0", "1")))


def _builtin_example2():
    comp = {"q1": _comp(("0", "1")), "q2": _comp(("0", "1"))}
    return _two_qubit_bell_scenario("example2", EQ_STATE, comp,
                                    PLUS_MINUS, PLUS_MINUS)


def _builtin_example3():
    pm = {"q1": PLUS_MINUS, "q2": PLUS_MINUS}
    return _two_qubit_bell_scenario("example3", EQ_STATE, pm,
                                    _comp(("0", "1")), XY_BASIS)


def _builtin_wigner_mermin(setting_a: int = 1, setting_b: int = 2,
                           seed_setting: int = 1, state=SINGLET,
                           name: str = "wigner_mermin"):
    """Singlet pairs measured along three axes 120 degrees apart.

    ``seed_setting`` fixes the source's preferred basis (the singlet looks
    the same in any of them); the classroom exercise seeds in Alice's own
    setting so each round's populations split into whole eighths.
    """
    if setting_a not in (1, 2, 3) or setting_b not in (1, 2, 3) \
            or seed_setting not in (1, 2, 3):
        raise ScenarioError("settings must be in {1, 2, 3}")
    seed_basis = mermin_setting(seed_setting, "q1")
    seed = {"q1": seed_basis, "q2": seed_basis}
    return _two_qubit_bell_scenario(
        name, state, seed,
        mermin_setting(setting_a, "q1"),
        mermin_setting(setting_b, "q2"))


def _builtin_chsh_optimal(theta_a: float = 0.0, theta_b: float = math.pi / 4.0):
    seed = {"q1": _comp(("s1", "s2")), "q2": _comp(("s1", "s2"))}
    return _two_qubit_bell_scenario(
        "chsh_optimal", SINGLET, seed,
        _angle(theta_a, ("+", "-")), _angle(theta_b, ("+", "-")))


def _builtin_classical_observer_hadamard():
    systems = (SystemDecl("q", 2), SystemDecl("D1", 3), SystemDecl("D2", 3))
    initials = (InitialDecl(("q",), (0.8, 0.6)),)
    events = (
        EventDecl(1, "first", "measure", ("q", "D1"), basis=_comp(("0", "1"))),
        EventDecl(2, "gate", "couple", ("q",), unitary=UnitarySpec("hadamard")),
        EventDecl(3, "second", "measure", ("q", "D2"), basis=_comp(("0", "1"))),
    )
    return ScenarioSpec("classical_observer_hadamard", systems, initials, events)


def _ballistic_unitary() -> UnitarySpec:
    s = 1.0 / math.sqrt(2.0)
    # |BB> -> (|BB>+|TT>)/sqrt(2); |TT> -> (|BB>-|TT>)/sqrt(2); off-diagonals fixed
    mat = [
        [s, 0, 0, s],
        [0, 1, 0, 0],
        [0, 0, 1, 0],
        [s, 0, 0, -s],
    ]
    return UnitarySpec("matrix", tuple(tuple(complex(c) for c in row) for row in mat))


def _builtin_ballistic_scatter():
    systems = (SystemDecl("n1", 2), SystemDecl("n2", 2))
    initials = (InitialDecl(("n1",), (1.0, 0.0)), InitialDecl(("n2",), (1.0, 0.0)))
    bt = _comp(("B", "T"))
    events = (
        EventDecl(1, "scatter", "couple", ("n1", "n2"), unitary=_ballistic_unitary(),
                  bases=(("n1", bt), ("n2", bt))),
        EventDecl(2, "recross", "meet", ("n1", "n2")),
    )
    return ScenarioSpec("ballistic_scatter", systems, initials, events)


def _builtin_neutron_superposed_target():
    systems = (SystemDecl("bal", 2), SystemDecl("tgt", 2))
    s = 1.0 / math.sqrt(2.0)
    initials = (InitialDecl(("bal",), (1.0, 0.0)), InitialDecl(("tgt",), (s, s)))
    # encounter at location 1 leaves the lives at location 2 untouched until
    # the ballistic packet arrives there; the net coupling entangles arrival
    # place with target location
    mat = [
        [1, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
    ]
    u = UnitarySpec("matrix", tuple(tuple(complex(c) for c in row) for row in mat))
    events = (
        EventDecl(1, "encounter", "couple", ("bal", "tgt"), unitary=u,
                  bases=(("bal", _comp(("at1", "at2"))),
                         ("tgt", _comp(("loc1", "loc2"))))),
        EventDecl(2, "match", "meet", ("bal", "tgt")),
    )
    return ScenarioSpec("neutron_superposed_target", systems, initials, events)


def _builtin_square_well():
    systems = (SystemDecl("electron", 2), SystemDecl("M", 3))
    s = 1.0 / math.sqrt(2.0)
    initials = (InitialDecl(("electron",), (s, s)),)
    events = (
        EventDecl(1, "readout", "measure", ("electron", "M"),
                  basis=_comp(("n1", "n2"))),
    )
    return ScenarioSpec("square_well", systems, initials, events)


ERASER_ENGINE_BINS = 16


def _eraser_engine_config() -> continuum.EraserConfig:
    length = 16.0
    grid = continuum.Grid(-length / 2.0, length / 2.0, ERASER_ENGINE_BINS)
    return continuum.EraserConfig(sigma=1.0, k=4.0 * math.pi / length, grid=grid)


def _builtin_eraser(qubit_basis: str = "plus_minus"):
    cfg = _eraser_engine_config()
    psi = continuum.screen_qubit_ket(cfg, "S", "q")
    bins = cfg.grid.bins
    systems = (SystemDecl("S", bins), SystemDecl("q", 2),
               SystemDecl("E", bins + 1), SystemDecl("D", 3))
    initials = (InitialDecl(("S", "q"), tuple(psi.amplitudes.tolist())),)
    xlabels = tuple(f"x{i}" for i in range(bins))
    if qubit_basis == "plus_minus":
        qb = PLUS_MINUS
        name = "eraser_plus_basis"
    elif qubit_basis == "computational":
        qb = _comp(("0", "1"))
        name = "eraser_comp_basis"
    else:
        raise ScenarioError(f"unknown eraser basis {qubit_basis!r}")
    events = (
        EventDecl(1, "screen", "measure", ("S", "E"), basis=_comp(xlabels)),
        EventDecl(2, "tag", "measure", ("q", "D"), basis=qb),
        EventDecl(3, "coincide", "meet", ("E", "D")),
    )
    return ScenarioSpec(name, systems, initials, events)


def remote_entanglement_state() -> Ket:
    """Two decayed emitters with their photon modes summed on the splitter.

    One detected photon heralds the symmetric Bell state of the emitters.
    """
    amps = np.zeros(12, dtype=np.complex128)  # (qA, qB, F) with F of dim 3
    half = 0.5
    amps[0 * 6 + 0 * 3 + 0] = half  # |f f 0>
    amps[1 * 6 + 1 * 3 + 2] = half  # |g g 2>
    amps[1 * 6 + 0 * 3 + 1] = half  # |g f 1>
    amps[0 * 6 + 1 * 3 + 1] = half  # |f g 1>
    return Ket((("qA", 2), ("qB", 2), ("F", 3)), amps)


def _builtin_remote_entanglement(setting_a: int = 1, setting_b: int = 2):
    systems = (SystemDecl("qA", 2), SystemDecl("qB", 2), SystemDecl("F", 3),
               SystemDecl("DF", 4), SystemDecl("A", 3), SystemDecl("B", 3))
    psi = remote_entanglement_state()
    initials = (InitialDecl(("qA", "qB", "F"), tuple(psi.amplitudes.tolist())),)
    events = (
        EventDecl(1, "herald", "measure", ("F", "DF"), basis=_comp(("0", "1", "2"))),
        EventDecl(2, "alice", "measure", ("qA", "A"),
                  basis=mermin_setting(setting_a, "qA")),
        EventDecl(3, "bob", "measure", ("qB", "B"),
                  basis=mermin_setting(setting_b, "qB", mirrored=True)),
        EventDecl(4, "compare", "meet", ("A", "B")),
        EventDecl(5, "coincide", "meet", ("A", "DF")),
    )
    return ScenarioSpec("remote_entanglement", systems, initials, events)


_BUILDERS = {
    "example0": _builtin_example0,
    "example1": _builtin_example1,
    "example2": _builtin_example2,
    "example3": _builtin_example3,
    "wigner_mermin": _builtin_wigner_mermin,
    "chsh_optimal": _builtin_chsh_optimal,
    "classical_observer_hadamard": _builtin_classical_observer_hadamard,
    "ballistic_scatter": _builtin_ballistic_scatter,
    "neutron_superposed_target": _builtin_neutron_superposed_target,
    "square_well": _builtin_square_well,
    "eraser_plus_basis": lambda **kw: _builtin_eraser("plus_minus"),
    "eraser_comp_basis": lambda **kw: _builtin_eraser("computational"),
    "remote_entanglement": _builtin_remote_entanglement,
}


def catalog() -> list[str]:
    return sorted(_BUILDERS)


def builtin(name: str, **params) -> ScenarioSpec:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}") from None
    spec = builder(**params)
    validate(spec)
    return spec


# ---------------------------------------------------------------------------
# attachments: scenario-specific derived data


def _attach(spec: ScenarioSpec, state: SimState, report: RunReport) -> None:
    name = spec.name
    if name == "square_well":
        s = 1.0 / math.sqrt(2.0)
        before, after = continuum.square_well_profiles(1.0, [(1, s), (2, s)])
        bound = continuum.collapse_time_lower_bound(before, after, 1.0)
        b2, a2 = continuum.square_well_profiles(1.0, [(1, s), (2, s)], bins=2048)
        bound2 = continuum.collapse_time_lower_bound(b2, a2, 1.0)
        report.attachments["square_well"] = {
            "length": 1.0, "speed": 1.0,
            "before": before, "after": after,
            "collapse_time_lower_bound": bound,
            "collapse_time_lower_bound_refined": bound2,
        }
    elif name.startswith("eraser"):
        cfg = continuum.default_eraser_config()
        plus_minus = angle_basis(math.pi / 2.0, "q", ("+", "-"))
        comp = computational_basis("q", 2)
        cond_pm = continuum.eraser_distributions(cfg, plus_minus)
        cond_c = continuum.eraser_distributions(cfg, comp)
        uncond = continuum.unconditional_density(cfg)
        report.attachments["eraser"] = {
            "config": {"sigma": cfg.sigma, "k": cfg.k,
                       "bins": cfg.grid.bins,
                       "x_min": cfg.grid.x_min, "x_max": cfg.grid.x_max},
            "conditional_plus_minus": cond_pm,
            "conditional_computational": cond_c,
            "unconditional": uncond,
            "visibility_plus": continuum.eraser_fringe_visibility(cfg, cond_pm["+"]),
            "visibility_minus": continuum.eraser_fringe_visibility(cfg, cond_pm["-"]),
            "visibility_computational": max(
                continuum.eraser_fringe_visibility(cfg, p)
                for p in cond_c.values()),
            "unconditional_fringe_correlation": continuum.cosine_correlation(
                uncond, cfg.k),
        }
    elif name == "chsh_optimal":
        settings = oracle.chsh_optimal_settings("q1", "q2")
        psi = Ket((("q1", 2), ("q2", 2)), np.array(SINGLET, dtype=np.complex128))
        s_value = oracle.chsh_value(psi, settings)
        pairing = report.pairing_tables["compare"]
        joint = pairing.outcome_joint()
        e_engine = (joint.get(("+", "+"), 0.0) + joint.get(("-", "-"), 0.0)
                    - joint.get(("+", "-"), 0.0) - joint.get(("-", "+"), 0.0))
        report.attachments["chsh"] = {
            "optimal_value": s_value,
            "engine_correlator": e_engine,
            "closed_form_correlator": oracle.singlet_correlator_exact(
                0.0, math.pi / 4.0),
        }
    elif name == "remote_entanglement":
        psi = remote_entanglement_state()
        one = np.zeros(3, dtype=np.complex128)
        one[1] = 1.0
        heralded = oracle.postselect(psi, "F", one)
        s = 1.0 / math.sqrt(2.0)
        bell = Ket((("qA", 2), ("qB", 2)),
                   np.array([0.0, s, s, 0.0], dtype=np.complex128))
        fid = oracle.fidelity(heralded, bell)
        cond: dict[tuple[str, str], float] = {}
        for c in report.final_classes["A"]:
            outcomes = {}
            for r in c.records:
                outcomes.update(r.outcome_map)
            if outcomes.get("DF") != "1":
                continue
            key = (outcomes["A"], outcomes["B"])
            cond[key] = cond.get(key, 0.0) + c.mass
        total = sum(cond.values())
        conditional = {k: v / total for k, v in cond.items()} if total else {}
        report.attachments["heralded"] = {
            "fidelity": fid,
            "herald_mass": total,
            "conditional_joint": {f"{a}|{b}": m for (a, b), m in
                                  sorted(conditional.items())},
        }


# ---------------------------------------------------------------------------
# golden tables (shipped as a data file with provenance tags)


def _flatten(records) -> tuple:
    out = []
    for r in records:
        for sys, lab in r.outcomes:
            out.append((r.event.tag, sys, lab))
    return tuple(sorted(out))


def split_key(row: SplitRow) -> tuple:
    return (_flatten(row.prior), row.outcomes)


def pair_key(row) -> tuple:
    return (_flatten(row.history_a), _flatten(row.history_b),
            row.outcome_a, row.outcome_b)


GOLDEN_DATA_PATH = Path(__file__).parent / "data" / "golden_tables.json"
_GOLDEN_CACHE: dict | None = None


def _golden_data() -> dict:
    global _GOLDEN_CACHE
    if _GOLDEN_CACHE is None:
        doc = json.loads(GOLDEN_DATA_PATH.read_text(encoding="utf-8"))
        if doc.get("schema") != "pl-golden/1":
            raise ScenarioError(f"unsupported golden schema {doc.get('schema')!r}")
        _GOLDEN_CACHE = doc["scenarios"]
    return _GOLDEN_CACHE


def golden_names() -> list[str]:
    return sorted(_golden_data())


def expected_tables(name: str) -> dict:
    """Exact expected masses per event for a shipped scenario."""
    try:
        entry = _golden_data()[name]
    except KeyError:
        raise ScenarioError(f"no golden tables for {name!r}") from None
    out: dict = {"tolerance": entry.get("tolerance", 1e-12),
                 "derivation": entry.get("derivation", "")}
    if "note" in entry:
        out["note"] = entry["note"]
    for kind in ("splits", "pairings"):
        tables: dict = {}
        for tag, rows in entry.get(kind, {}).items():
            table: dict = {}
            for row in rows:
                mass = Fraction(row["mass"])
                if kind == "splits":
                    key = (tuple(sorted(tuple(p) for p in row["prior"])),
                           tuple(row["outcomes"]))
                else:
                    key = (tuple(sorted(tuple(p) for p in row["history_a"])),
                           tuple(sorted(tuple(p) for p in row["history_b"])),
                           row["outcomes"][0], row["outcomes"][1])
                table[key] = table.get(key, Fraction(0)) + mass
            tables[tag] = table
        out[kind] = tables
    return out


def check_report(report: RunReport, golden: dict | None = None) -> list[str]:
    """Compare a report against the golden tables; returns failure strings."""
    name = report.scenario.name
    if golden is None:
        if name not in _golden_data():
            return [f"no golden tables for {name!r}"]
        golden = expected_tables(name)
    tol = float(golden.get("tolerance", 1e-12))
    failures: list[str] = []
    for tag, rows in golden.get("splits", {}).items():
        table = report.split_tables.get(tag)
        if table is None:
            failures.append(f"missing split table {tag!r}")
            continue
        got = {}
        for r in table.rows:
            key = split_key(r)
            got[key] = got.get(key, 0.0) + r.mass
        failures.extend(_compare(tag, got, rows, tol))
    for tag, rows in golden.get("pairings", {}).items():
        table = report.pairing_tables.get(tag)
        if table is None:
            failures.append(f"missing pairing table {tag!r}")
            continue
        got = {}
        for r in table.rows:
            key = pair_key(r)
            got[key] = got.get(key, 0.0) + r.mass
        failures.extend(_compare(tag, got, rows, tol))
    note = golden.get("note")
    if note and not any(note in n for n in report.notes):
        failures.append(f"expected report note matching {note!r}")
    return failures


def _compare(tag: str, got: dict, expected: dict, tol: float) -> list[str]:
    failures = []
    for key, frac in expected.items():
        val = got.pop(key, 0.0)
        if abs(val - float(frac)) > tol:
            failures.append(f"{tag}: row {key} mass {val!r}, expected {frac}")
    for key, val in got.items():
        if abs(val) > tol:
            failures.append(f"{tag}: unexpected row {key} with mass {val!r}")
    return failures


# ---------------------------------------------------------------------------
# JSON i/o


def _c2j(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _j2c(v) -> complex:
    return complex(v[0], v[1])


def _basis_to_json(b: BasisSpec) -> dict:
    out: dict[str, Any] = {"kind": b.kind, "labels": list(b.labels)}
    if b.theta is not None:
        out["theta"] = b.theta
    if b.vectors is not None:
        out["vectors"] = [[_c2j(c) for c in v] for v in b.vectors]
    return out


def _basis_from_json(d: Mapping) -> BasisSpec:
    vectors = None
    if "vectors" in d:
        vectors = tuple(tuple(_j2c(c) for c in v) for v in d["vectors"])
    return BasisSpec(d["kind"], tuple(d["labels"]), d.get("theta"), vectors)


def to_json(spec: ScenarioSpec) -> str:
    doc = {
        "schema": SCHEMA,
        "name": spec.name,
        "systems": [{"label": s.label, "dim": s.dim} for s in spec.systems],
        "initials": [],
        "events": [],
    }
    for init in spec.initials:
        entry: dict[str, Any] = {
            "systems": list(init.systems),
            "amplitudes": [_c2j(a) for a in init.amplitudes],
        }
        if init.seed_tag is not None:
            entry["seed"] = {
                "ordinal": init.seed_ordinal,
                "tag": init.seed_tag,
                "bases": {lab: _basis_to_json(b) for lab, b in init.seed_bases},
            }
        doc["initials"].append(entry)
    for e in spec.events:
        entry = {"ordinal": e.ordinal, "tag": e.tag, "kind": e.kind,
                 "participants": list(e.participants)}
        if e.basis is not None:
            entry["basis"] = _basis_to_json(e.basis)
        if e.unitary is not None:
            u: dict[str, Any] = {"kind": e.unitary.kind}
            if e.unitary.matrix is not None:
                u["matrix"] = [[_c2j(c) for c in row] for row in e.unitary.matrix]
            entry["unitary"] = u
        if e.bases:
            entry["bases"] = {lab: _basis_to_json(b) for lab, b in e.bases}
        doc["events"].append(entry)
    return json.dumps(doc, indent=2, sort_keys=True)


def from_json(text: str) -> ScenarioSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"invalid scenario JSON: {err}") from err
    if doc.get("schema") != SCHEMA:
        raise ScenarioError(f"unsupported schema {doc.get('schema')!r}")
    systems = tuple(SystemDecl(s["label"], int(s["dim"])) for s in doc["systems"])
    initials = []
    for entry in doc["initials"]:
        seed = entry.get("seed")
        kwargs: dict[str, Any] = {}
        if seed is not None:
            kwargs = _seed(seed["tag"], int(seed["ordinal"]),
                           {lab: _basis_from_json(b)
                            for lab, b in seed["bases"].items()})
        initials.append(InitialDecl(tuple(entry["systems"]),
                                    tuple(_j2c(a) for a in entry["amplitudes"]),
                                    **kwargs))
    events = []
    for entry in doc["events"]:
        basis = _basis_from_json(entry["basis"]) if "basis" in entry else None
        unitary = None
        if "unitary" in entry:
            u = entry["unitary"]
            matrix = None
            if "matrix" in u:
                matrix = tuple(tuple(_j2c(c) for c in row) for row in u["matrix"])
            unitary = UnitarySpec(u["kind"], matrix)
        bases = ()
        if "bases" in entry:
            bases = tuple(sorted(
                (lab, _basis_from_json(b)) for lab, b in entry["bases"].items()))
        events.append(EventDecl(int(entry["ordinal"]), entry["tag"], entry["kind"],
                                tuple(entry["participants"]), basis, unitary, bases))
    spec = ScenarioSpec(doc["name"], systems, tuple(initials), tuple(events))
    validate(spec)
    return spec


def resolve(name_or_path: str) -> ScenarioSpec:
    """Look up a scenario by catalog name, file path, or PL_SCENARIO_PATH."""
    if name_or_path in _BUILDERS:
        return builtin(name_or_path)
    p = Path(name_or_path)
    if p.is_file():
        return from_json(p.read_text(encoding="utf-8"))
    for root in os.environ.get("PL_SCENARIO_PATH", "").split(os.pathsep):
        if not root:
            continue
        candidate = Path(root) / f"{name_or_path}.json"
        if candidate.is_file():
            return from_json(candidate.read_text(encoding="utf-8"))
    raise ScenarioError(f"unknown scenario {name_or_path!r}")
