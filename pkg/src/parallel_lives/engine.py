"""Population mechanism: lives, relative worlds, local interactions.

Each system carries a set of life classes.  A class groups the lives of
one system that share an outcome history (the external memory); it has a
mass (the proportion of the system's lives in that relative world) and a
reference to the internal memory accumulated along its past interaction
cone.  Interactions split classes into futures, meetings pair classes of
two systems one-to-one, and the weights for both come from the
synchronized relative wavefunction.

Classes whose incoming weight is exactly zero are kept (with mass 0) when
the interaction admits them as futures: they represent admissible relative
worlds that received no lives, and later pairings may address them.  They
are excluded from censuses and sampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .qmath import (
    Basis,
    Ket,
    Unitary,
    apply,
    partial_trace,
    project,
    projection_weight,
    tensor,
)

MASS_ATOL = 1e-12
MARGINAL_ATOL = 1e-9
FUTURE_EPS = 1e-10


class EngineError(ValueError):
    """Raised when an operation violates the mechanism's contracts."""


class SynchronizeError(EngineError):
    """Two internal memories disagree on a shared entry."""


class MassMismatchError(EngineError):
    """The two sides of a meeting carry unequal mass in a compatibility group."""


class InconsistentHistoryError(EngineError):
    """A history admits no future with nonzero weight."""


class NotRepresentable(EngineError):
    """A finite census cannot allocate whole lives at the requested N."""


@dataclass(frozen=True, order=True)
class EventId:
    ordinal: int
    tag: str


@dataclass(frozen=True)
class OutcomeRecord:
    """Definite outcomes, one per participating system, at one event."""

    event: EventId
    outcomes: tuple[tuple[str, str], ...]  # sorted (system, outcome label)

    @staticmethod
    def make(event: EventId, outcomes: Mapping[str, str]) -> "OutcomeRecord":
        if not outcomes:
            raise EngineError("an outcome record needs at least one system")
        return OutcomeRecord(event, tuple(sorted((str(k), str(v)) for k, v in outcomes.items())))

    @property
    def outcome_map(self) -> dict[str, str]:
        return dict(self.outcomes)

    def outcome_of(self, system: str) -> str | None:
        for sys, lab in self.outcomes:
            if sys == system:
                return lab
        return None


@dataclass(frozen=True)
class Factor:
    """Latest single-system conditional state within one history.

    ``ordinal`` is the causal position of the last update (outcome record
    or single-system evolution); ``label`` is the last recorded outcome
    label, if any.
    """

    ordinal: int
    label: str | None
    vector: np.ndarray


class InternalMemory:
    """Initial states plus causally ordered couplings of a past cone.

    Immutable by convention; ``synchronize`` and ``with_*`` return fresh
    instances.  The relative wavefunction is computed lazily and cached on
    the instance.
    """

    __slots__ = ("initials", "couplings", "_psi")

    def __init__(self, initials: Iterable[tuple[tuple[str, ...], Ket]],
                 couplings: Iterable[tuple[EventId, Unitary]] = ()):
        inits = tuple(sorted(((tuple(labels), ket) for labels, ket in initials),
                             key=lambda item: item[0]))
        seen: set[str] = set()
        for labels, _ in inits:
            if seen.intersection(labels):
                raise SynchronizeError(f"system in two initial states: {labels}")
            seen.update(labels)
        self.initials = inits
        self.couplings = tuple(sorted(couplings, key=lambda item: item[0]))
        for _, u in self.couplings:
            missing = set(u.labels).difference(seen)
            if missing:
                raise EngineError(f"coupling references {sorted(missing)} with no initial state")
        self._psi: Ket | None = None

    @property
    def systems(self) -> frozenset[str]:
        out: set[str] = set()
        for labels, _ in self.initials:
            out.update(labels)
        return frozenset(out)

    @property
    def events(self) -> tuple[EventId, ...]:
        return tuple(ev for ev, _ in self.couplings)

    def with_coupling(self, event: EventId, u: Unitary) -> "InternalMemory":
        return InternalMemory(self.initials, self.couplings + ((event, u),))

    def relative_wavefunction(self) -> Ket:
        """Tensor the initial states, then apply the couplings in causal order."""
        if self._psi is None:
            psi = tensor([ket for _, ket in self.initials])
            for _, u in self.couplings:
                psi = apply(u, psi)
            n = psi.norm()
            if abs(n - 1.0) > 1e-10:
                raise EngineError(f"relative wavefunction norm drifted to {n!r}")
            self._psi = psi
        return self._psi


def synchronize(a: InternalMemory, b: InternalMemory) -> InternalMemory:
    """Union of two internal memories; shared entries must be identical."""
    init: dict[tuple[str, ...], Ket] = {labels: ket for labels, ket in a.initials}
    for labels, ket in b.initials:
        if labels in init:
            if init[labels] is not ket and not np.array_equal(
                    init[labels].amplitudes, ket.amplitudes):
                raise SynchronizeError(f"conflicting initial states for {labels}")
        else:
            overlap = [l for group in init for l in group if l in labels]
            if overlap:
                raise SynchronizeError(
                    f"initial-state groups overlap on {sorted(set(overlap))}")
            init[labels] = ket
    coup: dict[EventId, Unitary] = {ev: u for ev, u in a.couplings}
    for ev, u in b.couplings:
        if ev in coup:
            if coup[ev] is not u and not np.array_equal(coup[ev].matrix, u.matrix):
                raise SynchronizeError(f"conflicting couplings for event {ev}")
        else:
            coup[ev] = u
    return InternalMemory(init.items(), coup.items())


@dataclass(frozen=True)
class LifeClass:
    """Lives of one system sharing an external-memory history."""

    system: str
    records: tuple[OutcomeRecord, ...]
    mass: float
    factors: tuple[tuple[str, Factor], ...]  # sorted by system label

    @staticmethod
    def make(system: str, records: Sequence[OutcomeRecord], mass: float,
             factors: Mapping[str, Factor]) -> "LifeClass":
        recs = tuple(sorted(records, key=lambda r: r.event))
        return LifeClass(system, recs, float(mass),
                         tuple(sorted(factors.items())))

    @property
    def factor_map(self) -> dict[str, Factor]:
        return dict(self.factors)

    @property
    def history_key(self) -> tuple:
        return tuple((r.event.ordinal, r.event.tag, r.outcomes) for r in self.records)

    def latest_label(self, system: str | None = None) -> str | None:
        system = system or self.system
        for sys, f in self.factors:
            if sys == system:
                return f.label
        return None

    def event_outcomes(self) -> dict[EventId, dict[str, str]]:
        return {r.event: r.outcome_map for r in self.records}


def compatible(a: LifeClass, b: LifeClass) -> bool:
    """Lives of different systems can meet only if their external memories
    agree on every shared event."""
    if a.system == b.system:
        raise EngineError("compatibility is defined between different systems")
    ea = a.event_outcomes()
    eb = b.event_outcomes()
    for ev in ea.keys() & eb.keys():
        oa, ob = ea[ev], eb[ev]
        for sys in oa.keys() & ob.keys():
            if oa[sys] != ob[sys]:
                return False
    return True


def merge_factors(a: Mapping[str, Factor], b: Mapping[str, Factor]) -> dict[str, Factor]:
    out = dict(a)
    for sys, f in b.items():
        cur = out.get(sys)
        if cur is None or f.ordinal > cur.ordinal:
            out[sys] = f
        elif f.ordinal == cur.ordinal and not np.array_equal(f.vector, cur.vector):
            raise EngineError(f"inconsistent latest state for {sys!r} at ordinal {f.ordinal}")
    return out


def merge_records(a: Sequence[OutcomeRecord], b: Sequence[OutcomeRecord]
                  ) -> tuple[OutcomeRecord, ...]:
    by_event: dict[EventId, OutcomeRecord] = {r.event: r for r in a}
    for r in b:
        cur = by_event.get(r.event)
        if cur is None:
            by_event[r.event] = r
        elif cur.outcomes != r.outcomes:
            merged = dict(cur.outcomes)
            for sys, lab in r.outcomes:
                if merged.get(sys, lab) != lab:
                    raise EngineError(f"incompatible records merged at {r.event}")
                merged[sys] = lab
            by_event[r.event] = OutcomeRecord.make(r.event, merged)
    return tuple(sorted(by_event.values(), key=lambda r: r.event))


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class SplitRow:
    prior: tuple[OutcomeRecord, ...]
    prior_mass: float
    outcomes: tuple[str, str]
    weight: float
    mass: float


@dataclass(frozen=True)
class SplitTable:
    event: EventId
    systems: tuple[str, str]
    rows: tuple[SplitRow, ...]

    def total_mass(self) -> float:
        return sum(r.mass for r in self.rows)

    def masses_by_outcome(self, side: int = 0) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.rows:
            lab = r.outcomes[side]
            out[lab] = out.get(lab, 0.0) + r.mass
        return out


@dataclass(frozen=True)
class PairRow:
    history_a: tuple[OutcomeRecord, ...]
    history_b: tuple[OutcomeRecord, ...]
    outcome_a: str
    outcome_b: str
    mass: float


@dataclass(frozen=True)
class PairingTable:
    event: EventId
    systems: tuple[str, str]
    rows: tuple[PairRow, ...]
    warnings: tuple[str, ...] = ()

    def total_mass(self) -> float:
        return sum(r.mass for r in self.rows)

    def marginal_a(self) -> dict[tuple, float]:
        out: dict[tuple, float] = {}
        for r in self.rows:
            key = _records_key(r.history_a)
            out[key] = out.get(key, 0.0) + r.mass
        return out

    def marginal_b(self) -> dict[tuple, float]:
        out: dict[tuple, float] = {}
        for r in self.rows:
            key = _records_key(r.history_b)
            out[key] = out.get(key, 0.0) + r.mass
        return out

    def outcome_joint(self) -> dict[tuple[str, str], float]:
        out: dict[tuple[str, str], float] = {}
        for r in self.rows:
            key = (r.outcome_a, r.outcome_b)
            out[key] = out.get(key, 0.0) + r.mass
        return out


def _records_key(records: Sequence[OutcomeRecord]) -> tuple:
    return tuple((r.event.ordinal, r.event.tag, r.outcomes) for r in records)


# ---------------------------------------------------------------------------
# simulation state


@dataclass
class SystemState:
    label: str
    dim: int
    memory: InternalMemory
    classes: list[LifeClass]
    basis: Basis | None = None

    def check_mass(self):
        total = sum(c.mass for c in self.classes)
        if abs(total - 1.0) > 1e-9:
            raise EngineError(f"masses of {self.label!r} sum to {total!r}")


class SimState:
    """Mutable simulation state: one SystemState per system.

    Owned by a single execution context while mutating; the tables it
    emits are immutable.
    """

    def __init__(self):
        self.systems: dict[str, SystemState] = {}

    def add_product_system(self, label: str, ket: Ket):
        """A system whose lives all share one world (no outcome records)."""
        if label in self.systems:
            raise EngineError(f"duplicate system {label!r}")
        mem = InternalMemory([((label,), ket)])
        factors = {label: Factor(-1, None, ket.amplitudes)}
        cls = LifeClass.make(label, (), 1.0, factors)
        self.systems[label] = SystemState(label, ket.dim_of(label), mem, [cls])

    def add_joint_systems(self, labels: Sequence[str], ket: Ket,
                          seed: tuple[EventId, Mapping[str, Basis]] | None = None):
        """Systems prepared together in ``ket``.

        With ``seed`` the preparation counts as a past interaction event:
        lives divide into relative worlds labeled by the joint outcomes in
        the given preferred bases, with Born masses.  Without it the lives
        of each member all share one (unrecorded) world.
        """
        labels = [str(l) for l in labels]
        for lab in labels:
            if lab in self.systems:
                raise EngineError(f"duplicate system {lab!r}")
        mem = InternalMemory([(tuple(sorted(labels)), ket)])
        if seed is None:
            for lab in labels:
                cls = LifeClass.make(lab, (), 1.0, {})
                self.systems[lab] = SystemState(lab, ket.dim_of(lab), mem, [cls])
            return
        event, bases = seed
        for lab in labels:
            if lab not in bases:
                raise EngineError(f"seed event lacks a preferred basis for {lab!r}")
        combos: list[tuple[dict[str, str], dict[str, Factor], float]] = []
        import itertools as _it

        index_ranges = [range(len(bases[lab])) for lab in labels]
        for combo in _it.product(*index_ranges):
            factors = {lab: bases[lab].vectors[i] for lab, i in zip(labels, combo)}
            amp = project(ket, factors)
            mass = float(np.vdot(amp.amplitudes, amp.amplitudes).real)
            if mass <= FUTURE_EPS ** 2:
                continue
            outcome = {lab: bases[lab].labels[i] for lab, i in zip(labels, combo)}
            fmap = {lab: Factor(event.ordinal, bases[lab].labels[i],
                                bases[lab].vectors[i])
                    for lab, i in zip(labels, combo)}
            combos.append((outcome, fmap, mass))
        for lab in labels:
            classes = []
            for outcome, fmap, mass in combos:
                rec = OutcomeRecord.make(event, outcome)
                classes.append(LifeClass.make(lab, (rec,), mass, fmap))
            st = SystemState(lab, ket.dim_of(lab), mem, classes, bases[lab])
            st.check_mass()
            self.systems[lab] = st

    def system(self, label: str) -> SystemState:
        try:
            return self.systems[label]
        except KeyError:
            raise EngineError(f"unknown system {label!r}") from None

    # -- events ------------------------------------------------------------

    def evolve(self, label: str, u: Unitary, event: EventId):
        """Single-system unitary: updates internal memories and conditional
        states, records no outcome, splits nothing."""
        st = self.system(label)
        if set(u.labels) != {label}:
            raise EngineError(f"evolve expects a unitary on {label!r} alone")
        st.memory = st.memory.with_coupling(event, u)
        new_classes = []
        for c in st.classes:
            fmap = c.factor_map
            f = fmap.get(label)
            if f is not None:
                fmap[label] = Factor(event.ordinal, f.label, u.matrix @ f.vector)
            new_classes.append(LifeClass.make(label, c.records, c.mass, fmap))
        st.classes = new_classes

    def interact(self, sys1: str, sys2: str, u: Unitary | None,
                 basis1: Basis | None, basis2: Basis | None,
                 event: EventId) -> SplitTable:
        """Pairwise interaction: synchronize memories, pair compatible
        classes one-to-one, divide each joint history into futures."""
        table, _ = self._interact(sys1, sys2, u, basis1, basis2, event, as_meet=False)
        return table

    def meet(self, sys_a: str, sys_b: str, event: EventId) -> PairingTable:
        """Identity-coupling interaction: bases unchanged, histories pair
        and merge, the meeting is recorded in both external memories."""
        _, pairing = self._interact(sys_a, sys_b, None, None, None, event, as_meet=True)
        return pairing

    def _interact(self, sys1: str, sys2: str, u: Unitary | None,
                  basis1: Basis | None, basis2: Basis | None,
                  event: EventId, as_meet: bool):
        if sys1 == sys2:
            raise EngineError("an interaction needs two distinct systems")
        st1, st2 = self.system(sys1), self.system(sys2)
        if u is not None:
            if set(u.labels) != {sys1, sys2}:
                raise EngineError(
                    f"coupling acts on {u.labels}, expected {{{sys1!r}, {sys2!r}}}")
        memory = synchronize(st1.memory, st2.memory)
        psi_pre = memory.relative_wavefunction()
        if u is not None:
            memory = memory.with_coupling(event, u)
            psi_new = memory.relative_wavefunction()
        else:
            psi_new = psi_pre

        pairs = self._pair_classes(st1, st2, psi_pre, event)

        out_basis1 = basis1 if basis1 is not None else st1.basis
        out_basis2 = basis2 if basis2 is not None else st2.basis

        split_rows: list[SplitRow] = []
        pair_rows: list[PairRow] = []
        new_classes: dict[tuple, LifeClass] = {}
        for ca, cb, joint_mass in pairs:
            records = merge_records(ca.records, cb.records)
            factors = merge_factors(ca.factor_map, cb.factor_map)
            if as_meet:
                futures = [(_current_label(ca), _current_label(cb), 1.0)]
            else:
                futures = self._futures_and_weights(
                    sys1, sys2, u, out_basis1, out_basis2, factors, psi_new,
                    records)
            for lab1, lab2, weight in futures:
                mass = joint_mass * weight
                fmap = dict(factors)
                if not as_meet:
                    i1 = out_basis1.index_of(lab1)
                    i2 = out_basis2.index_of(lab2)
                    fmap[sys1] = Factor(event.ordinal, lab1, out_basis1.vectors[i1])
                    fmap[sys2] = Factor(event.ordinal, lab2, out_basis2.vectors[i2])
                else:
                    for sys, lab in ((sys1, lab1), (sys2, lab2)):
                        f = fmap.get(sys)
                        if f is not None:
                            fmap[sys] = Factor(event.ordinal, f.label, f.vector)
                rec = OutcomeRecord.make(event, {sys1: lab1, sys2: lab2})
                recs = merge_records(records, (rec,))
                key = _records_key(recs)
                if key in new_classes:
                    old = new_classes[key]
                    new_classes[key] = LifeClass.make(sys1, recs, old.mass + mass, fmap)
                else:
                    new_classes[key] = LifeClass.make(sys1, recs, mass, fmap)
                split_rows.append(SplitRow(records, joint_mass, (lab1, lab2),
                                           weight, mass))
                pair_rows.append(PairRow(ca.records, cb.records, lab1, lab2, mass))

        ordered = sorted(new_classes.values(), key=lambda c: c.history_key)
        classes1 = [LifeClass.make(sys1, c.records, c.mass, c.factor_map) for c in ordered]
        classes2 = [LifeClass.make(sys2, c.records, c.mass, c.factor_map) for c in ordered]

        warnings = self._marginal_warnings(st1, st2, pair_rows, event)

        st1.classes, st2.classes = classes1, classes2
        st1.memory = st2.memory = memory
        if basis1 is not None:
            st1.basis = basis1
        if basis2 is not None:
            st2.basis = basis2
        st1.check_mass()
        st2.check_mass()

        split_rows.sort(key=lambda r: (_records_key(r.prior), r.outcomes))
        pair_rows.sort(key=lambda r: (_records_key(r.history_a),
                                      _records_key(r.history_b)))
        table = SplitTable(event, (sys1, sys2), tuple(split_rows))
        pairing = PairingTable(event, (sys1, sys2), tuple(pair_rows), warnings)
        total = table.total_mass()
        if abs(total - 1.0) > 1e-9:
            raise EngineError(f"event {event.tag}: table mass {total!r}")
        return table, pairing

    # -- internals ----------------------------------------------------------

    def _pair_classes(self, st1: SystemState, st2: SystemState, psi_pre: Ket,
                      event: EventId) -> list[tuple[LifeClass, LifeClass, float]]:
        """One-to-one allocation of the two systems' lives.

        Compatible classes are grouped into connected components; each
        component must carry equal mass on both sides.  Within a component
        each prior class of the first side distributes its own mass over
        the partner classes it can meet, proportionally to the squared
        overlap of the synchronized wavefunction with the pair's latest
        states; with a single reachable partner the allocation is forced.
        """
        edges: list[tuple[int, int]] = []
        for i, ca in enumerate(st1.classes):
            for j, cb in enumerate(st2.classes):
                if compatible(ca, cb):
                    edges.append((i, j))
        if not edges:
            raise EngineError(
                f"event {event.tag}: no compatible class pairs between "
                f"{st1.label!r} and {st2.label!r}")
        parent: dict[tuple[str, int], tuple[str, int]] = {}

        def find(x):
            while parent.setdefault(x, x) != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x, y):
            parent[find(x)] = find(y)

        for i, j in edges:
            union(("a", i), ("b", j))
        groups: dict[tuple[str, int], list[tuple[int, int]]] = {}
        for i, j in edges:
            groups.setdefault(find(("a", i)), []).append((i, j))

        pairs: list[tuple[LifeClass, LifeClass, float]] = []
        for comp in groups.values():
            a_idx = sorted({i for i, _ in comp})
            b_idx = sorted({j for _, j in comp})
            mass_a = sum(st1.classes[i].mass for i in a_idx)
            mass_b = sum(st2.classes[j].mass for j in b_idx)
            if abs(mass_a - mass_b) > MARGINAL_ATOL:
                raise MassMismatchError(
                    f"event {event.tag}: sides carry unequal mass in a "
                    f"compatibility group ({mass_a!r} vs {mass_b!r}); lives must "
                    f"match one-to-one")
            partners: dict[int, list[int]] = {}
            for i, j in comp:
                partners.setdefault(i, []).append(j)
            for i in a_idx:
                ca = st1.classes[i]
                reachable = partners[i]
                if len(reachable) == 1:
                    pairs.append((ca, st2.classes[reachable[0]], ca.mass))
                    continue
                weights: list[float] = []
                for j in reachable:
                    cb = st2.classes[j]
                    factors = merge_factors(ca.factor_map, cb.factor_map)
                    proj = {sys: f.vector for sys, f in factors.items()}
                    weights.append(projection_weight(psi_pre, proj))
                z = sum(weights)
                if z <= FUTURE_EPS ** 2:
                    if ca.mass <= FUTURE_EPS:
                        for j in reachable:
                            pairs.append((ca, st2.classes[j], 0.0))
                        continue
                    raise InconsistentHistoryError(
                        f"event {event.tag}: history of {st1.label!r} has zero "
                        f"total overlap with every compatible partner")
                for j, w in zip(reachable, weights):
                    pairs.append((ca, st2.classes[j], ca.mass * w / z))
        return pairs

    def _futures_and_weights(self, sys1: str, sys2: str, u: Unitary | None,
                             basis1: Basis | None, basis2: Basis | None,
                             factors: Mapping[str, Factor], psi_new: Ket,
                             records: Sequence[OutcomeRecord]
                             ) -> list[tuple[str, str, float]]:
        """Admissible futures of one joint history and their weights.

        Futures come from expanding the coupling applied to the history
        state; the weights come from the synchronized wavefunction
        projected on each future and the latest states of all other
        systems in the cone.
        """
        if basis1 is None or basis2 is None:
            raise EngineError("an interaction with a coupling needs outcome bases")
        st1, st2 = self.system(sys1), self.system(sys2)
        admissible = self._admissible(sys1, sys2, u, basis1, basis2, factors,
                                      st1.dim, st2.dim)
        others = {sys: f.vector for sys, f in factors.items()
                  if sys not in (sys1, sys2)}
        numerators: dict[tuple[int, int], float] = {}
        for i, j in admissible:
            proj = dict(others)
            proj[sys1] = basis1.vectors[i]
            proj[sys2] = basis2.vectors[j]
            numerators[(i, j)] = projection_weight(psi_new, proj)
        z = sum(numerators.values())
        if z <= FUTURE_EPS ** 2:
            raise InconsistentHistoryError(
                f"history {[r.outcomes for r in records]} admits no future with "
                f"nonzero weight")
        return [(basis1.labels[i], basis2.labels[j], numerators[(i, j)] / z)
                for i, j in sorted(numerators)]

    def _admissible(self, sys1: str, sys2: str, u: Unitary | None,
                    basis1: Basis, basis2: Basis,
                    factors: Mapping[str, Factor], d1: int, d2: int
                    ) -> list[tuple[int, int]]:
        f1 = factors.get(sys1)
        f2 = factors.get(sys2)
        mat = u.matrix if u is not None else np.eye(d1 * d2, dtype=np.complex128)
        if u is not None and u.labels != (sys1, sys2):
            # reorder operator axes so rows/cols are (sys1, sys2) row-major
            t = u.matrix.reshape(d2, d1, d2, d1).transpose(1, 0, 3, 2)
            mat = t.reshape(d1 * d2, d1 * d2)
        ten = mat.reshape(d1, d2, d1, d2)
        if f1 is not None:
            ten = np.tensordot(ten, f1.vector, axes=(2, 0))  # contracts sys1 column
            if f2 is not None:
                ten = np.tensordot(ten, f2.vector, axes=(2, 0))
        elif f2 is not None:
            ten = np.tensordot(ten, f2.vector, axes=(3, 0))  # contracts sys2 column
        out: list[tuple[int, int]] = []
        for i in range(len(basis1)):
            for j in range(len(basis2)):
                block = np.tensordot(
                    basis2.vectors[j].conj(),
                    np.tensordot(basis1.vectors[i].conj(), ten, axes=(0, 0)),
                    axes=(0, 0))
                if float(np.linalg.norm(block)) > FUTURE_EPS:
                    out.append((i, j))
        return out

    def _marginal_warnings(self, st1: SystemState, st2: SystemState,
                           pair_rows: Sequence[PairRow], event: EventId
                           ) -> tuple[str, ...]:
        """Flag pairings that redistribute a side's prior class masses.

        The weight formula can assign a class pairing mass different from
        the class's own mass (its marginal law still holds in total); such
        events are reported, not rejected.
        """
        sums_a: dict[tuple, float] = {}
        sums_b: dict[tuple, float] = {}
        for r in pair_rows:
            ka, kb = _records_key(r.history_a), _records_key(r.history_b)
            sums_a[ka] = sums_a.get(ka, 0.0) + r.mass
            sums_b[kb] = sums_b.get(kb, 0.0) + r.mass
        notes = []
        for st, sums, side in ((st1, sums_a, "left"), (st2, sums_b, "right")):
            worst = 0.0
            for c in st.classes:
                got = sums.get(_records_key(c.records), 0.0)
                worst = max(worst, abs(got - c.mass))
            if worst > MARGINAL_ATOL:
                notes.append(
                    f"event {event.tag}: pairing redistributes {st.label!r} "
                    f"({side}) across prior classes by up to {worst:.6g}; "
                    f"per-outcome totals still follow the reduced density matrix")
        return tuple(notes)

    # -- observables ---------------------------------------------------------

    def reduced_distribution(self, label: str, basis: Basis | None = None
                             ) -> dict[str, float]:
        """Per-outcome life proportions of one system.

        In the system's current preferred basis this sums class masses by
        latest outcome and verifies the result against <u|rho|u> from the
        reduced density matrix of the relative wavefunction; in any other
        basis it returns the reduced-density-matrix prediction directly.
        """
        st = self.system(label)
        basis = basis or st.basis
        if basis is None:
            raise EngineError(f"{label!r} has no preferred basis; pass one")
        psi = st.memory.relative_wavefunction()
        rho = partial_trace(psi, {label})
        oracle = {lab: rho.expectation(v) for lab, v in zip(basis.labels, basis.vectors)}
        if st.basis is not None and _same_basis(basis, st.basis) and any(
                c.latest_label() is not None for c in st.classes):
            masses: dict[str, float] = {lab: 0.0 for lab in basis.labels}
            for c in st.classes:
                lab = c.latest_label()
                if lab is None:
                    raise EngineError(f"class of {label!r} lacks an outcome record")
                masses[lab] = masses.get(lab, 0.0) + c.mass
            worst = max(abs(masses[lab] - oracle.get(lab, 0.0)) for lab in masses)
            if worst > MARGINAL_ATOL:
                raise EngineError(
                    f"{label!r}: class masses deviate from the reduced density "
                    f"matrix by {worst:.3e}")
            return masses
        return oracle

    def finite_census(self, label: str, n: int) -> dict[tuple, int]:
        """Allocate exactly ``n`` lives to the classes of one system.

        Every class mass times ``n`` must be a whole number (within 1e-9);
        otherwise the caller must choose a larger ``n``.
        """
        if n < 1:
            raise EngineError("census needs n >= 1")
        st = self.system(label)
        counts: dict[tuple, int] = {}
        total = 0
        for c in st.classes:
            if c.mass <= 0.0:
                continue
            raw = c.mass * n
            count = round(raw)
            if abs(raw - count) > 1e-9:
                raise NotRepresentable(
                    f"{label!r}: class mass {c.mass!r} times {n} is not a whole "
                    f"number of lives; choose a larger n")
            if count:
                counts[_records_key(c.records)] = count
            total += count
        if total != n:
            raise NotRepresentable(
                f"{label!r}: counts sum to {total}, expected {n}")
        return counts


def _current_label(c: LifeClass) -> str:
    lab = c.latest_label()
    return lab if lab is not None else "*"


def _same_basis(a: Basis, b: Basis) -> bool:
    if len(a) != len(b) or a.dim != b.dim:
        return False
    for va, vb in zip(a.vectors, b.vectors):
        if abs(abs(complex(np.vdot(va, vb))) - 1.0) > 1e-9:
            return False
    return True
