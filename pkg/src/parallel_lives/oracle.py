"""Independent standard-quantum-mechanics reference.

Everything here is textbook: global-wavefunction Born statistics,
CHSH values, the brute-force local-hidden-variable ceiling for the
three-setting singlet test, weak values and post-selection.  This module
never imports the engine, so the equivalence tests between the two are
meaningful.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .qmath import Basis, Ket, angle_basis, partial_trace, project

PROB_ATOL = 1e-12


class OracleError(ValueError):
    """Raised on ill-posed reference computations."""


@dataclass(frozen=True)
class JointDistribution:
    """Born-rule joint outcome distribution over a set of systems."""

    systems: tuple[str, ...]
    labels: tuple[tuple[str, ...], ...]
    probabilities: dict[tuple[str, ...], float]

    def __post_init__(self):
        total = sum(self.probabilities.values())
        if abs(total - 1.0) > PROB_ATOL:
            raise OracleError(f"joint distribution sums to {total!r}")
        if any(p < -PROB_ATOL for p in self.probabilities.values()):
            raise OracleError("negative probability")

    def prob(self, *outcome: str) -> float:
        return self.probabilities.get(tuple(outcome), 0.0)

    def marginal(self, system: str) -> dict[str, float]:
        i = self.systems.index(system)
        out: dict[str, float] = {}
        for key, p in self.probabilities.items():
            out[key[i]] = out.get(key[i], 0.0) + p
        return out


def born_joint(psi: Ket, bases: Mapping[str, Basis]) -> JointDistribution:
    """Textbook joint distribution for measuring ``bases`` on ``psi``.

    Systems not covered by ``bases`` are traced out.
    """
    if not bases:
        raise OracleError("no measurement bases given")
    systems = tuple(sorted(bases))
    for sys in systems:
        if sys not in psi.labels:
            raise OracleError(f"basis on {sys!r}, absent from state {psi.labels}")
    label_sets = tuple(tuple(bases[sys].labels) for sys in systems)
    probs: dict[tuple[str, ...], float] = {}
    for combo in itertools.product(*(range(len(bases[sys])) for sys in systems)):
        factors = {sys: bases[sys].vectors[i] for sys, i in zip(systems, combo)}
        rem = project(psi, factors)
        p = float(np.vdot(rem.amplitudes, rem.amplitudes).real)
        probs[tuple(bases[sys].labels[i] for sys, i in zip(systems, combo))] = p
    return JointDistribution(systems, label_sets, probs)


def mermin_statistic(rounds: Sequence[tuple[int, int, int, int]]) -> tuple[float, float]:
    """Empirical (P(same outcome | different settings), P(opposite | same)).

    Each round is (setting_a, setting_b, outcome_a, outcome_b) with
    settings in {1,2,3} and outcomes in {1,2}.
    """
    same_diff = opp_same = n_diff = n_same = 0
    for sa, sb, oa, ob in rounds:
        if sa not in (1, 2, 3) or sb not in (1, 2, 3):
            raise OracleError(f"setting outside {{1,2,3}}: {(sa, sb)}")
        if sa == sb:
            n_same += 1
            opp_same += oa != ob
        else:
            n_diff += 1
            same_diff += oa == ob
    if n_diff == 0:
        raise OracleError("no rounds with different settings")
    if n_same == 0:
        raise OracleError("no rounds with equal settings")
    return same_diff / n_diff, opp_same / n_same


def lhv_bound_mermin() -> float:
    """Ceiling on P(same outcome | different settings) for deterministic
    anticorrelated local assignments, by exhaustive enumeration.

    Alice assigns an outcome to each of the three settings; Bob's
    assignment is the complement.  Different-setting pairs (i, j), i != j,
    give the same outcome exactly when Alice's a_i != a_j.
    """
    best = Fraction(0)
    for assignment in itertools.product((1, -1), repeat=3):
        same = sum(
            1
            for i, j in itertools.permutations(range(3), 2)
            if assignment[i] != assignment[j]
        )
        best = max(best, Fraction(same, 6))
    return float(best)


def lhv_same_rate(assignment: tuple[int, int, int]) -> float:
    """P(same | different settings) for one anticorrelated assignment."""
    same = sum(
        1
        for i, j in itertools.permutations(range(3), 2)
        if assignment[i] != assignment[j]
    )
    return same / 6.0


def correlator(dist: JointDistribution, sys_a: str, sys_b: str) -> float:
    """<AB> with the first basis label of each side mapped to +1."""
    ia = dist.systems.index(sys_a)
    ib = dist.systems.index(sys_b)
    first_a = dist.labels[ia][0]
    first_b = dist.labels[ib][0]
    value = 0.0
    for key, p in dist.probabilities.items():
        sa = 1.0 if key[ia] == first_a else -1.0
        sb = 1.0 if key[ib] == first_b else -1.0
        value += sa * sb * p
    return value


def chsh_value(psi: Ket, settings: tuple[Basis, Basis, Basis, Basis],
               sys_a: str | None = None, sys_b: str | None = None) -> float:
    """S = |E(a,b) + E(a,b') + E(a',b) - E(a',b')| on a two-qubit state."""
    a, ap, b, bp = settings
    sys_a = sys_a or a.system
    sys_b = sys_b or b.system
    if sys_a == sys_b:
        raise OracleError("CHSH needs two distinct systems")

    def e(basis_a: Basis, basis_b: Basis) -> float:
        dist = born_joint(psi, {sys_a: basis_a.with_system(sys_a),
                                sys_b: basis_b.with_system(sys_b)})
        return correlator(dist, sys_a, sys_b)

    return abs(e(a, b) + e(a, bp) + e(ap, b) - e(ap, bp))


def chsh_optimal_settings(sys_a: str = "q1", sys_b: str = "q2"
                          ) -> tuple[Basis, Basis, Basis, Basis]:
    """Singlet-optimal setting quadruple (a, a', b, b') reaching S = 2*sqrt(2)."""
    return (
        angle_basis(0.0, sys_a),
        angle_basis(math.pi / 2.0, sys_a),
        angle_basis(math.pi / 4.0, sys_b),
        angle_basis(-math.pi / 4.0, sys_b),
    )


def singlet_correlator_exact(theta_a: float, theta_b: float) -> float:
    """Closed form E(a, b) = -cos(theta_a - theta_b) for the singlet."""
    return -math.cos(theta_a - theta_b)


def weak_value(pre: Ket, post: Ket, observable: np.ndarray) -> complex:
    """<post| A |pre> / <post|pre>; requires non-orthogonal selections."""
    a = np.asarray(observable, dtype=np.complex128)
    phi = post.canonical().amplitudes
    psi = pre.canonical().amplitudes
    if a.shape != (psi.shape[0], psi.shape[0]):
        raise OracleError(f"observable shape {a.shape} does not fit dim {psi.shape[0]}")
    if np.max(np.abs(a - a.conj().T)) > 1e-10:
        raise OracleError("observable is not Hermitian")
    denom = complex(np.vdot(phi, psi))
    if abs(denom) <= 1e-12:
        raise OracleError("orthogonal pre/post selection")
    return complex(np.vdot(phi, a @ psi)) / denom


def postselect(psi: Ket, system: str, outcome: Ket | np.ndarray) -> Ket:
    """Project ``system`` onto ``outcome`` and renormalize the rest."""
    vec = outcome.amplitudes if isinstance(outcome, Ket) else np.asarray(outcome)
    rem = project(psi, {system: vec})
    norm = float(np.linalg.norm(rem.amplitudes))
    if norm <= 1e-12:
        raise OracleError(f"zero-norm projection on {system!r}")
    return Ket(rem.space, rem.amplitudes / norm)


def fidelity(a: Ket, b: Ket) -> float:
    """|<a|b>|^2 for pure states on the same systems."""
    from .qmath import inner

    return abs(inner(a, b)) ** 2


def reduced_prediction(psi: Ket, system: str, basis: Basis) -> dict[str, float]:
    """Outcome-label distribution <u_i| rho |u_i> from the reduced state."""
    rho = partial_trace(psi, {system})
    return {lab: rho.expectation(v) for lab, v in zip(basis.labels, basis.vectors)}
