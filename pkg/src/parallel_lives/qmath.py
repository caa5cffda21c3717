"""Complex linear algebra on small labeled tensor-product Hilbert spaces.

Kets and operators live on spaces declared as ordered lists of
``(label, dimension)`` pairs.  Amplitudes are stored dense, row-major in
the declared system order.  All values are immutable after construction;
every operation returns a fresh value, so everything here is safe to
share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

NORM_ATOL = 1e-12
UNITARY_ATOL = 1e-10
HERMITIAN_ATOL = 1e-10
PSD_ATOL = 1e-9

Space = tuple[tuple[str, int], ...]


class QMathError(ValueError):
    """Raised when a space, state or operator violates its contract."""


def _as_space(space: Iterable[tuple[str, int]]) -> Space:
    out = tuple((str(label), int(dim)) for label, dim in space)
    labels = [label for label, _ in out]
    if len(set(labels)) != len(labels):
        raise QMathError(f"duplicate system label in space {labels}")
    for label, dim in out:
        if dim < 1:
            raise QMathError(f"system {label!r} has non-positive dimension {dim}")
    return out


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.complex128)
    if not np.all(np.isfinite(a.view(np.float64))):
        raise QMathError("non-finite amplitude")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Ket:
    """A state vector on a labeled tensor-product space.

    ``amplitudes`` has length equal to the product of the declared
    dimensions.  Physical states are normalized to 1 within 1e-12;
    unnormalized intermediates must be constructed with
    ``require_normalized=False``.
    """

    space: Space
    amplitudes: np.ndarray

    def __init__(self, space: Iterable[tuple[str, int]], amplitudes,
                 require_normalized: bool = True):
        space = _as_space(space)
        amps = _freeze(np.asarray(amplitudes, dtype=np.complex128).reshape(-1))
        expected = math.prod(d for _, d in space)
        if amps.shape[0] != expected:
            raise QMathError(
                f"amplitude vector has length {amps.shape[0]}, space needs {expected}")
        if require_normalized and abs(float(np.vdot(amps, amps).real) - 1.0) > NORM_ATOL:
            raise QMathError(
                f"ket is not normalized (norm^2 = {float(np.vdot(amps, amps).real)!r})")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.space)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.space)

    def dim_of(self, label: str) -> int:
        for lab, d in self.space:
            if lab == label:
                return d
        raise QMathError(f"no system {label!r} in space {self.labels}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def permuted(self, new_labels: Sequence[str]) -> "Ket":
        """Reorder tensor factors to ``new_labels`` (same label set)."""
        if tuple(new_labels) == self.labels:
            return self
        if set(new_labels) != set(self.labels) or len(new_labels) != len(self.labels):
            raise QMathError(f"cannot permute {self.labels} to {tuple(new_labels)}")
        perm = [self.labels.index(lab) for lab in new_labels]
        arr = self.tensor_view().transpose(perm).reshape(-1)
        space = tuple((lab, self.dim_of(lab)) for lab in new_labels)
        return Ket(space, arr, require_normalized=False)

    def canonical(self) -> "Ket":
        return self.permuted(sorted(self.labels))

    def normalized(self) -> "Ket":
        n = self.norm()
        if n < 1e-12:
            raise QMathError("cannot normalize a zero ket")
        return Ket(self.space, self.amplitudes / n)


@dataclass(frozen=True)
class Unitary:
    """A unitary operator on a labeled tensor-product space."""

    space: Space
    matrix: np.ndarray

    def __init__(self, space: Iterable[tuple[str, int]], matrix):
        space = _as_space(space)
        mat = _freeze(np.asarray(matrix, dtype=np.complex128))
        n = math.prod(d for _, d in space)
        if mat.shape != (n, n):
            raise QMathError(f"matrix shape {mat.shape} does not match space dim {n}")
        err = np.max(np.abs(mat.conj().T @ mat - np.eye(n)))
        if err > UNITARY_ATOL:
            raise QMathError(f"matrix is not unitary (max |U†U - I| = {err:.3e})")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", mat)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.space)


@dataclass(frozen=True)
class Basis:
    """An orthonormal outcome basis on one system.

    The basis need not span the whole system (an apparatus exposes only
    its indicator vectors), but the vectors must be pairwise orthonormal
    and the outcome labels distinct.
    """

    system: str
    dim: int
    vectors: tuple[np.ndarray, ...]
    labels: tuple[str, ...]

    def __init__(self, system: str, dim: int, vectors: Sequence, labels: Sequence[str]):
        vecs = tuple(_freeze(np.asarray(v, dtype=np.complex128).reshape(-1)) for v in vectors)
        labs = tuple(str(s) for s in labels)
        if len(vecs) != len(labs):
            raise QMathError("one label per basis vector required")
        if len(set(labs)) != len(labs):
            raise QMathError(f"duplicate outcome labels {labs}")
        for v in vecs:
            if v.shape[0] != dim:
                raise QMathError(f"basis vector of length {v.shape[0]} on dim-{dim} system")
        for i, v in enumerate(vecs):
            for j, w in enumerate(vecs):
                ip = complex(np.vdot(v, w))
                if abs(ip - (1.0 if i == j else 0.0)) > UNITARY_ATOL:
                    raise QMathError(
                        f"basis not orthonormal: |<{labs[i]}|{labs[j]}>| off by "
                        f"{abs(ip - (1.0 if i == j else 0.0)):.3e}")
        object.__setattr__(self, "system", str(system))
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "labels", labs)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def complete(self) -> bool:
        return len(self.vectors) == self.dim

    def index_of(self, label: str) -> int:
        return self.labels.index(label)

    def with_system(self, system: str) -> "Basis":
        return Basis(system, self.dim, self.vectors, self.labels)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite operator."""

    space: Space
    matrix: np.ndarray

    def __init__(self, space: Iterable[tuple[str, int]], matrix):
        space = _as_space(space)
        mat = _freeze(np.asarray(matrix, dtype=np.complex128))
        n = math.prod(d for _, d in space)
        if mat.shape != (n, n):
            raise QMathError(f"matrix shape {mat.shape} does not match space dim {n}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_ATOL:
            raise QMathError("density matrix is not Hermitian")
        if abs(float(np.trace(mat).real) - 1.0) > HERMITIAN_ATOL:
            raise QMathError(f"density matrix has trace {float(np.trace(mat).real)!r}")
        mineig = float(np.min(np.linalg.eigvalsh((mat + mat.conj().T) / 2.0)))
        if mineig < -PSD_ATOL:
            raise QMathError(f"density matrix not PSD (min eigenvalue {mineig:.3e})")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", mat)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.space)

    def expectation(self, vector: np.ndarray) -> float:
        v = np.asarray(vector, dtype=np.complex128).reshape(-1)
        return float(np.real(np.vdot(v, self.matrix @ v)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


# ---------------------------------------------------------------------------
# constructors


def basis_ket(index: int, label: str, dim: int) -> Ket:
    amps = np.zeros(dim, dtype=np.complex128)
    amps[index] = 1.0
    return Ket(((label, dim),), amps)


def ket2(a, b, label: str) -> Ket:
    """Qubit ket a|0> + b|1>."""
    return Ket(((label, 2),), np.array([a, b], dtype=np.complex128))


def computational_basis(system: str, dim: int = 2,
                        labels: Sequence[str] | None = None) -> Basis:
    if labels is None:
        labels = [str(i) for i in range(dim)]
    vecs = [np.eye(dim, dtype=np.complex128)[i] for i in range(dim)]
    return Basis(system, dim, vecs, labels)


def angle_basis(theta: float, system: str = "q",
                labels: Sequence[str] = ("0", "1")) -> Basis:
    """Measurement basis along the axis at angle ``theta`` in the XZ plane.

    Returns {cos(θ/2)|0> + sin(θ/2)|1>, sin(θ/2)|0> - cos(θ/2)|1>}.
    theta = 0 gives the computational basis; axes theta and theta + 2π
    differ only by outcome phases.
    """
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    v0 = np.array([c, s], dtype=np.complex128)
    v1 = np.array([s, -c], dtype=np.complex128)
    return Basis(system, 2, (v0, v1), labels)


def hadamard_matrix() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)


def sigma_z() -> np.ndarray:
    return np.diag([1.0, -1.0]).astype(np.complex128)


def sigma_x() -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=np.complex128)


# ---------------------------------------------------------------------------
# operations


def tensor(kets: Sequence[Ket]) -> Ket:
    """Tensor product of kets on pairwise disjoint spaces."""
    if not kets:
        raise QMathError("tensor of an empty list")
    seen: set[str] = set()
    for k in kets:
        dup = seen.intersection(k.labels)
        if dup:
            raise QMathError(f"duplicate system label {sorted(dup)} in tensor product")
        seen.update(k.labels)
    amps = kets[0].amplitudes
    space = list(kets[0].space)
    for k in kets[1:]:
        amps = np.kron(amps, k.amplitudes)
        space.extend(k.space)
    return Ket(tuple(space), amps, require_normalized=False)


def apply(u: Unitary, k: Ket) -> Ket:
    """Apply ``u`` to ``k``, embedding with identity on systems ``u`` omits."""
    for lab, d in u.space:
        if lab not in k.labels:
            raise QMathError(f"unitary acts on {lab!r}, absent from ket {k.labels}")
        if k.dim_of(lab) != d:
            raise QMathError(
                f"dimension mismatch on {lab!r}: unitary {d}, ket {k.dim_of(lab)}")
    front = list(u.labels)
    rest = [lab for lab in k.labels if lab not in front]
    kp = k.permuted(front + rest)
    du = math.prod(d for _, d in u.space)
    mat = kp.amplitudes.reshape(du, -1)
    out = u.matrix @ mat
    moved = Ket(kp.space, out.reshape(-1), require_normalized=False)
    return moved.permuted(list(k.labels))


def inner(a: Ket, b: Ket) -> complex:
    """<a|b> with conjugation on ``a``; spaces must carry the same labels."""
    if set(a.labels) != set(b.labels):
        raise QMathError(f"space mismatch: {a.labels} vs {b.labels}")
    ac, bc = a.canonical(), b.canonical()
    if ac.space != bc.space:
        raise QMathError(f"space mismatch: {ac.space} vs {bc.space}")
    return complex(np.vdot(ac.amplitudes, bc.amplitudes))


def project(k: Ket, factors: Mapping[str, np.ndarray]) -> Ket:
    """Contract ``k`` with <v| on each system in ``factors``.

    Returns the (unnormalized) ket on the remaining systems; with every
    system contracted the result is a ket on an empty space holding the
    scalar amplitude.
    """
    if not factors:
        return k
    for lab in factors:
        if lab not in k.labels:
            raise QMathError(f"projection on {lab!r}, absent from {k.labels}")
    keep = [lab for lab in k.labels if lab not in factors]
    ordered = list(factors.keys()) + keep
    kp = k.permuted(ordered)
    arr = kp.tensor_view()
    for lab in factors:
        v = np.asarray(factors[lab], dtype=np.complex128).reshape(-1)
        arr = np.tensordot(v.conj(), arr, axes=(0, 0))
    space = tuple((lab, k.dim_of(lab)) for lab in keep)
    return Ket(space, arr.reshape(-1), require_normalized=False)


def projection_weight(k: Ket, factors: Mapping[str, np.ndarray]) -> float:
    """Squared norm of ``k`` after contracting the given single-system bras.

    Systems absent from ``factors`` are left open, so this is
    <k| (P_factors ⊗ I_rest) |k>.
    """
    rem = project(k, factors)
    return float(np.vdot(rem.amplitudes, rem.amplitudes).real)


def partial_trace(state: Ket | DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (in their existing relative order)."""
    keep = set(keep)
    if not keep:
        raise QMathError("empty keep set in partial trace")
    labels = state.labels if isinstance(state, Ket) else state.labels
    missing = keep.difference(labels)
    if missing:
        raise QMathError(f"cannot keep absent systems {sorted(missing)}")
    kept = [lab for lab in labels if lab in keep]
    traced = [lab for lab in labels if lab not in keep]
    if isinstance(state, Ket):
        kp = state.permuted(kept + traced)
        dk = math.prod(kp.dim_of(lab) for lab in kept)
        m = kp.amplitudes.reshape(dk, -1)
        rho = m @ m.conj().T
        space = tuple((lab, kp.dim_of(lab)) for lab in kept)
        return DensityMatrix(space, rho)
    # operator input: reshape to (kept, traced, kept', traced') and trace pairs
    dims = dict(state.space)
    order = kept + traced
    idx = [list(dims).index(lab) for lab in order]
    n_sys = len(dims)
    tens = state.matrix.reshape(list(dims.values()) * 2)
    tens = tens.transpose(idx + [i + n_sys for i in idx])
    dk = math.prod(dims[lab] for lab in kept)
    dt = math.prod(dims[lab] for lab in traced) if traced else 1
    tens = tens.reshape(dk, dt, dk, dt)
    rho = np.einsum("atbt->ab", tens)
    space = tuple((lab, dims[lab]) for lab in kept)
    return DensityMatrix(space, rho)


def _complete_isometry(domain_cols: np.ndarray, range_cols: np.ndarray, n: int) -> np.ndarray:
    """Extend the partial isometry domain->range to a full n x n unitary.

    The completion block is fixed by a deterministic orthonormal-complement
    construction; callers must not rely on how the complement is mapped.
    """
    def complement(cols: np.ndarray) -> np.ndarray:
        q = np.zeros((n, 0), dtype=np.complex128) if cols.size == 0 else cols
        basis = [q[:, i] for i in range(q.shape[1])]
        out = []
        for i in range(n):
            v = np.zeros(n, dtype=np.complex128)
            v[i] = 1.0
            for b in basis:
                v = v - np.vdot(b, v) * b
            nv = np.linalg.norm(v)
            if nv > 1e-9:
                v = v / nv
                basis.append(v)
                out.append(v)
        return np.array(out).T if out else np.zeros((n, 0), dtype=np.complex128)

    dom_c = complement(domain_cols)
    ran_c = complement(range_cols)
    u = range_cols @ domain_cols.conj().T
    if dom_c.shape[1] != ran_c.shape[1]:
        raise QMathError("cannot complete isometry: complement dimensions differ")
    if dom_c.shape[1]:
        u = u + ran_c @ dom_c.conj().T
    return u


def measurement_coupling(basis: Basis, apparatus: str, apparatus_dim: int | None = None,
                         ready_index: int | None = None) -> Unitary:
    """Von Neumann coupling |s_i>|R> -> |s_i>|M_i> for each basis vector.

    The apparatus needs one indicator per outcome plus a dedicated ready
    state, so its dimension must be at least ``len(basis) + 1``; a qubit
    apparatus that would reuse |R> as an indicator is rejected.  The block
    on the complement of the |R> sector is completed to a full unitary and
    carries no contract beyond unitarity.
    """
    n_out = len(basis)
    if not basis.complete:
        raise QMathError("measurement basis must span the measured system")
    if apparatus_dim is None:
        apparatus_dim = n_out + 1
    if apparatus_dim < n_out + 1:
        raise QMathError(
            f"apparatus dimension {apparatus_dim} too small for {n_out} outcomes "
            f"(needs {n_out + 1}: one indicator per outcome plus a ready state)")
    if ready_index is None:
        ready_index = apparatus_dim - 1
    if not 0 <= ready_index < apparatus_dim:
        raise QMathError(f"ready index {ready_index} outside apparatus")
    d_s = basis.dim
    n = d_s * apparatus_dim
    indicator = [i for i in range(apparatus_dim) if i != ready_index][:n_out]
    eye_a = np.eye(apparatus_dim, dtype=np.complex128)
    dom, ran = [], []
    for i in range(n_out):
        dom.append(np.kron(basis.vectors[i], eye_a[ready_index]))
        ran.append(np.kron(basis.vectors[i], eye_a[indicator[i]]))
    mat = _complete_isometry(np.array(dom).T, np.array(ran).T, n)
    return Unitary(((basis.system, d_s), (apparatus, apparatus_dim)), mat)


def indicator_basis(basis: Basis, apparatus: str, apparatus_dim: int | None = None,
                    ready_index: int | None = None) -> Basis:
    """The apparatus outcome basis paired with :func:`measurement_coupling`."""
    n_out = len(basis)
    if apparatus_dim is None:
        apparatus_dim = n_out + 1
    if ready_index is None:
        ready_index = apparatus_dim - 1
    indicator = [i for i in range(apparatus_dim) if i != ready_index][:n_out]
    eye_a = np.eye(apparatus_dim, dtype=np.complex128)
    return Basis(apparatus, apparatus_dim, [eye_a[i] for i in indicator], basis.labels)
