"""Dense state-vector engine for small qubit registers.

Register convention: position 0 is the leftmost ket symbol and the most
significant bit of the amplitude index, so ``|q0 q1 ... q(n-1)>`` maps to
index ``int("q0q1...", 2)``.

All values are immutable; every operation returns a new object.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, NamedTuple, Sequence, Union

import numpy as np

MAX_QUBITS = 10

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
IMPOSSIBLE_TOL = 1e-12
SCHMIDT_TOL = 1e-8


class QsimError(Exception):
    """Base class for simulator errors."""


class CapacityError(QsimError):
    pass


class ValidationError(QsimError, ValueError):
    pass


class ImpossibleOutcomeError(QsimError):
    """Forced measurement outcome has (numerically) zero probability."""


class QubitId(NamedTuple):
    label: Hashable
    position: int


Target = Union[QubitId, Hashable]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.flags.writeable = False
    return arr


def _default_labels(n: int) -> tuple:
    return tuple(f"q{p}" for p in range(n))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state over an ordered, labelled qubit register."""

    amplitudes: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size))) if amps.size else -1
        if n < 0 or 2**n != amps.size:
            raise ValidationError(f"amplitude count {amps.size} is not a power of two")
        if n > MAX_QUBITS:
            raise CapacityError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state is not normalized (squared norm {norm!r})")
        labels = _default_labels(n) if self.labels is None else tuple(self.labels)
        if len(labels) != n:
            raise ValidationError(f"{len(labels)} labels given for {n} qubits")
        if len(set(labels)) != n:
            raise ValidationError(f"duplicate qubit labels {labels}")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_bits(cls, bits: str, labels: Sequence | None = None) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2) if bits else 0] = 1.0
        return cls(amps, None if labels is None else tuple(labels))

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    @property
    def qubits(self) -> tuple[QubitId, ...]:
        return tuple(QubitId(lab, p) for p, lab in enumerate(self.labels))

    def position(self, target: Target) -> int:
        if isinstance(target, QubitId):
            if target.position >= self.n_qubits or self.labels[target.position] != target.label:
                raise IndexError(f"{target} is not in register {self.labels}")
            return target.position
        if target in self.labels:
            return self.labels.index(target)
        if isinstance(target, (int, np.integer)) and not isinstance(target, bool):
            if 0 <= target < self.n_qubits:
                return int(target)
        raise IndexError(f"qubit {target!r} is not in register {self.labels}")

    def tensor(self) -> np.ndarray:
        """Amplitudes as an n-axis array of shape (2, ..., 2)."""
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def amplitude(self, bits: str) -> complex:
        if len(bits) != self.n_qubits:
            raise ValueError(f"expected {self.n_qubits} bits, got {bits!r}")
        return complex(self.amplitudes[int(bits, 2) if bits else 0])

    def relabel(self, labels: Sequence) -> "StateVector":
        return StateVector(self.amplitudes, tuple(labels))

    def __len__(self):
        return self.amplitudes.size

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits}, labels={self.labels})"


def _check_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> None:
    err = np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])))
    if err > tol:
        raise ValidationError(f"matrix is not unitary (max |M^dag M - I| = {err:.3e})")


@dataclass(frozen=True, eq=False)
class QOperator:
    """Unitary acting on an ordered list of target qubits."""

    matrix: np.ndarray
    targets: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        targets = tuple(self.targets)
        k = len(targets)
        if m.shape != (2**k, 2**k):
            raise ValidationError(f"matrix shape {m.shape} does not fit {k} targets")
        if len(set(targets)) != k:
            raise ValidationError(f"repeated targets {targets}")
        _check_unitary(m)
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "targets", targets)

    @property
    def arity(self) -> int:
        return len(self.targets)

    def inverse(self) -> "QOperator":
        return QOperator(self.matrix.conj().T, self.targets)

    def on(self, *targets) -> "QOperator":
        return QOperator(self.matrix, targets)


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Orthonormal basis on ``arity`` qubits; row ``r`` of ``vectors`` is outcome ``labels[r]``."""

    vectors: np.ndarray
    labels: tuple

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=complex)
        dim = vecs.shape[0]
        if vecs.ndim != 2 or vecs.shape != (dim, dim) or dim & (dim - 1) or dim < 2:
            raise ValidationError(f"basis array has shape {vecs.shape}, expected (2^k, 2^k)")
        labels = tuple(self.labels)
        if len(labels) != dim or len(set(labels)) != dim:
            raise ValidationError("need one distinct label per basis vector")
        gram = vecs.conj() @ vecs.T
        err = np.max(np.abs(gram - np.eye(dim)))
        if err > NORM_TOL:
            raise ValidationError(f"basis is not orthonormal (max Gram error {err:.3e})")
        object.__setattr__(self, "vectors", _frozen(vecs))
        object.__setattr__(self, "labels", labels)

    @property
    def arity(self) -> int:
        return int(self.vectors.shape[0]).bit_length() - 1

    def vector(self, label) -> np.ndarray:
        try:
            return self.vectors[self.labels.index(label)]
        except ValueError:
            raise KeyError(f"{label!r} is not an outcome of this basis {self.labels}") from None

    @classmethod
    def computational(cls, arity: int = 1) -> "MeasurementBasis":
        dim = 2**arity
        return cls(np.eye(dim), tuple(range(dim)))


@dataclass(frozen=True, eq=False)
class MeasurementResult:
    outcome: object
    probability: float
    post_state: StateVector


@dataclass(frozen=True, eq=False)
class Bipartition:
    """Outcome of :func:`factorize_bipartite`.

    ``left``/``right`` are only set when the state is a product across the cut.
    """

    schmidt: np.ndarray
    left: StateVector | None = None
    right: StateVector | None = None

    @property
    def is_product(self) -> bool:
        return self.left is not None

    @property
    def schmidt_rank(self) -> int:
        return int(np.sum(self.schmidt > SCHMIDT_TOL))


def tensor_product(left: StateVector, right: StateVector) -> StateVector:
    """Join two registers; ``left`` occupies the most significant positions."""
    n = left.n_qubits + right.n_qubits
    if n > MAX_QUBITS:
        raise CapacityError(f"combined register of {n} qubits exceeds the {MAX_QUBITS}-qubit cap")
    labels = left.labels + right.labels
    if len(set(labels)) != n:
        # anonymous registers collide on default labels; renumber them
        if all(lab == f"q{p}" for p, lab in enumerate(left.labels)) and all(
            lab == f"q{p}" for p, lab in enumerate(right.labels)
        ):
            labels = _default_labels(n)
        else:
            raise ValidationError(f"label clash joining {left.labels} and {right.labels}")
    return StateVector(np.kron(left.amplitudes, right.amplitudes), labels)


def _move_to_front(tensor: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    rest = [p for p in range(tensor.ndim) if p not in positions]
    return np.transpose(tensor, list(positions) + rest)


def _resolve(state: StateVector, targets: Sequence[Target]) -> list[int]:
    pos = [state.position(t) for t in targets]
    if len(set(pos)) != len(pos):
        raise ValidationError(f"repeated targets {tuple(targets)}")
    return pos


def apply(state: StateVector, op: QOperator) -> StateVector:
    """Apply ``op`` to its targets, identity elsewhere."""
    pos = _resolve(state, op.targets)
    k, n = len(pos), state.n_qubits
    gate = op.matrix.reshape((2,) * (2 * k))
    # contract gate input axes with the target axes; output axes land in front
    out = np.tensordot(gate, state.tensor(), axes=(list(range(k, 2 * k)), pos))
    rest = [p for p in range(n) if p not in pos]
    order = np.argsort(pos + rest)
    out = np.transpose(out, order)
    return StateVector(out.reshape(-1), state.labels)


def _project(state: StateVector, vector: np.ndarray, pos: list[int]) -> np.ndarray:
    """Contract <vector| on the qubits at ``pos``; returns the unnormalized rest."""
    k = len(pos)
    bra = vector.conj().reshape((2,) * k)
    return np.tensordot(bra, state.tensor(), axes=(list(range(k)), pos))


def outcome_probabilities(state: StateVector, basis: MeasurementBasis, targets: Sequence[Target]) -> dict:
    pos = _resolve(state, targets)
    if basis.arity != len(pos):
        raise ValidationError(f"basis arity {basis.arity} != {len(pos)} targets")
    probs = {}
    for label, vec in zip(basis.labels, basis.vectors):
        rest = _project(state, vec, pos)
        probs[label] = float(np.vdot(rest, rest).real)
    return probs


def measure(
    state: StateVector,
    basis: MeasurementBasis,
    targets: Sequence[Target],
    forced=None,
    *,
    retain: bool = False,
    rng: np.random.Generator | None = None,
) -> MeasurementResult:
    """Projective measurement of ``targets`` in ``basis``.

    With ``forced`` the named outcome is projected onto deterministically;
    otherwise the outcome is drawn from the Born distribution with ``rng``.
    Measured qubits are dropped from the post-state unless ``retain`` is set,
    in which case they stay in place, collapsed onto the basis vector.
    """
    pos = _resolve(state, targets)
    if basis.arity != len(pos):
        raise ValidationError(f"basis arity {basis.arity} != {len(pos)} targets")

    if forced is None:
        if rng is None:
            raise ValueError("sampling a measurement requires an rng (or pass forced=)")
        projections = [_project(state, vec, pos) for vec in basis.vectors]
        p = np.array([np.vdot(r, r).real for r in projections])
        idx = rng.choice(len(p), p=p / p.sum())
        label, rest = basis.labels[idx], projections[idx]
    else:
        label = forced
        rest = _project(state, basis.vector(label), pos)
    vec = basis.vector(label)

    prob = float(np.vdot(rest, rest).real)
    if prob < IMPOSSIBLE_TOL:
        raise ImpossibleOutcomeError(f"outcome {label!r} has probability {prob:.3e}")
    rest = rest / np.sqrt(prob)

    remaining = [p for p in range(state.n_qubits) if p not in pos]
    if retain:
        full = np.multiply.outer(vec.reshape((2,) * len(pos)), rest)
        full = np.transpose(full, np.argsort(pos + remaining))
        post = StateVector(full.reshape(-1), state.labels)
    else:
        post = StateVector(rest.reshape(-1), tuple(state.labels[p] for p in remaining))
    return MeasurementResult(label, prob, post)


def schmidt_coefficients(state: StateVector, left: Sequence[Target]) -> np.ndarray:
    pos = _resolve(state, left)
    mat = _move_to_front(state.tensor(), pos).reshape(2 ** len(pos), -1)
    return np.linalg.svd(mat, compute_uv=False)


def factorize_bipartite(state: StateVector, left: Sequence[Target]) -> Bipartition:
    """Split ``state`` into ``left`` and complementary qubits if it is a product.

    The left factor carries the global phase; the right factor's first
    non-negligible amplitude is made real and non-negative. Both factors keep
    the original relative qubit order.
    """
    pos = _resolve(state, left)
    if not 0 < len(pos) < state.n_qubits:
        raise ValidationError("cut must leave qubits on both sides")
    rest = [p for p in range(state.n_qubits) if p not in pos]
    pos_sorted = sorted(pos)
    mat = _move_to_front(state.tensor(), pos_sorted).reshape(2 ** len(pos), -1)
    _, s, vh = np.linalg.svd(mat)
    if len(s) > 1 and s[1] >= SCHMIDT_TOL:
        return Bipartition(schmidt=s)

    right = vh[0]
    lead = np.flatnonzero(np.abs(right) > 1e-12 * np.max(np.abs(right)))[0]
    right = right * (abs(right[lead]) / right[lead])
    right = right / np.linalg.norm(right)
    left_amps = mat @ right.conj()
    left_amps = left_amps / np.linalg.norm(left_amps)
    return Bipartition(
        schmidt=s,
        left=StateVector(left_amps, tuple(state.labels[p] for p in pos_sorted)),
        right=StateVector(right, tuple(state.labels[p] for p in rest)),
    )


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2, clipped to [0, 1]."""
    if a.n_qubits != b.n_qubits:
        raise ValidationError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


@dataclass
class Engine:
    """Holds the seeded generator that all sampled measurements draw from."""

    seed: int | None = None
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    def measure(self, state, basis, targets, forced=None, *, retain=False) -> MeasurementResult:
        return measure(state, basis, targets, forced, retain=retain, rng=self.rng)

    def random_qubit(self) -> np.ndarray:
        return haar_qubit(self.rng)


def haar_qubit(rng: np.random.Generator) -> np.ndarray:
    """Haar-random single-qubit amplitudes from two complex Gaussians."""
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    return z / np.linalg.norm(z)
