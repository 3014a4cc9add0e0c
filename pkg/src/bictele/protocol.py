"""Bidirectional controlled teleportation over the five-qubit Brown channel.

Alice sends qubit ``a`` to Bob's ``B1``; Bob sends qubit ``b`` to Alice's
``A2``. Charlie holds the control qubit ``C``. The seven-qubit register is
always ordered ``a, b, A1, A2, B1, B2, C``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Iterator

import numpy as np

from .qsim import (
    NORM_TOL,
    MeasurementBasis,
    QOperator,
    StateVector,
    ValidationError,
    apply,
    factorize_bipartite,
    fidelity,
    haar_qubit,
    measure,
    tensor_product,
)

if TYPE_CHECKING:
    from .corrections import CorrectionTable

CHANNEL_ROLES = ("A1", "A2", "B1", "B2", "C")
REGISTER = ("a", "b") + CHANNEL_ROLES

ALICE_PAIR = ("a", "A1")
BOB_PAIR = ("B2", "b")
CONTROL = ("C",)

_R2 = 1 / np.sqrt(2)


class ProtocolError(RuntimeError):
    """Internal inconsistency; indicates a bug, never a user error."""


@dataclass(frozen=True)
class ChannelLayout:
    """Where each channel role sits inside the seven-qubit register."""

    positions: dict = field(default_factory=lambda: {r: REGISTER.index(r) for r in CHANNEL_ROLES})

    def __post_init__(self):
        if set(self.positions) != set(CHANNEL_ROLES):
            raise ValidationError(f"layout must map exactly {CHANNEL_ROLES}")
        if len(set(self.positions.values())) != len(CHANNEL_ROLES):
            raise ValidationError("layout positions must be distinct")


@dataclass(frozen=True)
class InputQubit:
    owner: str
    c0: complex
    c1: complex

    def __post_init__(self):
        if self.owner not in ("Alice", "Bob"):
            raise ValidationError(f"owner must be Alice or Bob, not {self.owner!r}")
        norm = abs(self.c0) ** 2 + abs(self.c1) ** 2
        if abs(norm - 1) > NORM_TOL:
            raise ValidationError(f"input qubit is not normalized (|c0|^2+|c1|^2 = {norm!r})")
        object.__setattr__(self, "c0", complex(self.c0))
        object.__setattr__(self, "c1", complex(self.c1))

    @classmethod
    def random(cls, owner: str, rng: np.random.Generator) -> "InputQubit":
        c0, c1 = haar_qubit(rng)
        return cls(owner, c0, c1)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.c0, self.c1])

    def state(self, label=None) -> StateVector:
        if label is None:
            label = "a" if self.owner == "Alice" else "b"
        return StateVector(self.amplitudes, (label,))


def _check_bell_index(value) -> int:
    if value not in (1, 2, 3, 4):
        raise ValidationError(f"Bell index must be 1..4, got {value!r}")
    return int(value)


@dataclass(frozen=True, order=True)
class ProtocolOutcome:
    """Alice's Bell index ``i``, Bob's Bell index ``j``, Charlie's bit ``k``."""

    i: int
    j: int
    k: int

    def __post_init__(self):
        _check_bell_index(self.i)
        _check_bell_index(self.j)
        if self.k not in (0, 1):
            raise ValidationError(f"control bit must be 0 or 1, got {self.k!r}")

    @classmethod
    def parse(cls, text: str) -> "ProtocolOutcome":
        parts = text.replace(",", " ").split()
        if len(parts) != 3:
            raise ValueError(f"expected 'i,j,k', got {text!r}")
        return cls(*(int(p) for p in parts))

    def __str__(self):
        return f"({self.i},{self.j},{self.k})"


def all_outcomes() -> Iterator[ProtocolOutcome]:
    for i in range(1, 5):
        for j in range(1, 5):
            for k in (0, 1):
                yield ProtocolOutcome(i, j, k)


# -- channel constants -------------------------------------------------------

def bell_states() -> tuple[StateVector, ...]:
    """The numbered Bell basis: (00+11), (00-11), (01+10), (01-10), all over sqrt 2."""
    return tuple(
        StateVector(np.array(v) * _R2)
        for v in ([1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 1, 0], [0, 1, -1, 0])
    )


@lru_cache(maxsize=1)
def bell_basis() -> MeasurementBasis:
    return MeasurementBasis(np.array([s.amplitudes for s in bell_states()]), (1, 2, 3, 4))


@lru_cache(maxsize=1)
def control_basis() -> MeasurementBasis:
    return MeasurementBasis.computational(1)


@lru_cache(maxsize=1)
def brown_state() -> StateVector:
    """Five-qubit Brown state, assembled as a sum of three-qubit kets times Bell pairs."""
    phi1, phi2, phi3, phi4 = bell_states()
    terms = [("001", phi4), ("010", phi2), ("100", phi3), ("111", phi1)]
    amps = sum(tensor_product(StateVector.from_bits(bits), pair).amplitudes for bits, pair in terms)
    return StateVector(amps / 2, CHANNEL_ROLES)


@lru_cache(maxsize=1)
def alice_unitary() -> QOperator:
    """Alice's signed cyclic permutation on (A1, A2)."""
    m = np.array(
        [
            [0, 1, 0, 0],
            [0, 0, 1, 0],
            [0, 0, 0, 1],
            [-1, 0, 0, 0],
        ],
        dtype=complex,
    )
    return QOperator(m, ("A1", "A2"))


# -- protocol steps ----------------------------------------------------------

def prepare_system(chi_a: InputQubit, chi_b: InputQubit) -> StateVector:
    if chi_a.owner != "Alice" or chi_b.owner != "Bob":
        raise ValidationError("chi_a must belong to Alice and chi_b to Bob")
    return tensor_product(tensor_product(chi_a.state("a"), chi_b.state("b")), brown_state())


@dataclass(frozen=True, eq=False)
class Residual:
    """Post-measurement state of (A2, B1) before any correction."""

    outcome: ProtocolOutcome
    probability: float
    state: StateVector
    a2: StateVector
    b1: StateVector


def measure_parties(chi_a, chi_b, forced: ProtocolOutcome | None = None, rng=None) -> Residual:
    """Run the quantum part: unitary, both Bell measurements, control measurement.

    Either ``forced`` or ``rng`` must be given.
    """
    state = apply(prepare_system(chi_a, chi_b), alice_unitary())
    bell = bell_basis()
    ra = measure(state, bell, ALICE_PAIR, forced and forced.i, rng=rng)
    rb = measure(ra.post_state, bell, BOB_PAIR, forced and forced.j, rng=rng)
    rc = measure(rb.post_state, control_basis(), CONTROL, forced and forced.k, rng=rng)
    outcome = ProtocolOutcome(ra.outcome, rb.outcome, rc.outcome)
    split = factorize_bipartite(rc.post_state, ["A2"])
    if not split.is_product:
        raise ProtocolError(f"residual (A2, B1) state is entangled for {outcome}: {split.schmidt}")
    return Residual(
        outcome=outcome,
        probability=ra.probability * rb.probability * rc.probability,
        state=rc.post_state,
        a2=split.left,
        b1=split.right,
    )


def residual_after_bell(chi_a, chi_b, i: int, j: int) -> tuple[float, StateVector]:
    """Probability and normalized (A2, B1, C) state after both Bell measurements."""
    state = apply(prepare_system(chi_a, chi_b), alice_unitary())
    bell = bell_basis()
    ra = measure(state, bell, ALICE_PAIR, _check_bell_index(i))
    rb = measure(ra.post_state, bell, BOB_PAIR, _check_bell_index(j))
    return ra.probability * rb.probability, rb.post_state


def outcome_probability(chi_a: InputQubit, chi_b: InputQubit, outcome: ProtocolOutcome) -> float:
    return measure_parties(chi_a, chi_b, forced=outcome).probability


@dataclass(frozen=True, eq=False)
class ProtocolRun:
    chi_a: InputQubit
    chi_b: InputQubit
    outcome: ProtocolOutcome
    joint_probability: float
    pre_a2: StateVector
    pre_b1: StateVector
    correction_a2: QOperator
    correction_b1: QOperator
    post_a2: StateVector
    post_b1: StateVector
    fidelity_b1: float
    fidelity_a2: float

    @property
    def succeeded(self) -> bool:
        return self.fidelity_b1 >= 1 - NORM_TOL and self.fidelity_a2 >= 1 - NORM_TOL


def correct(residual: Residual, recovery_a2: np.ndarray, recovery_b1: np.ndarray):
    """Apply single-qubit recoveries to the residual factors."""
    op_a2 = QOperator(recovery_a2, ("A2",))
    op_b1 = QOperator(recovery_b1, ("B1",))
    return op_a2, op_b1, apply(residual.a2, op_a2), apply(residual.b1, op_b1)


def run_protocol(
    chi_a: InputQubit,
    chi_b: InputQubit,
    forced: ProtocolOutcome | None = None,
    seed: int | None = None,
    table: "CorrectionTable | None" = None,
) -> ProtocolRun:
    """One full round: prepare, measure, look up and apply corrections, score."""
    if table is None:
        from .corrections import default_table

        table = default_table()
    rng = None if forced is not None else np.random.default_rng(seed)
    res = measure_parties(chi_a, chi_b, forced=forced, rng=rng)
    entry = table[res.outcome]
    op_a2, op_b1, post_a2, post_b1 = correct(res, entry.recovery_a2.matrix, entry.recovery_b1.matrix)
    return ProtocolRun(
        chi_a=chi_a,
        chi_b=chi_b,
        outcome=res.outcome,
        joint_probability=res.probability,
        pre_a2=res.a2,
        pre_b1=res.b1,
        correction_a2=op_a2,
        correction_b1=op_b1,
        post_a2=post_a2,
        post_b1=post_b1,
        fidelity_b1=fidelity(post_b1.relabel(["a"]), chi_a.state("a")),
        fidelity_a2=fidelity(post_a2.relabel(["b"]), chi_b.state("b")),
    )
