"""Derivation, verification and serialization of the outcome -> correction table.

For every outcome the residual (A2, B1) state is

    (collapse_A2 |chi_b>) (collapse_B1 |chi_a>)

with both collapse operators in the phased Pauli group. The table records
those operators and the plain Paulis that undo them.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable

import numpy as np

from .protocol import (
    InputQubit,
    ProtocolOutcome,
    Residual,
    all_outcomes,
    correct,
    measure_parties,
)
from .qsim import NORM_TOL, SCHMIDT_TOL, StateVector, fidelity

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
N_OUTCOMES = 32
PHASES = {"+1": 1, "-1": -1, "+i": 1j, "-i": -1j}
_PHASE_NAMES = {v: k for k, v in PHASES.items()}

TABLE_FIELDS = ("i", "j", "k", "collapse_B1", "phase_B1", "collapse_A2", "phase_A2", "recovery_B1", "recovery_A2")
TABLE_HEADER = "# " + " ".join(TABLE_FIELDS)

_S = 1 / np.sqrt(2)
PROBE_STATES = (
    (1, 0),
    (0, 1),
    (_S, _S),
    (_S, 1j * _S),
)


class DerivationError(RuntimeError):
    def __init__(self, message, raw_matrix=None):
        super().__init__(message)
        self.raw_matrix = raw_matrix


class TableFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PauliLabel:
    name: str
    phase: complex = 1

    def __post_init__(self):
        if self.name not in PAULI_MATRICES:
            raise ValueError(f"unknown Pauli {self.name!r}")
        if self.phase not in _PHASE_NAMES:
            raise ValueError(f"phase must be one of +-1, +-i, got {self.phase!r}")
        object.__setattr__(self, "phase", complex(self.phase))

    @property
    def matrix(self) -> np.ndarray:
        return self.phase * PAULI_MATRICES[self.name]

    @property
    def phase_name(self) -> str:
        return _PHASE_NAMES[self.phase]

    def inverse(self) -> "PauliLabel":
        # Paulis square to I, so only the phase needs undoing
        return PauliLabel(self.name, self.phase.conjugate())

    def unphased(self) -> "PauliLabel":
        return PauliLabel(self.name)

    def __str__(self):
        prefix = {"+1": "", "-1": "-", "+i": "i", "-i": "-i"}[self.phase_name]
        return prefix + self.name


def phased_pauli_group() -> list[PauliLabel]:
    return [PauliLabel(n, p) for p in PHASES.values() for n in PAULI_MATRICES]


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-8) -> bool:
    """True if u = e^{it} v for some t (2x2 unitaries)."""
    overlap = abs(np.trace(u.conj().T @ v)) / u.shape[0]
    return abs(overlap - 1) < tol


@dataclass(frozen=True)
class CorrectionEntry:
    outcome: ProtocolOutcome
    collapse_b1: PauliLabel
    collapse_a2: PauliLabel
    recovery_b1: PauliLabel
    recovery_a2: PauliLabel

    def __post_init__(self):
        for collapse, recovery in ((self.collapse_b1, self.recovery_b1), (self.collapse_a2, self.recovery_a2)):
            if not equal_up_to_phase(recovery.matrix @ collapse.matrix, np.eye(2)):
                raise ValueError(f"recovery {recovery} does not undo {collapse} for {self.outcome}")


@dataclass(frozen=True)
class CorrectionTable:
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = set(all_outcomes())
        got = set(self.entries)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValueError(f"table not total: missing {missing}, unexpected {extra}")
        for outcome, entry in self.entries.items():
            if entry.outcome != outcome:
                raise ValueError(f"entry filed under {outcome} is for {entry.outcome}")

    @classmethod
    def from_entries(cls, entries: Iterable[CorrectionEntry]) -> "CorrectionTable":
        entries = list(entries)
        table = {e.outcome: e for e in entries}
        if len(table) != len(entries):
            raise ValueError("duplicate outcomes in table")
        return cls(table)

    def __getitem__(self, outcome: ProtocolOutcome) -> CorrectionEntry:
        return self.entries[outcome]

    def __iter__(self):
        return iter(sorted(self.entries.values(), key=lambda e: e.outcome))

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, CorrectionTable) and self.entries == other.entries

    def b1_recovery(self, k: int, i: int) -> PauliLabel:
        """Bob's correction on B1 knowing Alice's index and Charlie's bit."""
        return self.entries[ProtocolOutcome(i, 1, k)].recovery_b1

    def a2_recovery(self, k: int, j: int) -> PauliLabel:
        """Alice's correction on A2 knowing Bob's index and Charlie's bit."""
        return self.entries[ProtocolOutcome(1, j, k)].recovery_a2

    def factorization_violations(self) -> list[str]:
        """Entries whose B1 collapse is not fixed by (k, i), or A2 collapse by (k, j)."""
        bad = []
        for e in self:
            o = e.outcome
            if e.collapse_b1 != self.entries[ProtocolOutcome(o.i, 1, o.k)].collapse_b1:
                bad.append(f"{o}: collapse_B1 differs across j")
            if e.collapse_a2 != self.entries[ProtocolOutcome(1, o.j, o.k)].collapse_a2:
                bad.append(f"{o}: collapse_A2 differs across i")
        return bad

    def with_entry(self, entry: CorrectionEntry) -> "CorrectionTable":
        return CorrectionTable({**self.entries, entry.outcome: entry})


def _fit_pauli(pairs: list[tuple[np.ndarray, StateVector]]) -> list[PauliLabel]:
    """Unphased Paulis P with |<factor|P chi>| = 1 for every (chi, factor) probe."""
    fits = []
    for name, mat in PAULI_MATRICES.items():
        if all(abs(abs(np.vdot(f.amplitudes, mat @ chi)) - 1) < SCHMIDT_TOL for chi, f in pairs):
            fits.append(PauliLabel(name))
    return fits


def _raw_matrix(pairs) -> np.ndarray:
    # first two probes are |0>, |1>; their factors are the columns up to phase
    by_probe = {tuple(np.round(chi, 12)): f.amplitudes for chi, f in pairs}
    return np.column_stack([by_probe[(1, 0)], by_probe[(0, 1)]])


@dataclass(frozen=True)
class CollapseFit:
    """Unphased Paulis seen on each receiver qubit plus the joint phase of the residual."""

    outcome: ProtocolOutcome
    b1: PauliLabel
    a2: PauliLabel
    joint_phase: complex


def identify_collapse(outcome: ProtocolOutcome, probes=PROBE_STATES) -> CollapseFit:
    """Fit the collapse operators of one outcome by probing with every input pair."""
    residuals: list[tuple[InputQubit, InputQubit, Residual]] = []
    for pa, pb in itertools.product(probes, probes):
        chi_a, chi_b = InputQubit("Alice", *pa), InputQubit("Bob", *pb)
        residuals.append((chi_a, chi_b, measure_parties(chi_a, chi_b, forced=outcome)))

    b1_pairs = [(chi_a.amplitudes, res.b1) for chi_a, _, res in residuals]
    a2_pairs = [(chi_b.amplitudes, res.a2) for _, chi_b, res in residuals]

    fit_b1, fit_a2 = _fit_pauli(b1_pairs), _fit_pauli(a2_pairs)
    for who, fits, pairs in (("B1", fit_b1, b1_pairs), ("A2", fit_a2, a2_pairs)):
        if len(fits) != 1:
            raise DerivationError(
                f"{outcome}: {len(fits)} Pauli candidates fit the {who} factor", _raw_matrix(pairs)
            )
    p_b1, p_a2 = fit_b1[0], fit_a2[0]

    # residual = phase * (P_A2 chi_b)(P_B1 chi_a) / sqrt(N_OUTCOMES)
    phases = set()
    for chi_a, chi_b, res in residuals:
        scale = np.sqrt(res.probability * N_OUTCOMES)
        expected = np.kron(p_a2.matrix @ chi_b.amplitudes, p_b1.matrix @ chi_a.amplitudes)
        ph = np.vdot(expected, scale * res.state.amplitudes)
        snapped = min(PHASES.values(), key=lambda q: abs(q - ph))
        if abs(snapped - ph) > SCHMIDT_TOL:
            raise DerivationError(f"{outcome}: residual phase {ph:.6g} is not a power of i")
        phases.add(snapped)
    if len(phases) != 1:
        raise DerivationError(f"{outcome}: inconsistent joint phase across probes {phases}")
    return CollapseFit(outcome, p_b1, p_a2, phases.pop())


def _split_phases(fits: dict) -> tuple[dict, dict]:
    """Factor joint phases as phase_B1(k, i) * phase_A2(k, j).

    Reference choice: outcomes with j = 1 fix phase_A2(k, 1) and i = 1 carries
    phase_B1(k, 1) = 1.
    """
    b1, a2 = {}, {}
    for k in (0, 1):
        ref = fits[ProtocolOutcome(1, 1, k)].joint_phase
        for idx in range(1, 5):
            b1[k, idx] = complex(fits[ProtocolOutcome(idx, 1, k)].joint_phase / ref)
            a2[k, idx] = complex(fits[ProtocolOutcome(1, idx, k)].joint_phase)
    for o, fit in fits.items():
        if abs(b1[o.k, o.i] * a2[o.k, o.j] - fit.joint_phase) > SCHMIDT_TOL:
            raise DerivationError(f"{o}: joint phase {fit.joint_phase} does not factor over (k,i), (k,j)")
    return b1, a2


def derive_table(probes=PROBE_STATES) -> CorrectionTable:
    fits = {o: identify_collapse(o, probes) for o in all_outcomes()}
    phase_b1, phase_a2 = _split_phases(fits)
    entries = []
    for o, fit in fits.items():
        collapse_b1 = PauliLabel(fit.b1.name, np.round(phase_b1[o.k, o.i]))
        collapse_a2 = PauliLabel(fit.a2.name, np.round(phase_a2[o.k, o.j]))
        entries.append(
            CorrectionEntry(
                outcome=o,
                collapse_b1=collapse_b1,
                collapse_a2=collapse_a2,
                recovery_b1=collapse_b1.unphased(),
                recovery_a2=collapse_a2.unphased(),
            )
        )
    table = CorrectionTable.from_entries(entries)
    bad = table.factorization_violations()
    if bad:
        raise DerivationError("derived table breaks index factorization: " + "; ".join(bad))
    return table


@lru_cache(maxsize=1)
def default_table() -> CorrectionTable:
    return derive_table()


# -- verification ------------------------------------------------------------

@dataclass
class VerificationReport:
    trials: int
    cases: int = 0
    min_fidelity: float = 1.0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def failed_outcomes(self) -> list[ProtocolOutcome]:
        return sorted({f["outcome"] for f in self.failures})


def random_input_pairs(trials: int, seed: int | None) -> list[tuple[InputQubit, InputQubit]]:
    rng = np.random.default_rng(seed)
    return [(InputQubit.random("Alice", rng), InputQubit.random("Bob", rng)) for _ in range(trials)]


def verify_table(
    table: CorrectionTable, trials: int, seed: int | None = 0, *, fail_fast: bool = False
) -> VerificationReport:
    """Replay every outcome on ``trials`` random input pairs using ``table``."""
    report = VerificationReport(trials=trials)
    for t, (chi_a, chi_b) in enumerate(random_input_pairs(trials, seed)):
        for outcome in all_outcomes():
            res = measure_parties(chi_a, chi_b, forced=outcome)
            entry = table[outcome]
            _, _, post_a2, post_b1 = correct(res, entry.recovery_a2.matrix, entry.recovery_b1.matrix)
            f_b1 = fidelity(post_b1.relabel(["a"]), chi_a.state("a"))
            f_a2 = fidelity(post_a2.relabel(["b"]), chi_b.state("b"))
            report.cases += 1
            report.min_fidelity = min(report.min_fidelity, f_b1, f_a2)
            if min(f_b1, f_a2) < 1 - NORM_TOL:
                report.failures.append(
                    {"trial": t, "outcome": outcome, "fidelity_B1": f_b1, "fidelity_A2": f_a2}
                )
                if fail_fast:
                    return report
    return report


# -- text format -------------------------------------------------------------

def serialize_table(table: CorrectionTable) -> str:
    lines = [TABLE_HEADER]
    for e in table:
        o = e.outcome
        lines.append(
            " ".join(
                [
                    str(o.i),
                    str(o.j),
                    str(o.k),
                    e.collapse_b1.name,
                    e.collapse_b1.phase_name,
                    e.collapse_a2.name,
                    e.collapse_a2.phase_name,
                    e.recovery_b1.name,
                    e.recovery_a2.name,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> CorrectionTable:
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != len(TABLE_FIELDS):
            raise TableFormatError(f"line {lineno}: expected {len(TABLE_FIELDS)} fields, got {len(parts)}")
        i, j, k, cb, pb, ca, pa, rb, ra = parts
        try:
            entries.append(
                CorrectionEntry(
                    outcome=ProtocolOutcome(int(i), int(j), int(k)),
                    collapse_b1=PauliLabel(cb, PHASES[pb]),
                    collapse_a2=PauliLabel(ca, PHASES[pa]),
                    recovery_b1=PauliLabel(rb),
                    recovery_a2=PauliLabel(ra),
                )
            )
        except (KeyError, ValueError) as exc:
            raise TableFormatError(f"line {lineno}: {exc}") from exc
    try:
        return CorrectionTable.from_entries(entries)
    except ValueError as exc:
        raise TableFormatError(str(exc)) from exc


def packaged_table_text() -> str:
    """The checked-in table artifact shipped with the package."""
    return resources.files("bictele").joinpath("data/correction_table.txt").read_text()


def corrupt_entry(table: CorrectionTable, outcome: ProtocolOutcome, side: str = "B1") -> CorrectionTable:
    """Copy of ``table`` with one recovery swapped for a wrong Pauli (test hook)."""
    entry = table[outcome]
    names = list(PAULI_MATRICES)
    current = entry.recovery_b1 if side == "B1" else entry.recovery_a2
    wrong = PauliLabel(names[(names.index(current.name) + 1) % 4])
    # bypass the recovery/collapse consistency check on purpose
    bad = object.__new__(CorrectionEntry)
    fields = {
        "outcome": entry.outcome,
        "collapse_b1": entry.collapse_b1,
        "collapse_a2": entry.collapse_a2,
        "recovery_b1": wrong if side == "B1" else entry.recovery_b1,
        "recovery_a2": wrong if side == "A2" else entry.recovery_a2,
    }
    for name, value in fields.items():
        object.__setattr__(bad, name, value)
    return table.with_entry(bad)
