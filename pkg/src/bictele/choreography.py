"""Three-party message choreography around one protocol round.

Alice owns (a, A1, A2), Bob owns (b, B1, B2), Charlie owns C. After the
measurements Alice tells Bob her Bell index, Bob tells Alice his, and Charlie
(in controlled mode) sends his bit to each of them. Bob then corrects B1 from
(k, i) and Alice corrects A2 from (k, j).
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .corrections import CorrectionTable, default_table
from .protocol import (
    ALICE_PAIR,
    BOB_PAIR,
    CONTROL,
    InputQubit,
    ProtocolOutcome,
    all_outcomes,
    alice_unitary,
    bell_basis,
    control_basis,
    measure_parties,
    prepare_system,
)
from .qsim import QOperator, apply, factorize_bipartite, fidelity, measure

OWNERSHIP = {
    "Alice": ("a", "A1", "A2"),
    "Bob": ("b", "B1", "B2"),
    "Charlie": ("C",),
}

# (sender, recipient, kind); Charlie's broadcast is two unicasts
MESSAGE_PLAN = (
    ("Alice", "Bob", "bell"),
    ("Bob", "Alice", "bell"),
    ("Charlie", "Alice", "control"),
    ("Charlie", "Bob", "control"),
)

PAYLOAD_BITS = {"bell": 2, "control": 1}

# what a receiver assumes for a value it never got
DEFAULT_BELL_INDEX = 1
DEFAULT_CONTROL_BIT = 0


class Mode(str, enum.Enum):
    CONTROLLED = "controlled"
    WITHHELD = "withheld"
    GUESS = "guess"  # receivers draw Charlie's bit at random


class ProtocolOrderError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassicalMessage:
    seq: int
    sender: str
    recipient: str
    kind: str
    payload: int

    @property
    def bits(self) -> int:
        return PAYLOAD_BITS[self.kind]


@dataclass(frozen=True)
class Event:
    seq: int
    party: str
    kind: str
    payload: str
    requires: tuple = ()  # message seqs that must have been received first

    def to_line(self) -> str:
        return f"{self.seq} {self.party} {self.kind} {self.payload}"


@dataclass
class Party:
    name: str
    roles: tuple
    received: dict = field(default_factory=dict)  # kind -> ClassicalMessage

    def __post_init__(self):
        if tuple(self.roles) != OWNERSHIP[self.name]:
            raise ValueError(f"{self.name} must own {OWNERSHIP[self.name]}")


@dataclass
class Transcript:
    events: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def log(self, party, kind, payload, requires=()) -> Event:
        ev = Event(len(self.events), party, kind, payload, tuple(requires))
        self.events.append(ev)
        return ev

    @property
    def classical_bits(self) -> int:
        return sum(m.bits for m in self.messages)

    def check_causality(self) -> None:
        """Raise if a correction precedes receipt of a message it depends on."""
        received = set()
        for ev in self.events:
            if ev.kind == "receive":
                received.add((ev.party, int(ev.payload.split("msg=")[1].split()[0])))
            elif ev.kind == "correct":
                for seq in ev.requires:
                    if (ev.party, seq) not in received:
                        raise ProtocolOrderError(
                            f"event {ev.seq}: {ev.party} corrected before receiving message {seq}"
                        )

    def to_text(self) -> str:
        return "\n".join(ev.to_line() for ev in self.events) + "\n"

    def to_records(self) -> list[dict]:
        return [{"seq": e.seq, "party": e.party, "kind": e.kind, "payload": e.payload} for e in self.events]


@dataclass
class SessionResult:
    mode: Mode
    outcome: ProtocolOutcome
    transcript: Transcript
    fidelity_b1: float
    fidelity_a2: float
    assumed: dict  # party -> (k, index) actually used for the lookup

    @property
    def messages(self) -> list[ClassicalMessage]:
        return self.transcript.messages


def run_session(
    chi_a: InputQubit,
    chi_b: InputQubit,
    mode: Mode | str = Mode.CONTROLLED,
    seed: int | None = None,
    *,
    forced: ProtocolOutcome | None = None,
    drop: tuple[str, str] | None = None,
    table: CorrectionTable | None = None,
) -> SessionResult:
    """Play one session as a deterministic event loop.

    ``drop=(sender, recipient)`` deletes that message from the classical
    channel; the recipient then falls back to its default assumption.
    """
    mode = Mode(mode)
    table = table or default_table()
    rng = np.random.default_rng(seed)
    parties = {name: Party(name, roles) for name, roles in OWNERSHIP.items()}
    tr = Transcript()
    queue: deque[ClassicalMessage] = deque()

    def send(sender, recipient, kind, payload):
        msg = ClassicalMessage(len(tr.messages), sender, recipient, kind, payload)
        if drop == (sender, recipient):
            tr.log(sender, "drop", f"msg={msg.seq} to={recipient} {kind}={payload}")
            return
        tr.messages.append(msg)
        tr.log(sender, "send", f"msg={msg.seq} to={recipient} {kind}={payload}")
        queue.append(msg)

    # quantum stage
    state = apply(prepare_system(chi_a, chi_b), alice_unitary())
    tr.log("Alice", "unitary", "U(A1,A2)")
    ra = measure(state, bell_basis(), ALICE_PAIR, forced and forced.i, rng=rng)
    tr.log("Alice", "measure", f"bell(a,A1)={ra.outcome}")
    rb = measure(ra.post_state, bell_basis(), BOB_PAIR, forced and forced.j, rng=rng)
    tr.log("Bob", "measure", f"bell(B2,b)={rb.outcome}")
    rc = measure(rb.post_state, control_basis(), CONTROL, forced and forced.k, rng=rng)
    tr.log("Charlie", "measure", f"z(C)={rc.outcome}")
    outcome = ProtocolOutcome(ra.outcome, rb.outcome, rc.outcome)
    residual = rc.post_state

    # classical stage
    send("Alice", "Bob", "bell", outcome.i)
    send("Bob", "Alice", "bell", outcome.j)
    if mode is Mode.CONTROLLED:
        send("Charlie", "Alice", "control", outcome.k)
        send("Charlie", "Bob", "control", outcome.k)
    else:
        tr.log("Charlie", "withhold", f"z(C)={outcome.k}")
    while queue:
        msg = queue.popleft()
        parties[msg.recipient].received[msg.kind] = msg
        tr.log(msg.recipient, "receive", f"msg={msg.seq} from={msg.sender} {msg.kind}={msg.payload}")

    # correction stage
    assumed = {}
    for name, qubit in (("Bob", "B1"), ("Alice", "A2")):
        got = parties[name].received
        requires = tuple(m.seq for m in got.values())
        index = got["bell"].payload if "bell" in got else DEFAULT_BELL_INDEX
        if "control" in got:
            k = got["control"].payload
        elif mode is Mode.GUESS:
            k = int(rng.integers(2))
        else:
            k = DEFAULT_CONTROL_BIT
        label = table.b1_recovery(k, index) if name == "Bob" else table.a2_recovery(k, index)
        residual = apply(residual, QOperator(label.matrix, (qubit,)))
        assumed[name] = (k, index)
        tr.log(name, "correct", f"{qubit} {label.name} key=(k={k},idx={index})", requires)

    tr.check_causality()
    split = factorize_bipartite(residual, ["A2"])
    return SessionResult(
        mode=mode,
        outcome=outcome,
        transcript=tr,
        fidelity_b1=fidelity(split.right.relabel(["a"]), chi_a.state("a")),
        fidelity_a2=fidelity(split.left.relabel(["b"]), chi_b.state("b")),
        assumed=assumed,
    )


def expected_uncontrolled_fidelity(
    chi_a: InputQubit, chi_b: InputQubit, table: CorrectionTable | None = None
) -> tuple[float, float]:
    """Born-weighted mean fidelities (B1, A2) when receivers always assume k = 0."""
    table = table or default_table()
    f_b1 = f_a2 = 0.0
    for o in all_outcomes():
        res = measure_parties(chi_a, chi_b, forced=o)
        rec_b1 = table.b1_recovery(DEFAULT_CONTROL_BIT, o.i).matrix
        rec_a2 = table.a2_recovery(DEFAULT_CONTROL_BIT, o.j).matrix
        f_b1 += res.probability * abs(np.vdot(chi_a.amplitudes, rec_b1 @ res.b1.amplitudes)) ** 2
        f_a2 += res.probability * abs(np.vdot(chi_b.amplitudes, rec_a2 @ res.a2.amplitudes)) ** 2
    return f_b1, f_a2


def message_necessity(trials: int = 100, seed: int = 0) -> dict:
    """For each planned message, how many of ``trials`` random replays fail without it."""
    rng = np.random.default_rng(seed)
    inputs = [(InputQubit.random("Alice", rng), InputQubit.random("Bob", rng)) for _ in range(trials)]
    seeds = rng.integers(2**63, size=trials)
    counts = {}
    for sender, recipient, _ in MESSAGE_PLAN:
        failures = 0
        for (chi_a, chi_b), s in zip(inputs, seeds):
            r = run_session(chi_a, chi_b, Mode.CONTROLLED, int(s), drop=(sender, recipient))
            if min(r.fidelity_b1, r.fidelity_a2) < 1 - 1e-10:
                failures += 1
        counts[(sender, recipient)] = failures
    return counts
