"""Command-line entry point: ``bictele {verify,table,run,sweep}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import reference
from .choreography import Mode, expected_uncontrolled_fidelity, run_session
from .corrections import (
    TABLE_FIELDS,
    TableFormatError,
    corrupt_entry,
    default_table,
    packaged_table_text,
    parse_table,
    random_input_pairs,
    serialize_table,
    verify_table,
)
from .protocol import (
    InputQubit,
    ProtocolOutcome,
    all_outcomes,
    alice_unitary,
    brown_state,
    outcome_probability,
)
from .qsim import apply

SEED_ENV = "BICTELE_SEED"
SIG = 12


def num(x: float) -> float:
    """Round to 12 significant digits for output."""
    return float(f"{x:.{SIG}g}")


def fmt(x) -> str:
    return f"{x:.{SIG}g}" if isinstance(x, (float, np.floating)) else str(x)


def parse_amplitudes(text: str, owner: str) -> InputQubit:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"amplitudes must be numbers: {text!r}") from None
    if len(vals) != 4:
        raise argparse.ArgumentTypeError(f"expected c0re,c0im,c1re,c1im, got {text!r}")
    try:
        return InputQubit(owner, complex(vals[0], vals[1]), complex(vals[2], vals[3]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _inputs(args, rng) -> tuple[InputQubit, InputQubit]:
    chi_a = args.input_a or InputQubit.random("Alice", rng)
    chi_b = args.input_b or InputQubit.random("Bob", rng)
    return chi_a, chi_b


def _qubit_record(q: InputQubit) -> list[float]:
    return [num(q.c0.real), num(q.c0.imag), num(q.c1.real), num(q.c1.imag)]


# -- verify ------------------------------------------------------------------

def run_checks(trials: int, seed: int, corrupt: ProtocolOutcome | None = None) -> list[dict]:
    checks = []

    def record(name, ok, **detail):
        checks.append({"check": name, "passed": bool(ok), **detail})

    err = reference.max_amplitude_error(brown_state().amplitudes, reference.BROWN_EXPANSION)
    record("brown_state_golden", err <= 1e-12, max_error=num(err))

    transformed = apply(brown_state(), alice_unitary())
    err = reference.max_amplitude_error(transformed.amplitudes, reference.TRANSFORMED_EXPANSION)
    record("alice_unitary_golden", err <= 1e-12, max_error=num(err))

    table = default_table()
    if corrupt is not None:
        table = corrupt_entry(table, corrupt)
    rep = verify_table(table, trials, seed)
    record(
        "teleportation_fidelity",
        rep.passed and rep.min_fidelity >= 1 - 1e-10,
        cases=rep.cases,
        min_fidelity=num(rep.min_fidelity),
        failed_outcomes=[str(o) for o in rep.failed_outcomes],
    )

    max_dev, max_sum_dev = 0.0, 0.0
    for chi_a, chi_b in random_input_pairs(trials, seed):
        probs = [outcome_probability(chi_a, chi_b, o) for o in all_outcomes()]
        max_dev = max(max_dev, max(abs(p - 1 / 32) for p in probs))
        max_sum_dev = max(max_sum_dev, abs(sum(probs) - 1))
    record(
        "outcome_uniformity",
        max_dev <= 1e-12 and max_sum_dev <= 1e-10,
        max_probability_deviation=num(max_dev),
        max_sum_deviation=num(max_sum_dev),
    )

    text = serialize_table(table)
    try:
        roundtrip = serialize_table(parse_table(text)) == text
        error = ""
    except TableFormatError as exc:
        roundtrip, error = False, str(exc)
    matches = text == packaged_table_text()
    record("table_roundtrip", roundtrip and matches, matches_artifact=matches, **({"error": error} if error else {}))
    return checks


def cmd_verify(args) -> int:
    checks = run_checks(args.trials, args.seed, args.corrupt)
    ok = all(c["passed"] for c in checks)
    if args.format == "json":
        text = _json({"passed": ok, "seed": args.seed, "trials": args.trials, "checks": checks})
    elif args.format == "csv":
        text = _csv([{"check": c["check"], "passed": c["passed"]} for c in checks])
    else:
        lines = []
        for c in checks:
            detail = " ".join(f"{k}={fmt(v)}" for k, v in c.items() if k not in ("check", "passed"))
            lines.append(f"{'PASS' if c['passed'] else 'FAIL'} {c['check']} {detail}".rstrip())
        lines.append("OK" if ok else "FAILED: " + ", ".join(c["check"] for c in checks if not c["passed"]))
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0 if ok else 1


# -- table -------------------------------------------------------------------

def cmd_table(args) -> int:
    table = default_table()
    if args.format == "text":
        text = serialize_table(table)
    else:
        rows = [dict(zip(TABLE_FIELDS, line.split())) for line in serialize_table(table).splitlines()[1:]]
        for r in rows:
            for key in ("i", "j", "k"):
                r[key] = int(r[key])
        text = _json(rows) if args.format == "json" else _csv(rows)
    _emit(text, args.out)
    return 0


# -- run ---------------------------------------------------------------------

def cmd_run(args) -> int:
    rng = np.random.default_rng(args.seed)
    chi_a, chi_b = _inputs(args, rng)
    session_seed = int(rng.integers(2**63))
    res = run_session(chi_a, chi_b, args.mode, session_seed, forced=args.outcome)
    summary = {
        "mode": res.mode.value,
        "seed": args.seed,
        "outcome": [res.outcome.i, res.outcome.j, res.outcome.k],
        "fidelity_B1": num(res.fidelity_b1),
        "fidelity_A2": num(res.fidelity_a2),
        "messages": [
            {"seq": m.seq, "from": m.sender, "to": m.recipient, "kind": m.kind, "payload": m.payload, "bits": m.bits}
            for m in res.messages
        ],
        "classical_bits": res.transcript.classical_bits,
        "input_a": _qubit_record(chi_a),
        "input_b": _qubit_record(chi_b),
    }
    if args.format == "json":
        summary["transcript"] = res.transcript.to_records()
        text = _json(summary)
    elif args.format == "csv":
        text = _csv(res.transcript.to_records())
    else:
        text = res.transcript.to_text() + (
            f"outcome {res.outcome}\n"
            f"fidelity_B1 {fmt(summary['fidelity_B1'])}\n"
            f"fidelity_A2 {fmt(summary['fidelity_A2'])}\n"
            f"classical_bits {summary['classical_bits']}\n"
        )
    _emit(text, args.out)
    return 0


# -- sweep -------------------------------------------------------------------

def sweep(trials: int, seed: int, chi_a=None, chi_b=None, modes=(Mode.CONTROLLED, Mode.WITHHELD)) -> dict:
    """Run ``trials`` sampled sessions per mode; same session seeds across modes."""
    rng = np.random.default_rng(seed)
    fixed = chi_a is not None and chi_b is not None
    sessions = []
    for _ in range(trials):
        a = chi_a or InputQubit.random("Alice", rng)
        b = chi_b or InputQubit.random("Bob", rng)
        sessions.append((a, b, int(rng.integers(2**63))))

    counts = {o: 0 for o in all_outcomes()}
    per_mode = {}
    for mode in modes:
        f_b1, f_a2 = [], []
        for a, b, s in sessions:
            r = run_session(a, b, mode, s)
            f_b1.append(r.fidelity_b1)
            f_a2.append(r.fidelity_a2)
            if mode is modes[0]:
                counts[r.outcome] += 1
        per_mode[mode.value] = {
            "mean_fidelity_B1": float(np.mean(f_b1)),
            "mean_fidelity_A2": float(np.mean(f_a2)),
            "stderr_fidelity_B1": float(np.std(f_b1) / np.sqrt(trials)),
            "stderr_fidelity_A2": float(np.std(f_a2) / np.sqrt(trials)),
        }

    p = 1 / 32
    sigma = np.sqrt(p * (1 - p) / trials)
    freqs = {o: c / trials for o, c in counts.items()}
    result = {
        "trials": trials,
        "seed": seed,
        "frequencies": freqs,
        "max_frequency_z": float(max(abs(f - p) for f in freqs.values()) / sigma),
        "modes": per_mode,
    }
    if fixed and Mode.WITHHELD.value in per_mode:
        exp_b1, exp_a2 = expected_uncontrolled_fidelity(chi_a, chi_b)
        w = per_mode[Mode.WITHHELD.value]
        result["expected_withheld"] = {"fidelity_B1": exp_b1, "fidelity_A2": exp_a2}
        result["withheld_z_B1"] = _zscore(w["mean_fidelity_B1"], exp_b1, w["stderr_fidelity_B1"])
        result["withheld_z_A2"] = _zscore(w["mean_fidelity_A2"], exp_a2, w["stderr_fidelity_A2"])
    return result


def _zscore(mean, expected, stderr) -> float:
    if stderr == 0:
        return 0.0 if abs(mean - expected) < 1e-10 else float("inf")
    return float((mean - expected) / stderr)


def cmd_sweep(args) -> int:
    res = sweep(args.trials, args.seed, args.input_a, args.input_b)
    if args.format == "csv":
        rows = [{"i": o.i, "j": o.j, "k": o.k, "frequency": fmt(f)} for o, f in res["frequencies"].items()]
        text = _csv(rows)
    else:
        out = {
            k: v for k, v in res.items() if k != "frequencies"
        }
        out["frequencies"] = {f"{o.i},{o.j},{o.k}": f for o, f in res["frequencies"].items()}
        out = json.loads(json.dumps(out), parse_float=lambda s: num(float(s)))
        if args.format == "json":
            text = _json(out)
        else:
            lines = [f"trials {out['trials']}", f"seed {out['seed']}", f"max_frequency_z {fmt(out['max_frequency_z'])}"]
            for mode, stats in out["modes"].items():
                lines += [f"{mode} {k} {fmt(v)}" for k, v in stats.items()]
            for key in ("withheld_z_B1", "withheld_z_A2"):
                if key in out:
                    lines.append(f"{key} {fmt(out[key])}")
            text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


# -- argument parsing ----------------------------------------------------------

def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else 0


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("trials must be >= 1")
    return value


def _outcome(text: str) -> ProtocolOutcome:
    try:
        return ProtocolOutcome.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None, help=f"RNG seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--trials", type=_positive, default=100)
    common.add_argument("--format", choices=("json", "csv", "text"), default="text")
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--mode", choices=("controlled", "withheld", "guess"), default="controlled")
    common.add_argument("--input-a", type=lambda t: parse_amplitudes(t, "Alice"), default=None)
    common.add_argument("--input-b", type=lambda t: parse_amplitudes(t, "Bob"), default=None)
    common.add_argument("--outcome", type=_outcome, default=None, help="force outcome i,j,k")

    parser = argparse.ArgumentParser(prog="bictele", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the end-to-end check suite").add_argument(
        "--corrupt", type=_outcome, default=None, help=argparse.SUPPRESS
    )
    sub.add_parser("table", parents=[common], help="emit the correction table")
    sub.add_parser("run", parents=[common], help="play one three-party session")
    sub.add_parser("sweep", parents=[common], help="aggregate many sampled sessions")
    return parser


COMMANDS = {"verify": cmd_verify, "table": cmd_table, "run": cmd_run, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    try:
        return COMMANDS[args.command](args)
    except OSError as exc:
        print(f"bictele: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
