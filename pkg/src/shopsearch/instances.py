"""Problem instances: model, parsing, generation, serialization, lower bound."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO


class ParseError(ValueError):
    """Malformed instance text. Carries the 1-based offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Instance:
    """A j x m job shop instance.

    proc_time[i][k] is the integer duration of job i's k-th operation and
    machine_of[i][k] the machine it runs on. Every job visits every machine
    exactly once, so each machine_of row is a permutation of 0..m-1.
    """

    num_jobs: int
    num_machines: int
    proc_time: tuple[tuple[int, ...], ...]
    machine_of: tuple[tuple[int, ...], ...]
    # machine_slot[i][q] = operation index of job i that runs on machine q
    machine_slot: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        j, m = self.num_jobs, self.num_machines
        if j < 1 or m < 1:
            raise ValueError("instance sizes must be positive")
        if len(self.proc_time) != j or len(self.machine_of) != j:
            raise ValueError("matrix row count does not match num_jobs")
        expected = frozenset(range(m))
        slots = []
        for i in range(j):
            times, machines = self.proc_time[i], self.machine_of[i]
            if len(times) != m or len(machines) != m:
                raise ValueError(f"job {i}: row length does not match num_machines")
            if any(t < 1 for t in times):
                raise ValueError(f"job {i}: processing times must be >= 1")
            if set(machines) != expected:
                raise ValueError(f"job {i}: machine row is not a permutation of 0..{m - 1}")
            row = [0] * m
            for k, q in enumerate(machines):
                row[q] = k
            slots.append(tuple(row))
        object.__setattr__(self, "machine_slot", tuple(slots))

    def duration(self, job: int, op_index: int) -> int:
        return self.proc_time[job][op_index]


def lower_bound(instance: Instance) -> int:
    """Max total processing time routed to any single machine.

    Never exceeds the optimal makespan: the bound ignores precedence within
    jobs, so every feasible schedule keeps each machine busy at least this long.
    """
    loads = [0] * instance.num_machines
    for i in range(instance.num_jobs):
        for k in range(instance.num_machines):
            loads[instance.machine_of[i][k]] += instance.proc_time[i][k]
    return max(loads)


def generate_instance(num_jobs: int, num_machines: int, seed: int) -> Instance:
    """Random instance with times uniform on [1, 99] and uniformly random
    machine orders. Deterministic for a fixed seed."""
    if num_jobs < 1 or num_machines < 1:
        raise ValueError("num_jobs and num_machines must be >= 1")
    rng = random.Random(seed)
    proc = tuple(
        tuple(rng.randint(1, 99) for _ in range(num_machines)) for _ in range(num_jobs)
    )
    orders = []
    for _ in range(num_jobs):
        row = list(range(num_machines))
        rng.shuffle(row)
        orders.append(tuple(row))
    return Instance(num_jobs, num_machines, proc, tuple(orders))


class _TaillardRng:
    """Portable 31-bit linear congruential generator for the Taillard
    benchmark suite; reproduces the official instances from their seeds."""

    def __init__(self, seed: int):
        if not 1 <= seed <= 2147483646:
            raise ValueError("seed must be in [1, 2147483646]")
        self.seed = seed

    def unif(self, low: int, high: int) -> int:
        k = self.seed // 127773
        self.seed = 16807 * (self.seed % 127773) - k * 2836
        if self.seed < 0:
            self.seed += 2147483647
        return low + int(self.seed / 2147483647 * (high - low + 1))


def taillard_instance(num_jobs: int, num_machines: int, time_seed: int, machine_seed: int) -> Instance:
    """Generate the benchmark instance defined by a published seed pair."""
    trng, mrng = _TaillardRng(time_seed), _TaillardRng(machine_seed)
    proc = tuple(
        tuple(trng.unif(1, 99) for _ in range(num_machines)) for _ in range(num_jobs)
    )
    orders = []
    for _ in range(num_jobs):
        row = list(range(1, num_machines + 1))
        for k in range(num_machines):
            other = mrng.unif(k + 1, num_machines) - 1
            row[k], row[other] = row[other], row[k]
        orders.append(tuple(q - 1 for q in row))
    return Instance(num_jobs, num_machines, proc, tuple(orders))


def _int_fields(text: str, count: int, line: int, what: str) -> list[int]:
    fields = text.split()
    if len(fields) != count:
        raise ParseError(f"expected {count} {what}, got {len(fields)}", line)
    try:
        return [int(f) for f in fields]
    except ValueError:
        raise ParseError(f"non-integer {what}", line) from None


def parse_taillard(text: str) -> Instance:
    """Parse the standard layout: a "j m" header, j rows of processing times,
    then j rows of machine orders (1-based or 0-based, auto-detected)."""
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty file", 1)
    header_no, header = lines[0]
    dims = _int_fields(header, 2, header_no, "header fields")
    j, m = dims
    if j < 1 or m < 1:
        raise ParseError("dimensions must be positive", header_no)
    if len(lines) != 1 + 2 * j:
        raise ParseError(
            f"expected {1 + 2 * j} non-blank lines for a {j}x{m} instance, got {len(lines)}",
            lines[-1][0],
        )
    proc, machine_rows = [], []
    for idx in range(j):
        no, ln = lines[1 + idx]
        row = _int_fields(ln, m, no, "processing times")
        if any(t < 1 for t in row):
            raise ParseError("processing times must be >= 1", no)
        proc.append(tuple(row))
    for idx in range(j):
        no, ln = lines[1 + j + idx]
        machine_rows.append((no, _int_fields(ln, m, no, "machine indices")))

    one_based = not any(0 in row for _, row in machine_rows)
    expected = set(range(1, m + 1)) if one_based else set(range(m))
    orders = []
    for no, row in machine_rows:
        if set(row) != expected or len(row) != m:
            raise ParseError("machine row is not a permutation", no)
        orders.append(tuple(q - 1 for q in row) if one_based else tuple(row))
    return Instance(j, m, tuple(proc), tuple(orders))


def render_taillard(instance: Instance) -> str:
    """Inverse of parse_taillard; writes 1-based machine indices."""
    out = [f"{instance.num_jobs} {instance.num_machines}"]
    for row in instance.proc_time:
        out.append(" ".join(str(t) for t in row))
    for row in instance.machine_of:
        out.append(" ".join(str(q + 1) for q in row))
    return "\n".join(out) + "\n"


def instance_to_json(instance: Instance) -> str:
    return json.dumps(
        {
            "num_jobs": instance.num_jobs,
            "num_machines": instance.num_machines,
            "proc_time": [list(r) for r in instance.proc_time],
            "machine_of": [list(r) for r in instance.machine_of],
        },
        separators=(",", ":"),
    )


def instance_from_json(line: str, line_no: int = 1) -> Instance:
    try:
        obj = json.loads(line)
        return Instance(
            obj["num_jobs"],
            obj["num_machines"],
            tuple(tuple(r) for r in obj["proc_time"]),
            tuple(tuple(r) for r in obj["machine_of"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad instance record: {exc}", line_no) from None


def write_instances(instances: Iterable[Instance], stream: TextIO) -> None:
    """Canonical serialization: one JSON object per line."""
    for instance in instances:
        stream.write(instance_to_json(instance) + "\n")


def read_instances(stream: TextIO) -> Iterator[Instance]:
    for no, line in enumerate(stream, start=1):
        if line.strip():
            yield instance_from_json(line, no)


def load_instance_text(text: str) -> list[Instance]:
    """Read either format: canonical JSON lines or a single Taillard file."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return [
            instance_from_json(ln, no)
            for no, ln in enumerate(text.splitlines(), start=1)
            if ln.strip()
        ]
    return [parse_taillard(text)]
