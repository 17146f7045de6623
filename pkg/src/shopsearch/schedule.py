"""Solution evaluation on the disjunctive graph, critical paths and blocks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .instances import Instance

MachineSeq = tuple[tuple[int, ...], ...]


class InfeasibleSequenceError(Exception):
    """The combined job-precedence + machine-order digraph has a cycle."""


@dataclass(frozen=True)
class Solution:
    """Per-machine job sequences with derived earliest start times.

    machine_seq[q] lists job indices in processing order on machine q.
    start_time[i][k] is the earliest start of job i's k-th operation and
    makespan the completion time of the last operation.
    """

    machine_seq: MachineSeq
    start_time: tuple[tuple[int, ...], ...]
    makespan: int


@dataclass(frozen=True)
class CriticalBlock:
    """Maximal run of consecutive critical-path operations on one machine."""

    machine: int
    ops: tuple[tuple[int, int], ...]  # (job, op_index) pairs

    def __len__(self) -> int:
        return len(self.ops)


def _check_permutation_rows(instance: Instance, machine_seq) -> None:
    expected = set(range(instance.num_jobs))
    if len(machine_seq) != instance.num_machines:
        raise ValueError("machine_seq must have one row per machine")
    for q, row in enumerate(machine_seq):
        if set(row) != expected or len(row) != instance.num_jobs:
            raise ValueError(f"machine {q}: sequence is not a permutation of jobs")


def _earliest_starts(instance: Instance, machine_seq) -> list[int] | None:
    """Longest-path earliest starts in topological order; None on a cycle.

    Operations are flattened as i * m + k. Integer arithmetic throughout.
    """
    j, m = instance.num_jobs, instance.num_machines
    total = j * m
    proc, slot = instance.proc_time, instance.machine_slot

    succs: list[list[int]] = [[] for _ in range(total)]
    indeg = [0] * total
    for i in range(j):
        base = i * m
        for k in range(m - 1):
            succs[base + k].append(base + k + 1)
            indeg[base + k + 1] += 1
    for q, row in enumerate(machine_seq):
        prev = -1
        for job in row:
            node = job * m + slot[job][q]
            if prev >= 0:
                succs[prev].append(node)
                indeg[node] += 1
            prev = node

    start = [0] * total
    queue = deque(n for n in range(total) if indeg[n] == 0)
    seen = 0
    while queue:
        node = queue.popleft()
        seen += 1
        finish = start[node] + proc[node // m][node % m]
        for nxt in succs[node]:
            if finish > start[nxt]:
                start[nxt] = finish
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    return start if seen == total else None


def evaluate(instance: Instance, machine_seq) -> Solution:
    """Earliest-start schedule for the given machine sequences.

    Raises InfeasibleSequenceError when the sequencing is cyclic; this is a
    recoverable condition that neighborhood operators probe for.
    """
    seq = tuple(tuple(row) for row in machine_seq)
    _check_permutation_rows(instance, seq)
    start = _earliest_starts(instance, seq)
    if start is None:
        raise InfeasibleSequenceError("machine sequences induce a precedence cycle")
    j, m = instance.num_jobs, instance.num_machines
    makespan = max(start[n] + instance.proc_time[n // m][n % m] for n in range(j * m))
    table = tuple(tuple(start[i * m + k] for k in range(m)) for i in range(j))
    return Solution(seq, table, makespan)


def is_feasible(instance: Instance, machine_seq) -> bool:
    """True iff the combined precedence + machine-order digraph is acyclic."""
    seq = tuple(tuple(row) for row in machine_seq)
    _check_permutation_rows(instance, seq)
    return _earliest_starts(instance, seq) is not None


def critical_path(instance: Instance, solution: Solution) -> list[tuple[int, int]]:
    """One longest path through the schedule, as (job, op_index) pairs.

    Ties are broken deterministically: backtracking starts from the op that
    finishes at the makespan with the smallest (machine, position) index and
    prefers the machine predecessor over the job predecessor, so repeated
    calls yield identical block sets.
    """
    m = instance.num_machines
    start, proc = solution.start_time, instance.proc_time
    pos_of = [{job: p for p, job in enumerate(row)} for row in solution.machine_seq]

    def mach_pos(i: int, k: int) -> tuple[int, int]:
        q = instance.machine_of[i][k]
        return q, pos_of[q][i]

    terminal = min(
        (
            (i, k)
            for i in range(instance.num_jobs)
            for k in range(m)
            if start[i][k] + proc[i][k] == solution.makespan
        ),
        key=lambda op: mach_pos(*op),
    )

    path = []
    i, k = terminal
    while True:
        path.append((i, k))
        s = start[i][k]
        if s == 0:
            break
        q, p = mach_pos(i, k)
        if p > 0:
            prev_job = solution.machine_seq[q][p - 1]
            pk = instance.machine_slot[prev_job][q]
            if start[prev_job][pk] + proc[prev_job][pk] == s:
                i, k = prev_job, pk
                continue
        # earliest-start schedules always have a tight predecessor when s > 0
        i, k = i, k - 1
    path.reverse()
    return path


def critical_blocks(
    instance: Instance, solution: Solution, path: list[tuple[int, int]]
) -> list[CriticalBlock]:
    """Group the path into maximal same-machine runs, order preserved."""
    blocks: list[CriticalBlock] = []
    run: list[tuple[int, int]] = []
    run_machine = -1
    for i, k in path:
        q = instance.machine_of[i][k]
        if q != run_machine and run:
            blocks.append(CriticalBlock(run_machine, tuple(run)))
            run = []
        run_machine = q
        run.append((i, k))
    if run:
        blocks.append(CriticalBlock(run_machine, tuple(run)))
    return blocks
