"""Shared oracles: discrete-event simulation, brute force, random fixtures.

These deliberately recompute results through different algorithms than the
package (time-advancing simulation instead of longest path, exhaustive
enumeration instead of search) so agreement is meaningful.
"""

from __future__ import annotations

import itertools
import random

from shopsearch import Instance, generate_instance


def des_schedule(instance: Instance, machine_seq) -> tuple[list[list[int]], int] | None:
    """Time-advancing list simulation of fixed machine sequences.

    Repeatedly schedules, among operations whose job predecessor is done and
    which are next in their machine's sequence, the one with the earliest
    possible start. Returns (start_times, makespan) or None on deadlock.
    """
    j, m = instance.num_jobs, instance.num_machines
    job_next = [0] * j
    job_ready = [0] * j
    mach_pos = [0] * m
    mach_ready = [0] * m
    starts = [[-1] * m for _ in range(j)]
    makespan = 0
    for _ in range(j * m):
        best = None
        for i in range(j):
            k = job_next[i]
            if k >= m:
                continue
            q = instance.machine_of[i][k]
            if mach_pos[q] >= j or machine_seq[q][mach_pos[q]] != i:
                continue
            start = max(job_ready[i], mach_ready[q])
            if best is None or start < best[0]:
                best = (start, i, k, q)
        if best is None:
            return None
        start, i, k, q = best
        starts[i][k] = start
        finish = start + instance.proc_time[i][k]
        job_ready[i] = finish
        mach_ready[q] = finish
        job_next[i] += 1
        mach_pos[q] += 1
        makespan = max(makespan, finish)
    return starts, makespan


def random_feasible_seq(instance: Instance, rng: random.Random):
    """Random dispatch order: always yields a feasible machine sequencing."""
    j, m = instance.num_jobs, instance.num_machines
    job_next = [0] * j
    seqs = [[] for _ in range(m)]
    remaining = j * m
    while remaining:
        i = rng.choice([i for i in range(j) if job_next[i] < m])
        seqs[instance.machine_of[i][job_next[i]]].append(i)
        job_next[i] += 1
        remaining -= 1
    return tuple(tuple(s) for s in seqs)


def brute_force_optimum(instance: Instance) -> int:
    """Exhaustive minimum makespan over all machine-sequence combinations."""
    jobs = list(range(instance.num_jobs))
    best = None
    for combo in itertools.product(
        itertools.permutations(jobs), repeat=instance.num_machines
    ):
        result = des_schedule(instance, combo)
        if result is None:
            continue
        if best is None or result[1] < best:
            best = result[1]
    assert best is not None, "every instance has at least one feasible sequencing"
    return best


def random_instance(rng: random.Random, max_jobs: int = 6, max_machines: int = 6) -> Instance:
    j = rng.randint(2, max_jobs)
    m = rng.randint(2, max_machines)
    return generate_instance(j, m, seed=rng.randrange(2**30))
