"""Initial solution via the flow-due-date / remaining-work composite rule."""

from __future__ import annotations

from .instances import Instance
from .schedule import Solution, evaluate


def fdd(instance: Instance, job: int, op_index: int) -> int:
    """Flow due date: cumulative processing time through op_index inclusive."""
    return sum(instance.proc_time[job][: op_index + 1])


def mwkr(instance: Instance, job: int, op_index: int) -> int:
    """Remaining work: total processing time from op_index to the last op."""
    return sum(instance.proc_time[job][op_index:])


def fdd_mwkr_schedule(instance: Instance) -> Solution:
    """Non-delay schedule dispatching by minimal FDD/MWKR ratio.

    At each decision point the next-freeing machine dispatches, among the
    operations that can start right then, the one with the smallest
    FDD/MWKR priority index; ties go to the lower job index. The ratio is
    compared by cross-multiplication so the result is integer-exact.
    """
    j, m = instance.num_jobs, instance.num_machines
    machine_free = [0] * m
    job_ready = [0] * j
    next_op = [0] * j
    seqs: list[list[int]] = [[] for _ in range(m)]

    for _ in range(j * m):
        best_t, best_q = None, -1
        earliest = []
        for i in range(j):
            k = next_op[i]
            if k >= m:
                continue
            q = instance.machine_of[i][k]
            t = max(job_ready[i], machine_free[q])
            earliest.append((t, q, i, k))
            if best_t is None or t < best_t or (t == best_t and q < best_q):
                best_t, best_q = t, q

        chosen = None
        for t, q, i, k in earliest:
            if t != best_t or q != best_q:
                continue
            num, den = fdd(instance, i, k), mwkr(instance, i, k)
            if chosen is None:
                chosen = (num, den, i, k)
                continue
            cnum, cden, ci, _ = chosen
            # num/den < cnum/cden with positive denominators
            if num * cden < cnum * den or (num * cden == cnum * den and i < ci):
                chosen = (num, den, i, k)

        _, _, i, k = chosen
        start = best_t
        end = start + instance.proc_time[i][k]
        seqs[best_q].append(i)
        machine_free[best_q] = end
        job_ready[i] = end
        next_op[i] = k + 1

    return evaluate(instance, seqs)
