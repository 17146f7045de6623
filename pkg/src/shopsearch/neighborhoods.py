"""Critical-block neighborhood operators and the perturbation operator.

Every generator returns only moves whose application yields a feasible
neighbor: adjacent swaps inside critical blocks are feasible by construction,
compound end swaps and in-block shifts are checked and filtered.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

from .instances import Instance
from .schedule import (
    CriticalBlock,
    MachineSeq,
    Solution,
    _earliest_starts,
    critical_blocks,
    critical_path,
    evaluate,
)


class OperatorId(enum.IntEnum):
    CT = 0      # swap adjacent ops inside critical blocks
    CET = 1     # swap the ops at a block's start or end
    ECET = 2    # swap both block ends together
    CEI = 3     # shift an op to another position inside its block
    PERTURB = 4 # random feasible adjacent transpositions


NEIGHBORHOOD_OPERATORS = (OperatorId.CT, OperatorId.CET, OperatorId.ECET, OperatorId.CEI)


class MoveKind(enum.Enum):
    SWAP_ADJACENT = "swap_adjacent"
    SWAP_ENDS = "swap_ends"
    SHIFT_WITHIN_BLOCK = "shift_within_block"


@dataclass(frozen=True)
class Move:
    """One sequence edit on a single machine.

    positions is (p, p+1) for an adjacent swap, (first, last) block positions
    for a compound end swap, and (src, dst) for an in-block shift.
    """

    kind: MoveKind
    machine: int
    positions: tuple[int, int]

    def __post_init__(self):
        a, b = self.positions
        if a == b or a < 0 or b < 0:
            raise ValueError("move positions must be distinct and non-negative")


def apply_move(machine_seq: MachineSeq, move: Move) -> MachineSeq:
    row = list(machine_seq[move.machine])
    a, b = move.positions
    if move.kind is MoveKind.SWAP_ADJACENT:
        row[a], row[a + 1] = row[a + 1], row[a]
    elif move.kind is MoveKind.SWAP_ENDS:
        row[a], row[a + 1] = row[a + 1], row[a]
        row[b - 1], row[b] = row[b], row[b - 1]
    else:
        row.insert(b, row.pop(a))
    out = list(machine_seq)
    out[move.machine] = tuple(row)
    return tuple(out)


def _block_spans(solution: Solution, blocks: list[CriticalBlock]) -> list[tuple[CriticalBlock, int]]:
    """Pair each block with the machine-sequence position of its first op."""
    pos_of = [{job: p for p, job in enumerate(row)} for row in solution.machine_seq]
    return [(blk, pos_of[blk.machine][blk.ops[0][0]]) for blk in blocks]


def _blocks(instance: Instance, solution: Solution) -> list[tuple[CriticalBlock, int]]:
    path = critical_path(instance, solution)
    return _block_spans(solution, critical_blocks(instance, solution, path))


def ct_moves(instance: Instance, solution: Solution) -> list[Move]:
    """All adjacent swaps inside critical blocks: L-1 moves per block."""
    moves = []
    for blk, first in _blocks(instance, solution):
        for p in range(first, first + len(blk) - 1):
            moves.append(Move(MoveKind.SWAP_ADJACENT, blk.machine, (p, p + 1)))
    return moves


def cet_moves(instance: Instance, solution: Solution) -> list[Move]:
    """First and last adjacent pair of each block, deduplicated when L = 2."""
    moves = []
    for blk, first in _blocks(instance, solution):
        last = first + len(blk) - 1
        if len(blk) < 2:
            continue
        moves.append(Move(MoveKind.SWAP_ADJACENT, blk.machine, (first, first + 1)))
        if len(blk) > 2:
            moves.append(Move(MoveKind.SWAP_ADJACENT, blk.machine, (last - 1, last)))
    return moves


def ecet_moves(instance: Instance, solution: Solution) -> list[Move]:
    """Both end swaps of a block applied together.

    Blocks shorter than 4 degrade to the start swap (the end pairs overlap);
    an infeasible compound falls back to whichever single end swap survives,
    so every returned move yields a feasible neighbor.
    """
    moves = []
    for blk, first in _blocks(instance, solution):
        if len(blk) < 2:
            continue
        last = first + len(blk) - 1
        start_swap = Move(MoveKind.SWAP_ADJACENT, blk.machine, (first, first + 1))
        if len(blk) < 4:
            moves.append(start_swap)
            continue
        compound = Move(MoveKind.SWAP_ENDS, blk.machine, (first, last))
        if _earliest_starts(instance, apply_move(solution.machine_seq, compound)) is not None:
            moves.append(compound)
        else:
            moves.append(start_swap)  # single critical adjacent swaps never cycle
    return moves


def cei_moves(instance: Instance, solution: Solution) -> list[Move]:
    """Shift each block op to every other in-block position, feasibles only.

    Adjacent shifts coincide with the corresponding swap and are emitted once;
    opposite-direction long shifts are distinct neighbors and both kept.
    """
    moves, seen = [], set()
    for blk, first in _blocks(instance, solution):
        last = first + len(blk) - 1
        for src in range(first, last + 1):
            for dst in range(first, last + 1):
                if src == dst:
                    continue
                if abs(src - dst) == 1:
                    key = (blk.machine, "adj", min(src, dst), max(src, dst))
                else:
                    key = (blk.machine, "shift", src, dst)
                if key in seen:
                    continue
                seen.add(key)
                move = Move(MoveKind.SHIFT_WITHIN_BLOCK, blk.machine, (src, dst))
                if _earliest_starts(instance, apply_move(solution.machine_seq, move)) is not None:
                    moves.append(move)
    return moves


_GENERATORS = {
    OperatorId.CT: ct_moves,
    OperatorId.CET: cet_moves,
    OperatorId.ECET: ecet_moves,
    OperatorId.CEI: cei_moves,
}


def moves_for(instance: Instance, solution: Solution, op: OperatorId) -> list[Move]:
    return _GENERATORS[op](instance, solution)


def best_neighbor(
    instance: Instance, solution: Solution, op: OperatorId
) -> tuple[Solution, Move | None]:
    """Steepest step: the minimal-makespan neighbor of the operator's set.

    Returns the best candidate even when it worsens the makespan; accepting
    or reverting it is the caller's decision. Ties go to the first move in
    enumeration order. An empty neighborhood returns the input flagged None.
    """
    if op not in _GENERATORS:
        raise ValueError(f"{op.name} is not a neighborhood operator")
    best: Solution | None = None
    best_move: Move | None = None
    for move in moves_for(instance, solution, op):
        seq = apply_move(solution.machine_seq, move)
        starts = _earliest_starts(instance, seq)
        if starts is None:
            continue
        candidate = evaluate(instance, seq)
        if best is None or candidate.makespan < best.makespan:
            best, best_move = candidate, move
    if best is None:
        return solution, None
    return best, best_move


def perturb(
    instance: Instance, solution: Solution, strength: int, rng: random.Random
) -> Solution:
    """Jump: `strength` random feasible adjacent transpositions.

    Each transposition rejection-samples up to 50 infeasible attempts; if
    nothing feasible is found the input solution is returned unchanged.
    """
    if strength < 1:
        raise ValueError("perturbation strength must be >= 1")
    j, m = instance.num_jobs, instance.num_machines
    if j < 2:
        return solution
    seq = [list(row) for row in solution.machine_seq]
    changed = False
    for _ in range(strength):
        for _attempt in range(50):
            q = rng.randrange(m)
            p = rng.randrange(j - 1)
            seq[q][p], seq[q][p + 1] = seq[q][p + 1], seq[q][p]
            if _earliest_starts(instance, seq) is not None:
                changed = True
                break
            seq[q][p], seq[q][p + 1] = seq[q][p + 1], seq[q][p]
    if not changed:
        return solution
    return evaluate(instance, seq)
