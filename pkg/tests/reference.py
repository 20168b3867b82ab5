"""Independent pure-Python re-implementations used as test oracles.

These deliberately avoid the library's numpy code paths: plain loops, lists,
and math.  The greedy replay follows the documented placement rule step by
step, and the enumerator branches over every score-tied candidate to build
the full set of reachable boards.
"""

from __future__ import annotations

import math

RIGHT, DOWN, LEFT, UP = 0, 1, 2, 3
OFFSETS = {RIGHT: (0, 1), DOWN: (1, 0), LEFT: (0, -1), UP: (-1, 0)}
OPPOSITE = {RIGHT: LEFT, LEFT: RIGHT, DOWN: UP, UP: DOWN}


def ref_compatibility(values) -> list:
    """C[x][y][d] = 1 - D[x][y][d] / second-smallest of row x in plane d."""
    n = len(values)
    comp = [[[0.0] * 4 for _ in range(n)] for _ in range(n)]
    for x in range(n):
        for d in range(4):
            row = sorted(values[x][z][d] for z in range(n) if z != x)
            second = row[1] if len(row) >= 2 else row[0]
            for y in range(n):
                if y == x:
                    comp[x][y][d] = -math.inf
                elif math.isinf(second):
                    comp[x][y][d] = -math.inf
                elif second == 0.0:
                    comp[x][y][d] = 0.0 if values[x][y][d] == 0.0 else -math.inf
                else:
                    comp[x][y][d] = 1.0 - values[x][y][d] / second
    return comp


def ref_best_buddies(comp) -> set:
    n = len(comp)

    def argmax(x, d):
        best, best_v = 0, comp[x][0][d]
        for z in range(1, n):
            if comp[x][z][d] > best_v:
                best, best_v = z, comp[x][z][d]
        return best

    buddies = set()
    for d in range(4):
        for x in range(n):
            y = argmax(x, d)
            if y != x and argmax(y, OPPOSITE[d]) == x:
                buddies.add((x, y, d))
    return buddies


def ref_seed_piece(comp, buddies) -> int:
    n = len(comp)
    counts = [0] * n
    sums = [0.0] * n
    for x, y, d in buddies:
        counts[x] += 1
        if math.isfinite(comp[x][y][d]):
            sums[x] += comp[x][y][d]
    return min(range(n), key=lambda p: (-counts[p], -sums[p], p))


def _slot_score(comp, placed, slot, candidate):
    """Mean compatibility over all placed neighbors, recomputed from scratch."""
    total, count = 0.0, 0
    for d, (dr, dc) in OFFSETS.items():
        neighbor_slot = (slot[0] - dr, slot[1] - dc)
        pid = placed.get(neighbor_slot)
        if pid is not None:
            total += comp[pid][candidate][d]
            count += 1
    if count == 0:
        return None
    return total / count


def _candidate_slots(placed, frame):
    """Empty slots adjacent to the placed region that keep the box in frame."""
    if placed:
        rows = [r for r, _ in placed]
        cols = [c for _, c in placed]
        box = (min(rows), min(cols), max(rows), max(cols))
    else:
        box = (0, 0, 0, 0)
    out = set()
    for (r, c) in placed:
        for dr, dc in OFFSETS.values():
            slot = (r + dr, c + dc)
            if slot in placed:
                continue
            if frame is not None:
                height = max(box[2], slot[0]) - min(box[0], slot[0]) + 1
                width = max(box[3], slot[1]) - min(box[1], slot[1]) + 1
                if height > frame[0] or width > frame[1]:
                    continue
            out.add(slot)
    return sorted(out)


def _normalize(placed: dict) -> dict:
    min_r = min(r for r, _ in placed)
    min_c = min(c for _, c in placed)
    return {(r - min_r, c - min_c): pid for (r, c), pid in placed.items()}


def ref_place(values, frame=None) -> dict:
    """Deterministic replay of the documented greedy rule.

    Returns slot -> piece id, normalized so the minimum corner is (0, 0).
    """
    n = len(values)
    if n == 1:
        return {(0, 0): 0}
    comp = ref_compatibility(values)
    seed = ref_seed_piece(comp, ref_best_buddies(comp))
    placed = {(0, 0): seed}
    unplaced = set(range(n)) - {seed}
    while unplaced:
        best_key, best = None, None
        for slot in _candidate_slots(placed, frame):
            for pid in sorted(unplaced):
                score = _slot_score(comp, placed, slot, pid)
                if score is None or not math.isfinite(score):
                    continue
                key = (-score, pid, slot[0], slot[1])
                if best_key is None or key < best_key:
                    best_key, best = key, (pid, slot)
        if best is None:
            pid = min(unplaced)
            slot = _candidate_slots(placed, frame)[0]
            best = (pid, slot)
        placed[best[1]] = best[0]
        unplaced.discard(best[0])
    return _normalize(placed)


def ref_reachable_boards(values, frame=None, limit=200) -> set:
    """All terminal boards when score ties branch instead of tie-breaking.

    Boards are frozensets of (row, col, piece) triples after normalization.
    """
    n = len(values)
    if n == 1:
        return {frozenset({(0, 0, 0)})}
    comp = ref_compatibility(values)
    seed = ref_seed_piece(comp, ref_best_buddies(comp))
    results = set()
    stack = [({(0, 0): seed}, frozenset(range(n)) - {seed})]
    while stack:
        placed, unplaced = stack.pop()
        if not unplaced:
            norm = _normalize(placed)
            results.add(frozenset((r, c, pid) for (r, c), pid in norm.items()))
            if len(results) > limit:
                raise RuntimeError("tie explosion; use a less degenerate tensor")
            continue
        candidates = []
        for slot in _candidate_slots(placed, frame):
            for pid in sorted(unplaced):
                score = _slot_score(comp, placed, slot, pid)
                if score is None or not math.isfinite(score):
                    continue
                candidates.append((score, pid, slot))
        if not candidates:
            pid = min(unplaced)
            slot = _candidate_slots(placed, frame)[0]
            candidates = [(0.0, pid, slot)]
        top = max(score for score, _, _ in candidates)
        for score, pid, slot in candidates:
            if score == top:
                nxt = dict(placed)
                nxt[slot] = pid
                stack.append((nxt, unplaced - {pid}))
    return results


def ref_edge_cost(values, placed: dict) -> float:
    """Sum of Right and Down dissimilarities over placed adjacencies.

    Slots are visited in sorted order so equal boards sum bit-identically.
    """
    total = 0.0
    for (r, c), pid in sorted(placed.items()):
        right = placed.get((r, c + 1))
        if right is not None:
            total += values[pid][right][RIGHT]
        down = placed.get((r + 1, c))
        if down is not None:
            total += values[pid][down][DOWN]
    return total


def random_tensor(rng, n: int):
    """Random positive dissimilarity tensor with mirrored secondary planes.

    Continuous draws keep candidate scores well separated, so the greedy
    ordering is insensitive to ulp-level summation differences between
    implementations.
    """
    values = [[[math.inf] * 4 for _ in range(n)] for _ in range(n)]
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            values[x][y][RIGHT] = float(rng.uniform(0.05, 10.0))
            values[x][y][DOWN] = float(rng.uniform(0.05, 10.0))
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            values[x][y][LEFT] = values[y][x][RIGHT]
            values[x][y][UP] = values[y][x][DOWN]
    return values
