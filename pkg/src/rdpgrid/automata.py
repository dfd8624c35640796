"""Compilation of trace formulas to complete, minimal, symbolic DFAs.

The pipeline is: negation normal form, expansion of each formula into
per-letter successor obligations (an NFA over obligation sets), subset
construction with an explicit empty dead sink, partition refinement over
the minterm alphabet of the formula's occurring propositions, and guard
synthesis per surviving edge. The trace-evaluation oracle in the logic
module is the arbiter of correctness; the construction is checked against
it by equivalence tests rather than trusted on its own.
"""

from __future__ import annotations

import itertools
import json
import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ResourceLimit, UnknownProposition
from .logic import (
    Atom, BoolExpr, Box, Concat, Conj, Diamond, Disj, FAnd, FF, FNot, FOr,
    Falsity, Formula, Neg, Path, Star, Step, TT, Test, Truth, Union,
    eval_bool, print_bool, props_of,
)

__all__ = ["Dfa", "DfaAnalysis", "compile", "dfa_step", "dfa_accepts",
           "analyze", "to_dot", "to_json", "verify_partition"]


@dataclass(frozen=True)
class Dfa:
    """Complete deterministic automaton with symbolic edge guards.

    States are dense integers with 0 initial. Every state carries edges
    whose guards partition the label space, so `dfa_step` is total; all
    states are reachable from the initial state and no two are language
    equivalent.
    """

    props: tuple[str, ...]
    n_states: int
    initial: int
    accepting: frozenset[int]
    edges: tuple[tuple[tuple[BoolExpr, int], ...], ...]


@dataclass(frozen=True)
class DfaAnalysis:
    """Shortest guard-step distances to acceptance, and the dead states."""

    distance: tuple[float, ...]
    dead: frozenset[int]


# ---------------------------------------------------------------------------
# negation normal form
# ---------------------------------------------------------------------------

def _nnf(f: Formula) -> Formula:
    if isinstance(f, (TT, FF)):
        return f
    if isinstance(f, FAnd):
        return FAnd(_nnf(f.left), _nnf(f.right))
    if isinstance(f, FOr):
        return FOr(_nnf(f.left), _nnf(f.right))
    if isinstance(f, Diamond):
        return Diamond(_nnf_path(f.path), _nnf(f.arg))
    if isinstance(f, Box):
        return Box(_nnf_path(f.path), _nnf(f.arg))
    if isinstance(f, FNot):
        g = f.arg
        if isinstance(g, TT):
            return FF()
        if isinstance(g, FF):
            return TT()
        if isinstance(g, FNot):
            return _nnf(g.arg)
        if isinstance(g, FAnd):
            return FOr(_nnf(FNot(g.left)), _nnf(FNot(g.right)))
        if isinstance(g, FOr):
            return FAnd(_nnf(FNot(g.left)), _nnf(FNot(g.right)))
        if isinstance(g, Diamond):
            return Box(_nnf_path(g.path), _nnf(FNot(g.arg)))
        if isinstance(g, Box):
            return Diamond(_nnf_path(g.path), _nnf(FNot(g.arg)))
    raise TypeError(f"not a formula: {f!r}")


def _nnf_path(p: Path) -> Path:
    if isinstance(p, Step):
        return p
    if isinstance(p, Test):
        return Test(_nnf(p.arg))
    if isinstance(p, Concat):
        return Concat(_nnf_path(p.left), _nnf_path(p.right))
    if isinstance(p, Union):
        return Union(_nnf_path(p.left), _nnf_path(p.right))
    if isinstance(p, Star):
        return Star(_nnf_path(p.arg))
    raise TypeError(f"not a path: {p!r}")


# ---------------------------------------------------------------------------
# obligation expansion
# ---------------------------------------------------------------------------

# Loop markers: a star unfolding must consume at least one label before it
# may count as having gone around, otherwise test-only paths would support
# themselves. A marked formula contributes nothing at the current position
# (False for the existential side, True for the universal one) and is
# unmarked when a real step hands it to the next position.

@dataclass(frozen=True)
class _FMark(Formula):
    arg: Formula


@dataclass(frozen=True)
class _TMark(Formula):
    arg: Formula


def _strip(f: Formula) -> Formula:
    if isinstance(f, (_FMark, _TMark)):
        return _strip(f.arg)
    if isinstance(f, (TT, FF)):
        return f
    if isinstance(f, FAnd):
        return FAnd(_strip(f.left), _strip(f.right))
    if isinstance(f, FOr):
        return FOr(_strip(f.left), _strip(f.right))
    if isinstance(f, Diamond):
        return Diamond(f.path, _strip(f.arg))
    if isinstance(f, Box):
        return Box(f.path, _strip(f.arg))
    raise TypeError(f"not a formula: {f!r}")


# A successor constraint in disjunctive form: a set of alternative
# obligation sets for the next position. TRUE is one empty alternative,
# FALSE is no alternative.
_TRUE: frozenset[frozenset[Formula]] = frozenset({frozenset()})
_FALSE: frozenset[frozenset[Formula]] = frozenset()


def _prune(alts: Iterable[frozenset[Formula]]) -> frozenset[frozenset[Formula]]:
    """Drop alternatives that strictly contain another alternative."""
    alts = set(alts)
    keep = {a for a in alts
            if not any(b < a for b in alts)}
    return frozenset(keep)


def _dnf_or(a, b):
    return _prune(a | b)


def _dnf_and(a, b):
    if not a or not b:
        return _FALSE
    return _prune({x | y for x in a for y in b})


def _next(f: Formula) -> frozenset[frozenset[Formula]]:
    """The obligation a consumed step hands to the next position."""
    g = _strip(f)
    if isinstance(g, TT):
        return _TRUE
    if isinstance(g, FF):
        return _FALSE
    return frozenset({frozenset({g})})


def _delta(f: Formula, label: frozenset | None, memo) -> frozenset[frozenset[Formula]]:
    """Successor constraint of one formula on one letter.

    `label` None means evaluation at the end of the trace, where no step
    is possible; the result is then trivially TRUE or FALSE.
    """
    key = (f, label)
    got = memo.get(key)
    if got is not None:
        return got
    if isinstance(f, TT):
        out = _TRUE
    elif isinstance(f, FF):
        out = _FALSE
    elif isinstance(f, _FMark):
        out = _FALSE
    elif isinstance(f, _TMark):
        out = _TRUE
    elif isinstance(f, FAnd):
        out = _dnf_and(_delta(f.left, label, memo), _delta(f.right, label, memo))
    elif isinstance(f, FOr):
        out = _dnf_or(_delta(f.left, label, memo), _delta(f.right, label, memo))
    elif isinstance(f, Diamond):
        p = f.path
        if isinstance(p, Step):
            if label is not None and eval_bool(p.guard, label):
                out = _next(f.arg)
            else:
                out = _FALSE
        elif isinstance(p, Test):
            out = _dnf_and(_delta(p.arg, label, memo), _delta(f.arg, label, memo))
        elif isinstance(p, Concat):
            out = _delta(Diamond(p.left, Diamond(p.right, f.arg)), label, memo)
        elif isinstance(p, Union):
            out = _dnf_or(_delta(Diamond(p.left, f.arg), label, memo),
                          _delta(Diamond(p.right, f.arg), label, memo))
        elif isinstance(p, Star):
            out = _dnf_or(_delta(f.arg, label, memo),
                          _delta(Diamond(p.arg, _FMark(f)), label, memo))
        else:
            raise TypeError(f"not a path: {p!r}")
    elif isinstance(f, Box):
        p = f.path
        if isinstance(p, Step):
            if label is not None and eval_bool(p.guard, label):
                out = _next(f.arg)
            else:
                out = _TRUE
        elif isinstance(p, Test):
            out = _dnf_or(_delta(_nnf(FNot(p.arg)), label, memo),
                          _delta(f.arg, label, memo))
        elif isinstance(p, Concat):
            out = _delta(Box(p.left, Box(p.right, f.arg)), label, memo)
        elif isinstance(p, Union):
            out = _dnf_and(_delta(Box(p.left, f.arg), label, memo),
                           _delta(Box(p.right, f.arg), label, memo))
        elif isinstance(p, Star):
            out = _dnf_and(_delta(f.arg, label, memo),
                           _delta(Box(p.arg, _TMark(f)), label, memo))
        else:
            raise TypeError(f"not a path: {p!r}")
    else:
        raise TypeError(f"not a formula: {f!r}")
    memo[key] = out
    return out


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

def compile(f: Formula, props: Iterable[str], *, max_states: int = 100_000) -> Dfa:
    """Compile a formula over the declared propositions.

    Guards are synthesized over the propositions occurring in the formula,
    which keeps them partitioning over any superset alphabet. Raises
    UnknownProposition when the formula strays outside the declared set and
    ResourceLimit when subset construction exceeds `max_states` states.
    """
    declared = tuple(sorted(set(props)))
    used = props_of(f)
    stray = used - set(declared)
    if stray:
        raise UnknownProposition(
            f"formula mentions undeclared propositions: {', '.join(sorted(stray))}")
    atoms = tuple(sorted(used))
    letters = [frozenset(a for i, a in enumerate(atoms) if m >> i & 1)
               for m in range(1 << len(atoms))]

    root = _nnf(f)
    init_nfa = frozenset() if isinstance(root, TT) else frozenset({root})
    memo: dict = {}
    nfa_succ: dict = {}

    def successors(nfa_state: frozenset, letter_idx: int) -> frozenset:
        key = (nfa_state, letter_idx)
        got = nfa_succ.get(key)
        if got is None:
            dnf = _TRUE
            for g in nfa_state:
                dnf = _dnf_and(dnf, _delta(g, letters[letter_idx], memo))
                if not dnf:
                    break
            nfa_succ[key] = got = dnf
        return got

    def nfa_accepts(nfa_state: frozenset) -> bool:
        return all(_delta(g, None, memo) == _TRUE for g in nfa_state)

    initial = frozenset({init_nfa})
    ids: dict[frozenset, int] = {initial: 0}
    trans: list[list[int]] = []
    order: list[frozenset] = [initial]
    queue = deque([initial])
    while queue:
        state = queue.popleft()
        row: list[int] = []
        for li in range(len(letters)):
            target = _prune(alt for member in state for alt in successors(member, li))
            tid = ids.get(target)
            if tid is None:
                tid = len(order)
                if tid >= max_states:
                    raise ResourceLimit(
                        f"subset construction exceeded {max_states} states")
                ids[target] = tid
                order.append(target)
                queue.append(target)
            row.append(tid)
        trans.append(row)
    accepting = [any(nfa_accepts(m) for m in state) for state in order]

    merged_trans, merged_accepting, merged_initial = _minimize(trans, accepting, 0)
    return _synthesize(declared, atoms, letters, merged_trans, merged_accepting,
                       merged_initial)


def _minimize(trans: list[list[int]], accepting: list[bool], initial: int):
    """Moore partition refinement to the coarsest language-preserving blocks."""
    n = len(trans)
    block = [1 if accepting[q] else 0 for q in range(n)]
    while True:
        seen: dict[tuple, int] = {}
        new_block = [0] * n
        for q in range(n):
            sig = (block[q], tuple(block[t] for t in trans[q]))
            nb = seen.get(sig)
            if nb is None:
                nb = len(seen)
                seen[sig] = nb
            new_block[q] = nb
        if new_block == block:
            break
        block = new_block
    n_blocks = len(set(block))
    rep = [-1] * n_blocks
    for q in range(n):
        if rep[block[q]] < 0:
            rep[block[q]] = q
    merged = [[block[trans[rep[b]][li]] for li in range(len(trans[0]))]
              for b in range(n_blocks)]
    acc = [accepting[rep[b]] for b in range(n_blocks)]
    return merged, acc, block[initial]


def _synthesize(declared, atoms, letters, trans, accepting, initial) -> Dfa:
    """Relabel breadth-first from the initial state and build symbolic guards."""
    relabel = {initial: 0}
    order = [initial]
    queue = deque([initial])
    while queue:
        b = queue.popleft()
        for t in trans[b]:
            if t not in relabel:
                relabel[t] = len(order)
                order.append(t)
                queue.append(t)
    n = len(order)
    edges: list[tuple[tuple[BoolExpr, int], ...]] = []
    for b in order:
        by_target: dict[int, list[int]] = {}
        for li, t in enumerate(trans[b]):
            by_target.setdefault(relabel[t], []).append(li)
        row = tuple((_minterms_to_guard(lis, atoms), target)
                    for target, lis in sorted(by_target.items()))
        edges.append(row)
    acc = frozenset(relabel[b] for b in range(len(trans)) if accepting[b])
    return Dfa(props=tuple(declared), n_states=n, initial=0,
               accepting=acc, edges=tuple(edges))


# ---------------------------------------------------------------------------
# guard synthesis
# ---------------------------------------------------------------------------

def _minterms_to_guard(minterms: Sequence[int], atoms: tuple[str, ...]) -> BoolExpr:
    k = len(atoms)
    if len(minterms) == 1 << k:
        return Truth()
    if not minterms:
        return Falsity()
    if k <= 10:
        implicants = _prime_cover(sorted(minterms), k)
    else:
        implicants = [(m, (1 << k) - 1) for m in sorted(minterms)]
    terms = [_implicant_to_expr(bits, cares, atoms) for bits, cares in implicants]
    out = terms[0]
    for t in terms[1:]:
        out = Disj(out, t)
    return out


def _prime_cover(minterms: list[int], k: int) -> list[tuple[int, int]]:
    """Quine-McCluskey: prime implicants, then a greedy essential cover.

    Implicants are (bits, cares) pairs; a zero care bit means either value.
    """
    current = {(m, (1 << k) - 1) for m in minterms}
    primes: set[tuple[int, int]] = set()
    while current:
        combined: set[tuple[int, int]] = set()
        used: set[tuple[int, int]] = set()
        group = sorted(current)
        index = set(group)
        for bits, cares in group:
            for b in range(k):
                bit = 1 << b
                if not cares & bit or bits & bit:
                    continue
                other = (bits | bit, cares)
                if other in index:
                    combined.add((bits, cares & ~bit))
                    used.add((bits, cares))
                    used.add(other)
        primes.update(current - used)
        current = combined
    cover_of: dict[tuple[int, int], set[int]] = {
        p: {m for m in minterms if (m & p[1]) == p[0]} for p in sorted(primes)}
    needed = set(minterms)
    chosen: list[tuple[int, int]] = []
    # Essential primes first, then greedily by coverage; ties break on the
    # implicant encoding so output is stable.
    for m in minterms:
        owners = [p for p in sorted(cover_of) if m in cover_of[p]]
        if len(owners) == 1 and owners[0] not in chosen:
            chosen.append(owners[0])
            needed -= cover_of[owners[0]]
    while needed:
        best = max(sorted(cover_of), key=lambda p: (len(cover_of[p] & needed),
                                                    -p[1], -p[0]))
        if not cover_of[best] & needed:
            break
        chosen.append(best)
        needed -= cover_of[best]
    return sorted(chosen)


def _implicant_to_expr(bits: int, cares: int, atoms: tuple[str, ...]) -> BoolExpr:
    lits: list[BoolExpr] = []
    for i, name in enumerate(atoms):
        if cares >> i & 1:
            lits.append(Atom(name) if bits >> i & 1 else Neg(Atom(name)))
    if not lits:
        return Truth()
    out = lits[0]
    for l in lits[1:]:
        out = Conj(out, l)
    return out


# ---------------------------------------------------------------------------
# use and inspection
# ---------------------------------------------------------------------------

def dfa_step(dfa: Dfa, state: int, label: Iterable[str]) -> int:
    """Advance one letter; guards partition, so exactly one edge applies."""
    label = frozenset(label)
    for guard, target in dfa.edges[state]:
        if eval_bool(guard, label):
            return target
    raise AssertionError(f"no edge matched state {state} on {sorted(label)}")


def dfa_accepts(dfa: Dfa, trace: Sequence[Iterable[str]]) -> bool:
    """Run the whole trace from the initial state."""
    q = dfa.initial
    for label in trace:
        q = dfa_step(dfa, q, label)
    return q in dfa.accepting


def analyze(dfa: Dfa) -> DfaAnalysis:
    """Distance to acceptance per state; dead states are those at infinity.

    Every emitted edge covers at least one letter, so distances count raw
    edge steps.
    """
    back: list[list[int]] = [[] for _ in range(dfa.n_states)]
    for src in range(dfa.n_states):
        for _, dst in dfa.edges[src]:
            back[dst].append(src)
    dist = [float("inf")] * dfa.n_states
    queue = deque()
    for q in sorted(dfa.accepting):
        dist[q] = 0
        queue.append(q)
    while queue:
        q = queue.popleft()
        for p in back[q]:
            if dist[p] == float("inf"):
                dist[p] = dist[q] + 1
                queue.append(p)
    dead = frozenset(q for q in range(dfa.n_states) if dist[q] == float("inf"))
    return DfaAnalysis(distance=tuple(dist), dead=dead)


def to_dot(dfa: Dfa) -> str:
    """Graphviz rendering; output is byte-stable for a given automaton."""
    lines = ["digraph dfa {", "  rankdir=LR;", "  node [shape=circle];",
             '  __start [shape=point, label=""];', f"  __start -> q{dfa.initial};"]
    for q in sorted(dfa.accepting):
        lines.append(f"  q{q} [shape=doublecircle];")
    for src in range(dfa.n_states):
        for guard, dst in dfa.edges[src]:
            text = print_bool(guard).replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  q{src} -> q{dst} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(dfa: Dfa) -> str:
    """Stable JSON description of the automaton."""
    payload = {
        "props": list(dfa.props),
        "states": dfa.n_states,
        "initial": dfa.initial,
        "accepting": sorted(dfa.accepting),
        "edges": [[src, print_bool(guard), dst]
                  for src in range(dfa.n_states)
                  for guard, dst in dfa.edges[src]],
    }
    return json.dumps(payload, indent=2) + "\n"


def verify_partition(dfa: Dfa, samples: int = 10_000, seed: int = 0) -> None:
    """Check that each state's guards partition the label space.

    Exhaustive up to 12 declared propositions, sampled beyond. Raises
    AssertionError on the first violation.
    """
    if len(dfa.props) <= 12:
        labels = [frozenset(c) for r in range(len(dfa.props) + 1)
                  for c in itertools.combinations(dfa.props, r)]
    else:
        rng = random.Random(seed)
        labels = [frozenset(p for p in dfa.props if rng.random() < 0.5)
                  for _ in range(samples)]
    for q in range(dfa.n_states):
        for label in labels:
            hits = [t for g, t in dfa.edges[q] if eval_bool(g, label)]
            assert len(hits) == 1, (
                f"state {q} has {len(hits)} edges on {sorted(label)}")
