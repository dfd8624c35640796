"""Formula-to-DFA compilation, checked against the trace oracle."""

import json
import random

import pytest

from conftest import (LOGIC_PROPS as PROPS, all_labels, all_traces,
                      random_formula)
from rdpgrid.automata import (Dfa, analyze, compile as compile_dfa,
                              dfa_accepts, dfa_step, to_dot, to_json,
                              verify_partition)
from rdpgrid.errors import ResourceLimit, UnknownProposition
from rdpgrid.logic import eval_trace, parse_ldlf, props_of


def liveness():
    return compile_dfa(parse_ldlf("<true*; c; true*>end"), PROPS)


def safety():
    return compile_dfa(parse_ldlf("[true*]<c*>end"), PROPS)


# ------------------------------------------------------------ fixed shapes

def test_tt_compiles_to_single_accepting_state():
    dfa = compile_dfa(parse_ldlf("tt"), PROPS)
    assert dfa.n_states == 1
    assert dfa.accepting == frozenset({0})


def test_ff_compiles_to_single_rejecting_state():
    dfa = compile_dfa(parse_ldlf("ff"), PROPS)
    assert dfa.n_states == 1
    assert dfa.accepting == frozenset()


def test_end_accepts_exactly_the_empty_trace():
    dfa = compile_dfa(parse_ldlf("end"), PROPS)
    assert dfa.n_states == 2
    assert dfa.initial in dfa.accepting
    assert dfa_accepts(dfa, [])
    assert not dfa_accepts(dfa, [frozenset()])
    assert not dfa_accepts(dfa, [frozenset({"c"}), frozenset()])


def test_liveness_shape_and_runs():
    dfa = liveness()
    assert dfa.n_states == 2
    assert dfa.initial not in dfa.accepting
    assert dfa_step(dfa, dfa.initial, {"c"}) in dfa.accepting
    assert dfa_step(dfa, dfa.initial, set()) == dfa.initial
    assert dfa_accepts(dfa, [frozenset(), frozenset({"c"})])
    assert not dfa_accepts(dfa, [])


def test_safety_shape_and_runs():
    dfa = safety()
    assert dfa.n_states == 2
    assert dfa.initial in dfa.accepting
    sink = dfa_step(dfa, dfa.initial, set())
    assert sink != dfa.initial
    assert dfa_step(dfa, sink, {"c"}) == sink
    assert dfa_accepts(dfa, [frozenset({"c"}), frozenset({"c"})])
    assert not dfa_accepts(dfa, [frozenset({"c"}), frozenset({"a"})])


def test_one_state_dfa_steps_to_itself():
    dfa = compile_dfa(parse_ldlf("tt"), PROPS)
    for lab in all_labels(PROPS):
        assert dfa_step(dfa, 0, lab) == 0


# -------------------------------------------------------------- analysis

def test_liveness_distances():
    dfa = liveness()
    analysis = analyze(dfa)
    assert analysis.distance[dfa.initial] == 1
    accepting = next(iter(dfa.accepting))
    assert analysis.distance[accepting] == 0
    assert analysis.dead == frozenset()


def test_safety_distances_mark_the_sink_dead():
    dfa = safety()
    analysis = analyze(dfa)
    sink = dfa_step(dfa, dfa.initial, set())
    assert analysis.distance[dfa.initial] == 0
    assert analysis.distance[sink] == float("inf")
    assert analysis.dead == frozenset({sink})


def test_trivial_accepting_dfa_distance():
    analysis = analyze(compile_dfa(parse_ldlf("tt"), PROPS))
    assert analysis.distance == (0,)
    assert analysis.dead == frozenset()


def test_safety_dead_states_are_closed_under_stepping():
    for text in ("[true*]<c*>end", "[true*]<(a & b)*>end",
                 "[true*]<(!(a & c))*>end", "[true*]<(!a | b)*>end"):
        dfa = compile_dfa(parse_ldlf(text), PROPS)
        dead = analyze(dfa).dead
        for q in dead:
            for lab in all_labels(PROPS):
                assert dfa_step(dfa, q, lab) in dead


# --------------------------------------------------- oracle equivalence

ORACLE_SHAPES = [
    "tt", "ff", "end", "<a>tt", "[a]ff", "<a & !b>end",
    "<true*; c; true*>end", "[true*]<c*>end", "<true*>end",
    "<a; b>end", "<a + b>tt", "<(a; b)*>end", "[(a + b)*]<c>tt",
    "<(<b>tt)?; a>tt", "[a*](<b>tt | end)", "!(<true*; c; true*>end)",
    "<true*; a & b; true*; b & c; true*>end",
]


@pytest.mark.parametrize("text", ORACLE_SHAPES)
def test_compiled_dfa_agrees_with_trace_oracle(text):
    f = parse_ldlf(text)
    dfa = compile_dfa(f, PROPS)
    for trace in all_traces(PROPS, 3):
        assert dfa_accepts(dfa, trace) == eval_trace(f, trace), (text, trace)


def test_random_formulas_agree_with_trace_oracle():
    rng = random.Random(7)
    for _ in range(60):
        f = parse_ldlf(random_formula(rng, 4))
        dfa = compile_dfa(f, PROPS)
        for trace in all_traces(PROPS, 3):
            assert dfa_accepts(dfa, trace) == eval_trace(f, trace), (f, trace)


# ------------------------------------------------ structural invariants

def distinguishable_classes(dfa):
    """Independent Moore refinement over the full declared alphabet."""
    labels = all_labels(dfa.props)
    block = [1 if q in dfa.accepting else 0 for q in range(dfa.n_states)]
    while True:
        sigs = [(block[q],) + tuple(block[dfa_step(dfa, q, lab)] for lab in labels)
                for q in range(dfa.n_states)]
        ids = {}
        new = [ids.setdefault(sig, len(ids)) for sig in sigs]
        if len(set(new)) == len(set(block)):
            return len(ids)
        block = new


@pytest.mark.parametrize("text", ORACLE_SHAPES)
def test_compiled_dfas_are_minimal_and_complete(text):
    dfa = compile_dfa(parse_ldlf(text), PROPS)
    assert distinguishable_classes(dfa) == dfa.n_states
    verify_partition(dfa)


def test_guards_mention_only_occurring_props():
    declared = ("a", "b", "c", "d", "e", "f")
    dfa = compile_dfa(parse_ldlf("<true*; c; true*>end"), declared)
    assert dfa.props == declared
    for edges in dfa.edges:
        for guard, _ in edges:
            assert props_of(guard) <= {"c"}
    verify_partition(dfa)


def test_compile_is_deterministic():
    f = parse_ldlf("<true*; a & b; true*; b & c; true*>end")
    assert compile_dfa(f, PROPS) == compile_dfa(f, PROPS)
    assert to_dot(compile_dfa(f, PROPS)) == to_dot(compile_dfa(f, PROPS))


# ------------------------------------------------------------- plumbing

def test_compile_rejects_undeclared_props():
    with pytest.raises(UnknownProposition):
        compile_dfa(parse_ldlf("<d>tt"), PROPS)


def test_compile_enforces_the_state_budget():
    with pytest.raises(ResourceLimit):
        compile_dfa(parse_ldlf("<true*; c; true*>end"), PROPS, max_states=1)


def test_dot_output_for_trivial_accepting_dfa():
    text = to_dot(compile_dfa(parse_ldlf("tt"), PROPS))
    assert "doublecircle" in text
    assert 'q0 -> q0 [label="true"]' in text


def test_dot_output_for_safety_dfa_has_two_nodes_three_edges():
    text = to_dot(safety())
    arrows = [line for line in text.splitlines()
              if "->" in line and "__start" not in line]
    assert len(arrows) == 3
    assert sum(1 for line in text.splitlines() if "doublecircle" in line) == 1


def test_json_dump_is_stable_and_complete():
    dfa = liveness()
    payload = json.loads(to_json(dfa))
    assert set(payload) == {"props", "states", "initial", "accepting", "edges"}
    assert payload["states"] == 2
    assert payload["initial"] == 0
    assert payload["accepting"] == sorted(dfa.accepting)
    assert all(isinstance(src, int) and isinstance(guard, str) and isinstance(dst, int)
               for src, guard, dst in payload["edges"])
    assert to_json(dfa) == to_json(liveness())


def test_dfa_equality_is_structural():
    assert liveness() == liveness()
    assert liveness() != safety()
