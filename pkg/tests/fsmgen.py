"""Seeded SmartFsm generators shared by the validator tests."""
from __future__ import annotations

import random
from dataclasses import replace

from fsmscg.fsm import BasicInfo, EventDecl, FunctionDecl, Param, SmartFsm, Transition, VariableDecl


def random_fsm(rng: random.Random, max_states: int = 10, max_transitions: int = 20) -> SmartFsm:
    """Arbitrary graph over declared states: self-loops, duplicates and dead ends allowed."""
    n = rng.randint(1, max_states)
    states = [f"S{i}" for i in range(n)]
    triggers = [f"f{i}" for i in range(rng.randint(1, 5))]
    transitions = [
        Transition(rng.choice(states), rng.choice(triggers), rng.choice(states))
        for _ in range(rng.randint(0, max_transitions))
    ]
    return SmartFsm(
        basic_info=BasicInfo("Random", ""),
        states=states,
        initial_state=rng.choice(states),
        functions=[FunctionDecl(t) for t in triggers],
        transitions=transitions,
    )


def valid_fsm(rng: random.Random, index: int = 0) -> SmartFsm:
    """A graph that passes every check: a ring through all states plus extra chords."""
    n = rng.randint(2, 8)
    states = [f"State{i}" for i in range(n)]
    fn_names = [f"action{i}" for i in range(rng.randint(2, 6))]
    ev_names = [f"Event{i}" for i in range(rng.randint(0, 3))]
    triples: list[tuple[str, str, str]] = []
    for i in range(n):
        triples.append((states[i], rng.choice(fn_names), states[(i + 1) % n]))
    for _ in range(rng.randint(0, 6)):
        s, t = rng.sample(states, 2)
        triple = (s, rng.choice(fn_names + ev_names), t)
        if triple not in triples:
            triples.append(triple)
    transitions = [
        Transition(
            s,
            x,
            t,
            condition=rng.choice([None, f"balance >= {rng.randint(1, 99)}"]),
            emits=rng.choice([None, tuple(rng.sample(ev_names, min(len(ev_names), 1)))]),
        )
        for s, x, t in triples
    ]
    return SmartFsm(
        basic_info=BasicInfo(f"Generated{index:02d}", f"Seeded fixture number {index}."),
        states=states,
        initial_state=states[0],
        variables=[VariableDecl("owner", "address", "Deployer."), VariableDecl("balance", "uint256")],
        functions=[FunctionDecl(f, f"Does {f}.", (Param("amount", "uint256"),) if i % 2 else ()) for i, f in enumerate(fn_names)],
        events=[EventDecl(e, (Param("who", "address"),), "") for e in ev_names],
        transitions=transitions,
    )


# One corruption per expected code. Each takes a valid FSM and returns a broken copy.


def drop_initial_state(fsm: SmartFsm) -> SmartFsm:
    return replace(fsm, initial_state="Ghost")


def dangle_target(fsm: SmartFsm) -> SmartFsm:
    t = fsm.transitions[0]
    return replace(fsm, transitions=fsm.transitions + (Transition(t.source, t.trigger, "Nowhere"),))


def undeclare_trigger(fsm: SmartFsm) -> SmartFsm:
    s0, s1 = fsm.states[0], fsm.states[1]
    return replace(fsm, transitions=fsm.transitions + (Transition(s0, "notDeclared", s1),))


def isolate_state(fsm: SmartFsm) -> SmartFsm:
    # Outgoing edge only, so the new state is unreachable but still connected.
    trig = fsm.functions[0].name
    return replace(
        fsm,
        states=fsm.states + ("Island",),
        transitions=fsm.transitions + (Transition("Island", trig, fsm.initial_state),),
    )


def add_self_loop(fsm: SmartFsm) -> SmartFsm:
    s = fsm.states[-1]
    return replace(fsm, transitions=fsm.transitions + (Transition(s, fsm.functions[0].name, s),))


def break_cycles(fsm: SmartFsm) -> SmartFsm:
    trig = fsm.functions[0].name
    chain = tuple(Transition(a, trig, b) for a, b in zip(fsm.states, fsm.states[1:]))
    return replace(fsm, transitions=chain)


CORRUPTIONS = {
    "INITIAL_STATE_UNDEFINED": drop_initial_state,
    "TARGET_UNDEFINED": dangle_target,
    "TRIGGER_UNDECLARED": undeclare_trigger,
    "UNREACHABLE_STATE": isolate_state,
    "SELF_LOOP": add_self_loop,
    "NO_CYCLE": break_cycles,
}
