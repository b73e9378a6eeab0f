"""Acceptance suite: one test per criterion, each at its stated scale and tolerance."""
import itertools
import math
import time

import numpy as np
import pytest

from htrelay import sequential
from htrelay.causal import (
    Action,
    CapacityMode,
    ConstraintViolation,
    Rule,
    apply_tick,
    canonical_schedule,
    init_world,
    min_causal_time,
    run_schedule,
)
from htrelay.circuit import (
    CausalCertificate,
    ViolationReport,
    build_canonical_circuit,
    check_implements_htr,
    evaluate_batch,
    load_flat_exhibit,
)
from htrelay.infoflow import (
    exact_mutual_information,
    fano_residual,
    message_entropy,
    min_capacity,
    mutual_information_table,
    time_lower_bound,
    time_lower_bound_real,
)
from htrelay.instance import (
    BadHeader,
    BadLength,
    DigitOutOfRange,
    Family,
    decode,
    encode,
    new_instance,
    random_instance,
)
from htrelay.sequential import ACCEPT, run_blocks, run_payload, run_sequential
from invariants import trajectory_problems

CHECKSUM = Family.CHECKSUM


@pytest.mark.criterion(1, "sequential linearity: exactly N (or k) predicate evaluations")
def test_sequential_linearity(monkeypatch):
    calls = [0]
    original = sequential.eval_predicate

    def counting(*args):
        calls[0] += 1
        return original(*args)

    monkeypatch.setattr(sequential, "eval_predicate", counting)
    start = time.perf_counter()
    for N in range(1, 11):
        for address in itertools.product(range(2), repeat=N):
            target = sum(address) % 2
            calls[0] = 0
            trace = run_sequential(new_instance(2, N, address, CHECKSUM, target))
            assert trace.outcome == ACCEPT
            assert calls[0] == N == trace.predicate_evaluations
            # the other target rejects at the final step
            calls[0] = 0
            trace = run_sequential(new_instance(2, N, address, CHECKSUM, 1 - target))
            assert trace.reject_step == N
            assert calls[0] == N
        # with d = 2 every block is valid, so earlier rejections need an
        # unused block code; the 2-bit blocks of d = 3 supply one
        for k in range(1, N + 1):
            blocks = [0] * N
            blocks[k - 1] = 3
            calls[0] = 0
            trace = run_blocks(blocks, 3, N, CHECKSUM, 0)
            assert trace.reject_step == k
            assert calls[0] == k
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion(2, "causal lower bound: min causal time is exactly N")
def test_causal_lower_bound_exhaustive():
    start = time.perf_counter()
    for N in range(1, 5):
        accepting = 0
        for address in itertools.product(range(2), repeat=N):
            for target in (0, 1):
                inst = new_instance(2, N, address, CHECKSUM, target)
                best = min_causal_time(inst, N + 2)
                if run_sequential(inst).outcome == ACCEPT:
                    accepting += 1
                    assert best == N
                else:
                    assert best is None
                # independent sweep: no schedule gets the token to the leaf early
                for sched in itertools.product([Action.NOOP, Action.HOP], repeat=N + 2):
                    world = init_world(inst)
                    for action in sched:
                        if world.token_level == N:
                            break
                        world = apply_tick(world, action, inst)
                    if world.token_level == N:
                        assert world.tick >= N
        assert accepting == 2 ** N
    assert time.perf_counter() - start < 30.0


@pytest.mark.criterion(3, "cut-set inequality over all short schedules")
def test_cutset_inequality():
    # Schedules with more than N hops are illegal; every legal prefix of one
    # is also a prefix of a length-6 schedule with at most N hops, so those
    # cover every (schedule, T <= 6) pair.  Level 0 is the root, which holds
    # the address before any tick; the bound concerns levels fed through a cut.
    start = time.perf_counter()
    checked = 0
    for N in range(1, 5):
        C = min_capacity(2, CapacityMode.ROUTING_ONLY)
        for sched in itertools.product([Action.HOP, Action.NOOP], repeat=6):
            if sched.count(Action.HOP) > N:
                continue
            for target in (0, 1):
                table = mutual_information_table(2, N, CHECKSUM, target, sched, CapacityMode.ROUTING_ONLY)
                for T in range(7):
                    for level in range(1, N + 1):
                        checked += 1
                        assert table[T, level] <= T * C, (N, sched, T, level)
    # the table agrees with the single-point routine
    sched = (Action.NOOP, Action.HOP, Action.HOP, Action.NOOP, Action.HOP, Action.HOP)
    table = mutual_information_table(2, 4, CHECKSUM, 0, sched)
    for T in range(7):
        for level in range(5):
            assert table[T, level] == exact_mutual_information(2, 4, CHECKSUM, 0, sched, level, T)
    assert checked > 0
    assert time.perf_counter() - start < 60.0


@pytest.mark.criterion(4, "tightness at completion: N bits at the leaf after N ticks")
def test_tightness_at_completion():
    for N in (2, 3, 4):
        for target in (0, 1):
            value = exact_mutual_information(2, N, CHECKSUM, target, canonical_schedule(N), N, N,
                                             CapacityMode.ROUTING_ONLY)
            assert value == float(N)


def _reference_fano(P_e, size):
    h = 0.0 if P_e in (0.0, 1.0) else -P_e * math.log2(P_e) - (1 - P_e) * math.log2(1 - P_e)
    return h + P_e * math.log2(size - 1)


@pytest.mark.criterion(5, "Fano time bound: equals N at zero error, cross-checked at P_e = 0.01")
def test_fano_time_bound():
    scipy_stats = pytest.importorskip("scipy.stats")
    for d in (2, 4, 8, 16):
        for N in range(1, 17):
            assert time_lower_bound(d, N, 0, CapacityMode.ROUTING_ONLY) == N
    d, N, P_e = 2, 16, 0.01
    H = N * math.log2(d)
    fano = scipy_stats.entropy([P_e, 1 - P_e], base=2) + P_e * math.log2(d ** N - 1)
    assert abs(fano - _reference_fano(P_e, d ** N)) < 1e-12
    assert abs(fano_residual(P_e, d ** N) - fano) < 1e-9
    expected = N * (1 - fano / H)
    assert abs(time_lower_bound_real(d, N, P_e, CapacityMode.ROUTING_ONLY) - expected) < 1e-9
    assert abs(time_lower_bound(d, N, P_e, CapacityMode.ROUTING_ONLY) - expected) <= 1
    assert message_entropy(d, N) == H


@pytest.mark.criterion(6, "circuit separation: depth N+1 certified, flat exhibits refuted")
def test_circuit_separation():
    start = time.perf_counter()
    for N in range(1, 7):
        circ = build_canonical_circuit(2, N, CHECKSUM, 0)
        cert = check_implements_htr(circ, 2, N, CHECKSUM, 0)
        assert isinstance(cert, CausalCertificate)
        assert cert.depth == circ.depth == N + 1
    for N in (2, 3, 4):
        flat = load_flat_exhibit(N, 0)
        assert flat.depth <= math.ceil(math.log2(N)) + 3
        inputs = np.array(list(itertools.product([0, 1], repeat=1 + N)), dtype=np.uint8)
        got = evaluate_batch(flat, inputs).all(axis=1).tolist()
        want = [run_payload(row, 2, N, CHECKSUM, 0).outcome == ACCEPT for row in inputs.tolist()]
        assert got == want
        report = check_implements_htr(flat, 2, N, CHECKSUM, 0)
        assert isinstance(report, ViolationReport)
        assert report.rule is not Rule.FUNCTIONAL_MISMATCH
    assert time.perf_counter() - start < 10.0


INJECTED = {
    Action.DUPLICATE: Rule.TOKEN_DUPLICATION,
    Action.DOUBLE_HOP: Rule.MULTI_HOP_PER_TICK,
    Action.LEAK: Rule.BYPASS_BOUNDARY,
    Action.OVERSEND: Rule.CAPACITY_EXCEEDED,
    "AFTER_HALT": Rule.ACTION_AFTER_HALT,
    "HOP_PAST_LEAF": Rule.BYPASS_BOUNDARY,
}


def _inject(rng, inst, prefix_len):
    """A legal prefix followed by one illegal step; returns (schedule, expected rule, class)."""
    N = inst.N
    sched, level = [], 0
    for _ in range(prefix_len):
        if level < N and rng.random() < 0.6:
            sched.append(Action.HOP)
            level += 1
        else:
            sched.append(Action.NOOP)
    choices = [Action.DUPLICATE, "AFTER_HALT"]
    if level <= N - 2:
        choices.append(Action.DOUBLE_HOP)
    if level < N:
        choices += [Action.LEAK, Action.OVERSEND]
    else:
        choices.append("HOP_PAST_LEAF")
    kind = choices[rng.integers(len(choices))]
    if kind == "AFTER_HALT":
        sched += [Action.HALT, [Action.HOP, Action.NOOP][rng.integers(2)]]
    elif kind == "HOP_PAST_LEAF":
        sched.append(Action.HOP)
    else:
        sched.append(kind)
    return sched, INJECTED[kind], kind


@pytest.mark.criterion(7, "constraint enforcement under 10^5 fuzzed schedules")
def test_constraint_fuzz():
    rng = np.random.default_rng(2024)
    total, legal_runs = 100_000, 0
    detected = {k: 0 for k in INJECTED}
    injected = {k: 0 for k in INJECTED}
    instances = [random_instance(int(d), int(N), fam, s)
                 for s, (d, N, fam) in enumerate(itertools.product([2, 3, 4, 5, 8], range(1, 7), list(Family)))]
    for k in range(total):
        inst = instances[k % len(instances)]
        mode = (CapacityMode.ROUTING_ONLY, CapacityMode.FULL)[k % 2]
        if k % 2 == 0:
            # legal trajectory: HOP/NOOP only, stops hopping at the leaf
            length = int(rng.integers(0, inst.N + 4))
            worlds = [init_world(inst)]
            for _ in range(length):
                action = Action.HOP if rng.random() < 0.5 else Action.NOOP
                if worlds[-1].token_level == inst.N:
                    action = Action.NOOP
                worlds.append(apply_tick(worlds[-1], action, inst, mode))
            assert trajectory_problems(inst, worlds, mode.value) == []
            legal_runs += 1
        else:
            sched, rule, kind = _inject(rng, inst, int(rng.integers(0, inst.N + 2)))
            injected[kind] += 1
            trace = run_schedule(inst, sched, mode, unsafe=True)
            if trace.violation is not None and trace.violation.rule is rule:
                detected[kind] += 1
            with pytest.raises((ConstraintViolation, ValueError)):
                run_schedule(inst, sched, mode, unsafe=False)
    assert legal_runs == total // 2
    for kind in INJECTED:
        assert injected[kind] > 0
        assert detected[kind] == injected[kind], (kind, detected[kind], injected[kind])


@pytest.mark.criterion(8, "codec round trip and mutation rejection")
def test_codec_round_trip():
    rng = np.random.default_rng(8)
    counts = {"header": 0, "truncate": 0, "block": 0}
    for k in range(10_000):
        d = int(rng.choice([2, 3, 4, 5, 8]))
        N = int(rng.integers(1, 33))
        family = (Family.CHECKSUM, Family.PARITY)[k % 2]
        inst = random_instance(d, N, family, seed=k)
        bits = list(encode(inst).bits)
        assert decode(bits, d, N, family, inst.target) == inst

        flipped = [1 - bits[0]] + bits[1:]
        with pytest.raises(BadHeader):
            decode(flipped, d, N, family, inst.target)
        counts["header"] += 1

        cut = int(rng.integers(1, len(bits) + 1))
        with pytest.raises(BadLength):
            decode(bits[:-cut], d, N, family, inst.target)
        counts["truncate"] += 1

        if d in (3, 5):
            w = inst.w
            i = int(rng.integers(N))
            bad = int(rng.integers(d, 2 ** w))
            mutated = bits[:1 + i * w] + [int(c) for c in format(bad, f"0{w}b")] + bits[1 + (i + 1) * w:]
            with pytest.raises(DigitOutOfRange) as err:
                decode(mutated, d, N, family, inst.target)
            assert err.value.index == i
            counts["block"] += 1
    assert all(v > 0 for v in counts.values())
