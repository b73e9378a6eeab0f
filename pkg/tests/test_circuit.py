import itertools

import numpy as np
import pytest

from htrelay.causal import CapacityMode, Rule
from htrelay.circuit import (
    AnnotationMissing,
    CausalCertificate,
    Gate,
    LayeredCircuit,
    Op,
    ViolationReport,
    WireError,
    build_canonical_circuit,
    build_flat_circuit,
    check_implements_htr,
    circuit_accepts,
    evaluate_batch,
    evaluate_circuit,
    load_flat_exhibit,
    strip_annotations,
    validate_circuit,
)
from htrelay.instance import Family, encode, new_instance
from htrelay.sequential import ACCEPT, run_payload


def all_payloads(n):
    return [list(bits) for bits in itertools.product([0, 1], repeat=n)]


def test_const_circuit():
    c = LayeredCircuit(layers=[[Gate(Op.CONST, value=1)]], outputs=[0])
    assert evaluate_circuit(c, []) == [1]


def test_not_input():
    c = LayeredCircuit(layers=[[Gate(Op.INPUT, input_bit=0)], [Gate(Op.NOT, inputs=(0,))]], outputs=[0])
    assert evaluate_circuit(c, [1]) == [0]


def test_dangling_wire_rejected():
    c = LayeredCircuit(layers=[[Gate(Op.INPUT, input_bit=0)], [Gate(Op.AND, inputs=(0, 1))]], outputs=[0])
    with pytest.raises(WireError):
        validate_circuit(c, 1)


def test_fan_in_limit():
    c = LayeredCircuit(layers=[[Gate(Op.INPUT, input_bit=0)], [Gate(Op.AND, inputs=(0, 0, 0))]], outputs=[0])
    with pytest.raises(WireError):
        validate_circuit(c, 1)


def test_canonical_small_example():
    c = build_canonical_circuit(2, 3, Family.CHECKSUM, 0)
    assert c.depth == 4
    assert circuit_accepts(c, encode(new_instance(2, 3, [0, 1, 1], Family.CHECKSUM, 0)).bits) == 1


def test_parity_single_step_truth_table():
    c = build_canonical_circuit(2, 1, Family.PARITY, 1)
    assert c.depth == 2
    for bits in all_payloads(2):
        expected = int(run_payload(bits, 2, 1, Family.PARITY, 1).outcome == ACCEPT)
        assert circuit_accepts(c, bits) == expected


@pytest.mark.parametrize("d", [2, 4, 8])
@pytest.mark.parametrize("N", [1, 2, 3])
@pytest.mark.parametrize("family", list(Family))
def test_canonical_agrees_everywhere(d, N, family):
    w = (d - 1).bit_length()
    targets = range(d) if family is Family.CHECKSUM else (0, 1)
    inputs = np.array(all_payloads(1 + N * w), dtype=np.uint8)
    for target in targets:
        c = build_canonical_circuit(d, N, family, target)
        got = evaluate_batch(c, inputs).all(axis=1)
        want = [run_payload(row, d, N, family, target).outcome == ACCEPT for row in inputs.tolist()]
        assert got.tolist() == want


@pytest.mark.parametrize("N", range(1, 7))
def test_canonical_depth_binary(N):
    assert build_canonical_circuit(2, N, Family.CHECKSUM, 0).depth == N + 1


def test_canonical_certificate():
    cert = check_implements_htr(build_canonical_circuit(2, 3, Family.CHECKSUM, 0), 2, 3, Family.CHECKSUM, 0)
    assert isinstance(cert, CausalCertificate)
    assert cert.token_trajectory == [0, 1, 2, 3]
    assert all(b <= 1 for _, _, b in cert.crossings)


@pytest.mark.parametrize("d,family", [(4, Family.CHECKSUM), (4, Family.PARITY), (8, Family.CHECKSUM)])
@pytest.mark.parametrize("mode", list(CapacityMode))
def test_wider_alphabets_certified(d, family, mode):
    cert = check_implements_htr(build_canonical_circuit(d, 3, family, 1), d, 3, family, 1, mode)
    assert isinstance(cert, CausalCertificate)


def test_flat_circuit_refuted():
    c = build_flat_circuit(2, 3, Family.CHECKSUM, 0)
    report = check_implements_htr(c, 2, 3, Family.CHECKSUM, 0)
    assert isinstance(report, ViolationReport)
    assert report.rule in (Rule.MULTI_HOP_PER_TICK, Rule.NONLOCAL_DEPENDENCE)


def test_stripped_annotations():
    c = strip_annotations(build_canonical_circuit(2, 3, Family.CHECKSUM, 0))
    with pytest.raises(AnnotationMissing):
        check_implements_htr(c, 2, 3, Family.CHECKSUM, 0)


def test_wrong_function_is_mismatch():
    c = build_canonical_circuit(2, 3, Family.CHECKSUM, 1)
    report = check_implements_htr(c, 2, 3, Family.CHECKSUM, 0)
    assert report.rule is Rule.FUNCTIONAL_MISMATCH


def test_duplicated_token_detected():
    c = build_canonical_circuit(2, 2, Family.CHECKSUM, 0)
    layers = [list(layer) for layer in c.layers]
    # give a second gate in layer 1 a different token level
    token = [i for i, g in enumerate(layers[1]) if g.token_level is not None][0]
    g = layers[1][token]
    layers[1].append(Gate(Op.COPY, inputs=tuple(g.inputs[:1]), token_level=2))
    forged = LayeredCircuit(layers=layers, outputs=c.outputs, meta=c.meta)
    report = check_implements_htr(forged, 2, 2, Family.CHECKSUM, 0)
    assert report.rule is Rule.TOKEN_DUPLICATION


def test_bundled_exhibits_load():
    for N in (2, 3, 4):
        c = load_flat_exhibit(N)
        assert c.to_dict() == build_flat_circuit(2, N, Family.CHECKSUM, 0).to_dict()


def test_json_round_trip():
    c = build_canonical_circuit(4, 2, Family.PARITY, 1)
    assert LayeredCircuit.from_dict(c.to_dict()).to_dict() == c.to_dict()


def test_sampled_functional_check():
    # d**N beyond the exhaustive cap forces the sampled path
    c = build_canonical_circuit(2, 13, Family.CHECKSUM, 1)
    cert = check_implements_htr(c, 2, 13, Family.CHECKSUM, 1, samples=2000, seed=5)
    assert isinstance(cert, CausalCertificate)
    assert cert.depth == 14
