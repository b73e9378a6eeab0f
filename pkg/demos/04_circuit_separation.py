"""Computing the predicate is not the same as running the process.

A log-depth XOR tree computes the HTR acceptance predicate perfectly, yet it
cannot be read as a legal token execution: its "token" would have to cross
several levels in one layer.  The canonical layered circuit needs N+1 layers
and passes the causal check.
"""
import itertools
import math

import numpy as np

from htrelay.circuit import build_canonical_circuit, check_implements_htr, evaluate_batch, load_flat_exhibit
from htrelay.instance import Family
from htrelay.sequential import ACCEPT, run_payload

# %% Canonical circuits
for N in range(1, 7):
    circ = build_canonical_circuit(2, N, Family.CHECKSUM, 0)
    cert = check_implements_htr(circ, 2, N, Family.CHECKSUM, 0)
    print(f"N={N}: depth {circ.depth}, verdict {cert.verdict}, trajectory {cert.token_trajectory}")

# %% Flat circuits agree functionally
for N in (2, 3, 4):
    flat = load_flat_exhibit(N)
    inputs = np.array(list(itertools.product([0, 1], repeat=1 + N)), dtype=np.uint8)
    agree = all(
        bool(out) == (run_payload(row, 2, N, Family.CHECKSUM, 0).outcome == ACCEPT)
        for out, row in zip(evaluate_batch(flat, inputs).all(axis=1), inputs.tolist())
    )
    report = check_implements_htr(flat, 2, N, Family.CHECKSUM, 0)
    print(f"flat N={N}: depth {flat.depth} (log bound {math.ceil(math.log2(N)) + 3}), "
          f"agrees on all inputs: {agree}, verdict {report.verdict} ({report.rule.value}, layer {report.layer})")

# %% Wider alphabets need extra layers per step for the adder
for d in (4, 8):
    circ = build_canonical_circuit(d, 3, Family.CHECKSUM, 1)
    print(f"d={d}, N=3 checksum circuit: depth {circ.depth},",
          check_implements_htr(circ, d, 3, Family.CHECKSUM, 1).verdict)
