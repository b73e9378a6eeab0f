"""Encoding an address and walking it one block at a time.

An HTR instance is a path through a d-ary tree.  The root packs the path into
a bit string (a header bit, then one fixed-width block per level) and the
sequential executor checks the blocks in order, stopping at the first
failure.  Its cost is one predicate evaluation per level.
"""
import numpy as np

from htrelay.instance import Family, decode, encode, new_instance, random_instance
from htrelay.sequential import run_blocks, run_sequential

# %% A small binary instance
inst = new_instance(2, 3, [0, 1, 1], Family.CHECKSUM, target=0)
payload = encode(inst)
print("address", inst.address, "-> bits", "".join(map(str, payload.bits)))
print("decoded back:", decode(payload, 2, 3, Family.CHECKSUM, 0).address)

trace = run_sequential(inst)
for step in trace.steps:
    print(f"  step {step.step}: state {step.state_before} + digit {step.digit} -> {step.state_after}")
print("outcome:", trace.outcome, "after", trace.predicate_evaluations, "evaluations")

# %% Wider alphabets: d = 5 needs 3-bit blocks, leaving codes 5..7 unused
inst5 = random_instance(5, 6, Family.PARITY, seed=3)
bits = encode(inst5).bits
print("\nd=5 address", inst5.address, "payload length", len(bits))

blocks = list(inst5.address)
blocks[2] = 6
bad = run_blocks(blocks, 5, 6, Family.PARITY, inst5.target)
print("a block value of 6 at level 3 halts at step", bad.reject_step)

# %% Cost grows linearly with depth
rng = np.random.default_rng(0)
for N in (1, 4, 16, 64, 256):
    address = rng.integers(0, 2, N)
    inst = new_instance(2, N, address, Family.CHECKSUM, int(address.sum() % 2))
    print(f"N={N:4d}  evaluations={run_sequential(inst).predicate_evaluations}")
