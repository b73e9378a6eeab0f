"""How much a level can know, and how fast it can learn it.

Every boundary carries at most C bits per tick, so after T ticks a level can
hold at most T*C bits about the address.  Exact mutual information (computed
by enumerating every address) shows the leaf's knowledge filling up one block
per tick, hitting the budget exactly at completion.
"""
import numpy as np

from htrelay.causal import Action, CapacityMode, canonical_schedule, run_schedule
from htrelay.infoflow import (
    audit_run,
    cutset_budget,
    fano_residual,
    message_entropy,
    mutual_information_table,
    time_lower_bound,
)
from htrelay.instance import Family, new_instance

d, N = 2, 4
np.set_printoptions(precision=3, suppress=True)

# %% Canonical schedule: rows are ticks, columns are levels 0..N
table = mutual_information_table(d, N, Family.CHECKSUM, 0, canonical_schedule(N))
print("I(M; level view) under the canonical schedule")
print(table)
print("budget per tick:", [cutset_budget(T, d) for T in range(N + 1)])

# %% A lazy schedule spends budget it never uses
lazy = [Action.NOOP, Action.HOP, Action.NOOP, Action.HOP, Action.HOP, Action.HOP]
print("\nlazy schedule", [a.value for a in lazy])
print(mutual_information_table(d, N, Family.CHECKSUM, 0, lazy))

# %% Auditing one run's ledger
inst = new_instance(d, N, [1, 0, 0, 1], Family.CHECKSUM, 0)
print("\naudit:", audit_run(run_schedule(inst, canonical_schedule(N))).to_dict()["status"])
bad = run_schedule(inst, ["HOP", "OVERSEND"], unsafe=True)
print("oversend audit:", [v["rule"] for v in audit_run(bad).violations])

# %% Allowing errors buys time, but slowly
print("\nH(M) =", message_entropy(2, 16), "bits for d=2, N=16")
for P_e in (0.0, 0.01, 0.1, 0.5):
    print(f"P_e={P_e:<5}  fano={fano_residual(P_e, 2 ** 16):6.3f}  T_lower={time_lower_bound(2, 16, P_e)}")
print("FULL mode capacity for d=4:", cutset_budget(1, 4, CapacityMode.FULL), "bits/tick")
