"""Per-group AIR and BER of uplink MUSA as the group is overloaded.

N_c = 16 with 32 RF chains in total. Loading 100 K_g / N_c runs from 100%
to 400%. The genie AIR grows linearly because each added user brings its own
(nearly saturated) rate. The BER shows what the PIC rounds recover over
MMSE-SIC.
"""

from cdnoma.harness import ExperimentSpec, run
from cdnoma.scenario import default_scenario

cfg = default_scenario().replace(antennas=64, code_length=16).with_group_layout(rf_chains=32)
users = (16, 32, 48, 64)
common = dict(eb_db=(30.0,), users=users, symbols=1000, trials=2, seed=2)

ber = run(ExperimentSpec(cfg, ("musa-sic", "musa-pic:1", "musa-pic"), **common))
air = run(ExperimentSpec(cfg, ("musa-pic",), metrics=("air",), **common))

print("loading  " + "".join(f"{r:>12s}" for r in ("musa-sic", "musa-pic:1", "musa-pic")) + "   AIR/group")
for load in sorted({r.sweep for r in ber}):
    row = {r.receiver: r.mean for r in ber if r.sweep == load}
    grp = next(r.mean for r in air if r.sweep == load and r.metric == "air_group")
    print(f"{load:6.0f}%  " + "".join(f"{row[n]:12.2e}" for n in ("musa-sic", "musa-pic:1", "musa-pic")) + f"{grp:12.3f}")
