"""
Decay and dephasing
===================

Rydberg decay and dephasing at (1, 4, 30) kHz. Longer gates accumulate more
error, so the fidelity thresholds translate into maximal gate times.
"""

from rydberg_ncgc import decoherence_scan

rep = decoherence_scan()
print(" T/ns   uniform    average")
for t, u, a in zip(rep.grid(), rep.values("uniform"), rep.values("average")):
    print(f"{t:5.0f}  {u:.6f}  {a:.6f}")

for name, c in rep.summary["crossings_ns"].items():
    print(f"{name:8} F=0.99 at {c['0.99']:.0f} ns, F=0.999 at {c['0.999']:.0f} ns")

###############################################################################
# The textbook factor of one half in the dissipator halves the effective rates.

half = decoherence_scan(convention="standard")
print("half convention:", half.summary["crossings_ns"]["uniform"])
