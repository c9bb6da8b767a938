"""
Finite blockade strength
========================

With the doubly excited level kept, fidelity depends on V. Halving the
gate time helps the geometric gate because its Rabi frequency stays fixed,
whereas the phase-modulated gate must double its drive.
"""

from rydberg_ncgc import blockade_sweep, mhz

rep = blockade_sweep(v_grid=[mhz(v) for v in (100, 200, 300, 400, 600, 1000)])
names = list(rep.series)
print("V/2pi MHz  " + "  ".join(f"{n:>10}" for n in names))
for i, v in enumerate(rep.grid()):
    print(f"{v:9.0f}  " + "  ".join(f"{rep.values(n)[i]:10.6f}" for n in names))
