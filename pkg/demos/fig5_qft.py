"""
Quantum Fourier transform timing
================================

A cyclic controlled-phase gate is built from three fixed-length gates, while
a geometric gate of angle dphi only needs a fraction of the sweep. The
difference grows with register size.
"""

from rydberg_ncgc import QftConvention, QftTimingModel, qft_timing

print(" N   cyclic/us   ncgc/us (proportional)   ncgc/us (paper text)")
for n in range(2, 13):
    prop, text = (qft_timing(QftTimingModel(n, convention=c)) for c in QftConvention)
    print(f"{n:2d}  {float(prop.cyclic_total) / 1e3:9.3f}  {float(prop.ncgc_total) / 1e3:12.3f}  {float(text.ncgc_total) / 1e3:20.3f}")
