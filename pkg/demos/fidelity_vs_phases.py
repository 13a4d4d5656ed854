"""How close the discrete-phase components come to Fock states.

Prints F_0 and F_1 for a range of phase counts and the small-mu scaling of
the vacuum deficit 1 - F_0, which falls off like mu**N for N >= 3.
"""

import numpy as np

from dpqkd.fidelity import fidelity_series
from dpqkd.fockcore import SourceSpec, probabilities

mu = 0.5
print(f"mu = {mu}")
print(" N        F0                 F1           P0       P1")
for n in range(1, 13):
    src = SourceSpec(n, mu)
    p = probabilities(src)
    f0 = fidelity_series(src, 0).value
    f1 = fidelity_series(src, 1).value if n > 1 else float("nan")
    p1 = p[1] if n > 1 else 0.0
    print(f"{n:2d}  {f0:.15f}  {f1:.15f}  {p[0]:.5f}  {p1:.5f}")

# log-log slope of the deficit over small intensities
mus = np.geomspace(0.01, 0.1, 12)
print("\nsmall-mu scaling of 1 - F0")
for n in range(1, 7):
    d = [fidelity_series(SourceSpec(n, float(m)), 0).deficit for m in mus]
    slope = np.polyfit(np.log(mus), np.log(d), 1)[0]
    print(f"  N={n}: slope {slope:.3f}")
