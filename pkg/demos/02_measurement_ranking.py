"""Orbit-averaged efficiency of four qubit measurements as the state gets purer.

The averaged scaled MSE orders the measurements for every Bloch length,
while the averaged MSB (Bures-weighted MSE) blows up near the boundary.
"""

from ioctomo.analytic import qubit_closed_form

measurements = ("sic", "mub", "cube", "covariant")
print(f"{'s':>8} " + " ".join(f"{m + ' mse':>14}" for m in measurements))
for s in (0.0, 0.3, 0.6, 0.9, 0.99):
    vals = [qubit_closed_form(m, (s, 0, 0), "optimal", "avg_mse") for m in measurements]
    print(f"{s:8.3f} " + " ".join(f"{v:14.6f}" for v in vals))

print()
print(f"{'1-s':>8} " + " ".join(f"{m + ' msb':>14}" for m in measurements))
for k in range(2, 7):
    s = 1 - 10.0 ** -k
    vals = [qubit_closed_form(m, (s, 0, 0), "optimal", "avg_msb") for m in measurements]
    print(f"{10.0 ** -k:8.0e} " + " ".join(f"{v:14.4g}" for v in vals))
