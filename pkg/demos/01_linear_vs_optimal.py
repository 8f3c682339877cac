"""Canonical versus optimal linear reconstruction on a single qubit.

Draws one batch of counts from the cube measurement and reconstructs it
three ways, then compares the exact scaled MSE of each reconstruction with
the closed-form values.
"""

import numpy as np

from ioctomo import Frequencies, blue, cle, mle, platonic_povm
from ioctomo.analytic import qubit_closed_form
from ioctomo.estimators import canonical_recon, mse_matrix, optimal_recon
from ioctomo.simulate import bloch_state, sample_counts

bloch = (0.6886, 0.1137, -0.5025)
rho = bloch_state(bloch)
cube = platonic_povm("cube")

counts = sample_counts(cube.probabilities(rho), 5000, seed=1)
freqs = Frequencies.from_counts(counts)
print("counts:", counts)
for name, result in (("CLE", cle(cube, freqs)), ("BLUE (plug-in)", blue(cube, freqs)), ("MLE", mle(cube, freqs))):
    err = np.linalg.norm(result.estimate - rho) ** 2
    print(f"{name:15s} squared HS error x N = {5000 * err:.4f}")

print()
C_can = mse_matrix(cube, canonical_recon(cube), rho)
C_opt = mse_matrix(cube, optimal_recon(cube, rho), rho)
print(f"exact scaled MSE, canonical: {np.trace(C_can):.6f}  closed form {qubit_closed_form('iso_canonical', bloch, 'canonical', 'mse'):.6f}")
print(f"exact scaled MSE, optimal:   {np.trace(C_opt):.6f}  closed form {qubit_closed_form('cube', bloch, 'optimal', 'mse'):.6f}")
