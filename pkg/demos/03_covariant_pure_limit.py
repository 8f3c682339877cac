"""How slowly the covariant BLUE reaches its pure-state MSE.

For a rank-one limit the scaled MSE tends to 2(d-1), but two of the Fisher
eigenvalues grow only logarithmically in 1/(1-s), so the excess fades like
1/ln(1/(1-s)).
"""

import math

from ioctomo.analytic import covariant_blue_figures

for d in (2, 3, 4):
    print(f"d={d}, target 2(d-1) = {2 * (d - 1)}")
    for k in (2, 4, 8, 12):
        s = 1 - 10.0 ** -k
        mse = covariant_blue_figures(d, 1, s)["mse"]
        print(f"   1-s=1e-{k:<2d}  mse={mse:.6f}  excess={mse / (2 * (d - 1)) - 1:+.3%}  "
              f"excess*ln(d/(1-s))={(mse - 2 * (d - 1)) * math.log(d / (1 - s)):.3f}")
