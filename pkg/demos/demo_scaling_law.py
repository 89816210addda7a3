"""Energy growth in balls and the log-log exponent fit."""

import numpy as np

from nlphase import BallWindow, Direction, build_domain, build_weights
from nlphase.cli import fit_exponent
from nlphase.minimize import Constraints, SolveOptions, minimize_strip
from nlphase.model import KernelSpec, PotentialSpec

tau, s, eps = 1.0, 0.25, 1.0 / 32.0
kernel = KernelSpec(dim=2, s=s, tau=tau, family="modulated")
potential = PotentialSpec(family="quartic", tau=tau, Q_modulation=True)
domain = build_domain(tau, Direction((0, 1), tau), M=24.0, h=0.125,
                      buffer=4.0)
weights = build_weights(kernel, domain, 17.6)
result = minimize_strip(kernel, potential, domain, Constraints(0.9),
                        weights=weights,
                        options=SolveOptions(max_iters=30000, epsilon=eps))

u = result.field.values
ip, it = np.unravel_index(int(np.argmin(np.abs(u))), u.shape)
center = ((ip + 0.5) * domain.h, domain.t_lo + (it + 0.5) * domain.h)

pairs = []
print("R      interior energy (kinetic_in + potential)")
for R in (2.0, 3.0, 4.0, 5.0, 6.0, 8.0):
    rep = weights.window_report(result.field, BallWindow(center, R),
                                potential, eps)
    pairs.append((R, rep.kinetic_in + rep.potential))
    print(f"{R:<7g}{pairs[-1][1]:.6f}")

exponent, constant, residual = fit_exponent(pairs)
print(f"\nfitted exponent {exponent:.3f} (strongly nonlocal target "
      f"{2 - 2 * s:g}), residual {residual:.3f}")
