"""Entropic quantities of a small qubit ensemble.

Compares the asymptotic quantities (Holevo information, capacity) with
their one-shot counterparts (max-information, smoothed versions) on the
ensemble {|0>, |+>} with uniform weights.
"""
import numpy as np

from oneshot_rsp.divergences import d_max, d_obs, holevo, i_max, relative_entropy, t_of_q
from oneshot_rsp.ensemble import Ensemble
from oneshot_rsp.hypothesis import d_h
from oneshot_rsp.operators import ket, projector
from oneshot_rsp.smoothing import smooth_d_max, smooth_i_max_cq

zero = projector(ket(0, 2))
plus = projector(np.array([1, 1]) / np.sqrt(2))
ens = Ensemble([zero, plus], [0.5, 0.5])

print(f"Holevo information   {holevo(ens):.6f}")
print(f"capacity T(Q)        {t_of_q(ens).value:.6f}")
print(f"max-information      {i_max(ens):.6f}")
for eps in (0.05, 0.1, 0.2, 0.4):
    print(f"  smoothed at {eps:<4}   {smooth_i_max_cq(ens, eps).value:.6f}")

rho, sigma = np.diag([0.9, 0.1]), np.eye(2) / 2
print()
print("pair diag(0.9, 0.1) against I/2")
print(f"  relative entropy   {relative_entropy(rho, sigma):.6f}")
print(f"  observational      {d_obs(rho, sigma):.6f}")
print(f"  max-divergence     {d_max(rho, sigma):.6f}")
for eps in (0.1, 0.3):
    print(f"  smoothed D_max {eps}  {smooth_d_max(rho, sigma, eps):.6f}   D_h {eps}  {d_h(rho, sigma, eps):.6f}")
