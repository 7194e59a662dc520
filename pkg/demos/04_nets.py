"""Replacing a large ensemble by a finite net.

Clustered Haar states collapse onto a few net points; protocols built
for the net are transferred back to the source ensemble.
"""
import numpy as np

from oneshot_rsp.ensemble import Ensemble
from oneshot_rsp.nets import Direction, build_net, coverage_radius, transfer_brackets
from oneshot_rsp.operators import random_unitary

rng = np.random.default_rng(5)
centers = [random_unitary(2, rng)[:, 0] for _ in range(3)]
states = []
for c in centers:
    for _ in range(4):
        v = c + 0.03 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
        v /= np.linalg.norm(v)
        states.append(np.outer(v, v.conj()))
ens = Ensemble(states, rng.dirichlet(np.ones(len(states))))

net = build_net(ens, 0.1)
print(f"{len(ens)} states -> {len(net)} net points, coverage radius {coverage_radius(ens, net):.4f}")
print("induced weights", np.round(net.induced_weights, 3))
for direction in Direction:
    rec = transfer_brackets(ens, 0.3, 0.1, direction)
    print(direction.value, {k: round(v, 4) for k, v in rec.composed_errors.items()},
          "costs", rec.left_cost, rec.right_cost, "ok" if rec.ok else "FAILED")
