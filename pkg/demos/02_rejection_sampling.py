"""Remote state preparation by rejection sampling.

Builds the protocol for a random qubit ensemble in both error models,
prints its cost and achieved error, and checks the closed-form output
against a Monte-Carlo run.
"""
import numpy as np

from oneshot_rsp.nets import random_ensemble
from oneshot_rsp.rsp import (
    avg_case_protocol,
    simulate_jrs_sampled,
    average_case_bracket,
    worst_case_bracket,
    worst_case_protocol,
)

ens = random_ensemble(dim=2, size=4, seed=7)
print(ens, "weights", np.round(ens.weights, 3))

for eps in (0.1, 0.3):
    avg = avg_case_protocol(ens, eps)
    worst = worst_case_protocol(ens, eps)
    print(f"eps={eps}: average case {avg.cost_bits} bits (lambda {avg.lam:.3f}, t {avg.t}, "
          f"error {avg.outcome.achieved_error:.4f})")
    print(f"         worst case   {worst.cost_bits} bits (lambda {worst.lam:.3f}, t {worst.t}, "
          f"error {worst.outcome.achieved_error:.4f})")

run = avg_case_protocol(ens, 0.3)
sampled = simulate_jrs_sampled(run.instance, 20_000, seed=1, reference=ens.states, weights=ens.weights)
print(f"sampled error over 20000 trials {sampled.achieved_error:.4f} "
      f"(exact {run.outcome.achieved_error:.4f})")

for rep in (average_case_bracket(ens, 0.3), worst_case_bracket(ens, 0.3, 0.2)):
    print(f"{rep.mode:>12}: lower {rep.lower_bits:8.3f}  achieved {rep.achieved_bits:4.0f}  "
          f"upper {rep.upper_bits:7.3f}  ok={rep.ok}")
