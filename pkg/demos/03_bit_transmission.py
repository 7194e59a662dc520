"""Sending n bits with success probability p over LOCC.

The classical baseline meets the bound m_A >= n + log2 p with equality;
random two-way protocols with shared entanglement never beat it.
"""
from oneshot_rsp.locc import baseline_protocol, check_bound, fuzz_bound, rsp_to_bits
from oneshot_rsp.ensemble import orthogonal_ensemble
from oneshot_rsp.rsp import worst_case_protocol

for n, p in ((4, 1.0), (4, 0.25), (3, 0.5)):
    rec = check_bound(baseline_protocol(n, p))
    print(f"baseline n={n} p={p}: Alice sends {rec.m_a} bits, success {rec.p:.4f}, slack {rec.slack:+.2e}")

recs = fuzz_bound(100, seed=3)
two_way = sum(r.m_b > 0 for r in recs)
print(f"100 random protocols ({two_way} two-way): smallest slack {min(r.slack for r in recs):+.3e}")

run = worst_case_protocol(orthogonal_ensemble(8), 0.5, cross_check=False)
print(f"3-bit RSP at eps=0.5 used as bit transmission: success {rsp_to_bits(run.outcome.outputs):.4f} >= 0.75")
