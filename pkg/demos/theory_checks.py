"""
Smoothness of softmax cross-entropy
===================================

Hessian spectrum, gradient Lipschitz ratios and gradient descent on toy
frozen-attention problems. The 1/4 constant is reported next to the 1/2
extremum actually observed at p = (1/2, 1/2).
"""

import numpy as np

from ht_sentinel.theory import ce_hessian, gd_descent_check, make_toy_instance, theory_report

print(ce_hessian([0.5, 0.5]))
print("eigenvalues:", np.linalg.eigvalsh(ce_hessian([0.5, 0.5])))

f = gd_descent_check(make_toy_instance(seed=0), steps=1000)
for t in (0, 1, 10, 100, 1000):
    print(f"step {t:4d}: loss {f[t]:.6f}")

for claim in theory_report(probes=2000, instances=10)["claims"]:
    status = "pass" if claim["passed"] else ("reported" if not claim["asserted"] else "FAIL")
    print(f"{status:8s} {claim['claim']}: observed {claim['observed']:.6g}, bound {claim['bound']:g}")
