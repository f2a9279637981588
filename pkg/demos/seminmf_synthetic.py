"""Semi-NMF with unit columns confined to a spherical cap.

Generates X = W* H* whose basis columns lie within eps/2 of each other,
then fits a rank-3 factorization whose columns must stay within eps.

    python3 demos/seminmf_synthetic.py
"""

import math

import numpy as np

from kleinopt import SemiNmfConfig, fit, spread
from kleinopt.seminmf import synthetic_problem

eps = math.pi / 4
X, W_true, H_true = synthetic_problem(10, 50, 3, eps, seed=2)
print(f"ground truth spread {spread(W_true):.4f} (bound {eps:.4f})")

history = []
fac, trace = fit(X, SemiNmfConfig(k=3, eps=eps, i_max=500, seed=2),
                 callback=lambda i, W, H: history.append((i, spread(W))))

rel = np.linalg.norm(X - fac.W @ fac.H) / np.linalg.norm(X)
print(f"relative fit {rel:.3e} after {len(trace) - 1} iterations, spread {fac.spread:.4f}")
print(f"accepted iterates: {len(history)}, widest spread seen {max(s for _, s in history):.4f}")

steps = {}
for rec in trace[1:]:
    steps[rec.step_type] = steps.get(rec.step_type, 0) + 1
print("step types:", ", ".join(f"{k}={v}" for k, v in sorted(steps.items())))
