"""Planning a response length for recycled-device detection.

A fresh device's ASR bits flip with probability ``p_intra`` when re-read; an
aged device's flip with ``p_inter``. Both Hamming distances are binomial, so
the false-accept and false-reject rates of a threshold test follow from the
two tails. This walk-through finds the shortest response meeting an equal
error rate target.

Run with ``python demos/plan_response_length.py``.
"""
import numpy as np

from puf_aging import published
from puf_aging.detection import ErrorModel, eer_search, log_error_curves, minimal_n, plan_table, table_text

# %% one error model: nine re-evaluations, 22 days of effective aging
model = ErrorModel(p_intra=0.0926, p_inter=0.1578)

# at a fixed length the best threshold balances the two error rates
op = eer_search(model, 974)
print(f"n=974: n_th={op.n_th}  FAR={op.far:.2e}  FRR={op.frr:.2e}")
print(f"distances >= {op.n_eer} are flagged recycled")

# %% the whole trade-off curve at that length, in log10
log_far, log_frr = log_error_curves(model, 974)
for t in (100, 110, 119, 130, 140):
    print(f"  n_th={t:3d}  log10 FRR={log_frr[t] / np.log(10):6.2f}  log10 FAR={log_far[t] / np.log(10):6.2f}")

# %% shortest response for each target
for target in published.TARGETS:
    plan = minimal_n(model, target)
    print(f"EER <= {target:g}: n={plan.n}, n_eer={plan.n_eer}, log10 FAR={plan.log10_far:.2f}, "
          f"log10 FRR={plan.log10_frr:.2f}")

# %% more re-evaluations select more stable cells and shorten the response
models = [(f"N={n}", ErrorModel(p_i, p_x)) for n, (p_i, p_x, _) in published.TABLE1.items()]
plans = plan_table(models, published.TARGETS)
print(table_text(plans))

three = next(p for p in plans if p.label == "N=3" and p.target_eer == 1e-3)
nine = next(p for p in plans if p.label == "N=9" and p.target_eer == 1e-3)
print(f"N=3 -> N=9 at 1e-3: {three.n} -> {nine.n} bits ({1 - nine.n / three.n:.0%} shorter)")
