"""End to end: enroll a device, age it, and tell fresh from recycled.

Enrollment reads the SRAM nine times at 25 C and nine times at 80 C and keeps
only the cells that are stable at each temperature but disagree between the
two. Those aging-sensitive cells (ASRs) are the ones most likely to flip once
the device has been in use.

Run with ``python demos/detect_recycled.py``; it takes about ten seconds.
"""
import datetime as dt

import numpy as np

from puf_aging import streams
from puf_aging.agingmodel import StressProfile, age, new_device, readout_set
from puf_aging.asr import SelectionConfig, characterize, detect_device, enroll
from puf_aging.bitcore import Role
from puf_aging.detection import minimal_n

SEED = 2024
sel = SelectionConfig(9)
key = lambda tag: streams.stream_key(SEED, tag)  # noqa: E731

# %% the manufacturer's enrollment
dev = new_device(SEED)
rt = readout_set(dev, sel.rt, sel.n_reevals, key("pre_rt"))
ht = readout_set(dev, sel.ht, sel.n_reevals, key("pre_ht"))
holdout = readout_set(dev, sel.rt, sel.n_reevals, key("pre_rt_holdout"))
profile = enroll("demo", rt, ht, sel, holdout, created_at=dt.datetime(2024, 1, 1, tzinfo=dt.timezone.utc))
print(f"{len(profile.asrs)} ASRs out of {dev.cell_count} cells, p_intra={profile.p_intra_est:.4f}")

# %% a sacrificial sample, aged for 48 h, fixes p_inter
aged = age(dev, 48, StressProfile(af_override=11.03))
post = readout_set(aged, sel.rt, sel.n_reevals, key("post_rt"), role=Role.POST_AGING)
profile = characterize(profile, post)
print(f"p_inter={profile.p_inter_est:.4f}")

# %% plan the test from the measured rates
plan = minimal_n(profile.error_model(), 1e-3)
print(f"use the first {plan.n} ASRs; flag recycled at distance >= {plan.n_eer}")

# %% field checks: one fresh and one aged readout
for name, rs in (("fresh", holdout), ("aged", post)):
    report = detect_device(profile, rs[0], plan)
    print(f"  {name}: distance {report.distance}, verdict {report.label}")

# %% Monte-Carlo check of the error rates on fresh and aged re-reads
# p_intra comes from only nine held-out readouts, so its sampling error
# (about 0.003 here) can push the observed rates above the planned ones
addrs = profile.addresses[: plan.n]
fresh = readout_set(dev, sel.rt, 500, key("mc_fresh")).matrix()[:, addrs]
old = readout_set(aged, sel.rt, 500, key("mc_aged"), role=Role.POST_AGING).matrix()[:, addrs]
false_reject = np.mean([detect_device(profile, b, plan).recycled for b in fresh])
false_accept = np.mean([not detect_device(profile, b, plan).recycled for b in old])
print(f"fresh flagged {false_reject:.3f} (plan {plan.frr:.1e}), aged passed {false_accept:.3f} (plan {plan.far:.1e})")
