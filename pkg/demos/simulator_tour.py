"""A tour of the SRAM power-up simulator.

Each cell has a static imbalance, thermal noise per evaluation, a linear
temperature sensitivity and an NBTI aging rate. Aging pushes the imbalance
towards the opposite value, so aged cells drift away from their enrollment
bits.

Run with ``python demos/simulator_tour.py``; it takes a few seconds.
"""
import numpy as np

from puf_aging import streams
from puf_aging.agingmodel import (ModelConfig, StressProfile, acceleration_factor, age, calibrate, celsius,
                                  measure_p_intra, new_device, readout_set)
from puf_aging.bitcore import fractional_hamming

SEED = 11
CELLS = 2**18

# %% calibrate thermal noise so a fresh device flips about 6 % of its bits
cfg = calibrate(ModelConfig(), 0.06)
print(f"sigma_noise={cfg.sigma_noise:.6f} V")
dev = new_device(SEED, cfg, CELLS)
print(f"p_intra at 25 C: {measure_p_intra(dev, 8):.4f}")

# %% a second device shares almost nothing with the first
other = new_device(SEED + 1, cfg, CELLS)
a = readout_set(dev, cfg.reference_temperature, 1, 0)[0]
b = readout_set(other, cfg.reference_temperature, 1, 0)[0]
print(f"inter-device distance: {fractional_hamming(a, b):.4f}")

# %% reliability is best at the enrollment temperature and degrades away from it
ref = a.bits
for t_c in (-5, 15, 25, 35, 85):
    rs = readout_set(dev, celsius(t_c), 8, streams.stream_key(SEED, "tour", t_c))
    print(f"  {t_c:4d} C: flip rate vs 25 C reference {np.mean(rs.matrix() != ref):.4f}")

# %% accelerated aging: 48 h of stress at the quoted acceleration factor
stress = StressProfile(af_override=11.03)
print(f"computed AF {acceleration_factor(StressProfile()):.4f}, override {stress.effective_factor()}")
for hours in (18, 48, 108):
    aged = age(dev, hours, stress)
    post = readout_set(aged, cfg.reference_temperature, 4, streams.stream_key(SEED, "post", hours))
    print(f"  {hours:3d} h stress = {aged.effective_age / 24:5.1f} effective days, "
          f"flip rate {np.mean(post.matrix() != ref):.4f}")
