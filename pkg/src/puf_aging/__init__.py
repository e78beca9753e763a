"""Recycled-device detection from aging-induced SRAM PUF unreliability.

Submodules: :mod:`bitcore` (bit vectors and distances), :mod:`detection`
(binomial FAR/FRR planning), :mod:`agingmodel` (device simulator),
:mod:`asr` (aging-sensitive cell selection and enrollment), :mod:`dataio`
(file formats) and :mod:`cli`.
"""
from .agingmodel import (DeviceModel, ModelConfig, StressProfile, acceleration_factor, age, calibrate,
                         new_device, power_up, temperature_readout_set)
from .asr import EnrollmentProfile, SelectionConfig, characterize, detect_device, enroll, select_asrs
from .bitcore import (ReadoutSet, ResponseVector, Role, estimate_p, fractional_hamming, hamming_distance,
                      inter_a_distance, intra_a_distance)
from .detection import DetectionPlan, ErrorModel, OperatingPoint, classify, eer_search, far, frr, minimal_n, plan_table

__version__ = "0.1.0"
