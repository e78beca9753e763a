"""Statistical SRAM-PUF device model with temperature response and NBTI aging.

Each cell is reduced to one signed threshold-voltage imbalance. A power-up
evaluates::

    mismatch + temp_sensitivity * (T - T_ref)
             - sign(mismatch) * accumulated_shift + noise  > 0

Aging pushes every cell away from its zero-age preference, by
``aging_rate * effective_age ** m``. Aging rates are rank-correlated with the
part of a cell's temperature sensitivity that also opposes its preference
(``aging_temp_correlation``), so heating a cell during provisioning previews
how it will age. With the correlation at zero the rates are independent
half-normal draws.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import streams
from .bitcore import ReadoutSet, ResponseVector, Role

BOLTZMANN_EV = 8.62e-5
ZERO_CELSIUS = 273.15
PUBLISHED_AF = 11.03
DEFAULT_CELL_COUNT = 262_144
# the nine characterisation corners, in Celsius
CORNERS_C = (-5, 15, 25, 35, 45, 55, 65, 75, 85)


def celsius(t_c: float) -> float:
    """Kelvin from Celsius."""
    return t_c + ZERO_CELSIUS


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Population parameters of a device model.

    :param sigma_mismatch: volts, spread of the per-cell imbalance
    :param sigma_noise: volts, per-evaluation thermal noise
    :param sigma_temp_sens: volts per kelvin
    :param sigma_aging_rate: volts per hour**time_exponent
    :param time_exponent: NBTI power-law exponent in effective time
    :param reference_temperature: kelvin
    :param reference_voltage: millivolts, recorded on readouts only
    :param aging_temp_correlation: rank correlation in [0, 1) between a
        cell's aging rate and its preference-opposing temperature sensitivity
    """

    sigma_mismatch: float = 0.02
    sigma_noise: float = 0.00265625  # calibrate(ModelConfig(), 0.06)
    sigma_temp_sens: float = 0.22 * 0.02 / 55.0
    sigma_aging_rate: float = 0.035 * 0.02 / (48 * PUBLISHED_AF) ** 0.25
    time_exponent: float = 0.25
    reference_temperature: float = celsius(25.0)
    reference_voltage: int = 3250
    aging_temp_correlation: float = 0.98

    def __post_init__(self):
        for name in ("sigma_mismatch", "sigma_noise", "sigma_temp_sens", "sigma_aging_rate"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be > 0, got {v!r}")
        if not 0 < self.time_exponent < 1:
            raise ValueError(f"time_exponent must lie in (0, 1), got {self.time_exponent!r}")
        if self.reference_temperature <= 0:
            raise ValueError("reference_temperature must be positive (kelvin)")
        if not 0 <= self.aging_temp_correlation < 1:
            raise ValueError("aging_temp_correlation must lie in [0, 1)")


@dataclass(frozen=True)
class StressProfile:
    """Accelerated-aging conditions. Voltages in millivolts, temperatures in
    kelvin, activation energy in eV.

    ``af_override`` replaces the computed acceleration factor when aging a
    device; :func:`acceleration_factor` always returns the computed value.
    """

    v_stress: float = 3250.0
    v_nominal: float = 3250.0
    t_stress: float = celsius(80.0)
    t_nominal: float = celsius(25.0)
    alpha: float = 3.5
    m: float = 0.25
    e_aa: float = -0.02
    k: float = BOLTZMANN_EV
    af_override: float | None = None

    def __post_init__(self):
        if self.t_stress <= 0 or self.t_nominal <= 0:
            raise ValueError("stress and nominal temperatures must be positive (kelvin)")
        if self.v_nominal <= 0 or self.v_stress <= 0:
            raise ValueError("voltages must be positive")
        if self.m <= 0 or self.k <= 0:
            raise ValueError("m and k must be positive")
        if self.af_override is not None and not self.af_override > 0:
            raise ValueError("af_override must be positive")

    def effective_factor(self) -> float:
        return self.af_override if self.af_override is not None else acceleration_factor(self)


def acceleration_factor(profile: StressProfile) -> float:
    """NBTI acceleration factor of a voltage/temperature stress, as a power
    law in voltage times an Arrhenius term, both scaled by ``1/m``."""
    volt = (profile.v_stress / profile.v_nominal) ** (profile.alpha / profile.m)
    therm = math.exp(profile.e_aa / profile.k * (1.0 / profile.t_stress - 1.0 / profile.t_nominal) / profile.m)
    return volt * therm


@dataclass(frozen=True)
class CellParams:
    mismatch: float
    temp_sensitivity: float
    aging_rate: float
    accumulated_shift: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DeviceModel:
    """One simulated SRAM region. Immutable; :func:`age` returns a new model.

    Per-cell parameters are held column-wise; :meth:`cell` and :attr:`cells`
    give the record view.
    """

    seed: int
    config: ModelConfig
    cell_count: int
    mismatch: np.ndarray = field(repr=False)
    temp_sensitivity: np.ndarray = field(repr=False)
    aging_rate: np.ndarray = field(repr=False)
    accumulated_shift: np.ndarray = field(repr=False)
    effective_age: float = 0.0

    def __post_init__(self):
        for name in ("mismatch", "temp_sensitivity", "aging_rate", "accumulated_shift"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (self.cell_count,):
                raise ValueError(f"{name} must have shape ({self.cell_count},)")
            object.__setattr__(self, name, arr)
        if self.effective_age < 0:
            raise ValueError("effective_age must be >= 0")

    def cell(self, index: int) -> CellParams:
        return CellParams(float(self.mismatch[index]), float(self.temp_sensitivity[index]),
                          float(self.aging_rate[index]), float(self.accumulated_shift[index]))

    @property
    def cells(self) -> list[CellParams]:
        return [self.cell(i) for i in range(self.cell_count)]

    @property
    def role(self) -> Role:
        return Role.POST_AGING if self.effective_age > 0 else Role.PRE_AGING

    def __eq__(self, other) -> bool:
        if not isinstance(other, DeviceModel):
            return NotImplemented
        return (self.seed == other.seed and self.config == other.config
                and self.cell_count == other.cell_count and self.effective_age == other.effective_age
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("mismatch", "temp_sensitivity", "aging_rate", "accumulated_shift")))


def _cell_draws(seed: int, config: ModelConfig, idx: np.ndarray):
    mismatch = config.sigma_mismatch * streams.normal(streams.stream_key(seed, "mismatch"), idx)
    z_temp = streams.normal(streams.stream_key(seed, "temp_sens"), idx)
    z_age = streams.normal(streams.stream_key(seed, "aging_rate"), idx)
    rho = config.aging_temp_correlation
    # temperature sensitivity that pushes against the cell's preference
    opposing = -np.sign(mismatch) * z_temp
    latent = rho * opposing + math.sqrt(1.0 - rho * rho) * z_age
    # Gaussian copula onto the half-normal: |N(0, 1)| quantile of ndtr(latent)
    half_normal = ndtri(0.5 + 0.5 * ndtr(latent))
    return mismatch, config.sigma_temp_sens * z_temp, config.sigma_aging_rate * half_normal


def new_device(seed: int, config: ModelConfig | None = None, cell_count: int = DEFAULT_CELL_COUNT) -> DeviceModel:
    if cell_count < 1:
        raise ValueError("cell_count must be >= 1")
    config = config or ModelConfig()
    idx = np.arange(cell_count, dtype=np.uint64)
    mismatch, temp_sens, rate = _cell_draws(seed, config, idx)
    return DeviceModel(seed, config, cell_count, mismatch, temp_sens, rate, np.zeros(cell_count))


def _margin(device: DeviceModel, temperature: float, idx) -> np.ndarray:
    cfg = device.config
    if idx is None:
        m, s, shift = device.mismatch, device.temp_sensitivity, device.accumulated_shift
    else:
        m, s, shift = device.mismatch[idx], device.temp_sensitivity[idx], device.accumulated_shift[idx]
    return m + s * (temperature - cfg.reference_temperature) - np.sign(m) * shift


def power_up_bits(device: DeviceModel, temperature: float, eval_seed: int,
                  cells: Sequence[int] | np.ndarray | None = None) -> np.ndarray:
    """Power-up states as a ``uint8`` array; ``cells`` restricts (and orders)
    the evaluated addresses without changing any drawn value."""
    if temperature <= 0:
        raise ValueError("temperature must be positive (kelvin)")
    if cells is None:
        idx = None
        counters = np.arange(device.cell_count, dtype=np.uint64)
    else:
        idx = np.asarray(cells, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= device.cell_count):
            raise IndexError("cell address out of range")
        counters = idx.astype(np.uint64)
    noise = streams.normal(streams.stream_key(device.seed, "noise", eval_seed), counters)
    value = _margin(device, temperature, idx) + device.config.sigma_noise * noise
    return (value > 0).astype(np.uint8)


def power_up(device: DeviceModel, temperature: float, eval_seed: int,
             cells: Sequence[int] | np.ndarray | None = None) -> ResponseVector:
    """One simulated power-up readout, tagged pre- or post-aging by the
    device's effective age."""
    return ResponseVector.from_bits(power_up_bits(device, temperature, eval_seed, cells), device.role)


def readout_seeds(seed: int, temperature: float, repeats: int) -> list[int]:
    """Evaluation seeds for ``repeats`` power-ups at one temperature."""
    t_mk = int(round(temperature * 1000))
    return [streams.stream_key(seed, "eval", t_mk, r) for r in range(repeats)]


def readout_set(device: DeviceModel, temperature: float, repeats: int, seed: int,
                workers: int = 1, voltage: int | None = None, role: Role | None = None) -> ReadoutSet:
    """``repeats`` power-ups at one temperature as a :class:`ReadoutSet`.

    ``role`` defaults to the device's own; pass ``Role.POST_AGING`` to label
    readouts taken after a (possibly zero-length) stress step.
    """
    role = device.role if role is None else Role(role)
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    seeds = readout_seeds(seed, temperature, repeats)

    def one(s):
        return ResponseVector.from_bits(power_up_bits(device, temperature, s), role)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vecs = tuple(pool.map(one, seeds))
    else:
        vecs = tuple(one(s) for s in seeds)
    volt = device.config.reference_voltage if voltage is None else voltage
    return ReadoutSet(vecs, temperature, volt, device.effective_age, role)


def temperature_readout_set(device: DeviceModel, temperatures: Iterable[float], repeats: int,
                            seed: int, workers: int = 1) -> list[ReadoutSet]:
    return [readout_set(device, t, repeats, seed, workers) for t in temperatures]


def age(device: DeviceModel, stress_hours: float, profile: StressProfile | None = None) -> DeviceModel:
    """Apply ``stress_hours`` of stress; returns a new device.

    Effective age accumulates linearly in stress time scaled by the
    acceleration factor; the per-cell shift is recomputed from the total, so
    only the total matters.
    """
    if stress_hours < 0:
        raise ValueError("stress_hours must be >= 0")
    if stress_hours == 0:
        return device
    profile = profile or StressProfile()
    return age_effective(device, stress_hours * profile.effective_factor())


def age_effective(device: DeviceModel, effective_hours: float) -> DeviceModel:
    """Add ``effective_hours`` of nominal-condition aging."""
    if effective_hours < 0:
        raise ValueError("effective_hours must be >= 0")
    if effective_hours == 0:
        return device
    total = device.effective_age + effective_hours
    shift = device.aging_rate * total ** device.config.time_exponent
    # guards against rounding making a shift shrink
    shift = np.maximum(shift, device.accumulated_shift)
    return replace(device, accumulated_shift=shift, effective_age=total)


def measure_p_intra(device: DeviceModel, trials: int, temperature: float | None = None,
                    seed: int = 0) -> float:
    """Mean fractional distance of ``trials`` re-evaluations from a first
    reference evaluation, all at ``temperature`` (default: reference)."""
    t = device.config.reference_temperature if temperature is None else temperature
    seeds = readout_seeds(seed, t, trials + 1)
    ref = power_up_bits(device, t, seeds[0])
    flips = sum(int(np.count_nonzero(power_up_bits(device, t, s) != ref)) for s in seeds[1:])
    return flips / (trials * device.cell_count)


def calibrate(config: ModelConfig, target_p_intra: float, trials: int = 8,
              cell_count: int = 2**16, tolerance: float = 0.001, seed: int = 0x5EED) -> ModelConfig:
    """Fit ``sigma_noise`` so a fresh device's intra-aging flip rate at the
    reference temperature hits ``target_p_intra``.

    Bisects the noise-to-mismatch ratio on a fixed Monte-Carlo device (common
    random numbers, so the measured rate is monotone in the ratio).
    """
    if not 0 < target_p_intra < 0.5:
        raise CalibrationError(f"target p_intra {target_p_intra!r} is unreachable; it must lie in (0, 0.5)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    base = new_device(seed, config, cell_count)

    def measure(ratio: float) -> float:
        cfg = replace(config, sigma_noise=ratio * config.sigma_mismatch)
        dev = replace(base, config=cfg)
        return measure_p_intra(dev, trials, seed=seed)

    lo, hi = 0.0, 4.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        p = measure(mid)
        if abs(p - target_p_intra) <= tolerance:
            return replace(config, sigma_noise=mid * config.sigma_mismatch)
        if p < target_p_intra:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"no noise level within 64 bisection steps gives p_intra={target_p_intra}")
