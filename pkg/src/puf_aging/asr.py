"""Aging-sensitive response (ASR) selection, enrollment and post-aging
characterisation.

A cell is aging sensitive when its ``N`` room-temperature evaluations agree,
its ``N`` high-temperature evaluations agree, and the two agreed values
differ. Selection is symmetric in the flip direction.
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .bitcore import LengthMismatchError, ReadoutSet, ResponseVector, Role, RoleError
from .detection import DetectionPlan, ErrorModel, Verdict, classify
from .agingmodel import celsius


class NoAgingSensitiveCellsError(ValueError):
    """Selection kept no cells; lower N or widen the cell region."""


class InsufficientAsrsError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionConfig:
    """:param n_reevals: evaluations per temperature (N)
    :param rt: room temperature, kelvin
    :param ht: high temperature, kelvin
    """

    n_reevals: int = 9
    rt: float = celsius(25.0)
    ht: float = celsius(80.0)

    def __post_init__(self):
        if self.n_reevals < 1:
            raise ValueError("n_reevals must be >= 1")
        if not self.ht > self.rt > 0:
            raise ValueError(f"need 0 < rt < ht, got rt={self.rt}, ht={self.ht}")


@dataclass(frozen=True)
class AsrRecord:
    address: int
    reference_bit: int

    def __post_init__(self):
        if self.address < 0:
            raise ValueError("address must be non-negative")
        if self.reference_bit not in (0, 1):
            raise ValueError("reference_bit must be 0 or 1")


# where p_intra_est came from
HELD_OUT = "held_out"
SELECTION = "selection"


@dataclass(frozen=True)
class EnrollmentProfile:
    device_id: str
    selection: SelectionConfig
    asrs: tuple[AsrRecord, ...]
    p_intra_est: float
    p_inter_est: float | None = None
    created_at: _dt.datetime = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc))
    p_intra_source: str = HELD_OUT

    def __post_init__(self):
        asrs = tuple(self.asrs)
        object.__setattr__(self, "asrs", asrs)
        addrs = [a.address for a in asrs]
        if any(b <= a for a, b in zip(addrs, addrs[1:])):
            raise ValueError("ASR addresses must be strictly increasing")
        if self.p_intra_source not in (HELD_OUT, SELECTION):
            raise ValueError(f"unknown p_intra_source {self.p_intra_source!r}")

    @property
    def addresses(self) -> np.ndarray:
        return np.fromiter((a.address for a in self.asrs), dtype=np.int64, count=len(self.asrs))

    @property
    def reference_bits(self) -> np.ndarray:
        return np.fromiter((a.reference_bit for a in self.asrs), dtype=np.uint8, count=len(self.asrs))

    @property
    def characterized(self) -> bool:
        return self.p_inter_est is not None

    def error_model(self) -> ErrorModel:
        if self.p_inter_est is None:
            raise ValueError("profile has no p_inter_est yet; characterize it with post-aging readouts")
        return ErrorModel(self.p_intra_est, self.p_inter_est)


def _check_set(rs: ReadoutSet, n: int, name: str) -> np.ndarray:
    if len(rs) != n:
        raise ValueError(f"{name} holds {len(rs)} readouts, expected N={n}")
    if rs.role is not Role.PRE_AGING:
        raise RoleError(f"{name} must be pre-aging")
    return rs.matrix()


def selection_mask(rt_bits: np.ndarray, ht_bits: np.ndarray) -> np.ndarray:
    """Boolean mask of cells unanimous at RT, unanimous at HT, and opposite."""
    rt_all = (rt_bits == rt_bits[0]).all(axis=0)
    ht_all = (ht_bits == ht_bits[0]).all(axis=0)
    return rt_all & ht_all & (rt_bits[0] != ht_bits[0])


def select_asrs(rt_readouts: ReadoutSet, ht_readouts: ReadoutSet, config: SelectionConfig) -> list[AsrRecord]:
    rt = _check_set(rt_readouts, config.n_reevals, "rt_readouts")
    ht = _check_set(ht_readouts, config.n_reevals, "ht_readouts")
    if rt.shape[1] != ht.shape[1]:
        raise LengthMismatchError(f"RT readouts have {rt.shape[1]} cells, HT readouts {ht.shape[1]}")
    addrs = np.flatnonzero(selection_mask(rt, ht))
    return [AsrRecord(int(a), int(rt[0, a])) for a in addrs]


def _disagreement(readouts: np.ndarray, addresses: np.ndarray, reference: np.ndarray) -> float:
    sub = readouts[:, addresses]
    return float(np.count_nonzero(sub != reference) / sub.size)


def enroll(device_id: str, rt_readouts: ReadoutSet, ht_readouts: ReadoutSet, config: SelectionConfig,
           estimation_readouts: ReadoutSet | None = None,
           created_at: _dt.datetime | None = None) -> EnrollmentProfile:
    """Select ASRs and estimate their fresh flip rate.

    The estimate uses ``estimation_readouts`` (further pre-aging RT readouts,
    not used for selection) when given. Otherwise it falls back to the
    selection readouts, where unanimity forces it to zero; the profile records
    which source was used.
    """
    asrs = select_asrs(rt_readouts, ht_readouts, config)
    if not asrs:
        raise NoAgingSensitiveCellsError(
            f"no aging-sensitive cells among {rt_readouts.cell_count} at N={config.n_reevals}")
    addrs = np.fromiter((a.address for a in asrs), dtype=np.int64)
    ref = np.fromiter((a.reference_bit for a in asrs), dtype=np.uint8)
    if estimation_readouts is not None and len(estimation_readouts):
        if estimation_readouts.role is not Role.PRE_AGING:
            raise RoleError("estimation_readouts must be pre-aging")
        if estimation_readouts.cell_count != rt_readouts.cell_count:
            raise LengthMismatchError("estimation readouts differ in length from the selection readouts")
        p_intra = _disagreement(estimation_readouts.matrix(), addrs, ref)
        source = HELD_OUT
    else:
        p_intra = _disagreement(rt_readouts.matrix(), addrs, ref)
        source = SELECTION
    created_at = created_at or _dt.datetime.now(_dt.timezone.utc)
    return EnrollmentProfile(device_id, config, tuple(asrs), p_intra, None, created_at, source)


def characterize(profile: EnrollmentProfile, post_aging_readouts: ReadoutSet) -> EnrollmentProfile:
    """Profile with ``p_inter_est`` measured from post-aging RT readouts."""
    if not len(post_aging_readouts):
        raise ValueError("characterize needs at least one post-aging readout")
    if post_aging_readouts.role is not Role.POST_AGING:
        raise RoleError("characterize needs post-aging readouts")
    if not profile.asrs:
        raise NoAgingSensitiveCellsError("profile has no ASRs")
    m = post_aging_readouts.matrix()
    if profile.asrs[-1].address >= m.shape[1]:
        raise LengthMismatchError("readouts are shorter than the profile's highest ASR address")
    p_inter = _disagreement(m, profile.addresses, profile.reference_bits)
    return replace(profile, p_inter_est=p_inter)


def reference_vector(profile: EnrollmentProfile, n: int | None = None) -> ResponseVector:
    bits = profile.reference_bits
    return ResponseVector.from_bits(bits if n is None else bits[:n], Role.PRE_AGING)


@dataclass(frozen=True)
class DetectionReport:
    verdict: Verdict
    n: int
    n_th: int

    @property
    def recycled(self) -> bool:
        return self.verdict.recycled

    @property
    def distance(self) -> int:
        return self.verdict.distance

    @property
    def n_eer(self) -> int:
        return self.n_th + 1

    @property
    def label(self) -> str:
        return self.verdict.label


def detect_device(profile: EnrollmentProfile, probe: ResponseVector | np.ndarray,
                  plan: DetectionPlan) -> DetectionReport:
    """Classify a probe readout against the first ``plan.n`` ASRs.

    ``probe`` is a full-length readout; a bit array of the projected ASR
    positions is accepted too, which lets Monte-Carlo callers skip packing
    the whole region.
    """
    if plan.n > len(profile.asrs):
        raise InsufficientAsrsError(f"plan needs {plan.n} ASRs, profile has {len(profile.asrs)}")
    addrs = profile.addresses[: plan.n]
    if isinstance(probe, ResponseVector):
        last = profile.asrs[-1].address
        if probe.length <= last:
            raise LengthMismatchError(f"probe has {probe.length} bits; the profile addresses cell {last}")
        projected = ResponseVector.from_bits(probe.bits[addrs])
    else:
        bits = np.asarray(probe)
        if bits.shape != (plan.n,):
            raise LengthMismatchError(f"projected probe must have shape ({plan.n},)")
        projected = ResponseVector.from_bits(bits)
    reference = reference_vector(profile, plan.n).with_role(None)
    verdict = classify(reference, projected, plan.n_th, plan.error_model)
    return DetectionReport(verdict, plan.n, plan.n_th)
