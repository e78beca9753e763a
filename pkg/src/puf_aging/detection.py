"""Binomial detection capability: FAR/FRR, equal-error thresholds and
minimal response length planning.

Threshold convention
--------------------
``n_th`` in :func:`far`, :func:`frr` and :class:`OperatingPoint` is the upper
summation bound of the binomial sums: a probe is accepted as *new* when its
Hamming distance is ``<= n_th`` and flagged *recycled* above it.
``FRR(n_th) = P[intra > n_th]`` and ``FAR(n_th) = P[inter <= n_th]``.

Published planning tables quote the equal-error threshold as the smallest
distance flagged recycled, i.e. ``n_th + 1``. :attr:`OperatingPoint.n_eer` and
:attr:`DetectionPlan.n_eer` use that table convention; both name the same
decision rule.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .bitcore import ResponseVector, hamming_distance

DEFAULT_TARGETS = (1e-2, 1e-3, 1e-4)
DEFAULT_N_CEILING = 10**6


class InfeasibleError(ValueError):
    """No response length under the configured ceiling meets the target."""


@dataclass(frozen=True)
class ErrorModel:
    """Binomial flip probabilities of fresh (intra) and aged (inter) probes."""

    p_intra: float
    p_inter: float

    def __post_init__(self):
        for name in ("p_intra", "p_inter"):
            p = getattr(self, name)
            if not (0.0 < p < 1.0) or math.isnan(p):
                raise ValueError(f"{name} must lie strictly between 0 and 1, got {p!r}")

    @property
    def separable(self) -> bool:
        return self.p_intra < self.p_inter

    def require_separable(self) -> None:
        if not self.separable:
            raise ValueError(
                f"planning needs p_intra < p_inter (got {self.p_intra} >= {self.p_inter})")


@dataclass(frozen=True)
class OperatingPoint:
    n: int
    n_th: int
    far: float
    frr: float

    @property
    def eer(self) -> float:
        return max(self.far, self.frr)

    @property
    def n_eer(self) -> int:
        """Smallest Hamming distance classified as recycled."""
        return self.n_th + 1


@dataclass(frozen=True)
class DetectionPlan:
    error_model: ErrorModel
    target_eer: float
    n: int
    n_th: int
    far: float
    frr: float
    label: str = ""

    @property
    def eer(self) -> float:
        return max(self.far, self.frr)

    @property
    def n_eer(self) -> int:
        return self.n_th + 1

    @property
    def log10_far(self) -> float:
        return _log10(self.far)

    @property
    def log10_frr(self) -> float:
        return _log10(self.frr)

    @property
    def operating_point(self) -> OperatingPoint:
        return OperatingPoint(self.n, self.n_th, self.far, self.frr)


def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else -math.inf


# -- log-space binomial tails -------------------------------------------------

_LN_2PI = math.log(2.0 * math.pi)
_STIRLING_SERIES = (1.0 / 12, -1.0 / 360, 1.0 / 1260, -1.0 / 1680, 1.0 / 1188)


def _stirlerr(k: np.ndarray) -> np.ndarray:
    """``log(k!) - (k + 1/2) log k + k - log(2 pi)/2`` for integers ``k >= 1``."""
    k = np.asarray(k, dtype=np.float64)
    out = np.empty_like(k)
    small = k <= 15
    ks = k[small]
    out[small] = gammaln(ks + 1.0) - (ks + 0.5) * np.log(ks) + ks - 0.5 * _LN_2PI
    kl = k[~small]
    inv2 = 1.0 / (kl * kl)
    acc = np.zeros_like(kl)
    for c in reversed(_STIRLING_SERIES):
        acc = c + acc * inv2
    out[~small] = acc / kl
    return out


def _bd0(x: np.ndarray, m: float) -> np.ndarray:
    """Deviance term ``x log(x/m) + m - x`` without cancellation near ``x = m``."""
    x = np.asarray(x, dtype=np.float64)
    out = x * np.log(x / m) + m - x
    near = np.abs(x - m) < 0.1 * (x + m)
    if near.any():
        xn = x[near]
        v = (xn - m) / (xn + m)
        s = (xn - m) * v
        ej = 2.0 * xn * v
        v2 = v * v
        # |v| < 0.1, so each term adds two digits
        for j in range(1, 12):
            ej = ej * v2
            s = s + ej / (2 * j + 1)
        out[near] = s
    return out


def log_pmf(n: int, p: float) -> np.ndarray:
    """``log P[X = i]`` for ``X ~ Binomial(n, p)``, ``i = 0..n``.

    Saddle-point form (Loader's expansion): the Stirling remainders and the
    deviance terms are computed separately, so the log stays accurate to a
    few ulp of the pmf itself even for ``n`` in the hundreds of thousands,
    where differencing ``lgamma`` values loses about ``log10(n)`` digits.
    """
    q = 1.0 - p
    out = np.empty(n + 1, dtype=np.float64)
    out[0] = n * math.log1p(-p)
    out[n] = n * math.log(p)
    if n > 1:
        i = np.arange(1, n, dtype=np.float64)
        lc = (_stirlerr(np.array([n]))[0] - _stirlerr(i) - _stirlerr(n - i)
              - _bd0(i, n * p) - _bd0(n - i, n * q))
        out[1:n] = lc - 0.5 * (_LN_2PI + np.log(i) + np.log1p(-i / n))
    return out


def _logsumexp(terms: np.ndarray) -> float:
    if terms.size == 0:
        return -math.inf
    top = float(terms.max())
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(np.exp(terms - top)))


def log_cdf(n: int, p: float, k: int) -> float:
    """``log P[X <= k]``."""
    return _logsumexp(log_pmf(n, p)[: k + 1])


def log_sf(n: int, p: float, k: int) -> float:
    """``log P[X > k]``, summed over the upper terms directly (no ``1 - cdf``)."""
    return _logsumexp(log_pmf(n, p)[k + 1:])


def log_cdf_all(n: int, p: float) -> np.ndarray:
    """``log P[X <= k]`` for every ``k = 0..n``."""
    return np.logaddexp.accumulate(log_pmf(n, p))


def log_sf_all(n: int, p: float) -> np.ndarray:
    """``log P[X > k]`` for every ``k = 0..n`` (the last entry is ``-inf``)."""
    upper = np.logaddexp.accumulate(log_pmf(n, p)[::-1])[::-1]
    return np.append(upper[1:], -np.inf)


def _check_threshold(n: int, n_th: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= n_th <= n:
        raise ValueError(f"n_th must lie in [0, {n}], got {n_th}")


def frr(model: ErrorModel, n: int, n_th: int) -> float:
    """Probability that a fresh device exceeds ``n_th`` flips."""
    _check_threshold(n, n_th)
    return math.exp(log_sf(n, model.p_intra, n_th))


def far(model: ErrorModel, n: int, n_th: int) -> float:
    """Probability that an aged device shows at most ``n_th`` flips."""
    _check_threshold(n, n_th)
    return math.exp(log_cdf(n, model.p_inter, n_th))


def log_error_curves(model: ErrorModel, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Natural-log FAR and FRR for every threshold ``0..n``."""
    return log_cdf_all(n, model.p_inter), log_sf_all(n, model.p_intra)


def eer_search(model: ErrorModel, n: int) -> OperatingPoint:
    """Threshold minimising ``max(FAR, FRR)`` at length ``n``; ties go to the
    smallest threshold."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    lfar, lfrr = log_error_curves(model, n)
    worst = np.maximum(lfar, lfrr)
    k = int(np.argmin(worst))
    # the curves are only needed at k, where the scalar tails are more precise
    return OperatingPoint(n, k, far(model, n, k), frr(model, n, k))


def minimal_n(model: ErrorModel, target_eer: float, ceiling: int = DEFAULT_N_CEILING,
              label: str = "") -> DetectionPlan:
    """Smallest response length whose equal error rate is below ``target_eer``.

    Exponential bracketing, then bisection, then a short downward scan; the
    returned length is always certified infeasible at ``n - 1``.
    """
    if not 0.0 < target_eer < 0.5:
        raise ValueError(f"target_eer must lie in (0, 0.5), got {target_eer}")
    model.require_separable()

    def ok(n: int) -> bool:
        return eer_search(model, n).eer < target_eer

    lo, hi = 0, 1  # lo is known infeasible (n=0 trivially), hi is the probe
    while not ok(hi):
        lo = hi
        if hi >= ceiling:
            raise InfeasibleError(
                f"EER < {target_eer:g} not reachable with n <= {ceiling} "
                f"(p_intra={model.p_intra}, p_inter={model.p_inter})")
        hi = min(hi * 2, ceiling)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    # bisection assumes EER is monotone in n; discreteness can break that
    # locally, so look a few lengths further down before certifying
    n = hi
    while True:
        lower = next((m for m in range(n - 2, max(n - 10, 0), -1) if ok(m)), None)
        if lower is None:
            break
        n = lower
        while n > 1 and ok(n - 1):
            n -= 1
    op = eer_search(model, n)
    return DetectionPlan(model, target_eer, n, op.n_th, op.far, op.frr, label)


def plan_table(models: Sequence[tuple[str, ErrorModel]], targets: Iterable[float],
               ceiling: int = DEFAULT_N_CEILING, workers: int = 1) -> list[DetectionPlan]:
    """One plan per ``(model, target)`` cell, in input order."""
    targets = list(targets)
    cells = [(label, model, t) for label, model in models for t in targets]

    def solve(cell):
        label, model, t = cell
        return minimal_n(model, t, ceiling=ceiling, label=label)

    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(solve, cells))
    return [solve(c) for c in cells]


CSV_COLUMNS = ("label", "p_intra", "p_inter", "diff", "target", "n", "n_eer", "log10_far", "log10_frr")


def _row(plan: DetectionPlan) -> list[str]:
    m = plan.error_model
    return [
        plan.label,
        repr(m.p_intra),
        repr(m.p_inter),
        f"{m.p_inter - m.p_intra:.4f}",
        f"{plan.target_eer:g}",
        str(plan.n),
        str(plan.n_eer),
        f"{plan.log10_far:.2f}",
        f"{plan.log10_frr:.2f}",
    ]


def table_csv(plans: Sequence[DetectionPlan]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in plans:
        w.writerow(_row(p))
    return buf.getvalue()


def table_text(plans: Sequence[DetectionPlan]) -> str:
    rows = [list(CSV_COLUMNS)] + [_row(p) for p in plans]
    widths = [max(len(r[i]) for r in rows) for i in range(len(CSV_COLUMNS))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Verdict:
    recycled: bool
    distance: int
    n: int
    n_th: int
    far_at_distance: float
    frr_at_distance: float

    @property
    def label(self) -> str:
        return "recycled" if self.recycled else "new"


def classify(reference: ResponseVector, probe: ResponseVector, n_th: int,
             model: ErrorModel | None = None) -> Verdict:
    """Flag ``probe`` as recycled when it differs from ``reference`` in more
    than ``n_th`` positions.

    With ``model`` given, the report carries both binomial tails evaluated at
    the observed distance; otherwise those fields are NaN.
    """
    hd = hamming_distance(reference, probe)
    n = reference.length
    if not 0 <= n_th <= n:
        raise ValueError(f"n_th must lie in [0, {n}], got {n_th}")
    if model is not None and n >= 1:
        fa, fr = far(model, n, hd), frr(model, n, hd)
    else:
        fa = fr = math.nan
    return Verdict(hd > n_th, hd, n, n_th, fa, fr)
