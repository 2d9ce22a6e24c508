"""Accuracy metrics over probability series and circuit-execution accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class EvolutionRecord:
    """One protocol run: per-step observable, fidelity, depth and cumulative executions."""

    protocol: str
    model: str
    preset: str
    k: int
    seed: int
    dt: float
    probabilities: list[float] = field(default_factory=list)
    fidelities: list[float | None] = field(default_factory=list)
    depths: list[int] = field(default_factory=list)
    cum_executions: list[int] = field(default_factory=list)
    threshold: float | None = None
    variant: str = ""
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.cum_executions and any(b < a for a, b in zip(self.cum_executions, self.cum_executions[1:])):
            raise ValueError("cumulative executions must be non-decreasing")

    @property
    def n_steps(self) -> int:
        return len(self.probabilities)

    @property
    def times(self) -> list[float]:
        return [(i + 1) * self.dt for i in range(self.n_steps)]

    def append(self, p: float, fidelity: float | None, depth: int, cum_executions: int) -> None:
        if self.cum_executions and cum_executions < self.cum_executions[-1]:
            raise ValueError("cumulative executions must be non-decreasing")
        self.probabilities.append(min(1.0, max(0.0, float(p))))
        self.fidelities.append(None if fidelity is None else float(fidelity))
        self.depths.append(int(depth))
        self.cum_executions.append(int(cum_executions))


def median_abs_error(series: Sequence[float], reference: Sequence[float]) -> float:
    if len(series) != len(reference):
        raise ValueError("series and reference lengths differ")
    if len(series) == 0:
        raise ValueError("empty series")
    return float(np.median(np.abs(np.asarray(series, float) - np.asarray(reference, float))))


def _first_peak(x: np.ndarray, lo: int, hi: int, height: float | None) -> int | None:
    """Leftmost strict local maximum in ``[lo, hi]``; a plateau counts at its left end."""
    n = len(x)
    i = max(lo, 1)
    while i <= min(hi, n - 2):
        j = i
        while j + 1 < n and x[j + 1] == x[i]:
            j += 1
        if x[i] > x[i - 1] and j + 1 < n and x[i] > x[j + 1] and (height is None or x[i] > height):
            return i
        i = j + 1
    return None


@dataclass(frozen=True)
class DephasingResult:
    lag: float | None
    reference_index: int | None
    candidate_index: int | None
    used_window_max: bool = False

    @property
    def defined(self) -> bool:
        return self.lag is not None


def dephasing(
    noiseless: Sequence[float],
    candidate: Sequence[float],
    dt: float,
    height: float = 0.3,
    window: int = 5,
) -> DephasingResult:
    """Signed peak offset ``t_candidate - t_reference``; positive means delayed.

    Index 0 never qualifies as a peak. Missing a reference peak leaves the
    result undefined.
    """
    ref = np.asarray(noiseless, float)
    cand = np.asarray(candidate, float)
    if ref.shape != cand.shape:
        raise ValueError("series lengths differ")
    r = _first_peak(ref, 1, len(ref) - 1, height)
    if r is None:
        return DephasingResult(None, None, None)
    lo, hi = max(1, r - window), min(len(cand) - 1, r + window)
    c = _first_peak(cand, lo, hi, height)
    fallback = c is None
    if fallback:
        c = lo + int(np.argmax(cand[lo : hi + 1]))
    return DephasingResult((c - r) * dt, r, c, fallback)


def amplitude_spread(runs: Sequence[Sequence[float]]) -> tuple[np.ndarray, float]:
    if len(runs) < 2:
        raise ValueError("amplitude spread needs at least two runs")
    arr = np.asarray(runs, float)
    spread = arr.max(axis=0) - arr.min(axis=0)
    return spread, float(spread.mean())


def median_series(runs: Sequence[Sequence[float]]) -> np.ndarray:
    if len(runs) < 1:
        raise ValueError("need at least one run")
    return np.median(np.asarray(runs, float), axis=0)


@dataclass(frozen=True)
class ResourceLedger:
    """Execution-count model; ``n_ce`` and ``n_l`` may be per-step averages."""

    n_steps: int
    k: int
    n_avg: int = 10
    n_ce: float = 0.0
    n_l: float = 0.0
    n_qp: int = 0
    n_lambdas: int = 3

    @property
    def c_trotter(self) -> int:
        return self.n_steps * self.k

    @property
    def c_zne(self) -> int:
        return self.n_lambdas * self.n_avg * self.c_trotter

    @property
    def c_isl(self) -> int:
        factor = 1.0 + self.n_ce + 9.0 * self.n_l * self.n_qp
        return int(round(factor * self.c_trotter))


def ledger_totals(ledger: ResourceLedger) -> tuple[int, int, int]:
    return ledger.c_trotter, ledger.c_zne, ledger.c_isl


def isl_ledger(n_steps: int, k: int, cost_evaluations: Sequence[int], qst_pairs: Sequence[int], n_qp: int) -> ResourceLedger:
    """Build a ledger from per-step ISL counts.

    ``qst_pairs`` counts measured pairs per step; the layer count is that number
    divided by the pairs measured per layer (``n_qp``).
    """
    if n_qp < 1:
        raise ValueError("n_qp must be positive")
    n_ce = float(np.mean(cost_evaluations)) if len(cost_evaluations) else 0.0
    n_l = float(np.mean(qst_pairs)) / n_qp if len(qst_pairs) else 0.0
    return ResourceLedger(n_steps, k, n_ce=n_ce, n_l=n_l, n_qp=n_qp)

