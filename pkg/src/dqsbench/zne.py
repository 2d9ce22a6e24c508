"""Zero-noise extrapolation with local gate folding and an exponential fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit
from .simulator import (
    DensityMatrix,
    ExecutionCounter,
    NoiseModel,
    overlap_probability,
    run_density,
    sample_shots,
)


@dataclass(frozen=True)
class ZneConfig:
    lambdas: tuple[float, ...] = (1.0, 2.0, 3.0)
    n_avg: int = 10
    asymptote_a: float | None = None
    clip_to_unit_interval: bool = True

    def __post_init__(self) -> None:
        lam = tuple(float(x) for x in self.lambdas)
        if list(lam) != sorted(lam) or any(x < 1 for x in lam) or not lam:
            raise ValueError("lambdas must be sorted ascending and all >= 1")
        if self.n_avg < 1:
            raise ValueError("n_avg must be at least 1")
        object.__setattr__(self, "lambdas", lam)

    def asymptote(self, num_qubits: int) -> float:
        return self.asymptote_a if self.asymptote_a is not None else 1.0 / num_qubits**2


@dataclass(frozen=True)
class FoldPlan:
    l: int
    s: int
    d: int

    @property
    def achieved_lambda(self) -> float:
        return 2.0 * (self.l + self.s / self.d) + 1.0


def plan_fold(d: int, lambda_target: float) -> FoldPlan:
    if d < 1:
        raise ValueError("cannot fold an empty circuit")
    if lambda_target < 1:
        raise ValueError("noise scale factor must be >= 1")
    half = (lambda_target - 1.0) / 2.0
    l = math.floor(half)
    s = round(d * (half - l))
    if s == d:
        l, s = l + 1, 0
    return FoldPlan(l, s, d)


def fold_circuit(c: Circuit, plan: FoldPlan) -> Circuit:
    """Each gate G -> G (G^dagger G)^l; the last ``s`` gates get one extra pair."""
    if len(c) == 0:
        raise ValueError("cannot fold an empty circuit")
    d = len(c)
    out = []
    for i, g in enumerate(c.gates):
        inv = g.inverse()
        reps = plan.l + (1 if i >= d - plan.s else 0)
        out.append(g)
        for _ in range(reps):
            out.append(inv)
            out.append(g)
    return Circuit(c.num_qubits, tuple(out))


@dataclass(frozen=True)
class ExtrapolationResult:
    value: float
    b: float | None
    c: float | None
    fallback: bool
    reason: str = ""

    def __float__(self) -> float:
        return self.value


def extrapolate(
    points: list[tuple[float, float]],
    a: float,
    clip: bool = True,
) -> ExtrapolationResult:
    """Fit ``y = a + b exp(-c lambda)`` by regressing ``log(y - a)`` on lambda.

    Points with ``y <= a`` are excluded. With fewer than two usable points, or a
    non-decaying fit (``c <= 0``), the value at the smallest lambda is returned
    and the result is flagged.
    """
    pts = sorted((float(l), float(y)) for l, y in points)
    fallback_value = pts[0][1] if pts else float("nan")
    usable = [(l, y) for l, y in pts if y > a]
    result: ExtrapolationResult
    if len(usable) < 2 or len({l for l, _ in usable}) < 2:
        result = ExtrapolationResult(fallback_value, None, None, True, "fewer than two usable points")
    else:
        lam = np.array([l for l, _ in usable])
        logy = np.log(np.array([y for _, y in usable]) - a)
        slope, intercept = np.polyfit(lam, logy, 1)
        c = -float(slope)
        b = math.exp(float(intercept))
        if c <= 0:
            result = ExtrapolationResult(fallback_value, b, c, True, "non-decaying fit")
        else:
            result = ExtrapolationResult(a + b, b, c, False)
    if clip:
        result = ExtrapolationResult(min(1.0, max(0.0, result.value)), result.b, result.c, result.fallback, result.reason)
    return result


@dataclass
class ZneEstimate:
    value: float
    points: list[tuple[float, float]]
    extrapolation: ExtrapolationResult
    executions: int
    folded_depths: list[int] = field(default_factory=list)


def mitigated_expectation(
    c: Circuit,
    cfg: ZneConfig,
    noise: NoiseModel,
    k: int,
    seed: int | tuple[int, ...],
    target: str | None = None,
    counter: ExecutionCounter | None = None,
    initial: DensityMatrix | None = None,
) -> ZneEstimate:
    """ZNE estimate of the probability of ``target`` (default: all ones).

    ``c`` must already be native. Every one of the ``len(lambdas) * n_avg``
    evaluations draws its own seeded shot stream.
    """
    target = target or "1" * c.num_qubits
    counter = counter if counter is not None else ExecutionCounter()
    base = tuple(seed) if isinstance(seed, tuple) else (int(seed),)
    start = counter.total
    points, depths = [], []
    for li, lam in enumerate(cfg.lambdas):
        folded = fold_circuit(c, plan_fold(len(c), lam)) if len(c) else c
        depths.append(folded.depth())
        rho = run_density(folded, initial, noise)
        vals = [
            overlap_probability(sample_shots(rho, k, noise, base + (li, r), counter), target)
            for r in range(cfg.n_avg)
        ]
        points.append((lam, float(np.mean(vals))))
    ext = extrapolate(points, cfg.asymptote(c.num_qubits), cfg.clip_to_unit_interval)
    return ZneEstimate(ext.value, points, ext, counter.total - start, depths)
