"""Single-threaded throughput microbenchmarks for the activation kernels.

Inputs are seeded uniforms over [-6, 6] so every piecewise branch is exercised;
the checksum over all timed outputs keeps the work observable and ties timing to
real computation. Median over repeats is reported to shrug off scheduler noise.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .kernels import ActivationKind, activate_batch
from .tensor import Rng

MIN_ELEMENTS = 1_000_000
MIN_REPEATS = 3


@dataclass(frozen=True)
class BenchResult:
    kind: ActivationKind
    n_elements: int
    repeats: int
    median_ns_per_element: float
    checksum: float
    repeat_ns: tuple[int, ...]  # raw per-repeat wall times backing the median


def make_bench_input(n_elements: int, seed: int) -> np.ndarray:
    """The benchmark buffer: n seeded uniforms in [-6, 6] as float32."""
    u = Rng(seed).uniforms(n_elements)
    return (u * 12.0 - 6.0).astype(np.float32)


def bench_activation(kind: ActivationKind, n_elements: int, repeats: int, seed: int) -> BenchResult:
    """Time `repeats` full activate_batch passes over one seeded buffer.

    Two untimed warmup passes run first. The checksum accumulates the float64 sum
    of every timed pass's outputs, so identical seeds give identical checksums.
    """
    if n_elements < MIN_ELEMENTS:
        raise DomainError(f"n_elements must be >= {MIN_ELEMENTS} for stable medians, got {n_elements}")
    if repeats < MIN_REPEATS:
        raise DomainError(f"repeats must be >= {MIN_REPEATS}, got {repeats}")
    xs = make_bench_input(n_elements, seed)
    for _ in range(2):
        activate_batch(kind, xs)
    totals = []
    checksum = 0.0
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        out = activate_batch(kind, xs)
        t1 = time.perf_counter_ns()
        totals.append(t1 - t0)
        checksum += float(out.sum(dtype=np.float64))
    median_ns = float(statistics.median(totals))
    return BenchResult(
        kind=kind,
        n_elements=n_elements,
        repeats=repeats,
        median_ns_per_element=median_ns / n_elements,
        checksum=checksum,
        repeat_ns=tuple(totals),
    )


def compare(
    kinds: list[ActivationKind], n_elements: int, repeats: int, seed: int
) -> tuple[list[BenchResult], list[float]]:
    """Bench each kind (input order preserved) and report medians relative to ReLU.

    If ReLU is not among the kinds it is benched once extra as the hidden reference.
    """
    if not kinds:
        raise DomainError("kinds list must not be empty")
    results = [bench_activation(kind, n_elements, repeats, seed) for kind in kinds]
    relu = next((r for r in results if r.kind is ActivationKind.RELU), None)
    if relu is None:
        relu = bench_activation(ActivationKind.RELU, n_elements, repeats, seed)
    ratios = [r.median_ns_per_element / relu.median_ns_per_element for r in results]
    return results, ratios


def save_bench_csv(results: list[BenchResult], ratios: list[float], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "n", "repeats", "median_ns_per_elem", "ratio_vs_relu"])
        for res, ratio in zip(results, ratios):
            writer.writerow(
                [res.kind.value, res.n_elements, res.repeats, repr(res.median_ns_per_element), repr(ratio)]
            )
