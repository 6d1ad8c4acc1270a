"""SSIM class schemes: equal K-bin partitions and the clinical 3-class scheme.

Equal bins are half-open [i/K, (i+1)/K) with the top bin closed, numbered
1..K from worst to best. The clinical scheme numbers the other way round
(1 = best): class 1 is [0.85, 1.00], class 2 [0.60, 0.85), class 3
[0.00, 0.60).
"""

from __future__ import annotations

from dataclasses import dataclass

CLINICAL_EDGES = (0.0, 0.60, 0.85, 1.0)


@dataclass(frozen=True)
class ClassScheme:
    kind: str  # "equal" or "clinical"
    edges: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("equal", "clinical"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.edges[0] != 0.0 or self.edges[-1] != 1.0:
            raise ValueError("edges must start at 0.0 and end at 1.0")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError(f"edges must be strictly increasing, got {self.edges}")

    @property
    def n_classes(self) -> int:
        return len(self.edges) - 1

    @property
    def labels(self) -> list[int]:
        return list(range(1, self.n_classes + 1))


def equal_bins(k: int) -> ClassScheme:
    if k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    return ClassScheme("equal", tuple(i / k for i in range(k + 1)))


def clinical() -> ClassScheme:
    return ClassScheme("clinical", CLINICAL_EDGES)


def scheme_from_name(name: str) -> ClassScheme:
    """CLI spelling: '3', '5', '10' or 'clinical'."""
    if name == "clinical":
        return clinical()
    return equal_bins(int(name))


def bin_of(ssim: float, scheme: ClassScheme) -> int:
    """Class label of an SSIM value under a scheme."""
    if not 0.0 <= ssim <= 1.0:
        raise ValueError(f"ssim must be in [0, 1], got {ssim}")
    k = scheme.n_classes
    if scheme.kind == "equal":
        return min(int(ssim * k), k - 1) + 1
    # clinical: find the half-open interval, then reverse so 1 = best
    idx = k - 1
    for i in range(k - 1):
        if ssim < scheme.edges[i + 1]:
            idx = i
            break
    return k - idx


def class_ranges(scheme: ClassScheme) -> list[tuple[float, float]]:
    """(lo, hi) interval per class label, in label order."""
    intervals = list(zip(scheme.edges, scheme.edges[1:]))
    if scheme.kind == "clinical":
        intervals.reverse()
    return intervals


def range_label(scheme: ClassScheme, label: int) -> str:
    """Printable '[lo - hi]' to 2 decimals for report rows."""
    lo, hi = class_ranges(scheme)[label - 1]
    return f"[{lo:.2f} - {hi:.2f}]"
