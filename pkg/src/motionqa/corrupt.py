"""Retrospective 2D motion corruption in k-space.

Two algorithms share one mechanism: rigid-transform the slice, transform
both versions to centered k-space, and mix their phase-encode lines.

* composite: partition the phase-encode (row) axis into contiguous blocks
  at the motion times and take each block from the corresponding moved
  image, as if the subject moved between acquisition segments.
* lines: replace contiguous runs of phase-encode lines with the lines of a
  moved image, one run per motion event, sparing the central 8% of k-space
  so gross contrast survives.

A scalar severity 1..5 maps to parameter bands: max rotation 2*s degrees,
max translation 2*s px, ceil(s/2) motion events, line fraction 0.08*s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imagecore import Slice2D, normalize

MAX_ROTATION_DEG = 15.0
MAX_TRANSLATION_PX = 12.0
MAX_SEVERITY = 5
ROTATION_PER_SEVERITY = 2.0
TRANSLATION_PER_SEVERITY = 2.0
LINE_FRACTION_PER_SEVERITY = 0.08
CENTRAL_EXCLUDED_FRACTION = 0.08
MAX_LINE_EVENTS = 6
MAX_LINE_FRACTION = 0.5
TIME_FRACTION_RANGE = (0.05, 0.95)

ALGORITHM_COMPOSITE = "composite"
ALGORITHM_LINES = "lines"
ALGORITHM_NONE = "none"


@dataclass(frozen=True)
class RigidMotion2D:
    """In-plane rigid head motion at a point in acquisition time."""

    rotation_deg: float
    translation_px: tuple[float, float]
    time_fraction: float

    def __post_init__(self) -> None:
        if abs(self.rotation_deg) > MAX_ROTATION_DEG:
            raise ValueError(f"|rotation| must be <= {MAX_ROTATION_DEG} deg, got {self.rotation_deg}")
        if len(self.translation_px) != 2 or any(abs(t) > MAX_TRANSLATION_PX for t in self.translation_px):
            raise ValueError(f"|translation| must be <= {MAX_TRANSLATION_PX} px per axis, got {self.translation_px}")
        if not 0.0 < self.time_fraction < 1.0:
            raise ValueError(f"time fraction must be in (0, 1), got {self.time_fraction}")

    def to_json_dict(self) -> dict:
        return {
            "rotation_deg": self.rotation_deg,
            "translation_px": list(self.translation_px),
            "time_fraction": self.time_fraction,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RigidMotion2D":
        return cls(
            rotation_deg=float(d["rotation_deg"]),
            translation_px=(float(d["translation_px"][0]), float(d["translation_px"][1])),
            time_fraction=float(d["time_fraction"]),
        )


@dataclass(frozen=True)
class CorruptionRecord:
    """Everything needed to replay one corruption bit-exactly.

    For the lines algorithm, affected_lines[k] holds the half-open row
    ranges replaced with motions[k]'s spectrum (a run split by the central
    exclusion band yields two ranges).
    """

    algorithm: str
    severity: int
    motions: tuple[RigidMotion2D, ...] = ()
    affected_lines: tuple[tuple[tuple[int, int], ...], ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.algorithm not in (ALGORITHM_COMPOSITE, ALGORITHM_LINES, ALGORITHM_NONE):
            raise ValueError(f"unknown corruption algorithm {self.algorithm!r}")
        if not 1 <= self.severity <= MAX_SEVERITY:
            raise ValueError(f"severity must be 1..{MAX_SEVERITY}, got {self.severity}")
        tfs = [m.time_fraction for m in self.motions]
        if any(b <= a for a, b in zip(tfs, tfs[1:])):
            raise ValueError(f"motion time fractions must be strictly increasing, got {tfs}")
        if self.algorithm == ALGORITHM_LINES and len(self.affected_lines) != len(self.motions):
            raise ValueError("lines algorithm needs one range group per motion")

    def to_json_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "severity": self.severity,
            "motions": [m.to_json_dict() for m in self.motions],
            "affected_lines": [[list(r) for r in group] for group in self.affected_lines],
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CorruptionRecord":
        return cls(
            algorithm=str(d["algorithm"]),
            severity=int(d["severity"]),
            motions=tuple(RigidMotion2D.from_json_dict(m) for m in d["motions"]),
            affected_lines=tuple(
                tuple((int(a), int(b)) for a, b in group) for group in d["affected_lines"]
            ),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class CorruptConfig:
    enabled: bool = True
    max_severity: int = MAX_SEVERITY

    def __post_init__(self) -> None:
        if not 1 <= self.max_severity <= MAX_SEVERITY:
            raise ValueError(f"max severity must be 1..{MAX_SEVERITY}, got {self.max_severity}")


def fft2(img: np.ndarray) -> np.ndarray:
    """Centered (DC at array center) unitary 2D Fourier transform."""
    return np.fft.fftshift(np.fft.fft2(img, norm="ortho"))


def ifft2(spec: np.ndarray) -> np.ndarray:
    """Inverse of fft2; returns the complex image."""
    return np.fft.ifft2(np.fft.ifftshift(spec), norm="ortho")


def rigid_transform(pixels: np.ndarray, motion: RigidMotion2D) -> np.ndarray:
    """Rotate about the image center, then translate; bilinear, zero fill."""
    theta = math.radians(motion.rotation_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    rot = np.array([[cos_t, -sin_t], [sin_t, cos_t]])
    center = (np.asarray(pixels.shape, dtype=np.float64) - 1.0) / 2.0
    shift = np.asarray(motion.translation_px, dtype=np.float64)
    # affine_transform maps output coords y to input coords rot.T @ y + offset
    offset = center - rot.T @ (center + shift)
    return ndimage.affine_transform(pixels, rot.T, offset=offset, order=1, mode="constant", cval=0.0, prefilter=False)


def severity_bands(severity: int) -> tuple[float, float, int, float]:
    """(max rotation deg, max translation px, motion count, line fraction)."""
    if not 1 <= severity <= MAX_SEVERITY:
        raise ValueError(f"severity must be 1..{MAX_SEVERITY}, got {severity}")
    return (
        ROTATION_PER_SEVERITY * severity,
        TRANSLATION_PER_SEVERITY * severity,
        math.ceil(severity / 2),
        LINE_FRACTION_PER_SEVERITY * severity,
    )


def _signed_band_draw(rng: np.random.Generator, bound: float) -> float:
    """One magnitude draw in [-bound, bound], square-root biased.

    A single uniform u in [-1, 1] maps to sign(u)*sqrt(|u|)*bound: magnitudes
    lean toward the band edge (so severities separate cleanly) while still
    reaching zero (so near-identity corruptions stay reachable).
    """
    u = float(rng.uniform(-1.0, 1.0))
    return float(np.sign(u) * np.sqrt(abs(u)) * bound)


def draw_motions(
    rng: np.random.Generator,
    n: int,
    max_rotation_deg: float,
    max_translation_px: float,
) -> list[RigidMotion2D]:
    """n motions with sorted time fractions and banded magnitudes.

    Draw order: n time fractions (sorted afterwards), then per motion the
    rotation and the two translation components.
    """
    tfs = np.sort(rng.uniform(*TIME_FRACTION_RANGE, size=n))
    motions = []
    for k in range(n):
        rot = _signed_band_draw(rng, max_rotation_deg)
        tr = _signed_band_draw(rng, max_translation_px)
        tc = _signed_band_draw(rng, max_translation_px)
        motions.append(RigidMotion2D(rot, (tr, tc), float(tfs[k])))
    return motions


def apply_composite(pixels: np.ndarray, motions: list[RigidMotion2D] | tuple[RigidMotion2D, ...]) -> np.ndarray:
    """Deterministic composite corruption core (unnormalized magnitude)."""
    h = pixels.shape[0]
    specs = [fft2(pixels)]
    bounds = [0]
    for m in motions:
        specs.append(fft2(rigid_transform(pixels, m)))
        bounds.append(int(round(m.time_fraction * h)))
    bounds.append(h)
    bounds = list(np.maximum.accumulate(bounds))

    out = np.empty_like(specs[0])
    for i, spec in enumerate(specs):
        out[bounds[i]:bounds[i + 1], :] = spec[bounds[i]:bounds[i + 1], :]
    return np.abs(ifft2(out))


def motion_corrupt_composite(s: Slice2D, motions: list[RigidMotion2D] | tuple[RigidMotion2D, ...]) -> Slice2D:
    """Segment k-space at the motion times, one block per head position."""
    if not 1 <= len(motions) <= 4:
        raise ValueError(f"composite corruption takes 1..4 motions, got {len(motions)}")
    tfs = [m.time_fraction for m in motions]
    if any(b <= a for a, b in zip(tfs, tfs[1:])):
        raise ValueError(f"motion time fractions must be strictly increasing, got {tfs}")
    return normalize(apply_composite(s.pixels, motions))


def central_exclusion_band(height: int) -> tuple[int, int]:
    """Half-open row range around DC that line replacement never touches."""
    half = CENTRAL_EXCLUDED_FRACTION / 2.0
    return int(math.floor(height / 2 - half * height)), int(math.ceil(height / 2 + half * height))


def _subtract_band(start: int, stop: int, band: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    b0, b1 = band
    pieces = []
    if start < min(stop, b0):
        pieces.append((start, min(stop, b0)))
    if max(start, b1) < stop:
        pieces.append((max(start, b1), stop))
    return tuple(pieces)


def draw_line_events(
    rng: np.random.Generator,
    height: int,
    events: int,
    line_fraction: float,
    max_rotation_deg: float,
    max_translation_px: float,
) -> tuple[list[RigidMotion2D], list[tuple[tuple[int, int], ...]]]:
    """Motion + affected-row ranges for each replacement event.

    Each event replaces one contiguous run of ~line_fraction/events of the
    rows, minus the central exclusion band. Draw order per event: rotation,
    translation row/col, time fraction, then the run start line. Events are
    sorted by time fraction afterwards.
    """
    band = central_exclusion_band(height)
    run = max(1, int(round(line_fraction * height / events)))
    run = min(run, height)
    drawn = []
    for _ in range(events):
        rot = _signed_band_draw(rng, max_rotation_deg)
        tr = _signed_band_draw(rng, max_translation_px)
        tc = _signed_band_draw(rng, max_translation_px)
        tf = float(rng.uniform(*TIME_FRACTION_RANGE))
        start = int(rng.integers(0, height - run + 1))
        drawn.append((RigidMotion2D(rot, (tr, tc), tf), _subtract_band(start, start + run, band)))
    drawn.sort(key=lambda item: item[0].time_fraction)
    return [m for m, _ in drawn], [r for _, r in drawn]


def apply_line_replacement(
    pixels: np.ndarray,
    motions: list[RigidMotion2D] | tuple[RigidMotion2D, ...],
    affected_lines: list[tuple[tuple[int, int], ...]] | tuple[tuple[tuple[int, int], ...], ...],
) -> np.ndarray:
    """Deterministic line-replacement core (unnormalized magnitude)."""
    spec = fft2(pixels).copy()
    for motion, ranges in zip(motions, affected_lines):
        if not ranges:
            continue
        moved = fft2(rigid_transform(pixels, motion))
        for a, b in ranges:
            if not 0 <= a <= b <= pixels.shape[0]:
                raise ValueError(f"affected line range ({a}, {b}) outside [0, {pixels.shape[0]})")
            spec[a:b, :] = moved[a:b, :]
    return np.abs(ifft2(spec))


def motion_corrupt_lines(
    s: Slice2D,
    events: int,
    line_fraction: float,
    rng: np.random.Generator,
    max_rotation_deg: float = MAX_SEVERITY * ROTATION_PER_SEVERITY,
    max_translation_px: float = MAX_SEVERITY * TRANSLATION_PER_SEVERITY,
) -> tuple[Slice2D, list[RigidMotion2D], list[tuple[tuple[int, int], ...]]]:
    """Replace random runs of phase-encode lines with moved-image lines."""
    if not 1 <= events <= MAX_LINE_EVENTS:
        raise ValueError(f"events must be 1..{MAX_LINE_EVENTS}, got {events}")
    if not 0.0 < line_fraction <= MAX_LINE_FRACTION:
        raise ValueError(
            f"line fraction must be in (0, {MAX_LINE_FRACTION}] (labels are uninformative beyond), got {line_fraction}"
        )
    motions, ranges = draw_line_events(rng, s.height, events, line_fraction, max_rotation_deg, max_translation_px)
    return normalize(apply_line_replacement(s.pixels, motions, ranges)), motions, ranges


def corrupt_random(
    s: Slice2D,
    rng: np.random.Generator,
    config: CorruptConfig = CorruptConfig(),
    seed: int = 0,
) -> tuple[Slice2D, CorruptionRecord]:
    """Draw algorithm (uniform), severity (uniform 1..max), and parameters
    within the severity bands; return the corrupted slice plus its record.
    """
    if not config.enabled:
        return s, CorruptionRecord(ALGORITHM_NONE, severity=1, seed=seed)

    algorithm = (ALGORITHM_COMPOSITE, ALGORITHM_LINES)[int(rng.integers(0, 2))]
    severity = int(rng.integers(1, config.max_severity + 1))
    max_rot, max_trans, n_motions, line_fraction = severity_bands(severity)

    if algorithm == ALGORITHM_COMPOSITE:
        motions = draw_motions(rng, n_motions, max_rot, max_trans)
        out = normalize(apply_composite(s.pixels, motions))
        record = CorruptionRecord(algorithm, severity, tuple(motions), seed=seed)
    else:
        motions, ranges = draw_line_events(rng, s.height, n_motions, line_fraction, max_rot, max_trans)
        out = normalize(apply_line_replacement(s.pixels, motions, ranges))
        record = CorruptionRecord(algorithm, severity, tuple(motions), tuple(ranges), seed=seed)
    return out, record


def replay(s: Slice2D, record: CorruptionRecord) -> Slice2D:
    """Re-apply a recorded corruption to the same input, bit-exactly."""
    if record.algorithm == ALGORITHM_NONE:
        return s
    if record.algorithm == ALGORITHM_COMPOSITE:
        return normalize(apply_composite(s.pixels, record.motions))
    return normalize(apply_line_replacement(s.pixels, record.motions, record.affected_lines))
