"""Worker-availability prediction and invitation selection.

Availability is modelled as a mixture of adaptive-bandwidth kernel density
estimates over event timestamps wrapped to seconds-of-week (daily/weekly
routine repeats), one estimate per social scale (the worker, their friends,
everyone). Mixture weights are fitted by EM on the worker's latest events.
Invitations go to offline workers ranked by how many peers they dominate on
(availability, accuracy, speed).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

WEEK_SECONDS = 7 * 24 * 3600.0

FALLBACK_BANDWIDTH = 3600.0
DEFAULT_NEIGHBOR_RATIO = 0.1

EM_TOLERANCE = 1e-6
EM_MAX_ITERATIONS = 200

# Seconds a notified worker has to react; converts a density into an
# acceptance probability for the invitation loop.
ACCEPTANCE_WINDOW_SECONDS = 900.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_QUERY_CHUNK = 512


def wrap_to_week(timestamps: Iterable[float]) -> np.ndarray:
    """Fold raw epoch timestamps onto the [0, week) circle, sorted."""
    wrapped = np.asarray(list(timestamps), dtype=float) % WEEK_SECONDS
    wrapped.sort()
    return wrapped


def circular_offset(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Signed shortest offset a-b on the week circle, in [-week/2, week/2)."""
    delta = (np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % WEEK_SECONDS
    return np.where(delta >= WEEK_SECONDS / 2.0, delta - WEEK_SECONDS, delta)


@dataclass
class EventLog:
    """A worker's activity timestamps, wrapped to seconds-of-week."""

    worker_id: str
    timestamps: np.ndarray

    @classmethod
    def from_raw(cls, worker_id: str, raw_timestamps: Iterable[float]) -> "EventLog":
        return cls(worker_id=worker_id, timestamps=wrap_to_week(raw_timestamps))

    def __post_init__(self) -> None:
        stamps = np.asarray(self.timestamps, dtype=float)
        if stamps.size and (stamps.min() < 0 or stamps.max() >= WEEK_SECONDS):
            raise ValueError("timestamps must be wrapped to [0, week)")
        if stamps.size and np.any(np.diff(stamps) < 0):
            raise ValueError("timestamps must be sorted ascending")
        self.timestamps = stamps


@dataclass
class FriendGraph:
    """Undirected friendship adjacency."""

    adjacency: dict[str, set[str]] = field(default_factory=dict)

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            return
        self.adjacency.setdefault(a, set()).add(b)
        self.adjacency.setdefault(b, set()).add(a)

    def friends_of(self, worker_id: str, steps: int = 1) -> set[str]:
        """Workers within ``steps`` hops, excluding the worker."""
        seen = {worker_id}
        frontier = {worker_id}
        for _ in range(steps):
            frontier = {
                peer
                for node in frontier
                for peer in self.adjacency.get(node, ())
            } - seen
            if not frontier:
                break
            seen |= frontier
        seen.discard(worker_id)
        return seen


def rule_of_thumb_bandwidth(samples: Sequence[float]) -> float:
    """Gaussian-reference bandwidth 1.06 * std * n^(-1/5).

    Fewer than two samples or zero spread fall back to one hour, which keeps
    sparse histories usable instead of collapsing the kernel.
    """
    data = np.asarray(samples, dtype=float)
    if data.size < 2:
        return FALLBACK_BANDWIDTH
    spread = float(np.std(data, ddof=1))
    if spread == 0.0:
        return FALLBACK_BANDWIDTH
    return 1.06 * spread * data.size ** (-0.2)


@dataclass
class KdeScale:
    """One scale of the availability mixture: samples plus per-sample bandwidths."""

    samples: np.ndarray
    bandwidths: np.ndarray

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=float)
        self.bandwidths = np.asarray(self.bandwidths, dtype=float)
        if self.samples.shape != self.bandwidths.shape:
            raise ValueError("one bandwidth per sample is required")
        if self.samples.size and np.any(self.bandwidths <= 0):
            raise ValueError("bandwidths must be positive")

    @property
    def size(self) -> int:
        return int(self.samples.size)

    def density(self, at: Sequence[float] | float) -> np.ndarray:
        """Mixture-of-kernels density at the given seconds-of-week points.

        Kernels are Gaussians wrapped around the week circle (images summed
        out to six standard deviations), so every kernel, and therefore the
        scale, integrates to one over the wrapped week no matter how wide
        the adaptive bandwidths get.
        """
        query = np.atleast_1d(np.asarray(at, dtype=float)) % WEEK_SECONDS
        if self.samples.size == 0:
            return np.zeros_like(query)
        images = int(math.ceil(6.0 * float(self.bandwidths.max()) / WEEK_SECONDS))
        shifts = np.arange(-images, images + 1) * WEEK_SECONDS
        out = np.empty_like(query)
        h = self.bandwidths[np.newaxis, :, np.newaxis]
        centered = self.samples[np.newaxis, :, np.newaxis] + shifts[np.newaxis, np.newaxis, :]
        for start in range(0, query.size, _QUERY_CHUNK):
            chunk = query[start : start + _QUERY_CHUNK, np.newaxis, np.newaxis]
            z = (chunk - centered) / h
            kernels = np.exp(-0.5 * z * z) / (_SQRT_2PI * h)
            out[start : start + _QUERY_CHUNK] = kernels.sum(axis=2).mean(axis=1)
        return out


def adaptive_kde_scale(
    timestamps: Sequence[float], neighbor_ratio: float = DEFAULT_NEIGHBOR_RATIO
) -> KdeScale:
    """Build a scale with per-sample bandwidths from temporal nearest neighbours.

    Each sample's bandwidth comes from the rule of thumb applied to itself
    plus its ceil(ratio * n) nearest neighbours in circular time.
    """
    samples = wrap_to_week(timestamps)
    n = samples.size
    if n == 0:
        return KdeScale(samples=samples, bandwidths=np.empty(0))
    k = max(1, math.ceil(neighbor_ratio * n))
    bandwidths = np.empty(n)
    distances = np.abs(circular_offset(samples[:, np.newaxis], samples[np.newaxis, :]))
    for i in range(n):
        order = np.argsort(distances[i], kind="stable")
        neighbourhood = order[: min(k + 1, n)]
        # express neighbours relative to the sample so the spread is not
        # distorted by the wrap seam
        relative = circular_offset(samples[neighbourhood], samples[i])
        bandwidths[i] = rule_of_thumb_bandwidth(relative)
    return KdeScale(samples=samples, bandwidths=bandwidths)


def adaptive_kde(scale: KdeScale, at: Sequence[float] | float) -> np.ndarray:
    """Density of one scale at the given timestamps (seconds-of-week)."""
    return scale.density(at)


@dataclass
class AvailabilityModel:
    """Smooth availability estimate: simplex-weighted mixture of KDE scales."""

    scales: list[KdeScale]
    weights: np.ndarray
    log_likelihoods: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.scales) != self.weights.size:
            raise ValueError("one weight per scale is required")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a simplex")

    def density(self, at: Sequence[float] | float) -> np.ndarray:
        query = np.atleast_1d(np.asarray(at, dtype=float))
        total = np.zeros_like(query)
        for weight, scale in zip(self.weights, self.scales):
            if weight > 0.0:
                total += weight * scale.density(query)
        return total


def availability_probability(model: AvailabilityModel, at: float) -> float:
    """Mixture density at one timestamp; the ranking quantity for invitations.

    This is a density (per second), not a probability; the notify loop
    converts it through the acceptance window.
    """
    return float(model.density(at)[0])


def em_fit(
    scales: Sequence[KdeScale],
    validation: Sequence[float],
    tolerance: float = EM_TOLERANCE,
    max_iterations: int = EM_MAX_ITERATIONS,
) -> tuple[np.ndarray, list[float]]:
    """Fit mixture weights by EM on held-out event timestamps.

    Returns the simplex weights and the per-iteration validation
    log-likelihood trail, which EM guarantees to be non-decreasing.
    Validation points with zero density under every scale are dropped with
    a warning.
    """
    count = len(scales)
    if count == 0:
        raise ValueError("at least one scale is required")
    points = wrap_to_week(validation)
    weights = np.full(count, 1.0 / count)
    if points.size == 0:
        return weights, []
    densities = np.stack([scale.density(points) for scale in scales], axis=1)
    usable = densities.sum(axis=1) > 0.0
    if not np.all(usable):
        warnings.warn(
            f"dropping {int((~usable).sum())} validation points with zero density "
            "under every scale",
            stacklevel=2,
        )
        densities = densities[usable]
    if densities.shape[0] == 0:
        return weights, []
    if count == 1:
        return np.array([1.0]), [float(np.log(densities[:, 0]).sum())]

    trail: list[float] = []
    for _ in range(max_iterations):
        mixture = densities @ weights
        trail.append(float(np.log(mixture).sum()))
        responsibilities = densities * weights / mixture[:, np.newaxis]
        updated = responsibilities.mean(axis=0)
        if len(trail) >= 2 and trail[-1] < trail[-2] - 1e-9:
            raise RuntimeError("EM log-likelihood decreased")
        if np.max(np.abs(updated - weights)) < tolerance:
            weights = updated
            break
        weights = updated
    trail.append(float(np.log(densities @ weights).sum()))
    return weights, trail


def split_validation(
    own_events: Sequence[float],
    validation_fraction: float = 0.3,
    max_validation: int = 50,
) -> tuple[list[float], list[float]]:
    """Split a worker's own events into (training, held-out validation).

    The latest slice (at least one event, capped) is held out for fitting
    the smoothing factors.
    """
    own = sorted(own_events)
    if not own:
        return [], []
    held_out = max(1, min(max_validation, round(validation_fraction * len(own))))
    return own[: len(own) - held_out], own[len(own) - held_out:]


def fit_availability_model(
    own_events: Sequence[float],
    friend_events: Sequence[float],
    global_events: Sequence[float],
    neighbor_ratio: float = DEFAULT_NEIGHBOR_RATIO,
    validation_fraction: float = 0.3,
    max_validation: int = 50,
    extra_scale_events: Optional[Sequence[Sequence[float]]] = None,
) -> AvailabilityModel:
    """Build and fit the default three-scale model for one worker.

    Scales are the worker's own training events, the friend circle plus the
    worker, and the whole population; optional extra scales (for example
    two-step friends) slot in before the global one. The latest slice of the
    worker's own events is held out to fit the smoothing factors; a worker
    with no events keeps uniform weights.
    """
    training, validation = split_validation(
        own_events, validation_fraction, max_validation
    )

    scale_inputs: list[Sequence[float]] = [
        training,
        sorted(list(friend_events) + list(training)),
    ]
    for extra in extra_scale_events or ():
        scale_inputs.append(sorted(extra))
    scale_inputs.append(sorted(global_events))

    scales = [adaptive_kde_scale(events, neighbor_ratio) for events in scale_inputs]
    weights, trail = em_fit(scales, validation)
    return AvailabilityModel(scales=scales, weights=weights, log_likelihoods=trail)


@dataclass(frozen=True)
class WorkerProspect:
    """The three quantities dominance compares, precomputed at one timestamp."""

    worker_id: str
    availability: float
    mean_accuracy: float
    mean_response: float


def dominates(a: WorkerProspect, b: WorkerProspect) -> bool:
    """Strictly more available, at least as accurate, at most as slow."""
    return (
        a.availability > b.availability
        and a.mean_accuracy >= b.mean_accuracy
        and a.mean_response <= b.mean_response
    )


def ranking_score(prospect: WorkerProspect, cohort: Sequence[WorkerProspect]) -> int:
    """Number of cohort members this worker dominates (pairwise scan)."""
    return sum(
        1
        for other in cohort
        if other.worker_id != prospect.worker_id and dominates(prospect, other)
    )


def acceptance_probability(
    availability_density: float, window: float = ACCEPTANCE_WINDOW_SECONDS
) -> float:
    """Clamp density times the response window into a probability."""
    return min(1.0, max(0.0, availability_density * window))


def worker_notify(
    prospects: Sequence[WorkerProspect],
    expected_acceptances: float,
    window: float = ACCEPTANCE_WINDOW_SECONDS,
) -> list[WorkerProspect]:
    """Pick offline workers to invite until expected acceptances cover the need.

    Workers are taken in dominance-rank order (ties: higher availability,
    then id); each selection decrements the remaining need by the worker's
    acceptance probability. If the pool runs out first, everyone is invited.
    """
    if expected_acceptances <= 0:
        raise ValueError("expected acceptances must be positive")
    scores = {p.worker_id: ranking_score(p, prospects) for p in prospects}
    ordered = sorted(
        prospects,
        key=lambda p: (-scores[p.worker_id], -p.availability, p.worker_id),
    )
    invited: list[WorkerProspect] = []
    remaining = expected_acceptances
    for prospect in ordered:
        if remaining <= 0:
            break
        invited.append(prospect)
        remaining -= acceptance_probability(prospect.availability, window)
    return invited
