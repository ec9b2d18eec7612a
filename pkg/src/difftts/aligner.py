"""Monotonic alignment search over a phoneme-by-frame log-prior.

The DP finds the best nondecreasing surjective frame-to-phoneme assignment;
a brute-force enumerator over the same search space serves as its oracle on
small instances.  Ties are broken by staying on the current phoneme as time
advances (switch as late as possible), which selects the maximizer whose
reversed assignment is lexicographically smallest.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

NEG_INF = -np.inf


class InfeasibleError(ValueError):
    """Fewer frames than phonemes."""


class InstanceTooLargeError(ValueError):
    """Brute-force oracle asked to enumerate too large an instance."""


@dataclass
class AlignmentResult:
    assignment: np.ndarray   # length F, phoneme index per frame
    durations: np.ndarray    # length P, frames per phoneme
    log_likelihood: float

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        self.durations = np.asarray(self.durations, dtype=np.int64)
        if np.any(np.diff(self.assignment) < 0):
            raise ValueError("assignment must be nondecreasing")
        if np.any(self.durations < 1):
            raise ValueError("every phoneme needs at least one frame")
        if self.durations.sum() != self.assignment.size:
            raise ValueError("durations must sum to the frame count")


def _durations_from_assignment(assignment: np.ndarray, n_phonemes: int) -> np.ndarray:
    return np.bincount(assignment, minlength=n_phonemes).astype(np.int64)


def _path_score(log_prior: np.ndarray, assignment) -> float:
    # accumulate in frame order so DP and oracle sum bit-identically
    s = 0.0
    for f, p in enumerate(assignment):
        s += float(log_prior[p, f])
    return s


def mas(log_prior: np.ndarray) -> AlignmentResult:
    """Best monotonic surjective alignment by dynamic programming."""
    log_prior = np.asarray(log_prior, dtype=np.float64)
    if log_prior.ndim != 2:
        raise ValueError("log_prior must be P x F")
    if not np.all(np.isfinite(log_prior)):
        raise ValueError("log_prior entries must be finite")
    n_p, n_f = log_prior.shape
    if n_p < 1 or n_f < n_p:
        raise InfeasibleError(f"need F >= P >= 1, got P={n_p}, F={n_f}")

    q = np.full((n_p, n_f), NEG_INF)
    q[0, 0] = log_prior[0, 0]
    for f in range(1, n_f):
        stay = q[:, f - 1]
        move = np.concatenate(([NEG_INF], q[:-1, f - 1]))
        q[:, f] = log_prior[:, f] + np.maximum(stay, move)

    assignment = np.empty(n_f, dtype=np.int64)
    p = n_p - 1
    assignment[n_f - 1] = p
    for f in range(n_f - 1, 0, -1):
        stay = q[p, f - 1]
        move = q[p - 1, f - 1] if p > 0 else NEG_INF
        # ties switch phonemes as late as possible in forward time
        if move >= stay:
            p -= 1
        assignment[f - 1] = p

    durations = _durations_from_assignment(assignment, n_p)
    return AlignmentResult(assignment, durations, _path_score(log_prior, assignment))


def brute_force_align(log_prior: np.ndarray) -> AlignmentResult:
    """Exhaustive oracle over all monotonic surjective assignments."""
    log_prior = np.asarray(log_prior, dtype=np.float64)
    n_p, n_f = log_prior.shape
    if n_p > 6 or n_f > 10:
        raise InstanceTooLargeError(f"P={n_p}, F={n_f} exceeds brute-force bounds")
    if n_p < 1 or n_f < n_p:
        raise InfeasibleError(f"need F >= P >= 1, got P={n_p}, F={n_f}")

    best_score = NEG_INF
    best_key = None
    best_assignment = None
    for switches in combinations(range(1, n_f), n_p - 1):
        assignment = np.zeros(n_f, dtype=np.int64)
        for s in switches:
            assignment[s:] += 1
        score = _path_score(log_prior, assignment)
        key = tuple(assignment[::-1])
        if score > best_score or (score == best_score and key < best_key):
            best_score, best_key, best_assignment = score, key, assignment
    durations = _durations_from_assignment(best_assignment, n_p)
    return AlignmentResult(best_assignment, durations, best_score)


def gaussian_log_prior(mu: np.ndarray, target: np.ndarray) -> np.ndarray:
    """-0.5 * squared distance between each target frame and each phoneme mean."""
    mu = np.asarray(mu, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if mu.ndim != 2 or target.ndim != 2 or mu.shape[1] != target.shape[1]:
        raise ValueError(f"feature dims disagree: {mu.shape} vs {target.shape}")
    diff = target[None, :, :] - mu[:, None, :]
    return -0.5 * np.einsum("pfd,pfd->pf", diff, diff)
