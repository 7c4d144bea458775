"""The 14 statistical measures evaluated on every transform output.

Every feature family in :mod:`radfuse.handcrafted` reduces its transform
output to the same 14 numbers, so this kernel fixes the conventions once:

* order: area, mean, std, skewness, kurtosis, energy, entropy, max, mad,
  median, min, range, rms, uniformity
* std and the central moments use the population (N) denominator
* kurtosis is excess kurtosis (normal -> 0)
* skewness and kurtosis are defined as 0 for (near-)constant input, where
  the second moment vanishes and the usual ratios are 0/0
* entropy and uniformity are computed from the occurrence frequencies of
  the *unique* values, normalized to sum to one; entropy uses log base 2
"""

from __future__ import annotations

import numpy as np

STAT_NAMES = (
    "area",
    "mean",
    "std",
    "skewness",
    "kurtosis",
    "energy",
    "entropy",
    "max",
    "mad",
    "median",
    "min",
    "range",
    "rms",
    "uniformity",
)

N_STATS = len(STAT_NAMES)

# Below this second central moment the vector is treated as constant.
_MOMENT_EPS = 1e-12


def compute_stats(p) -> np.ndarray:
    """Return the 14 measures of ``p`` as a float64 vector in STAT_NAMES order.

    ``p`` is flattened; it must be non-empty and finite.
    """
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("compute_stats: input vector is empty")
    if not np.all(np.isfinite(p)):
        raise ValueError("compute_stats: input contains NaN or Inf")

    n = p.size
    total = float(np.sum(p))
    mean = total / n
    dev = p - mean
    m2 = float(np.mean(dev * dev))
    std = float(np.sqrt(m2))

    if m2 < _MOMENT_EPS:
        skewness = 0.0
        kurtosis = 0.0
    else:
        m3 = float(np.mean(dev**3))
        m4 = float(np.mean(dev**4))
        skewness = m3 / m2**1.5
        kurtosis = m4 / (m2 * m2) - 3.0

    energy = float(np.sum(p * p))
    rms = float(np.sqrt(energy / n))
    mad = float(np.mean(np.abs(dev)))
    p_max = float(np.max(p))
    p_min = float(np.min(p))
    median = float(np.median(p))

    _, counts = np.unique(p, return_counts=True)
    freq = counts / n
    entropy = float(-np.sum(freq * np.log2(freq))) + 0.0  # fold -0.0 to 0.0
    uniformity = float(np.sum(freq * freq))

    return np.array(
        [
            total,
            mean,
            std,
            skewness,
            kurtosis,
            energy,
            entropy,
            p_max,
            mad,
            median,
            p_min,
            p_max - p_min,
            rms,
            uniformity,
        ]
    )
