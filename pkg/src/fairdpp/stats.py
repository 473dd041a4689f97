"""Paired one-sided t-tests and standard errors for experiment summaries."""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from fairdpp.errors import InputError


def paired_one_sided_t_test(a: ArrayLike, b: ArrayLike) -> float:
    """p-value for ``H1: mean(a - b) > 0`` from a paired Student t-test.

    Zero-variance differences have no t statistic; they return 0 when every
    difference is positive, 1 when negative and 0.5 when all are zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"paired samples must be equal-length vectors, got {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise InputError("a paired t-test needs at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0 or not math.isfinite(sd):
        if mean > 0:
            return 0.0
        if mean < 0:
            return 1.0
        return 0.5
    t = mean / (sd / math.sqrt(n))
    return float(stats.t.sf(t, df=n - 1))


def mean_sem(values: ArrayLike) -> tuple[float, float]:
    """Mean and standard error ``sd / sqrt(n)`` (sample sd, ``ddof=1``)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InputError("standard error needs at least two values")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
