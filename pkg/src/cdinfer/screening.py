"""Inference on a discrete, totally ordered parameter space.

The operating matrix of a diagnostic test (columns: the sampling distribution
of the result under each status) supports the same inferential machinery as a
continuous model: one-sided p-values are tail sums of the observed column at
or beyond the observed result, confidence levels restate the p-values that
rule out the neighboring statuses, and Bayes/likelihood/plug-in tables are
simple row operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateMassError, DomainError

__all__ = [
    "OperatingMatrix",
    "TailPValues",
    "one_sided_pvalues",
    "confidence_levels",
    "posterior",
    "normalized_likelihood",
    "plugin_sampling",
]

COLUMN_SUM_TOL = 1e-9


@dataclass(frozen=True)
class OperatingMatrix:
    """K x K operating characteristics: column c is the distribution of the
    test result when the true status is statuses[c]. Both label lists are in
    increasing order of severity, which defines "as or more extreme"."""

    statuses: tuple[str, ...]
    results: tuple[str, ...]
    probs: np.ndarray

    def __init__(self, statuses: Sequence[str], results: Sequence[str], probs):
        object.__setattr__(self, "statuses", tuple(statuses))
        object.__setattr__(self, "results", tuple(results))
        p = np.asarray(probs, dtype=float)
        k = len(self.statuses)
        if len(self.results) != k:
            raise DomainError("statuses and results must have equal length")
        if len(set(self.statuses)) != k or len(set(self.results)) != k:
            raise DomainError("labels must be unique")
        if p.shape != (k, k):
            raise DomainError(f"probs must be {k}x{k}, got {p.shape}")
        if np.any(p < 0):
            raise DomainError("probabilities must be nonnegative")
        colsums = p.sum(axis=0)
        if np.any(np.abs(colsums - 1.0) > COLUMN_SUM_TOL):
            bad = int(np.argmax(np.abs(colsums - 1.0)))
            raise DomainError(
                f"column {self.statuses[bad]!r} sums to {colsums[bad]:.12f}, not 1"
            )
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return len(self.statuses)

    def tail_ge(self, result_idx: int, status_idx: int) -> float:
        """Probability of the result or anything more extreme upward."""
        return float(self.probs[result_idx:, status_idx].sum())

    def tail_le(self, result_idx: int, status_idx: int) -> float:
        """Probability of the result or anything more extreme downward."""
        return float(self.probs[: result_idx + 1, status_idx].sum())


@dataclass(frozen=True)
class TailPValues:
    """One or two one-sided p-values for a (result, status) cell.

    Interior diagonal cells carry both tails; off-diagonal cells carry the
    tail pointing away from the diagonal; extreme diagonal cells drop the
    saturated tail. ``display`` prints the pair the way the table does.
    """

    upper: float | None
    lower: float | None

    @property
    def display(self) -> str:
        parts = [f"{v:.2f}" for v in (self.upper, self.lower) if v is not None]
        return "|".join(parts)

    def single(self) -> float:
        """The only p-value in the cell (raises if the cell holds a pair)."""
        vals = [v for v in (self.upper, self.lower) if v is not None]
        if len(vals) != 1:
            raise DomainError(f"cell holds {len(vals)} p-values, not 1")
        return vals[0]


def one_sided_pvalues(m: OperatingMatrix) -> dict[tuple[str, str], TailPValues]:
    """One-sided p-value table, read horizontally per observed result.

    For a result r: statuses below the diagonal are tested with the upper
    tail (the result or more extreme upward), statuses above with the lower
    tail. The diagonal cell reports both tails when both are informative;
    a tail that necessarily covers the whole column (extreme results) is
    dropped, except in the degenerate 1x1 case where the p-value is 1.
    """
    out: dict[tuple[str, str], TailPValues] = {}
    k = m.k
    for r in range(k):
        for c in range(k):
            if c < r:
                cell = TailPValues(upper=m.tail_ge(r, c), lower=None)
            elif c > r:
                cell = TailPValues(upper=None, lower=m.tail_le(r, c))
            else:
                upper = m.tail_ge(r, c) if r > 0 else None
                lower = m.tail_le(r, c) if r < k - 1 else None
                if upper is None and lower is None:
                    cell = TailPValues(upper=1.0, lower=None)
                else:
                    cell = TailPValues(upper=upper, lower=lower)
            out[(m.results[r], m.statuses[c])] = cell
    return out


def confidence_levels(m: OperatingMatrix) -> dict[str, tuple[str, float]]:
    """Confidence level in the diagonal status for each result.

    The level restates the p-values ruling out the adjacent statuses: one
    minus the upper-tail p at the status just below and the lower-tail p at
    the status just above (each term present only when that side exists).
    """
    out: dict[str, tuple[str, float]] = {}
    for r in range(m.k):
        level = 1.0
        if r > 0:
            level -= m.tail_ge(r, r - 1)
        if r < m.k - 1:
            level -= m.tail_le(r, r + 1)
        out[m.results[r]] = (m.statuses[r], level)
    return out


def posterior(m: OperatingMatrix, prior_weights: Sequence[float]) -> np.ndarray:
    """Row-normalized Bayes table for a prior given as nonnegative weights."""
    w = np.asarray(prior_weights, dtype=float)
    if w.shape != (m.k,):
        raise DomainError(f"need {m.k} prior weights, got {w.shape}")
    if np.any(w < 0) or not np.any(w > 0):
        raise DomainError("prior weights must be nonnegative and not all zero")
    table = m.probs * w
    rowsums = table.sum(axis=1, keepdims=True)
    if np.any(rowsums == 0):
        r = int(np.argmax(rowsums == 0))
        raise DegenerateMassError(f"result {m.results[r]!r} has zero prior mass")
    return table / rowsums


def normalized_likelihood(m: OperatingMatrix) -> np.ndarray:
    """Each row of the operating matrix divided by its sum (a 1:1 prior)."""
    return posterior(m, np.ones(m.k))


def plugin_sampling(
    m: OperatingMatrix, mapping: Mapping[str, str] | None = None
) -> np.ndarray:
    """Sampling distribution with each result's matched status plugged in.

    Row r of the output is the sampling column of the status assigned to
    result r (by default the diagonal match), so the operating matrix is
    transposed across the parameter space and rows sum to 1.
    """
    if mapping is None:
        idx = list(range(m.k))
    else:
        try:
            idx = [m.statuses.index(mapping[r]) for r in m.results]
        except KeyError as e:
            raise DomainError(f"mapping misses result {e.args[0]!r}") from None
        except ValueError:
            raise DomainError("mapping targets an unknown status") from None
    return np.stack([m.probs[:, j] for j in idx])
