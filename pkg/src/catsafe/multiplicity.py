"""Multiple-testing control across categories: Bonferroni adjustment and the
simulation estimate of the family-wise error rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InputError


@dataclass(frozen=True)
class MultiplicityReport:
    L: int
    alpha: float
    adjusted_p: np.ndarray
    n_significant: int


def bonferroni(p, alpha: float = 0.05) -> MultiplicityReport:
    """adjusted_l = min(1, L * p_l); significance counted at `alpha`."""
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise InputError("no p-values to adjust")
    if np.any((p <= 0) | (p > 1)):
        raise InputError("p-values must lie in (0, 1]")
    L = p.size
    adjusted = np.minimum(1.0, L * p)
    adjusted.setflags(write=False)
    return MultiplicityReport(L, alpha, adjusted, int((adjusted <= alpha).sum()))


def fwer_estimate(p_matrix, alpha: float) -> float:
    """Fraction of replicates containing any p below alpha / L.

    Rows are replicates of a fully null simulation, columns are categories;
    the strict inequality matches the Bonferroni threshold convention.
    """
    P = np.atleast_2d(np.asarray(p_matrix, dtype=np.float64))
    if P.shape[0] == 0 or P.size == 0:
        raise InputError("empty p-value matrix")
    if np.any((P <= 0) | (P > 1)):
        raise InputError("p-values must lie in (0, 1]")
    L = P.shape[1]
    any_reject = (P < alpha / L).any(axis=1)
    return float(any_reject.mean())
