"""SPAM / group-lasso baseline in closed form.

With fixed truncation cut-points the group-lasso problem decouples across
axes and each truncated spectrum is shrunk as a block toward zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Tuple

import numpy as np

from .errors import CutOutOfRangeError, NegativeLambdaError, SamfitError
from .fourier import Spectrum, forward_dft
from .lattice import AveragedData


def group_threshold(lam: float, k_cut) -> float:
    """Norm below which a group of ``2 * k_cut`` paired coefficients is zeroed."""
    return 0.5 * lam * np.sqrt(2.0 * np.asarray(k_cut))


def group_norm(coeffs: np.ndarray) -> float:
    """Euclidean norm over both halves of the spectrum, ``sqrt(2 sum |xi_k|^2)``."""
    mags = np.abs(coeffs)
    top = float(mags.max()) if mags.size else 0.0
    if top == 0.0:
        return 0.0
    # rescale so tiny coefficients do not underflow when squared
    return top * math.sqrt(2.0 * float(np.sum((mags / top) ** 2)))


def spam_shrink(spectrum: Spectrum, k_cut: int, lam: float) -> Spectrum:
    K = spectrum.half_length
    if not 1 <= k_cut <= K:
        raise CutOutOfRangeError(f"CutOutOfRange: k_cut={k_cut} outside 1..{K}")
    if not lam >= 0:
        raise NegativeLambdaError(f"NegativeLambda: lambda={lam}")
    kept = spectrum.truncated(k_cut)
    norm = group_norm(kept.coeffs)
    if norm == 0:
        return kept
    factor = max(0.0, 1.0 - float(group_threshold(lam, k_cut)) / norm)
    return Spectrum.from_coeffs(spectrum.n, factor * kept.coeffs)


@dataclass(frozen=True)
class SpamFit:
    coeffs: Tuple[Spectrum, ...]
    lam: float
    cutpoints: Dict[int, int]
    selected: FrozenSet[int]
    a0_hat: float = 0.0

    @property
    def d0_hat(self) -> int:
        return len(self.selected)


def spam_fit(data: AveragedData, cutpoints: Dict[int, int], lam: float) -> SpamFit:
    """Shrink every axis' truncated spectrum; the intercept is left unpenalized."""
    d = data.design.d
    missing = [j for j in range(d) if j not in cutpoints]
    if missing:
        raise SamfitError(f"cut-points missing for axes {missing}")
    coeffs = []
    selected = set()
    for j, values in enumerate(data.marginals):
        c = spam_shrink(forward_dft(values), int(cutpoints[j]), lam)
        if np.any(c.coeffs != 0):
            selected.add(j)
        coeffs.append(c)
    return SpamFit(tuple(coeffs), float(lam), dict(cutpoints), frozenset(selected), data.overall_mean)


def shrink_factors(norms: np.ndarray, k_cuts: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    """Shrinkage factors for a grid of ``lambdas`` (rows) and axes (columns)."""
    thr = group_threshold(np.asarray(lambdas)[:, None], np.asarray(k_cuts)[None, :])
    safe = np.where(norms > 0, norms, 1.0)[None, :]
    factors = np.clip(1.0 - thr / safe, 0.0, None)
    return np.where(norms[None, :] > 0, factors, 0.0)
