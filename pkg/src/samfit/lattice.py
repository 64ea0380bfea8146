"""Regular-lattice designs and their per-axis marginal averages.

On a full factorial lattice with ``n_j`` levels per axis, averaging all
observations that share the j-th coordinate reduces an additive model to
``d`` independent univariate problems with noise variance ``(n_j/N) sigma^2``.
The total cell count ``N`` is never formed as an integer; downstream code only
needs the effective Fourier-domain noise variance ``tau2 = sigma^2 / N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    EvenGridSizeError,
    GridTooSmallError,
    LatticeTooLargeError,
    NonPositiveSnrError,
    SamfitError,
    UnequalGridSizesForSnrError,
)

MAX_LATTICE_CELLS = 10**7


@dataclass(frozen=True)
class LatticeDesign:
    """Grid sizes of a regular lattice on ``[0, 1]^d``."""

    grid_sizes: tuple

    @property
    def d(self) -> int:
        return len(self.grid_sizes)

    def n(self, j: int) -> int:
        return self.grid_sizes[j]

    def half_length(self, j: int) -> int:
        """Number of positive frequencies on axis ``j``."""
        return (self.grid_sizes[j] - 1) // 2

    @property
    def equal_sizes(self) -> bool:
        return len(set(self.grid_sizes)) == 1


def validate_design(grid_sizes: Sequence[int]) -> LatticeDesign:
    sizes = tuple(int(s) for s in grid_sizes)
    if not sizes:
        raise SamfitError("grid_sizes must be a nonempty sequence")
    for j, (raw, n) in enumerate(zip(grid_sizes, sizes)):
        if n != raw:
            raise SamfitError(f"grid_sizes[{j}]={raw!r} is not an integer")
        if n < 3:
            raise GridTooSmallError(f"GridTooSmall: grid_sizes[{j}]={n} < 3 leaves no frequencies")
        if n % 2 == 0:
            raise EvenGridSizeError(f"EvenGridSize: grid_sizes[{j}]={n} is even; only odd sizes are supported")
    return LatticeDesign(sizes)


@dataclass(frozen=True)
class AveragedData:
    """Marginal means of lattice data, one vector per axis.

    ``tau2`` is the effective Fourier-domain noise variance ``sigma^2/N`` when
    it is known; ``None`` means it has to be estimated from the spectra.
    """

    design: LatticeDesign
    marginals: tuple
    overall_mean: float
    tau2: Optional[float] = None

    def __post_init__(self):
        if len(self.marginals) != self.design.d:
            raise SamfitError(
                f"marginals: expected {self.design.d} vectors, got {len(self.marginals)}"
            )
        for j, m in enumerate(self.marginals):
            if len(m) != self.design.n(j):
                raise SamfitError(
                    f"marginals[{j}]: expected length {self.design.n(j)}, got {len(m)}"
                )
        if self.tau2 is not None and not self.tau2 >= 0:
            raise SamfitError(f"tau2 must be nonnegative, got {self.tau2}")

    @classmethod
    def from_arrays(cls, grid_sizes, marginals, overall_mean, tau2=None) -> "AveragedData":
        design = validate_design(grid_sizes)
        vecs = tuple(np.asarray(m, dtype=float).copy() for m in marginals)
        for v in vecs:
            v.setflags(write=False)
        return cls(design, vecs, float(overall_mean), None if tau2 is None else float(tau2))


@dataclass(frozen=True)
class ComponentFunction:
    """A univariate additive component evaluated on grid positions in [0, 1)."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def on_grid(self, n: int) -> np.ndarray:
        x = np.arange(n) / n
        values = np.broadcast_to(np.asarray(self.evaluator(x), dtype=float), (n,)).copy()
        if not np.all(np.isfinite(values)):
            raise SamfitError(f"component {self.label!r} is not finite on the n={n} grid")
        return values

    @classmethod
    def zero(cls) -> "ComponentFunction":
        return cls(lambda x: np.zeros_like(x), "zero")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator addressed by ``(seed, *key)``.

    Streams for different keys never overlap, so replications and axes can be
    drawn in any order or on any worker with identical results.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def synthesize_marginal(
    design: LatticeDesign,
    components: Sequence[ComponentFunction],
    snr: float,
    seed: int,
    key: Sequence[int] = (),
    a0: float = 0.0,
) -> AveragedData:
    """Noisy marginal means of a standardized additive model.

    Axis ``j`` draws its noise from ``stream(seed, *key, j)`` and the overall
    mean from ``stream(seed, *key, d)``. With unit-variance components the
    marginal noise variance is ``1/snr`` and ``tau2 = 1/(snr * n)``.
    ``snr=math.inf`` gives noise-free marginals.
    """
    if not snr > 0:
        raise NonPositiveSnrError(f"NonPositiveSnr: snr={snr}")
    if not design.equal_sizes:
        raise UnequalGridSizesForSnrError(
            "UnequalGridSizesForSnr: the SNR parametrization needs a single grid size"
        )
    if len(components) != design.d:
        raise SamfitError(f"expected {design.d} components, got {len(components)}")
    n = design.n(0)
    noise_sd = 0.0 if math.isinf(snr) else 1.0 / math.sqrt(snr)
    tau2 = 0.0 if math.isinf(snr) else 1.0 / (snr * n)

    marginals = []
    for j, comp in enumerate(components):
        values = a0 + comp.on_grid(n)
        if noise_sd > 0:
            values = values + noise_sd * stream(seed, *key, j).standard_normal(n)
        values.setflags(write=False)
        marginals.append(values)
    overall = float(a0)
    if tau2 > 0:
        overall += math.sqrt(tau2) * float(stream(seed, *key, design.d).standard_normal())
    return AveragedData(design, tuple(marginals), overall, tau2)


def full_lattice_average(tensor, design: LatticeDesign) -> AveragedData:
    """Reduce a full lattice of observations to its per-axis marginal means."""
    cells = 1
    for n in design.grid_sizes:
        cells *= n
        if cells > MAX_LATTICE_CELLS:
            raise LatticeTooLargeError(
                f"LatticeTooLarge: lattice exceeds {MAX_LATTICE_CELLS} cells; pass marginals directly"
            )
    y = np.asarray(tensor, dtype=float)
    if y.shape != design.grid_sizes:
        raise SamfitError(f"tensor shape {y.shape} does not match grid sizes {design.grid_sizes}")
    all_axes = tuple(range(design.d))
    marginals = []
    for j in all_axes:
        m = y.mean(axis=tuple(a for a in all_axes if a != j))
        m = np.atleast_1d(m)
        m.setflags(write=False)
        marginals.append(m)
    return AveragedData(design, tuple(marginals), float(y.mean()))
