"""Monte-Carlo harness for the sparse additive simulation study.

Data are generated directly as noisy marginal means of ``d`` axes, of which
the first few carry standardized test functions. Every replication draws
from its own random stream keyed by ``(seed, snr index, replication, axis)``,
so results do not depend on how replications are split across workers.
"""

from __future__ import annotations

import functools
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    BadIdError,
    DesignMismatchError,
    EmptyGridError,
    SamfitError,
    SearchSpaceTooLargeError,
    ZeroVarianceError,
)
from .fourier import Spectrum, forward_dft
from .lattice import (
    AveragedData,
    ComponentFunction,
    LatticeDesign,
    stream,
    synthesize_marginal,
    validate_design,
)
from .map_estimator import (
    PriorConfig,
    axis_terms,
    fit_spectra,
    map_fit,
    map_objective,
    penalty_axis_table,
    penalty_global_table,
)
from .spam import shrink_factors

DEFAULT_LAMBDA_GRID = tuple(round(0.01 * i, 2) for i in range(1, 51))
REFERENCE_SPAM_LAMBDAS = {1.0: 0.26, 5.0: 0.10, 10.0: 0.06}


def test_function(fid: int, x):
    """Raw (unstandardized) test functions 1-4 on ``[0, 1)``."""
    x = np.asarray(x, dtype=float)
    s = np.sin(2 * np.pi * x)
    c = np.cos(2 * np.pi * x)
    if fid == 1:
        return x
    if fid == 2:
        return (2 * x - 1) ** 2
    if fid == 3:
        return s / (2 - s)
    if fid == 4:
        return 0.1 * s + 0.2 * c + 0.3 * s**2 + 0.4 * c**3 + 0.5 * s**3
    raise BadIdError(f"BadId: no test function {fid!r}; valid ids are 1..4")


# keep pytest from collecting the function above as a test
test_function.__test__ = False


def standardize(samples) -> np.ndarray:
    """Center and scale so that the grid mean is 0 and the grid mean square is 1."""
    v = np.asarray(samples, dtype=float)
    centered = v - v.mean()
    rms = math.sqrt(float(np.mean(centered**2)))
    if rms == 0 or not math.isfinite(rms):
        raise ZeroVarianceError("ZeroVariance: cannot standardize a constant vector")
    return centered / rms


def standardized_component(fid: int, n: int) -> ComponentFunction:
    """Test function ``fid`` shifted and scaled using its values on the ``n``-point grid."""
    raw = test_function(fid, np.arange(n) / n)
    mean = float(raw.mean())
    rms = math.sqrt(float(np.mean((raw - mean) ** 2)))
    return ComponentFunction(lambda x: (test_function(fid, x) - mean) / rms, f"f{fid}")


@functools.lru_cache(maxsize=32)
def _components(active, n, d):
    comps = [standardized_component(fid, n) for fid in active]
    return tuple(comps + [ComponentFunction.zero()] * (d - len(active)))


@functools.lru_cache(maxsize=32)
def _truth(active, n, d):
    return tuple(forward_dft(c.on_grid(n)) for c in _components(active, n, d))


@dataclass(frozen=True)
class AmseBreakdown:
    per_axis: np.ndarray
    total: float
    intercept: Optional[float] = None


def amse(fit_coeffs: Sequence[Spectrum], truth: Sequence[Spectrum], a0_hat=None, a0=None) -> AmseBreakdown:
    """Squared error of fitted component spectra, axis by axis.

    By Parseval each axis value equals the grid-averaged squared error of the
    fitted component. The intercept error is reported separately and is not
    part of ``total``.
    """
    if len(fit_coeffs) != len(truth):
        raise DesignMismatchError(f"DesignMismatch: {len(fit_coeffs)} fitted axes, {len(truth)} true axes")
    per_axis = np.empty(len(truth))
    for j, (f, t) in enumerate(zip(fit_coeffs, truth)):
        if f.n != t.n:
            raise DesignMismatchError(f"DesignMismatch: axis {j} has n={f.n} fitted, n={t.n} true")
        per_axis[j] = (f.mean_coeff - t.mean_coeff) ** 2 + 2.0 * float(np.sum(np.abs(f.coeffs - t.coeffs) ** 2))
    intercept = None if a0_hat is None or a0 is None else (a0_hat - a0) ** 2
    return AmseBreakdown(per_axis, math.fsum(per_axis), intercept)


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulation scenario.

    ``active`` lists test-function ids placed on the first axes; the remaining
    ``d - len(active)`` axes are zero. The default prior uses
    ``energy_weight=1.0``, the convention that matches the reference results.
    ``spam_lambdas`` maps an SNR to a fixed SPAM threshold; SNRs without an
    entry get an oracle threshold from ``lambda_grid``.
    """

    d: int = 50
    n: int = 101
    active: Tuple[int, ...] = (1, 2, 3, 4)
    snr_levels: Tuple[float, ...] = (1.0, 5.0, 10.0)
    reps: int = 1000
    seed: int = 0
    prior: PriorConfig = field(default_factory=lambda: PriorConfig(5.0, 0.5, 0.5, energy_weight=1.0))
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID
    spam: bool = False
    spam_lambdas: Dict[float, float] = field(default_factory=dict)
    tau2: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise SamfitError(f"reps={self.reps} must be >= 1")
        if self.d < len(self.active):
            raise SamfitError(f"d={self.d} is smaller than the {len(self.active)} active components")
        for fid in self.active:
            test_function(fid, 0.0)
        validate_design([self.n])
        for snr in self.snr_levels:
            if not snr > 0:
                raise SamfitError(f"snr={snr} must be positive")
        if not self.lambda_grid:
            raise EmptyGridError("EmptyGrid: lambda_grid is empty")

    @property
    def design(self) -> LatticeDesign:
        return validate_design([self.n] * self.d)

    def components(self) -> List[ComponentFunction]:
        return list(_components(self.active, self.n, self.d))

    def truth(self) -> List[Spectrum]:
        return list(_truth(self.active, self.n, self.d))

    def to_json(self) -> dict:
        out = asdict(self)
        out["prior"] = asdict(self.prior)
        out["spam_lambdas"] = {str(k): v for k, v in self.spam_lambdas.items()}
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioConfig":
        obj = dict(obj)
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise SamfitError(f"unknown scenario fields: {sorted(unknown)}")
        if "prior" in obj:
            obj["prior"] = PriorConfig(**obj["prior"])
        if "spam_lambdas" in obj:
            obj["spam_lambdas"] = {float(k): float(v) for k, v in obj["spam_lambdas"].items()}
        for key in ("active", "snr_levels", "lambda_grid"):
            if key in obj:
                obj[key] = tuple(obj[key])
        return cls(**obj)


@dataclass
class Replication:
    rep: int
    map_errors: np.ndarray
    map_d0: int
    tau_hat: float
    spam_errors: Optional[np.ndarray] = None  # (n_lambda, d)
    spam_d0: Optional[np.ndarray] = None  # (n_lambda,)


def _spam_curve(fit, data, truth, lambdas) -> Tuple[np.ndarray, np.ndarray]:
    """SPAM per-axis errors for every lambda, expanding ``|f xt - c|^2`` in f."""
    k_cuts = np.array([s.k_hat for s in fit.axis_scores])
    energy = np.empty(len(truth))
    cross = np.empty(len(truth))
    truth_energy = np.empty(len(truth))
    for j, (values, t) in enumerate(zip(data.marginals, truth)):
        xt = forward_dft(values).coeffs[: k_cuts[j]]
        energy[j] = 2.0 * float(np.sum(np.abs(xt) ** 2))
        cross[j] = 2.0 * float(np.sum((xt * np.conj(t.coeffs[: k_cuts[j]])).real))
        truth_energy[j] = 2.0 * float(np.sum(np.abs(t.coeffs) ** 2))
    f = shrink_factors(np.sqrt(energy), k_cuts, lambdas)
    errors = f**2 * energy - 2.0 * f * cross + truth_energy
    return errors, np.count_nonzero(f > 0, axis=1)


def replicate(config: ScenarioConfig, snr_index: int, rep: int, lambdas=None) -> Replication:
    """One replication: synthesize, fit MAP with estimated noise, score SPAM over ``lambdas``."""
    snr = config.snr_levels[snr_index]
    design = config.design
    truth = config.truth()
    data = synthesize_marginal(design, config.components(), snr, config.seed, key=(snr_index, rep))
    # the noise level is treated as unknown
    data = replace(data, tau2=None)
    fit = map_fit(data, config.prior, tau2_override=config.tau2)
    out = Replication(
        rep=rep,
        map_errors=amse(fit.coeffs, truth).per_axis,
        map_d0=fit.d0_hat,
        tau_hat=math.sqrt(fit.tau2),
    )
    if lambdas is not None:
        out.spam_errors, out.spam_d0 = _spam_curve(fit, data, truth, np.asarray(lambdas, dtype=float))
    return out


def _replicate_chunk(args):
    config, snr_index, reps, lambdas = args
    return [replicate(config, snr_index, r, lambdas) for r in reps]


def _worker_count(config: ScenarioConfig) -> int:
    cap = os.environ.get("SAMFIT_THREADS")
    workers = config.workers
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, workers)


def run_replications(config: ScenarioConfig, snr_index: int, lambdas=None, chunk: int = 100) -> List[Replication]:
    reps = range(config.reps)
    workers = _worker_count(config)
    if workers == 1:
        return _replicate_chunk((config, snr_index, reps, lambdas))
    tasks = [(config, snr_index, reps[i : i + chunk], lambdas) for i in range(0, config.reps, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [r for part in pool.map(_replicate_chunk, tasks) for r in part]


def _curve_from(reps: List[Replication], lambdas) -> List[dict]:
    totals = np.mean([r.spam_errors.sum(axis=1) for r in reps], axis=0)
    return [{"lambda": float(lam), "amse": float(a)} for lam, a in zip(lambdas, totals)]


def oracle_lambda(config: ScenarioConfig, snr_index: int, lambda_grid=None, reps: Optional[int] = None):
    """Grid value of lambda minimizing the Monte-Carlo SPAM AMSE against the known truth.

    All grid values are scored on the same replications. Returns
    ``(lambda_star, curve)`` with ties resolved toward the smaller lambda.
    """
    grid = tuple(config.lambda_grid if lambda_grid is None else lambda_grid)
    if not grid:
        raise EmptyGridError("EmptyGrid: lambda grid is empty")
    if reps is not None:
        config = replace(config, reps=reps)
    curve = _curve_from(run_replications(config, snr_index, grid), grid)
    best = min(range(len(grid)), key=lambda i: (curve[i]["amse"], i))
    return grid[best], curve


@dataclass
class ReportRow:
    snr: float
    method: str
    amse_global: float
    amse_per_active: Tuple[float, ...]
    amse_zero_avg: float
    d0_hat_mean: float
    lam: Optional[float] = None


@dataclass
class ReportTable:
    rows: List[ReportRow]
    curves: Dict[float, List[dict]] = field(default_factory=dict)
    detail: List[dict] = field(default_factory=list)


def _row(snr, method, per_rep_errors, d0s, n_active, lam=None) -> ReportRow:
    per_axis = np.mean(per_rep_errors, axis=0)
    zero = per_axis[n_active:]
    return ReportRow(
        snr=snr,
        method=method,
        amse_global=math.fsum(per_axis),
        amse_per_active=tuple(float(v) for v in per_axis[:n_active]),
        amse_zero_avg=float(zero.mean()) if zero.size else 0.0,
        d0_hat_mean=float(np.mean(d0s)),
        lam=lam,
    )


def run_scenario(config: ScenarioConfig, detail: bool = False) -> ReportTable:
    """MAP (and optionally SPAM) rows of the AMSE table, one block per SNR."""
    table = ReportTable(rows=[])
    m = len(config.active)
    for si, snr in enumerate(config.snr_levels):
        lam = config.spam_lambdas.get(float(snr)) if config.spam else None
        if config.spam and lam is None:
            grid = config.lambda_grid
        elif config.spam:
            grid = (lam,)
        else:
            grid = None
        reps = run_replications(config, si, grid)
        table.rows.append(
            _row(snr, "MAP", [r.map_errors for r in reps], [r.map_d0 for r in reps], m)
        )
        if config.spam:
            curve = _curve_from(reps, grid)
            if lam is None:
                best = min(range(len(grid)), key=lambda i: (curve[i]["amse"], i))
                table.curves[float(snr)] = curve
            else:
                best = 0
            lam = grid[best]
            table.rows.append(
                _row(snr, "SPAM", [r.spam_errors[best] for r in reps], [r.spam_d0[best] for r in reps], m, lam)
            )
        if detail:
            for r in reps:
                table.detail.append(
                    {"snr": snr, "rep": r.rep, "method": "MAP", "amse": float(np.sum(r.map_errors)),
                     "amse_active": r.map_errors[:m].tolist(), "d0_hat": r.map_d0, "tau_hat": r.tau_hat}
                )
                if config.spam:
                    table.detail.append(
                        {"snr": snr, "rep": r.rep, "method": "SPAM", "lambda": lam,
                         "amse": float(np.sum(r.spam_errors[best])),
                         "amse_active": r.spam_errors[best][:m].tolist(), "d0_hat": int(r.spam_d0[best])}
                    )
    return table


MAX_BRUTE_FORCE_CANDIDATES = 10**7


def brute_force_map(
    spectra: Sequence[Spectrum], tau2: float, cfg: PriorConfig, design: LatticeDesign
) -> Tuple[frozenset, Dict[int, int], float]:
    """Exhaustive minimizer of the MAP criterion over every subset and cut-point vector.

    Ties go to the smaller number of axes, then the lexicographically smallest
    axis set, then the smallest cut-points.
    """
    d = design.d
    sizes = [design.half_length(j) + 1 for j in range(d)]  # option 0 means "axis dropped"
    if d > 12 or math.prod(sizes) > MAX_BRUTE_FORCE_CANDIDATES:
        raise SearchSpaceTooLargeError(
            f"SearchSpaceTooLarge: {math.prod(sizes)} candidates for d={d}"
        )
    pen0 = np.array(penalty_global_table(cfg, tau2, design))
    total = np.zeros(sizes)
    count = np.zeros(sizes, dtype=int)
    for j in range(d):
        shape = [1] * d
        shape[j] = sizes[j]
        terms = np.concatenate([[0.0], axis_terms(spectra[j], tau2, cfg, j, design)])
        total = total + terms.reshape(shape)
        count = count + (np.arange(sizes[j]) > 0).reshape(shape)
    total = total + pen0[count]

    best = float(total.min())
    slack = 1e-9 * max(1.0, abs(best))
    near = np.argwhere(total <= best + slack)
    candidates = []
    for idx in near:
        cut = {j: int(k) for j, k in enumerate(idx) if k > 0}
        value = map_objective((cut.keys(), cut), spectra, tau2, cfg, design)
        candidates.append((value, len(cut), tuple(sorted(cut)), tuple(cut[j] for j in sorted(cut)), cut))
    value, _, sel, _, cut = min(candidates, key=lambda c: c[:4])
    return frozenset(sel), cut, value


def all_candidates(design: LatticeDesign):
    """Iterate every (selected, cutpoints) candidate; used for small randomized checks."""
    options = [range(design.half_length(j) + 1) for j in range(design.d)]
    for combo in itertools.product(*options):
        cut = {j: k for j, k in enumerate(combo) if k > 0}
        yield frozenset(cut), cut


@dataclass
class CheckInstance:
    index: int
    spectra: List[Spectrum]
    design: LatticeDesign
    prior: PriorConfig
    tau2: float

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "grid_sizes": list(self.design.grid_sizes),
            "spectra": [{"re": s.coeffs.real.tolist(), "im": s.coeffs.imag.tolist()} for s in self.spectra],
            "tau2": self.tau2,
            "prior": asdict(self.prior),
        }


def _exact_cut_tie(spectrum: Spectrum, k: int, j: int, tau2, prior, design) -> Optional[Spectrum]:
    """Adjust ``|xi_{k+1}|`` until cut-points ``k`` and ``k+1`` score exactly equal."""
    coeffs = np.array(spectrum.coeffs)
    pen = penalty_axis_table(j, prior, tau2, design)
    x = math.sqrt((pen[k] - pen[k - 1]) / prior.energy_weight)
    candidates = [x]
    up = down = x
    for _ in range(200):
        up, down = math.nextafter(up, math.inf), math.nextafter(down, 0.0)
        candidates += [up, down]
    for x in candidates:
        coeffs[k] = x
        trial = Spectrum.from_coeffs(spectrum.n, coeffs)
        terms = axis_terms(trial, tau2, prior, j, design)
        if terms[k] == terms[k - 1]:
            return trial
    return None


def random_instance(seed: int, index: int) -> CheckInstance:
    """Small random problem for the greedy-vs-exhaustive check.

    Axes are active with probability 1/2. About a third of the instances
    repeat one axis verbatim, and some carry an exact tie between two
    cut-points on their first axis, so tie-breaking rules are exercised.
    """
    rng = stream(seed, index)
    d = int(rng.integers(1, 6))
    sizes = [int(rng.choice([5, 7, 9])) for _ in range(d)]
    tau2 = float(10 ** rng.uniform(-3, 0))
    prior = PriorConfig(
        gamma=float(rng.uniform(0.2, 10)),
        q=float(rng.uniform(0.05, 0.95)),
        q_axis=tuple(float(v) for v in rng.uniform(0.05, 0.95, d)),
        energy_weight=float(rng.choice([1.0, 2.0])),
    )
    spectra = []
    for n in sizes:
        K = (n - 1) // 2
        coeffs = math.sqrt(tau2 / 2) * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
        if rng.random() < 0.5:
            amp = math.sqrt(tau2) * rng.uniform(0.5, 8.0)
            coeffs = coeffs + amp * (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / np.arange(1, K + 1)
        spectra.append(Spectrum.from_coeffs(n, coeffs))
    if d >= 2 and rng.random() < 0.35:
        src, dst = (int(v) for v in rng.choice(d, size=2, replace=False))
        sizes[dst] = sizes[src]
        spectra[dst] = spectra[src]
    design = validate_design(sizes)
    if rng.random() < 0.25:
        k = int(rng.integers(1, design.half_length(0)))
        strong = np.zeros(design.half_length(0), dtype=complex)
        strong[:k] = math.sqrt(tau2) * rng.uniform(6.0, 12.0, k)
        tied = _exact_cut_tie(Spectrum.from_coeffs(sizes[0], strong), k, 0, tau2, prior, design)
        if tied is not None:
            spectra[0] = tied
    return CheckInstance(index, spectra, design, prior, tau2)


def check_equivalence(instances: int = 200, seed: int = 0, tie_break: str = "first"):
    """Compare the three-step MAP search with ``brute_force_map`` on random small instances.

    Returns the mismatches as ``(instance, fit, brute_force_result)`` tuples.
    """
    failures = []
    for i in range(instances):
        inst = random_instance(seed, i)
        fit = fit_spectra(inst.spectra, inst.design, inst.prior, inst.tau2, tie_break=tie_break)
        sel, cut, value = brute_force_map(inst.spectra, inst.tau2, inst.prior, inst.design)
        same = fit.selected == sel and fit.cutpoints == cut and abs(fit.objective - value) <= 1e-9
        if not same:
            failures.append((inst, fit, (sel, cut, value)))
    return failures
