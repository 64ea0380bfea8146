import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from samfit import (
    AveragedData,
    AxisScore,
    PriorConfig,
    Spectrum,
    axis_prior,
    estimate_tau,
    forward_dft,
    map_fit,
    map_objective,
    penalty_axis,
    penalty_global,
    score_axis,
    select_components,
    validate_design,
    validate_priors,
)
from samfit.errors import (
    D0OutOfRangeError,
    EmptyPoolError,
    InconsistentCandidateError,
    InvalidGammaError,
    InvalidQError,
    KOutOfRangeError,
    NonPositiveTau2Error,
    ZeroTauError,
)
from samfit.map_estimator import fit_spectra
from samfit.simulation import all_candidates, brute_force_map


# ---- priors and penalties ----------------------------------------------------

def test_axis_prior_two_term_normalization(default_prior):
    design = validate_design([5])
    assert axis_prior(1, 0, default_prior, design) == pytest.approx(2 / 3, abs=1e-15)
    assert axis_prior(2, 0, default_prior, design) == pytest.approx(1 / 3, abs=1e-15)
    with pytest.raises(KOutOfRangeError):
        axis_prior(3, 0, default_prior, design)


def test_axis_prior_sums_to_one():
    cfg = PriorConfig(q_axis=0.3)
    design = validate_design([101])
    total = math.fsum(axis_prior(k, 0, cfg, design) for k in range(1, 51))
    assert total == pytest.approx(1.0, abs=1e-14)


def test_penalty_axis_values(default_prior):
    design = validate_design([101])
    # hand evaluation: 2 * 1.2 * (k ln 2 + ln(1 - 2^-50) + k ln 6)
    assert penalty_axis(1, 0, default_prior, 1.0, design) == pytest.approx(5.9637759594911985, abs=1e-12)
    assert penalty_axis(2, 0, default_prior, 1.0, design) == pytest.approx(11.927551918982399, abs=1e-12)
    assert penalty_axis(3, 0, default_prior, 2.0, design) == pytest.approx(
        2 * penalty_axis(3, 0, default_prior, 1.0, design), rel=1e-15
    )


def test_penalty_axis_errors(default_prior):
    design = validate_design([5])
    with pytest.raises(KOutOfRangeError):
        penalty_axis(0, 0, default_prior, 1.0, design)
    with pytest.raises(NonPositiveTau2Error):
        penalty_axis(1, 0, default_prior, 0.0, design)


def test_penalty_global_values(default_prior, scenario_design):
    norm = math.fsum(0.5**h for h in range(51))
    assert penalty_global(0, default_prior, 1.0, scenario_design) == pytest.approx(2.4 * math.log(norm), abs=1e-12)
    expected = 2.4 * (math.log(norm / 0.5**4) + math.log(math.comb(50, 4)))
    assert expected == pytest.approx(37.9509, abs=1e-4)
    assert penalty_global(4, default_prior, 1.0, scenario_design) == pytest.approx(expected, abs=1e-11)
    with pytest.raises(NonPositiveTau2Error):
        penalty_global(4, default_prior, 0.0, scenario_design)
    with pytest.raises(D0OutOfRangeError):
        penalty_global(51, default_prior, 1.0, scenario_design)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 50), st.floats(0.01, 0.99), st.sampled_from([5, 9, 101]))
def test_penalty_axis_strictly_increasing(gamma, qj, n):
    cfg = PriorConfig(gamma=gamma, q_axis=qj)
    design = validate_design([n])
    pens = [penalty_axis(k, 0, cfg, 0.3, design) for k in range(1, (n - 1) // 2 + 1)]
    assert all(b > a for a, b in zip(pens, pens[1:]))


def test_prior_config_ranges():
    with pytest.raises(InvalidGammaError):
        PriorConfig(gamma=0.0)
    with pytest.raises(InvalidQError):
        PriorConfig(q=1.0)
    with pytest.raises(InvalidQError):
        PriorConfig(q_axis=(0.5, 0.0))


def test_validate_priors_default_choice_warns(default_prior, scenario_design):
    report = validate_priors(default_prior, scenario_design)
    assert report.warnings
    assert "264.5" in report.warnings[0]


def test_validate_priors_strong_decay_passes():
    cfg = PriorConfig(gamma=0.05, q_axis=math.exp(-6))
    design = validate_design([5])
    report = validate_priors(cfg, design)
    assert report.warnings == []
    # direct scan of the kernel condition q^k <= exp(-c k), c = 8 * 0.8^2
    c = 8 * 0.8**2
    assert all(math.exp(-6 * k) <= math.exp(-c * k) for k in (1, 2))


def test_validate_priors_lower_bound_constants(default_prior, scenario_design):
    report = validate_priors(default_prior, scenario_design)
    assert report.c0_min > 0 and report.c1_min > 0
    # pi_j(k) ~ 0.5^k exactly meets exp(-C1 k) at C1 = ln 2 (plus the normalization)
    assert report.c1_min == pytest.approx(math.log(2), abs=1e-12)


# ---- noise estimation --------------------------------------------------------

def test_estimate_tau_zero_pool():
    spectra = [Spectrum.from_coeffs(11, np.zeros(5))] * 3
    with pytest.raises(ZeroTauError):
        estimate_tau(spectra)


def test_estimate_tau_empty_pool():
    with pytest.raises(EmptyPoolError):
        estimate_tau([])


def test_estimate_tau_normal_scale():
    # Re and Im each with sd s: the estimate tends to sqrt(2) * s
    g = np.random.default_rng(0)
    s = 0.3
    spectra = [Spectrum.from_coeffs(1001, s * (g.standard_normal(500) + 1j * g.standard_normal(500)))
               for _ in range(40)]
    assert estimate_tau(spectra) == pytest.approx(math.sqrt(2) * s, rel=0.03)


def test_estimate_tau_pool_uses_top_fifth():
    K = 50
    coeffs = np.zeros(K, dtype=complex)
    coeffs[:39] = 100.0  # k = 1..39 are ignored
    coeffs[39:] = np.arange(11) + 1j * np.arange(11)
    pool = np.concatenate([np.arange(11), np.arange(11)]).astype(float)
    expected = math.sqrt(2) * np.median(np.abs(pool - np.median(pool))) / 0.6745
    assert estimate_tau([Spectrum.from_coeffs(101, coeffs)]) == pytest.approx(expected)


def test_estimate_tau_monte_carlo():
    tau = 1 / math.sqrt(505)
    g = np.random.default_rng(77)
    estimates = []
    for _ in range(100):
        spectra = [forward_dft(g.standard_normal(101) / math.sqrt(5)) for _ in range(50)]
        estimates.append(estimate_tau(spectra))
    assert np.mean(estimates) == pytest.approx(tau, rel=0.05)


# ---- per-axis search ---------------------------------------------------------

def test_score_axis_zero_spectrum(default_prior):
    design = validate_design([101])
    score = score_axis(Spectrum.from_coeffs(101, np.zeros(50)), 1.0, default_prior, 0, design)
    assert score.k_hat == 1
    assert score.w == pytest.approx(5.9637759594911985, abs=1e-12)


def test_score_axis_dominant_first_coefficient(default_prior):
    design = validate_design([101])
    coeffs = np.zeros(50, dtype=complex)
    coeffs[0] = 3.0  # 2 * 9 > 5.96
    score = score_axis(Spectrum.from_coeffs(101, coeffs), 1.0, default_prior, 0, design)
    assert score.k_hat == 1 and score.w < 0


@pytest.mark.parametrize("seed", range(10))
def test_score_axis_against_scan(seed):
    g = np.random.default_rng(seed)
    cfg = PriorConfig(gamma=g.uniform(0.5, 8), q_axis=g.uniform(0.1, 0.9))
    design = validate_design([9])
    s = Spectrum.from_coeffs(9, g.standard_normal(4) + 1j * g.standard_normal(4))
    tau2 = g.uniform(0.05, 1.0)
    values = []
    for k in range(1, 5):
        kept = sum(abs(s.coeffs[i]) ** 2 for i in range(k))
        values.append(-2 * kept + penalty_axis(k, 0, cfg, tau2, design))
    best = min(range(4), key=lambda i: (values[i], i))
    score = score_axis(s, tau2, cfg, 0, design)
    assert score.k_hat == best + 1
    assert score.w == pytest.approx(values[best], abs=1e-12)


# ---- global selection --------------------------------------------------------

def test_nonnegative_scores_select_nothing(default_prior):
    design = validate_design([5] * 6)
    scores = [AxisScore(1, w) for w in (0.0, 0.1, 2.0, 0.5, 0.0, 3.0)]
    d0, sel = select_components(scores, 1.0, default_prior, design)
    assert d0 == 0 and sel == frozenset()


def test_selection_takes_smallest_scores(default_prior):
    design = validate_design([5] * 5)
    scores = [AxisScore(1, w) for w in (-50.0, 1.0, -40.0, 2.0, -0.01)]
    d0, sel = select_components(scores, 0.1, default_prior, design)
    assert sel == {0, 2}


def test_all_zero_marginals(default_prior):
    data = AveragedData.from_arrays([7, 9, 5], [np.zeros(7), np.zeros(9), np.zeros(5)], 0.0)
    fit = map_fit(data, default_prior, tau2_override=1.0)
    assert fit.selected == frozenset() and fit.a0_hat == 0.0
    assert all(np.all(c.coeffs == 0) for c in fit.coeffs)
    with pytest.raises(ZeroTauError):
        map_fit(data, default_prior)


def test_tau2_resolution_order(default_prior):
    g = np.random.default_rng(1)
    data = AveragedData.from_arrays([101] * 3, g.standard_normal((3, 101)), 0.0, tau2=0.02)
    assert map_fit(data, default_prior).tau2 == 0.02
    assert map_fit(data, default_prior, tau2_override=0.5).tau2 == 0.5
    bare = AveragedData.from_arrays([101] * 3, g.standard_normal((3, 101)), 0.0)
    expected = estimate_tau([forward_dft(m) for m in bare.marginals]) ** 2
    assert map_fit(bare, default_prior).tau2 == pytest.approx(expected)


# ---- objective ---------------------------------------------------------------

def random_problem(seed, d=4, n=7):
    g = np.random.default_rng(seed)
    design = validate_design([n] * d)
    K = (n - 1) // 2
    tau2 = 0.05
    spectra = []
    for j in range(d):
        c = np.sqrt(tau2 / 2) * (g.standard_normal(K) + 1j * g.standard_normal(K))
        if j % 2 == 0:
            c += 0.6 * (g.standard_normal(K) + 1j * g.standard_normal(K)) / np.arange(1, K + 1)
        spectra.append(Spectrum.from_coeffs(n, c))
    return design, spectra, tau2


def test_objective_of_empty_candidate(default_prior):
    design, spectra, tau2 = random_problem(0)
    assert map_objective(((), {}), spectra, tau2, default_prior, design) == pytest.approx(
        penalty_global(0, default_prior, tau2, design)
    )


def test_objective_decomposition(default_prior):
    design, spectra, tau2 = random_problem(1)
    fit = fit_spectra(spectra, design, default_prior, tau2)
    w = math.fsum(fit.axis_scores[j].w for j in fit.selected)
    assert fit.objective == pytest.approx(w + penalty_global(fit.d0_hat, default_prior, tau2, design), abs=1e-10)


def test_random_candidates_never_beat_fit(default_prior):
    design, spectra, tau2 = random_problem(2, d=5, n=9)
    fit = fit_spectra(spectra, design, default_prior, tau2)
    g = np.random.default_rng(3)
    for _ in range(200):
        chosen = [j for j in range(design.d) if g.random() < 0.5]
        cut = {j: int(g.integers(1, 5)) for j in chosen}
        assert map_objective((chosen, cut), spectra, tau2, default_prior, design) >= fit.objective - 1e-12


def test_objective_equals_full_residual_criterion(default_prior):
    # adding back sum_j ||xi_j||^2 gives the residual-sum-of-squares form
    design, spectra, tau2 = random_problem(4)
    cut = {0: 2, 2: 1}
    shifted = map_objective((cut.keys(), cut), spectra, tau2, default_prior, design)
    rss = 0.0
    pens = penalty_global(2, default_prior, tau2, design)
    for j, s in enumerate(spectra):
        est = s.truncated(cut[j]).coeffs if j in cut else np.zeros_like(s.coeffs)
        rss += 2 * np.sum(np.abs(s.coeffs - est) ** 2)
        if j in cut:
            pens += penalty_axis(cut[j], j, default_prior, tau2, design)
    const = sum(2 * np.sum(np.abs(s.coeffs) ** 2) for s in spectra)
    assert shifted == pytest.approx(rss + pens - const, abs=1e-12)


def test_inconsistent_candidate(default_prior):
    design, spectra, tau2 = random_problem(0)
    with pytest.raises(InconsistentCandidateError):
        map_objective(([0, 1], {0: 1}), spectra, tau2, default_prior, design)
    with pytest.raises(InconsistentCandidateError):
        map_objective(([0], {0: 9}), spectra, tau2, default_prior, design)


# ---- equivalence with exhaustive search ---------------------------------------

problems = st.tuples(
    st.lists(st.sampled_from([5, 7, 9]), min_size=1, max_size=5),
    st.integers(0, 2**32 - 1),
    st.floats(1e-3, 1.0),
    st.sampled_from([1.0, 2.0]),
)


@settings(max_examples=80, deadline=None)
@given(problems)
def test_fit_matches_exhaustive_search(problem):
    sizes, seed, tau2, weight = problem
    g = np.random.default_rng(seed)
    design = validate_design(sizes)
    cfg = PriorConfig(gamma=g.uniform(0.3, 8), q=g.uniform(0.1, 0.9),
                      q_axis=tuple(g.uniform(0.1, 0.9, len(sizes))), energy_weight=weight)
    spectra = []
    for n in sizes:
        K = (n - 1) // 2
        amp = math.sqrt(tau2) * g.uniform(0, 6)
        spectra.append(Spectrum.from_coeffs(
            n, amp * (g.standard_normal(K) + 1j * g.standard_normal(K)) / np.arange(1, K + 1)))
    fit = fit_spectra(spectra, design, cfg, tau2)
    sel, cut, value = brute_force_map(spectra, tau2, cfg, design)
    assert fit.selected == sel
    assert fit.cutpoints == cut
    assert abs(fit.objective - value) <= 1e-9
    # independent enumeration in pure Python
    best = min(map_objective(c, spectra, tau2, cfg, design) for c in all_candidates(design))
    assert abs(best - value) <= 1e-12 * max(1.0, abs(best))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 20))
def test_scale_equivariance(seed, alpha):
    g = np.random.default_rng(seed)
    sizes = list(g.choice([5, 7, 9, 11], size=int(g.integers(1, 6))))
    marg = [g.standard_normal(n) * 0.3 + (j % 2) * np.sin(2 * np.pi * np.arange(n) / n) for j, n in enumerate(sizes)]
    tau2 = 0.3**2 / max(sizes)
    cfg = PriorConfig()
    base = map_fit(AveragedData.from_arrays(sizes, marg, 1.0), cfg, tau2_override=tau2)
    scaled = map_fit(AveragedData.from_arrays(sizes, [alpha * m for m in marg], alpha), cfg,
                     tau2_override=alpha**2 * tau2)
    assert scaled.selected == base.selected and scaled.cutpoints == base.cutpoints
    for a, b in zip(base.coeffs, scaled.coeffs):
        np.testing.assert_allclose(b.coeffs, alpha * a.coeffs, atol=1e-9 * max(1, alpha))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fit_invariants(seed):
    g = np.random.default_rng(seed)
    sizes = list(g.choice([5, 7, 9, 21], size=int(g.integers(1, 7))))
    marg = [g.standard_normal(n) * g.uniform(0.05, 1.5) for n in sizes]
    fit = map_fit(AveragedData.from_arrays(sizes, marg, 0.3), PriorConfig(), tau2_override=0.02)
    ws = [s.w for s in fit.axis_scores]
    order = sorted(range(len(sizes)), key=lambda j: (ws[j], j))
    assert fit.selected == frozenset(order[: fit.d0_hat])
    for j, (c, s) in enumerate(zip(fit.coeffs, map(forward_dft, marg))):
        assert c.mean_coeff == 0.0
        assert abs(np.sum(fit.fitted_values(j))) <= 1e-9
        if j in fit.selected:
            k = fit.cutpoints[j]
            np.testing.assert_array_equal(c.coeffs[:k], s.coeffs[:k])
            assert np.all(c.coeffs[k:] == 0)
        else:
            assert np.all(c.coeffs == 0)


def test_map_fit_json_shape(default_prior):
    g = np.random.default_rng(2)
    data = AveragedData.from_arrays([7, 7], g.standard_normal((2, 7)) + [[3, 0, 0, 0, 0, 0, 0], [0] * 7], 0.5)
    out = map_fit(data, default_prior, tau2_override=0.01).to_json()
    assert set(out) == {"a0_hat", "selected", "cutpoints", "coeffs", "tau2", "objective"}
    assert len(out["coeffs"]) == 2 and set(out["coeffs"][0]) == {"re", "im"}
    assert all(isinstance(k, str) for k in out["cutpoints"])
