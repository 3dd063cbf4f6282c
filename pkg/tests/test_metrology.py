from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catsense.evolution import t2_to_lambda
from catsense.linalg_core import AdditiveObservable, projector
from catsense.macroscopicity import optimal_eta
from catsense.metrology import (
    DegenerateWorkingPoint,
    NumericalFailure,
    RamseySignal,
    best_phase_omega,
    delta_upper_bound_dephasing,
    dpdw_analytic,
    dpdw_lower_bound,
    estimate_p1,
    fixed_p2_rule,
    ghz_closed_form,
    ghz_closed_form_scaling,
    ghz_dpdw,
    ghz_optimum,
    ghz_probability,
    golden_section,
    majority_projector,
    minimize_over_log_grid,
    optimize_t,
    phase_scan_rule,
    qfi_pure,
    ramsey_probability,
    readout_projector,
    richardson_derivative,
    scaling_study,
    support_projector,
    to_field_units,
    to_half_spin_convention,
    uncertainty,
)
from catsense.states import StateKind, StateSpec, ghz, hamming_projector, mz_projected_thermal, rho_ex, staircase

from conftest import random_density, random_projector, random_pure, random_site_op

GHZ_SPEC = StateSpec(StateKind.GHZ, 4)


class TestRamseyProbability:
    def test_time_zero_support_projector(self, rng):
        rho = random_density(8, rng, rank=3)
        p = ramsey_probability(rho, AdditiveObservable.pauli("x", 3), support_projector(rho), 1.0, 0.5, 0.0)
        assert p == pytest.approx(1.0)

    @pytest.mark.parametrize("lam", [0.0, 0.6])
    def test_ghz_closed_form(self, lam):
        n = 3
        rho = projector(ghz(n))
        obs = AdditiveObservable.pauli("z", n)
        for omega, t in [(0.3, 0.4), (1.1, 0.9), (-0.7, 1.3)]:
            expected = 0.5 * (1 + math.exp(-2 * n * lam**2 * t**2) * math.cos(2 * n * omega * t))
            assert ramsey_probability(rho, obs, rho, omega, lam, t) == pytest.approx(expected, abs=1e-13)
            assert ghz_probability(n, omega, lam, t) == pytest.approx(expected, abs=1e-15)

    def test_out_of_range_raises(self):
        rho = projector(ghz(2))
        with pytest.raises(NumericalFailure):
            ramsey_probability(rho, AdditiveObservable.pauli("z", 2), 2 * np.eye(4), 0.1, 0.0, 0.1)


class TestDerivative:
    def test_zero_frequency_pure_readout(self, rng):
        psi = random_pure(8, rng)
        rho = projector(psi)
        assert dpdw_analytic(rho, AdditiveObservable.pauli("x", 3), rho, 0.0, 0.0, 0.7) == pytest.approx(0, abs=1e-14)

    @given(st.integers(0, 2**32 - 1))
    def test_matches_richardson(self, seed):
        rng = np.random.default_rng(seed)
        n = 3
        obs = AdditiveObservable(tuple(random_site_op(rng) for _ in range(n)))
        rho, eta = random_density(8, rng), random_projector(8, rng)
        omega, lam, t = rng.uniform(0.2, 2), rng.uniform(0, 1), rng.uniform(0.2, 1.5)
        exact = dpdw_analytic(rho, obs, eta, omega, lam, t)
        numeric = richardson_derivative(lambda w: ramsey_probability(rho, obs, eta, w, lam, t), omega, 1e-3 * omega)
        assert abs(exact - numeric) <= 1e-6 * max(abs(exact), 1e-3)

    def test_ghz_noiseless(self):
        n, omega, t = 4, 0.35, 0.8
        rho = projector(ghz(n))
        expected = -n * t * math.sin(2 * n * omega * t)
        assert dpdw_analytic(rho, AdditiveObservable.pauli("z", n), rho, omega, 0.0, t) == pytest.approx(expected)
        assert ghz_dpdw(n, omega, 0.0, t) == pytest.approx(expected)

    def test_richardson_polynomial(self):
        assert richardson_derivative(lambda x: x**5, 1.3, 0.1) == pytest.approx(5 * 1.3**4, rel=1e-10)


class TestRamseySignal:
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["x", "z", "random"]))
    def test_kernel_matches_dense_simulation(self, seed, axis):
        rng = np.random.default_rng(seed)
        n = 3
        obs = AdditiveObservable(tuple(random_site_op(rng) for _ in range(n))) if axis == "random" else AdditiveObservable.pauli(axis, n)
        rho, eta = random_density(8, rng), random_projector(8, rng)
        sig = RamseySignal(rho, obs, eta)
        omega, lam, t = rng.uniform(-2, 2), rng.uniform(0, 1), rng.uniform(0, 2)
        assert sig.probability(omega, lam, t) == pytest.approx(ramsey_probability(rho, obs, eta, omega, lam, t), abs=1e-12)
        assert sig.dpdw(omega, lam, t) == pytest.approx(dpdw_analytic(rho, obs, eta, omega, lam, t), abs=1e-12)

    def test_traces(self, rng):
        from catsense.linalg_core import commutator, total_observable

        obs = AdditiveObservable.pauli("y", 3)
        a = total_observable(obs)[0]
        rho, eta = random_density(8, rng), random_projector(8, rng)
        sig = RamseySignal(rho, obs, eta)
        assert sig.trace_first_commutator == pytest.approx(np.trace(rho @ commutator(a, eta)), abs=1e-12)
        assert sig.trace_double_commutator == pytest.approx(np.trace(rho @ commutator(a, commutator(a, eta))).real, abs=1e-12)

    def test_report_serializes(self):
        rho = projector(ghz(3))
        rep = RamseySignal(rho, AdditiveObservable.pauli("z", 3), rho).report(0.1, 0.2, 0.5)
        d = rep.to_dict()
        assert 0 <= d["P"] <= 1 and d["delta_omega_sqrtT"] > 0


class TestUncertainty:
    def test_plug_in(self):
        assert uncertainty(0.5, 1.0, 1.0, 1.0) == pytest.approx(0.5)

    def test_total_time_scaling(self):
        assert uncertainty(0.3, 0.7, 0.2, 2.0) == pytest.approx(uncertainty(0.3, 0.7, 0.2, 1.0) / math.sqrt(2))

    def test_zero_slope(self):
        with pytest.raises(DegenerateWorkingPoint):
            uncertainty(0.5, 0.0, 1.0, 1.0)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_ghz_against_closed_form_with_adapter(self, n):
        lam, t, total = 0.4, 0.3, 5.0
        omega = math.pi / (4 * n * t)  # 2 N omega t = pi / 2
        rho = projector(ghz(n))
        obs = AdditiveObservable.pauli("z", n)
        p = ramsey_probability(rho, obs, rho, omega, lam, t)
        slope = dpdw_analytic(rho, obs, rho, omega, lam, t)
        simulated = to_half_spin_convention(uncertainty(p, slope, t, total))
        expected = ghz_closed_form(n, t, 1 / (math.sqrt(2) * lam), total)
        assert simulated == pytest.approx(expected, rel=1e-10)


class TestLowerBound:
    def test_vanishes_at_zero_frequency(self, rng):
        rho = projector(ghz(4))
        assert dpdw_lower_bound(rho, AdditiveObservable.pauli("z", 4), rho, 0.0, 0.5) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize(
        "rho_builder, n",
        [(lambda n: projector(ghz(n)), 6), (lambda n: projector(staircase(n)), 8)],
        ids=["ghz6", "staircase8"],
    )
    def test_below_exact_derivative(self, rho_builder, n):
        rho = rho_builder(n)
        obs = AdditiveObservable.pauli("z", n)
        eta = optimal_eta(rho, obs)
        for t in np.geomspace(0.05, 2.0, 12):
            omega = fixed_p2_rule(0.05, n)(t)
            bound = dpdw_lower_bound(rho, obs, eta, omega, t)
            assert bound <= abs(dpdw_analytic(rho, obs, eta, omega, 0.0, t)) + 1e-12


class TestUpperBound:
    def test_noiseless_limit(self):
        rho = projector(ghz(5))
        obs = AdditiveObservable.pauli("z", 5)
        omega, t = fixed_p2_rule(0.1, 5)(0.2), 0.2
        sig = RamseySignal(rho, obs, rho)
        bracket = abs(abs(omega * t * sig.trace_double_commutator) / 5 - abs(sig.trace_first_commutator) / 5)
        x = 2 * omega * t * 5
        bracket -= 2 * (math.expm1(x) - x)
        expected = 1 / (5 * math.sqrt(t) * bracket)
        assert delta_upper_bound_dephasing(rho, obs, rho, omega, 0.0, t) == pytest.approx(expected)

    def test_ghz8_bounds_simulation(self):
        n = 8
        rho = projector(ghz(n))
        obs = AdditiveObservable.pauli("z", n)
        lam = t2_to_lambda(1.0)
        sig = RamseySignal(rho, obs, rho)
        checked = 0
        for scale in np.geomspace(0.05, 2.0, 15):
            t = scale / math.sqrt(n)
            for p2 in (0.02, 0.05, 0.1, 0.2):
                omega = fixed_p2_rule(p2, n)(t)
                bound = delta_upper_bound_dephasing(rho, obs, rho, omega, lam, t)
                if bound is not None:
                    checked += 1
                    assert bound >= sig.delta_sqrt_t(omega, lam, t) - 1e-8
        assert checked > 10

    def test_vacuous_at_large_time(self):
        rho = projector(ghz(8))
        obs = AdditiveObservable.pauli("z", 8)
        t = 5.0
        assert delta_upper_bound_dephasing(rho, obs, rho, fixed_p2_rule(0.1, 8)(t), t2_to_lambda(1.0), t) is None

    def test_p1_mode(self):
        rho = projector(ghz(6))
        obs = AdditiveObservable.pauli("z", 6)
        samples = []
        for t in (0.05, 0.1, 0.2):
            omega = fixed_p2_rule(0.1, 6)(t)
            samples.append((dpdw_analytic(rho, obs, rho, omega, 0.0, t), 0.1, t, 6))
        p1 = estimate_p1(samples)
        assert p1 > 0
        bound = delta_upper_bound_dephasing(rho, obs, rho, fixed_p2_rule(0.1, 6)(0.1), 0.1, 0.1, u_mode="p1", p1=p1)
        assert bound is None or bound > 0
        with pytest.raises(ValueError):
            delta_upper_bound_dephasing(rho, obs, rho, 0.1, 0.1, 0.1, u_mode="p1")


class TestGHZClosedForm:
    def test_value(self):
        assert ghz_closed_form(10, 0.05, 1.0, 1.0) == pytest.approx(math.exp(0.025) / (10 * math.sqrt(0.05)))
        assert ghz_closed_form(10, 0.05, 1.0, 1.0) == pytest.approx(0.45853, abs=1e-5)

    def test_noiseless(self):
        assert ghz_closed_form(7, 0.3, math.inf, 1.0) == pytest.approx(1 / (7 * math.sqrt(0.3)))

    @pytest.mark.parametrize(
        "n, t_star, best",
        # reference values from the closed form sqrt(2) e^(1/4) / N^(3/4), evaluated in mpmath
        [(10, 0.15811388300841897, 0.32291529670114540), (16, 0.125, 0.22698576983894608)],
    )
    def test_optimum(self, n, t_star, best):
        t_opt, value = ghz_optimum(n, 1.0)
        assert t_opt == pytest.approx(t_star, rel=1e-12)
        assert value == pytest.approx(best, rel=1e-12)
        numeric = minimize_over_log_grid(lambda t: ghz_closed_form(n, t, 1.0, 1.0), (0.01, 1.0))
        assert numeric.interior
        assert numeric.t_opt == pytest.approx(t_star, rel=1e-6)
        assert numeric.value == pytest.approx(best, rel=1e-6)

    def test_optimum_needs_finite_t2(self):
        with pytest.raises(ValueError):
            ghz_optimum(4, math.inf)

    def test_unit_helpers(self):
        assert to_half_spin_convention(0.25) == 0.5
        assert to_field_units(2.0, 4.0) == 0.5


class TestOptimizer:
    def test_golden_section(self):
        assert golden_section(lambda x: (x - 0.3) ** 2, -1, 2) == pytest.approx(0.3, abs=1e-8)

    def test_ghz8_optimal_time(self):
        n, t2 = 8, 1.0
        lam = t2_to_lambda(t2)
        rho = projector(ghz(n))
        sig = RamseySignal(rho, AdditiveObservable.pauli("z", n), rho)
        t_opt, report = optimize_t(sig, phase_scan_rule(sig, lam), lam, (0.01, 1.0))
        assert report.interior_minimum
        assert t_opt == pytest.approx(t2 / (2 * math.sqrt(n)), rel=0.05)

    def test_noiseless_has_no_interior_minimum(self):
        n = 6
        rho = projector(ghz(n))
        sig = RamseySignal(rho, AdditiveObservable.pauli("z", n), rho)
        t_opt, report = optimize_t(sig, fixed_p2_rule(0.1, n), 0.0, (0.01, 1.0))
        assert not report.interior_minimum
        assert t_opt == pytest.approx(1.0)

    def test_noiseless_objective_monotone(self):
        n = 6
        rho = projector(ghz(n))
        sig = RamseySignal(rho, AdditiveObservable.pauli("z", n), rho)
        result = minimize_over_log_grid(lambda t: sig.delta_sqrt_t(fixed_p2_rule(0.1, n)(t), 0.0, t), (0.01, 1.0))
        assert np.all(np.diff(result.values) < 0)

    @pytest.mark.parametrize("family", ["ghz", "staircase", "rho_ex"])
    def test_single_slope_sign_change(self, family):
        n = 6
        rho = StateSpec(StateKind(family), n).density()
        obs = AdditiveObservable.pauli("z", n)
        sig = RamseySignal(rho, obs, optimal_eta(rho, obs))
        lam = t2_to_lambda(1.0)
        result = minimize_over_log_grid(lambda t: sig.delta_sqrt_t(fixed_p2_rule(0.1, n)(t), lam, t), (0.01, 2.0))
        signs = np.sign(np.diff(result.values))
        assert np.count_nonzero(np.diff(signs) != 0) == 1

    def test_non_finite_objective(self):
        with pytest.raises(NumericalFailure):
            minimize_over_log_grid(lambda t: math.nan if t > 0.5 else t, (0.1, 1.0))

    def test_best_phase_ghz(self):
        n, t = 5, 0.2
        lam = t2_to_lambda(1.0)
        rho = projector(ghz(n))
        sig = RamseySignal(rho, AdditiveObservable.pauli("z", n), rho)
        omega = best_phase_omega(sig, lam, t)
        # optimum sits on the fringe midpoint, 2 N omega t = pi / 2 (mod pi)
        assert math.cos(2 * n * omega * t) == pytest.approx(0, abs=1e-6)


class TestScalingStudy:
    def test_ghz_closed_form_finite_t2(self):
        fit = ghz_closed_form_scaling([8, 16, 32, 64, 128, 256], 1.0)
        assert fit.slope == pytest.approx(-0.75, abs=0.01)

    def test_ghz_closed_form_noiseless_fixed_t(self):
        fit = ghz_closed_form_scaling([8, 16, 32, 64, 128, 256], math.inf, fixed_t=0.1)
        assert fit.slope == pytest.approx(-1.0, abs=0.005)

    def test_product_plus_simulated(self):
        fit, _ = scaling_study(StateSpec(StateKind.PRODUCT_PLUS, 4), "z", "majority:y", t2_to_lambda(1.0), range(4, 13))
        assert fit.slope == pytest.approx(-0.5, abs=0.1)

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            scaling_study(GHZ_SPEC, "z", "optimal", 0.5, [4, 5, 6])

    def test_threads_do_not_change_result(self):
        ns = [4, 5, 6, 7]
        serial, _ = scaling_study(GHZ_SPEC, "z", "optimal", 0.5, ns)
        parallel, _ = scaling_study(GHZ_SPEC, "z", "optimal", 0.5, ns, workers=3)
        assert serial.delta_values == parallel.delta_values

    def test_dephased_ghz_simulation(self):
        fit, reports = scaling_study(GHZ_SPEC, "z", "optimal", t2_to_lambda(1.0), range(4, 11))
        assert fit.slope == pytest.approx(-0.75, abs=1e-6)
        for n, r in zip(fit.n_values, reports):
            assert r.t_opt == pytest.approx(1 / (2 * math.sqrt(n)), rel=1e-4)

    @pytest.mark.parametrize(
        "family, obs, eta",
        [
            ("ghz", "z", "optimal"),
            ("staircase", "z", "optimal"),
            ("rho_ex", "z", "optimal"),
            ("mz_projected_thermal", "x", "optimal"),
        ],
    )
    def test_noiseless_cat_slopes(self, family, obs, eta):
        params = {"b": math.atanh(0.6)} if family == "mz_projected_thermal" else {}
        fit, _ = scaling_study(StateSpec(StateKind(family), 4, params), obs, eta, 0.0, range(4, 13), fixed_t=0.3)
        assert fit.slope <= -0.95


class TestReadouts:
    def test_majority_projector(self):
        eta = majority_projector(3, "z")
        np.testing.assert_allclose(np.diag(eta).real, [1, 1, 1, 0, 1, 0, 0, 0])

    def test_sector_rule(self):
        rho = mz_projected_thermal(5, 0.3, 1)
        eta = readout_projector(rho, AdditiveObservable.pauli("x", 5), "sector")
        np.testing.assert_array_equal(eta, hamming_projector(5, 1))

    def test_self_rule(self):
        rho = rho_ex(4)
        np.testing.assert_allclose(readout_projector(rho, AdditiveObservable.pauli("z", 4), "self"), 4 * rho, atol=1e-12)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            readout_projector(rho_ex(3), AdditiveObservable.pauli("z", 3), "best")


class TestQFI:
    @pytest.mark.parametrize("n", [2, 5, 8])
    def test_ghz(self, n):
        assert qfi_pure(ghz(n), AdditiveObservable.pauli("z", n), 0.3) == pytest.approx(4 * 0.09 * n**2)

    def test_eigenstate(self):
        psi = np.zeros(16)
        psi[5] = 1
        assert qfi_pure(psi, AdditiveObservable.pauli("z", 4), 1.0) == 0

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_staircase(self, n):
        assert qfi_pure(staircase(n), AdditiveObservable.pauli("z", n), 0.5) == pytest.approx(n * (n + 2) / 3)

    def test_dense_observable_path(self, rng):
        from catsense.linalg_core import total_observable

        obs = AdditiveObservable.pauli("x", 3)
        psi = random_pure(8, rng)
        assert qfi_pure(psi, total_observable(obs)[0], 0.7) == pytest.approx(qfi_pure(psi, obs, 0.7))

    @given(st.integers(0, 2**32 - 1))
    def test_cramer_rao(self, seed):
        rng = np.random.default_rng(seed)
        n = 3
        obs = AdditiveObservable.pauli("z", n)
        psi = random_pure(8, rng)
        rho = projector(psi)
        eta = random_projector(8, rng)
        sig = RamseySignal(rho, obs, eta)
        t, omega = rng.uniform(0.05, 2), rng.uniform(-3, 3)
        delta = sig.delta_sqrt_t(omega, 0.0, t) / math.sqrt(t)  # single repetition
        qfi = qfi_pure(psi, obs, t)
        if qfi > 0:
            assert delta >= 1 / math.sqrt(qfi) - 1e-10
