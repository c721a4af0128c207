import numpy as np
import pytest

from hardstab.numerics import poly_roots
from hardstab.synthesis import (
    FeedbackGain,
    PoleSetError,
    ackermann_gain,
    ce_lqr_gain,
    closed_loop_charpoly,
    costab_bound,
    is_stabilizing,
    jury_necessary,
    k1_closed_form,
    perturbed_charpoly,
    recovered_poles,
)
from hardstab.systems import HardFamilyParams, hard_matrices, make_hard_pair

PARAMS2 = HardFamilyParams(n=2, r=3.2, v=1.01)


def random_stable_conjugate_poles(rng, n):
    """Stable pole set closed under conjugation."""
    poles = []
    while len(poles) < n:
        if n - len(poles) >= 2 and rng.random() < 0.5:
            radius = rng.uniform(0.0, 0.95)
            angle = rng.uniform(0.0, np.pi)
            z = radius * np.exp(1j * angle)
            poles.extend([z, np.conj(z)])
        else:
            poles.append(complex(rng.uniform(-0.95, 0.95)))
    return np.array(poles[:n])


def charpoly_by_interpolation(m):
    """det(zI - M) from determinant samples at the (n+1)-th roots of unity.

    The node Vandermonde is a scaled DFT, so the only error is the rounding
    of the determinant samples themselves; returns that scale too.
    """
    n = m.shape[0]
    nodes = np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
    values = np.array([np.linalg.det(z * np.eye(n) - m) for z in nodes])
    powers = np.vander(nodes, n + 1, increasing=True)
    coeffs = np.linalg.solve(powers, values).real
    return coeffs, float(np.max(np.abs(values)))


class TestAckermann:
    def test_deadbeat_n2(self):
        pair = make_hard_pair(PARAMS2, 0.0)
        gain = ackermann_gain(pair.s1, [0.0, 0.0])
        np.testing.assert_allclose(gain.k, [-10.0382, -3.1683], atol=1e-4)
        assert is_stabilizing(pair.s1, gain).spectral_radius < 1e-6

    def test_open_loop_poles_give_zero_gain(self):
        # requesting the open-loop spectrum makes Delta_cl(A) = 0 by
        # Cayley-Hamilton, so K = 0
        pair = make_hard_pair(HardFamilyParams(n=3, r=3.2, v=1.01), 0.0)
        poles = np.linalg.eigvals(pair.s1.a)
        gain = ackermann_gain(pair.s1, poles)
        np.testing.assert_allclose(gain.k, 0.0, atol=1e-10)

    def test_places_requested_poles(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            n = int(rng.integers(2, 6))
            r = rng.uniform(1.5, 4.0)
            params = HardFamilyParams(n=n, r=r, v=rng.uniform(0.1, 0.9) * (r - 1) / 2)
            pair = make_hard_pair(params, 0.0)
            poles = random_stable_conjugate_poles(rng, n)
            gain = ackermann_gain(pair.s1, poles)
            achieved = np.linalg.eigvals(pair.s1.a + pair.s1.b @ gain.k.reshape(1, -1))
            np.testing.assert_allclose(
                np.sort_complex(achieved), np.sort_complex(poles), atol=1e-6
            )

    def test_rejects_unpaired_complex(self):
        pair = make_hard_pair(PARAMS2, 0.0)
        with pytest.raises(PoleSetError):
            ackermann_gain(pair.s1, [0.5 + 0.2j, 0.1])


class TestK1ClosedForm:
    def test_hand_value_n2(self):
        assert k1_closed_form(PARAMS2, [0.0, 0.0]) == pytest.approx(
            -10.24 / 1.0201, rel=1e-12
        )

    def test_hand_value_n4(self):
        params = HardFamilyParams(n=4, r=3.2, v=1.01)
        value = k1_closed_form(params, [0.5] * 4)
        assert value == pytest.approx(-(2.7**4) / (1.01**4), rel=1e-12)
        assert value == pytest.approx(-51.0704, abs=1e-3)

    def test_always_negative_for_stable_poles(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            n = int(rng.integers(2, 8))
            params = HardFamilyParams(n=n, r=rng.uniform(1.6, 4.0), v=0.25)
            assert k1_closed_form(params, random_stable_conjugate_poles(rng, n)) < 0

    def test_matches_ackermann_first_entry(self):
        rng = np.random.default_rng(29)
        for _ in range(60):
            n = int(rng.integers(2, 11))
            r = rng.uniform(1.5, 4.0)
            v = rng.uniform(0.1, 0.95) * (r - 1) / 2
            params = HardFamilyParams(n=n, r=r, v=v)
            poles = random_stable_conjugate_poles(rng, n)
            k1 = k1_closed_form(params, poles)
            gain = ackermann_gain(make_hard_pair(params, 0.0).s1, poles)
            assert gain.k[0] == pytest.approx(k1, rel=1e-8)

    def test_rejects_unstable_poles(self):
        with pytest.raises(PoleSetError):
            k1_closed_form(PARAMS2, [1.5, 0.0])


class TestClosedLoopCharpoly:
    def test_deadbeat_n2(self):
        gain = ackermann_gain(make_hard_pair(PARAMS2, 0.0).s1, [0.0, 0.0])
        coeffs = closed_loop_charpoly(PARAMS2, gain)
        assert coeffs[2] == pytest.approx(1.0)
        assert abs(coeffs[1]) < 1e-10
        assert abs(coeffs[0]) < 1e-10

    def test_zero_gain_is_open_loop(self):
        for n in (2, 4, 6):
            params = HardFamilyParams(n=n, r=3.2, v=1.01)
            coeffs = closed_loop_charpoly(params, FeedbackGain(k=np.zeros(n)))
            expected = np.zeros(n + 1)
            expected[n] = 1.0
            expected[n - 1] = -params.r
            np.testing.assert_allclose(coeffs, expected, atol=1e-12)

    def test_matches_determinant_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(30):
            n = int(rng.integers(2, 9))
            params = HardFamilyParams(n=n, r=3.2, v=1.01)
            gain = FeedbackGain(k=rng.normal(scale=2.0, size=n))
            coeffs = closed_loop_charpoly(params, gain)
            a, b = hard_matrices(n, params.r, params.v, 0.0)
            closed = a + b @ gain.k.reshape(1, -1)
            oracle, sample_scale = charpoly_by_interpolation(closed)
            np.testing.assert_allclose(
                coeffs, oracle, rtol=1e-8, atol=1e-9 * max(1.0, sample_scale)
            )


class TestPerturbedCharpoly:
    def test_zero_perturbation(self):
        base = np.array([0.5, -0.2, 1.0])
        np.testing.assert_array_equal(perturbed_charpoly(base, 0.0, -3.0), base)

    def test_worked_example_unstable_at_m_0p1(self):
        gain = ackermann_gain(make_hard_pair(PARAMS2, 0.0).s1, [0.0, 0.0])
        base = closed_loop_charpoly(PARAMS2, gain)
        shifted = perturbed_charpoly(base, 0.1, gain.k[0])
        assert shifted[1] == pytest.approx(1.00382, abs=1e-4)
        roots = poly_roots(shifted)
        assert np.max(np.abs(roots)) == pytest.approx(1.00382, abs=1e-4)

    def test_worked_example_stable_at_m_0p09(self):
        gain = ackermann_gain(make_hard_pair(PARAMS2, 0.0).s1, [0.0, 0.0])
        base = closed_loop_charpoly(PARAMS2, gain)
        shifted = perturbed_charpoly(base, 0.09, gain.k[0])
        assert shifted[1] == pytest.approx(0.90344, abs=1e-4)
        assert np.max(np.abs(poly_roots(shifted))) < 1.0

    def test_matches_determinant_oracle(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            params = HardFamilyParams(n=n, r=3.2, v=1.01)
            poles = random_stable_conjugate_poles(rng, n)
            gain = ackermann_gain(make_hard_pair(params, 0.0).s1, poles)
            m = rng.uniform(0.0, 0.3)
            shifted = perturbed_charpoly(closed_loop_charpoly(params, gain), m, gain.k[0])
            a, b2 = hard_matrices(n, params.r, params.v, m)
            closed = a + b2 @ gain.k.reshape(1, -1)
            oracle, sample_scale = charpoly_by_interpolation(closed)
            np.testing.assert_allclose(
                shifted, oracle, rtol=1e-8, atol=1e-9 * max(1.0, sample_scale)
            )

    def test_rejects_non_monic(self):
        with pytest.raises(ValueError):
            perturbed_charpoly(np.array([1.0, 2.0]), 0.1, -1.0)


class TestJury:
    def test_stable_quadratic(self):
        report = jury_necessary(np.array([-0.5, 0.0, 1.0]))
        assert report.passed
        assert report.at_one == pytest.approx(0.5)
        assert report.signed_at_minus_one == pytest.approx(0.5)

    def test_root_outside(self):
        report = jury_necessary(np.array([-2.0, 1.0]))
        assert not report.passed
        assert report.at_one == pytest.approx(-1.0)

    def test_product_identities(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            n = int(rng.integers(1, 9))
            poles = random_stable_conjugate_poles(rng, n) if n > 1 else np.array(
                [rng.uniform(-0.9, 0.9)]
            )
            from hardstab.numerics import poly_from_roots

            coeffs = poly_from_roots(poles)
            report = jury_necessary(coeffs)
            assert report.passed
            assert report.at_one == pytest.approx(
                np.prod(1 - poles).real, rel=1e-9, abs=1e-12
            )
            assert report.signed_at_minus_one == pytest.approx(
                np.prod(1 + poles).real, rel=1e-9, abs=1e-12
            )

    def test_rejects_nonpositive_leading(self):
        with pytest.raises(ValueError):
            jury_necessary(np.array([1.0, -1.0]))

    def test_never_contradicts_spectral_radius(self):
        rng = np.random.default_rng(43)
        for _ in range(40):
            n = int(rng.integers(2, 7))
            params = HardFamilyParams(n=n, r=3.2, v=1.01)
            pair = make_hard_pair(params, 0.0)
            gain = ackermann_gain(pair.s1, random_stable_conjugate_poles(rng, n))
            if is_stabilizing(pair.s1, gain).stable:
                assert jury_necessary(closed_loop_charpoly(params, gain)).passed


class TestCostabBound:
    def test_hand_values(self):
        report = costab_bound(PARAMS2, [0.0, 0.0])
        assert report.bound == pytest.approx((1.01 / 3.2) ** 2, rel=1e-12)
        assert report.bound == pytest.approx(0.09961, abs=1e-4)
        assert report.sup_bound == pytest.approx((2.02 / 2.2) ** 2, rel=1e-12)
        assert report.sup_bound == pytest.approx(0.84307, abs=1e-4)
        assert report.theorem_m == pytest.approx(1.68613, abs=1e-4)

    def test_monotone_toward_sup(self):
        report = costab_bound(PARAMS2, [0.999, 0.999])
        scaling = (1.999 / 2) ** 2 * ((3.2 - 1) / (3.2 - 0.999)) ** 2
        assert report.bound == pytest.approx(report.sup_bound * scaling, rel=0.01)
        lower = costab_bound(PARAMS2, [0.9, 0.9])
        assert lower.bound < report.bound < report.sup_bound

    def test_ordering_invariant(self):
        rng = np.random.default_rng(47)
        for _ in range(30):
            n = int(rng.integers(2, 8))
            params = HardFamilyParams(n=n, r=3.2, v=1.01)
            report = costab_bound(params, random_stable_conjugate_poles(rng, n))
            assert 0 < report.bound < report.sup_bound < report.theorem_m

    def test_rejects_unstable(self):
        with pytest.raises(PoleSetError):
            costab_bound(PARAMS2, [1.0, 0.0])


class TestIsStabilizing:
    def test_by_construction(self):
        pair = make_hard_pair(PARAMS2, 0.0)
        gain = ackermann_gain(pair.s1, [0.3, -0.2])
        assert is_stabilizing(pair.s1, gain).stable

    def test_open_loop_unstable(self):
        pair = make_hard_pair(PARAMS2, 0.0)
        report = is_stabilizing(pair.s1, FeedbackGain(k=np.zeros(2)))
        assert not report.stable
        assert report.spectral_radius == pytest.approx(3.2)

    def test_deadbeat_gain_fails_on_sibling(self):
        pair = make_hard_pair(PARAMS2, 0.1)
        gain = ackermann_gain(pair.s1, [0.0, 0.0])
        report = is_stabilizing(pair.s2, gain)
        assert not report.stable
        assert report.spectral_radius == pytest.approx(1.00382, abs=1e-4)


class TestCeLqrGain:
    def test_exact_model_stabilizes(self):
        for n in (2, 4, 6):
            params = HardFamilyParams(n=n, r=3.2, v=1.01)
            gain = ce_lqr_gain(params, 0.0)
            truth = make_hard_pair(params, 0.0).s1
            assert is_stabilizing(truth, gain).stable

    def test_far_estimate_synthesis_still_succeeds(self):
        gain = ce_lqr_gain(PARAMS2, 10.0)
        truth = make_hard_pair(PARAMS2, 0.0).s1
        assert gain.k.shape == (2,)
        assert not is_stabilizing(truth, gain).stable

    def test_tiny_estimate_error_still_stabilizes(self):
        params = HardFamilyParams(n=4, r=3.2, v=1.01)
        truth = make_hard_pair(params, 0.0).s1
        gain = ce_lqr_gain(params, 1e-9)
        assert is_stabilizing(truth, gain).stable


class TestConditioningWarning:
    def test_large_dimension_warns(self):
        params = HardFamilyParams(n=13, r=3.2, v=1.01)
        with pytest.warns(RuntimeWarning, match="float64"):
            k1_closed_form(params, [0.0] * 13)

    def test_supported_range_silent(self):
        import warnings as warnings_module

        with warnings_module.catch_warnings():
            warnings_module.simplefilter("error")
            k1_closed_form(PARAMS2, [0.0, 0.0])


class TestRecoveredPoles:
    def test_roundtrip(self):
        rng = np.random.default_rng(53)
        poles = random_stable_conjugate_poles(rng, 4)
        params = HardFamilyParams(n=4, r=3.2, v=1.01)
        gain = ackermann_gain(make_hard_pair(params, 0.0).s1, poles)
        recovered = recovered_poles(params, gain)
        np.testing.assert_allclose(
            np.sort_complex(recovered), np.sort_complex(poles), atol=1e-6
        )


class TestProp2Contrapositive:
    def test_gain_fails_on_sibling_at_or_above_bound(self):
        rng = np.random.default_rng(59)
        checked = 0
        while checked < 200:
            n = int(rng.integers(2, 8))
            r = rng.uniform(1.6, 4.0)
            v = rng.uniform(0.15, 0.9) * (r - 1) / 2
            params = HardFamilyParams(n=n, r=r, v=v)
            poles = random_stable_conjugate_poles(rng, n)
            gain = ackermann_gain(make_hard_pair(params, 0.0).s1, poles)
            if not is_stabilizing(make_hard_pair(params, 0.0).s1, gain).stable:
                continue
            bound = costab_bound(params, poles).bound
            m = bound * rng.uniform(1.000001, 50.0)
            pair = make_hard_pair(params, m)
            assert is_stabilizing(pair.s2, gain).spectral_radius >= 1.0
            checked += 1
