import pytest
import torch
from hypothesis import given, strategies as st

from memreservoir import (
    COEFF_FLOOR,
    DEFAULT_CONSTANTS,
    DomainError,
    DynamicsScalars,
    MemristiveConstants,
    RescaleConstants,
    depression_rate,
    fixed_point,
    mars_coefficients,
    potentiation_rate,
    rescale,
)

BOUNDS5 = RescaleConstants(steepness=5.0)
SCALARS = DynamicsScalars(gamma=1.0, delta=0.05)

finite_z = st.floats(min_value=-30.0, max_value=30.0, allow_nan=False)


class TestRates:
    def test_potentiation_at_zero_returns_base_rate(self):
        assert potentiation_rate(0.0) == pytest.approx(1e-4)

    def test_potentiation_reference_value(self):
        # high-precision evaluation of 1e-4 * e^(10 * 0.75)
        assert potentiation_rate(0.75) == pytest.approx(0.18080424144560632, rel=1e-12)

    def test_depression_at_zero_returns_base_rate(self):
        assert depression_rate(0.0) == pytest.approx(0.5)

    def test_depression_reference_value(self):
        # 0.5 * e^(-0.75)
        assert depression_rate(0.75) == pytest.approx(0.23618327637050735, rel=1e-12)

    def test_depression_decays_toward_zero(self):
        assert depression_rate(50.0) < 1e-20
        assert depression_rate(200.0) >= 0.0

    @given(z=finite_z)
    def test_rates_strictly_positive(self, z):
        assert potentiation_rate(z) > 0
        assert depression_rate(z) > 0

    def test_tensor_input_elementwise(self):
        z = torch.tensor([0.0, 0.75], dtype=torch.float64)
        out = potentiation_rate(z)
        assert out[0] == pytest.approx(1e-4)
        assert out[1] == pytest.approx(0.18080424144560632)

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(DomainError):
            potentiation_rate(bad)
        with pytest.raises(DomainError):
            depression_rate(bad)

    def test_constants_must_be_positive(self):
        with pytest.raises(ValueError):
            MemristiveConstants(kp0=0.0)
        with pytest.raises(ValueError):
            MemristiveConstants(eta_d=-1.0)


class TestRescale:
    def test_midpoint(self):
        # sigmoid midpoint: (upper - lower)/2 + lower, independent of steepness
        for s in (0.5, 5.0, 14.0):
            assert rescale(0.0, RescaleConstants(steepness=s)) == pytest.approx(0.75)

    def test_reference_value(self):
        # 0.8 / (1 + e^-5) + 0.35
        assert rescale(1.0, BOUNDS5) == pytest.approx(1.1446457192605721, rel=1e-12)

    def test_lower_asymptote(self):
        assert rescale(-40.0, BOUNDS5) == pytest.approx(0.35, abs=1e-12)

    @given(z=st.floats(min_value=-3.0, max_value=3.0), s=st.floats(min_value=0.1, max_value=10.0))
    def test_output_strictly_inside_bounds(self, z, s):
        # strict openness holds wherever the sigmoid has not saturated to
        # an exact 0/1 in float64 (|z*s| beyond ~37 rounds onto the bound)
        out = rescale(z, RescaleConstants(steepness=s))
        assert 0.35 < out < 1.15

    @given(z=finite_z, s=st.floats(min_value=0.1, max_value=20.0))
    def test_output_never_leaves_closed_bounds(self, z, s):
        out = rescale(z, RescaleConstants(steepness=s))
        assert 0.35 <= out <= 1.15

    @given(z=st.floats(min_value=-5.0, max_value=5.0))
    def test_monotone_increasing(self, z):
        assert rescale(z + 0.25, BOUNDS5) > rescale(z, BOUNDS5)

    @given(z=finite_z)
    def test_symmetric_about_midpoint(self, z):
        mid = 0.75
        assert rescale(z, BOUNDS5) - mid == pytest.approx(mid - rescale(-z, BOUNDS5), abs=1e-12)

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ValueError):
            RescaleConstants(steepness=1.0, lower=1.2, upper=1.1)
        with pytest.raises(ValueError):
            RescaleConstants(steepness=0.0)


class TestMarsCoefficients:
    def test_reference_values(self):
        coeffs, clamped = mars_coefficients(torch.tensor([0.75], dtype=torch.float64), DEFAULT_CONSTANTS, SCALARS)
        assert float(coeffs.a) == pytest.approx(0.9791506241091943, rel=1e-12)
        assert float(coeffs.b) == pytest.approx(0.009040212072280316, rel=1e-12)
        assert clamped == 0

    def test_delta_zero_degenerates_to_pure_retention(self):
        scalars = DynamicsScalars(gamma=0.7, delta=0.0)
        z = torch.linspace(0.4, 1.1, 9, dtype=torch.float64)
        coeffs, _ = mars_coefficients(z, DEFAULT_CONSTANTS, scalars)
        assert torch.allclose(coeffs.a, torch.full_like(z, 0.7))
        assert torch.all(coeffs.b == 0)

    def test_rate_sum_bounded_by_interval_endpoints(self):
        # monotonicity of the two rates over [0.35, 1.15]: the sum lies within
        # the envelope of the endpoint evaluations
        lo_sum = potentiation_rate(0.35) + depression_rate(1.15)
        hi_sum = potentiation_rate(1.15) + depression_rate(0.35)
        assert lo_sum == pytest.approx(0.16162992988539584, rel=1e-12)
        assert hi_sum == pytest.approx(10.22392114593540646, rel=1e-12)
        z = torch.linspace(0.35, 1.15, 257, dtype=torch.float64)
        total = potentiation_rate(z) + depression_rate(z)
        assert float(total.min()) >= lo_sum - 1e-12
        assert float(total.max()) <= hi_sum + 1e-12

    def test_b_strictly_positive(self):
        z = torch.linspace(0.35, 1.15, 33, dtype=torch.float64)
        coeffs, _ = mars_coefficients(z, DEFAULT_CONSTANTS, SCALARS)
        assert torch.all(coeffs.b > 0)

    def test_non_positive_entries_clamped_and_counted(self):
        scalars = DynamicsScalars(gamma=1.0, delta=0.5)
        z = torch.tensor([0.4, 1.1, 1.15], dtype=torch.float64)  # high activations push a negative
        coeffs, clamped = mars_coefficients(z, DEFAULT_CONSTANTS, scalars)
        raw = 1.0 - 0.5 * (potentiation_rate(z) + depression_rate(z))
        expected = int((raw <= 0).sum())
        assert clamped == expected > 0
        assert torch.all(coeffs.a >= COEFF_FLOOR)

    def test_elementwise_permutation_equivariance(self):
        z = torch.linspace(0.36, 1.14, 16, dtype=torch.float64)
        perm = torch.randperm(16, generator=torch.Generator().manual_seed(0))
        direct, _ = mars_coefficients(z[perm], DEFAULT_CONSTANTS, SCALARS)
        permuted, _ = mars_coefficients(z, DEFAULT_CONSTANTS, SCALARS)
        assert torch.equal(direct.a, permuted.a[perm])
        assert torch.equal(direct.b, permuted.b[perm])

    def test_scalars_validation(self):
        with pytest.raises(ValueError):
            DynamicsScalars(gamma=0.0, delta=0.1)
        with pytest.raises(ValueError):
            DynamicsScalars(gamma=1.5, delta=0.1)
        with pytest.raises(ValueError):
            DynamicsScalars(gamma=1.0, delta=-0.1)


class TestFixedPoint:
    def test_reference_value_against_iterated_recurrence(self):
        # oracle: iterate h <- a*h + b ten thousand times at constant z
        z = 0.75
        coeffs, _ = mars_coefficients(torch.tensor([z], dtype=torch.float64), DEFAULT_CONSTANTS, SCALARS)
        a, b = float(coeffs.a), float(coeffs.b)
        h = 0.0
        for _ in range(10_000):
            h = a * h + b
        assert fixed_point(z) == pytest.approx(h, abs=1e-14)
        assert fixed_point(z) == pytest.approx(0.4335962917847789, rel=1e-12)

    @given(z=st.floats(min_value=0.35, max_value=1.15))
    def test_fixed_point_in_unit_interval(self, z):
        assert 0.0 < fixed_point(z) < 1.0
