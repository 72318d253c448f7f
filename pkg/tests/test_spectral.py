import numpy as np
import pytest

from fkdvlab import (ConfigurationError, CutoffSpec, DomainError, Field,
                     MultiplierSymbol, apply_multiplier, coordinate_multiply,
                     frac_deriv, hilbert, integrate, inverse, l2_norm,
                     make_grid, projector_low, transform, truncated_weight)
from fkdvlab.errors import NumericError
from fkdvlab.solver import InitialCondition
from fkdvlab.spectral import (dispersion_symbol, frac_deriv_symbol,
                              hilbert_symbol)


def trig_grid(n=256):
    return make_grid(n, 2 * np.pi)


def seeded_field(grid, seed, k_band=(0.5, 6.0), amp=1.0):
    return InitialCondition("random_band", (seed, *k_band, amp)).build(grid)


class TestGrid:
    def test_small_box(self):
        g = make_grid(8, 2 * np.pi)
        assert g.dx == pytest.approx(np.pi / 4)
        assert sorted(np.round(g.k).astype(int)) == [-4, -3, -2, -1, 0, 1, 2, 3]

    def test_reference_box(self):
        g = make_grid(4096, 200.0)
        assert g.dx == pytest.approx(0.048828125)
        assert np.max(np.abs(g.k)) == pytest.approx(64.34, abs=0.01)

    def test_bad_length(self):
        with pytest.raises(ConfigurationError):
            make_grid(8, -1.0)

    def test_odd_n(self):
        with pytest.raises(ConfigurationError):
            make_grid(9, 1.0)

    def test_nodes_start_at_left_edge(self):
        g = make_grid(16, 8.0)
        assert g.x[0] == -4.0
        assert g.x[8] == 0.0


class TestTransforms:
    @pytest.mark.parametrize("seed", range(5))
    def test_roundtrip(self, seed):
        g = make_grid(512, 100.0)
        f = seeded_field(g, seed)
        back = inverse(transform(f))
        assert np.max(np.abs(back.samples - f.samples)) <= 1e-12 * np.max(np.abs(f.samples))

    @pytest.mark.parametrize("seed", range(5))
    def test_plancherel(self, seed):
        g = make_grid(512, 100.0)
        f = seeded_field(g, seed)
        phys = np.sum(f.samples ** 2) * g.dx
        spec = np.sum(np.abs(transform(f).coefficients) ** 2) / g.length
        assert phys == pytest.approx(spec, rel=1e-12)

    def test_spectrum_matches_line_integral(self):
        # u = exp(-x^2) has u_hat(k) = sqrt(pi) exp(-k^2/4)
        g = make_grid(2048, 100.0)
        f = Field(g, np.exp(-g.x ** 2))
        spec = transform(f)
        for m in (1, 3, 10):
            exact = np.sqrt(np.pi) * np.exp(-g.k[m] ** 2 / 4)
            assert spec.coefficients[m] == pytest.approx(exact, rel=1e-12)


class TestApplyMultiplier:
    def test_identity(self):
        g = trig_grid()
        f = Field(g, np.cos(2 * g.x))
        out = apply_multiplier(f, MultiplierSymbol("one", lambda k: np.ones_like(k), 1.0))
        assert np.allclose(out.samples, f.samples, atol=1e-14)

    def test_derivative(self):
        g = trig_grid()
        f = Field(g, np.sin(g.x))
        out = apply_multiplier(f, MultiplierSymbol("ik", lambda k: 1j * k, 0.0))
        assert np.allclose(out.samples, np.cos(g.x), atol=1e-12)

    def test_half_derivative_eigenfunction(self):
        g = trig_grid()
        f = Field(g, np.cos(2 * g.x))
        out = apply_multiplier(f, frac_deriv_symbol(0.5))
        assert np.allclose(out.samples, np.sqrt(2) * np.cos(2 * g.x), atol=1e-12)

    def test_non_finite_symbol_rejected(self):
        g = trig_grid()
        f = Field(g, np.sin(g.x))
        k1 = g.k[1]
        with np.errstate(divide="ignore"):
            bad = MultiplierSymbol("pole", lambda k: 1.0 / (k ** 2 - k1 ** 2), 0.0)
            with pytest.raises(NumericError):
                apply_multiplier(f, bad)

    def test_composition(self):
        g = make_grid(512, 50.0)
        f = seeded_field(g, 7)
        m1 = frac_deriv_symbol(0.3)
        m2 = MultiplierSymbol("<k>^-1", lambda k: (1 + k ** 2) ** -0.5, 1.0)
        a = apply_multiplier(apply_multiplier(f, m1), m2)
        prod = MultiplierSymbol("prod", lambda k: m1.evaluator(k) * m2.evaluator(k), 0.0)
        b = apply_multiplier(f, prod)
        assert np.allclose(a.samples, b.samples, atol=1e-13 * l2_norm(f))


class TestFracDeriv:
    def test_single_mode(self):
        g = trig_grid()
        f = Field(g, np.cos(3 * g.x))
        out = frac_deriv(f, 0.5)
        assert np.allclose(out.samples, np.sqrt(3) * np.cos(3 * g.x), atol=1e-12)

    def test_negative_order_single_modes(self):
        g = trig_grid()
        f = Field(g, np.sin(g.x) + np.sin(2 * g.x))
        out = frac_deriv(f, -0.5)
        expect = np.sin(g.x) + np.sin(2 * g.x) / np.sqrt(2)
        assert np.allclose(out.samples, expect, atol=1e-12)

    def test_negative_order_rejects_mean(self):
        g = make_grid(1024, 100.0)
        f = Field(g, np.exp(-g.x ** 2))
        with pytest.raises(DomainError, match="zero mean"):
            frac_deriv(f, -0.5)

    def test_order_zero_is_identity(self):
        g = trig_grid()
        f = Field(g, 1.5 + np.cos(g.x))
        out = frac_deriv(f, 0.0)
        assert np.allclose(out.samples, f.samples, atol=1e-14)


class TestHilbert:
    def test_sine(self):
        g = trig_grid()
        out = hilbert(Field(g, np.sin(2 * g.x)))
        assert np.allclose(out.samples, -np.cos(2 * g.x), atol=1e-12)

    def test_cosine(self):
        g = trig_grid()
        out = hilbert(Field(g, np.cos(2 * g.x)))
        assert np.allclose(out.samples, np.sin(2 * g.x), atol=1e-12)

    def test_twice_is_minus_identity_on_zero_mean(self):
        g = trig_grid()
        f = Field(g, np.sin(g.x))
        out = hilbert(hilbert(f))
        assert np.allclose(out.samples, -f.samples, atol=1e-12)

    def test_twice_projects_out_mean(self):
        g = trig_grid()
        f = Field(g, 2.0 + np.sin(g.x))
        out = hilbert(hilbert(f))
        assert np.allclose(out.samples, -(f.samples - 2.0), atol=1e-12)


class TestProjector:
    def test_passes_low_mode(self):
        g = trig_grid()
        f = Field(g, np.sin(g.x))
        out = projector_low(f, CutoffSpec(4.0))
        assert np.allclose(out.samples, f.samples, atol=1e-13)

    def test_kills_high_mode(self):
        g = trig_grid(128)
        f = Field(g, np.sin(10 * g.x))
        out = projector_low(f, CutoffSpec(4.0))
        assert np.max(np.abs(out.samples)) <= 1e-13

    def test_linearity(self):
        g = make_grid(512, 50.0)
        f, h = seeded_field(g, 1), seeded_field(g, 2)
        cut = CutoffSpec(2.0)
        lhs = projector_low(Field(g, f.samples + h.samples), cut)
        rhs = projector_low(f, cut).samples + projector_low(h, cut).samples
        assert np.allclose(lhs.samples, rhs, atol=1e-13)

    def test_cutoff_beyond_nyquist(self):
        g = trig_grid(64)
        with pytest.raises(ConfigurationError):
            projector_low(Field(g, np.sin(g.x)), CutoffSpec(1e4))


class TestCoordinateMultiply:
    def test_matches_pointwise(self):
        g = make_grid(512, 60.0)
        f = Field(g, np.exp(-g.x ** 2))
        out = coordinate_multiply(f)
        assert np.allclose(out.samples, g.x * np.exp(-g.x ** 2), atol=1e-15)

    def test_twice_is_x_squared(self):
        g = make_grid(512, 60.0)
        f = Field(g, np.exp(-g.x ** 2))
        out = coordinate_multiply(coordinate_multiply(f))
        assert np.allclose(out.samples, g.x ** 2 * f.samples, atol=1e-15)

    def test_odd_integrand_vanishes(self):
        g = make_grid(1024, 80.0)
        f = Field(g, np.exp(-g.x ** 2))
        val = integrate(coordinate_multiply(f))
        assert abs(val) <= 1e-12 * l2_norm(f)


class TestTruncatedWeight:
    def test_value_at_origin(self):
        g = make_grid(2048, 400.0)
        for n_w, theta in ((5.0, 0.5), (20.0, 1.0)):
            w = truncated_weight(g, n_w, theta)
            assert w[g.n // 2] == pytest.approx(1.0, abs=1e-12)

    def test_flat_region_value(self):
        # (2N)^theta beyond 3N: N=5, theta=0.5 gives sqrt(10)
        g = make_grid(2048, 400.0)
        w = truncated_weight(g, 5.0, 0.5)
        j = np.argmin(np.abs(g.x - 20.0))          # |x| = 4N
        assert w[j] == pytest.approx(np.sqrt(10.0), rel=1e-12)

    def test_inner_region_matches_closed_form(self):
        g = make_grid(2048, 400.0)
        n_w = 12.0
        w = truncated_weight(g, n_w, 1.0)
        sel = np.abs(g.x) <= n_w
        assert np.allclose(w[sel], np.sqrt(1 + g.x[sel] ** 2), rtol=1e-12)

    def test_monotone_with_unit_slope_bound(self):
        g = make_grid(4096, 400.0)
        for theta in (0.25, 0.5, 1.0):
            w = truncated_weight(g, 10.0, theta)
            right = w[g.n // 2:]
            assert np.all(np.diff(right) >= -1e-14)
            assert np.all(np.diff(right) / g.dx <= 1.0 + 1e-10)
            left = w[:g.n // 2 + 1][::-1]
            assert np.all(np.diff(left) >= -1e-14)
            assert np.all(np.diff(left) / g.dx <= 1.0 + 1e-10)

    def test_flat_region_must_fit(self):
        g = make_grid(512, 50.0)
        with pytest.raises(ConfigurationError):
            truncated_weight(g, 10.0, 0.5)

    def test_higher_derivatives_bounded_uniformly_in_n(self):
        # |d^l w| stays bounded by a fixed constant for l = 2, 3
        g = make_grid(8192, 800.0)
        caps = {2: 0.0, 3: 0.0}
        for n_w in (8.0, 16.0, 32.0, 64.0):
            w = truncated_weight(g, n_w, 0.5)
            d2 = np.gradient(np.gradient(w, g.dx), g.dx)
            d3 = np.gradient(d2, g.dx)
            caps[2] = max(caps[2], np.max(np.abs(d2)))
            caps[3] = max(caps[3], np.max(np.abs(d3)))
        assert caps[2] <= 1.0
        assert caps[3] <= 2.0


class TestOperatorIdentities:
    @pytest.mark.parametrize("alpha", [-0.5, 0.5])
    def test_dispersion_factorisation(self, alpha):
        # d/dx D^alpha = -H D^(1+alpha) as multipliers, to round-off
        g = make_grid(2048, 100.0)
        f = seeded_field(g, 3)
        f = Field(g, f.samples - np.mean(f.samples))
        lhs = apply_multiplier(f, dispersion_symbol(alpha))
        rhs = apply_multiplier(frac_deriv(f, 1.0 + alpha), hilbert_symbol())
        diff = np.linalg.norm(lhs.samples + rhs.samples)
        assert diff <= 1e-12 * np.linalg.norm(lhs.samples)

    @pytest.mark.parametrize("theta", [0.25, 0.5, 0.9])
    def test_frac_deriv_of_weight_bounded_uniformly(self, theta):
        # sup |D^beta w| is bounded independently of the truncation radius
        g = make_grid(8192, 800.0)
        for beta in (theta + 0.1, 1.0, 2.0):
            sups = []
            for n_w in (8.0, 16.0, 32.0, 64.0):
                w = Field(g, truncated_weight(g, n_w, theta))
                sups.append(np.max(np.abs(frac_deriv(w, beta).samples)))
            assert max(sups) <= 3.0
            assert max(sups) <= 4.0 * min(sups) + 1e-6

    def test_hilbert_coordinate_commutator_zero_mean(self):
        # [H, x] f = 0 exactly when f has zero mean
        g = make_grid(4096, 200.0)
        f = InitialCondition("sine_packet", (1.0, 3.0, 4.0)).build(grid=g)
        a = hilbert(coordinate_multiply(f))
        b = coordinate_multiply(hilbert(f))
        assert np.max(np.abs(a.samples - b.samples)) <= 1e-10

    def test_hilbert_coordinate_commutator_detects_mean(self):
        # with mean M the commutator is the constant -M/pi
        g = make_grid(4096, 200.0)
        f = Field(g, np.exp(-g.x ** 2))
        a = hilbert(coordinate_multiply(f))
        b = coordinate_multiply(hilbert(f))
        comm = a.samples - b.samples
        interior = np.abs(g.x) < 20.0
        expect = -np.sqrt(np.pi) / np.pi
        assert np.median(comm[interior]) == pytest.approx(expect, rel=0.05)
