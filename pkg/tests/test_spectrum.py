import math

import numpy as np
import pytest

import koopeig as ke
from koopeig.spectrum import loglog_slope


def test_support_validation():
    ke.ApproxEig(1.0, 16, (0.25, 4.0))
    with pytest.raises(ke.OutOfRangeError):
        ke.ApproxEig(0.26, 16, (0.25, 4.0))  # support dips below the annulus
    with pytest.raises(ValueError):
        ke.ApproxEig(1.0, 0, (0.25, 4.0))


def test_residual_zero_at_t0():
    ae = ke.ApproxEig(1.0, 16, (0.25, 4.0))
    assert ke.approx_eig_residual(ae, 0.0).relative_residual == 0.0


def test_residual_small_angle_oracle():
    # Analytic small-angle value: integral of (I-omega)^2 t^2 over the bump
    # support gives relative residual t / (sqrt(12) n).
    ae = ke.ApproxEig(1.0, 16, (0.25, 4.0))
    r = ke.approx_eig_residual(ae, 1.0)
    oracle = 1.0 / (math.sqrt(12.0) * 16.0)  # ~0.018042
    assert r.relative_residual == pytest.approx(oracle, rel=0.02)


def test_phi_norm_analytic():
    for n in [4, 16, 128]:
        ae = ke.ApproxEig(1.0, n, (0.25, 4.0))
        r = ke.approx_eig_residual(ae, 1.0)
        assert r.phi_norm**2 == pytest.approx(2.0 * math.pi * n, abs=1e-10)


def test_residual_halves_when_n_doubles():
    prev = None
    for n in [16, 32, 64, 128]:
        r = ke.approx_eig_residual(ke.ApproxEig(1.0, n, (0.25, 4.0)), 1.0)
        if prev is not None:
            assert prev / r.relative_residual == pytest.approx(2.0, rel=0.05)
        prev = r.relative_residual


def test_residual_invariant_under_omega_shift():
    r1 = ke.approx_eig_residual(ke.ApproxEig(1.0, 32, (0.25, 4.0)), 1.0)
    r2 = ke.approx_eig_residual(ke.ApproxEig(2.5, 32, (0.25, 4.0)), 1.0)
    assert r1.relative_residual == pytest.approx(r2.relative_residual, rel=1e-12)


def test_residual_linear_in_t_small_angle():
    ae = ke.ApproxEig(1.0, 16, (0.25, 4.0))
    r_half = ke.approx_eig_residual(ae, 0.5).relative_residual
    r_one = ke.approx_eig_residual(ae, 1.0).relative_residual
    assert r_half / r_one == pytest.approx(0.5, rel=0.05)


def test_scaling_slope_near_minus_one():
    fit = ke.scaling_fit(1.0, 1.0, [4, 8, 16, 32, 64, 128, 256])
    assert -1.1 <= fit.slope <= -0.9


def test_loglog_slope_degenerate_constant():
    assert loglog_slope([4, 8, 16, 32], [0.5, 0.5, 0.5, 0.5]) == pytest.approx(0.0, abs=1e-12)


def test_quadrature_guard():
    ae = ke.ApproxEig(1.0, 16, (0.25, 4.0))
    with pytest.raises(ValueError):
        ke.approx_eig_residual(ae, 1.0, quad_points=16)


def test_wedge_constant_data_lambda_zero():
    report = ke.wedge_point_spectrum_check([0.0], (0.2, 2.2), lambda I: 1.0)
    assert report.max_residual == 0.0


def test_wedge_closed_form_certification():
    report = ke.wedge_point_spectrum_check([1.0 + 2.0j], (0.2, 2.2), lambda I: I)
    assert report.max_residual <= 1e-8


def test_wedge_lambda_sweep():
    lams = [complex(a, b) for a in np.linspace(-2, 2, 5) for b in np.linspace(-2, 2, 5)]
    report = ke.wedge_point_spectrum_check(lams, (0.2, 2.2), lambda I: I)
    assert report.residuals.shape == (25,)
    assert report.max_residual <= 1e-8


def test_wedge_rejects_full_turn():
    with pytest.raises(ValueError):
        ke.wedge_point_spectrum_check([0.0], (0.0, 2.0 * math.pi), lambda I: 1.0)
