import numpy as np
import pytest

from morreyflow import MorreyContext, MorreyParams, ScalarField, SpectralPropagator, TorusGeometry, morrey_norm
from morreyflow.errors import (
    BlowupInWindow,
    InsufficientEarlySamples,
    NonnegativityViolation,
    StepCollapse,
    TimesNotInTrajectory,
    ValidationError,
    WindowTooLate,
)
from morreyflow.oracle import brute_force_morrey_norm
from morreyflow.profiles import bubble, constant, random_field, singular, spike
from morreyflow.semilinear import (
    DtPolicy,
    ProblemSpec,
    blowup_study,
    constant_data_blowup_time,
    constant_data_solution,
    detect_blowup,
    evolve,
    fit_decay,
    initial_layer_check,
    integrating_factor_check,
    morrey_stays_small,
    verify_subsolution,
)

SPEC2 = dict(n=2, p=3.0, q=2.0, r=3.0)


def spec2(A=1.0, B=0.0, **kw):
    return ProblemSpec(A=A, B=B, **{**SPEC2, **kw})


@pytest.fixture(scope="module")
def g16():
    return TorusGeometry(n=2, L=4.0, N=16)


@pytest.fixture(scope="module")
def g32():
    return TorusGeometry(n=2, L=4.0, N=32)


# -- problem constraints --------------------------------------------------------


def test_spec_derived_quantities():
    spec = ProblemSpec(n=3, p=3.0, A=1.0, B=0.0, q=2.0, r=3.0, q_improved=2.0, lam_improved=1.0)
    assert spec.q_c == 3.0
    assert spec.lam == 2.0
    assert spec.beta == pytest.approx(1.0 / 6.0)
    assert spec.alpha == pytest.approx(0.25)


def test_spec_validation_messages():
    with pytest.raises(ValidationError, match=r"p > 1 \+ 2/n"):
        ProblemSpec(n=3, p=1.1, A=1.0, B=0.0, q=1.5, r=3.0)
    with pytest.raises(ValidationError, match="q <= q_c"):
        ProblemSpec(n=2, p=3.0, A=1.0, B=0.0, q=2.5, r=4.0)
    with pytest.raises(ValidationError, match="r/p < q < r"):
        ProblemSpec(n=2, p=3.0, A=1.0, B=0.0, q=1.9, r=6.5)
    with pytest.raises(ValidationError, match="A >= 0"):
        ProblemSpec(n=2, p=3.0, A=-1.0, B=0.0, q=2.0, r=3.0)
    with pytest.raises(ValidationError, match="alpha"):
        ProblemSpec(n=2, p=3.0, A=1.0, B=0.0, q=2.0, r=3.0, q_improved=2.5, lam_improved=2.6)
    with pytest.raises(ValidationError, match="improved pair"):
        ProblemSpec(n=2, p=3.0, A=1.0, B=0.0, q=2.0, r=3.0, q_improved=2.0, lam_improved=2.0)


# -- evolution oracles ----------------------------------------------------------


def test_pure_heat_limit(g16):
    rng = np.random.default_rng(0)
    u0 = random_field(g16, rng, smooth=0.01, nonneg=True)
    traj = evolve(u0, spec2(A=0.0, B=0.0), 0.1, DtPolicy(fixed_dt=0.01))
    direct = SpectralPropagator(g16).propagate(u0, traj.times[-1])
    assert np.max(np.abs(traj.fields[-1].values - direct.values)) <= 1e-10


def test_constant_data_reaction_oracle(g16):
    spec = spec2(A=1.0, B=0.0)
    traj = evolve(constant(g16, 1.0), spec, 0.25, DtPolicy(fixed_dt=2e-4, field_stride=10**9, norm_stride=10**9))
    exact = constant_data_solution(1.0, spec, traj.times)
    assert np.max(np.abs(traj.sup_norm - exact) / exact) <= 1e-6


def test_linear_growth_exact(g16):
    spec = spec2(A=0.0, B=0.7)
    traj = evolve(constant(g16, 0.5), spec, 0.5, DtPolicy(fixed_dt=0.05))
    exact = 0.5 * np.exp(0.7 * traj.times)
    assert np.max(np.abs(traj.sup_norm - exact) / exact) <= 1e-10


def test_mixed_reaction_oracle(g16):
    # u' = A u^p + B u has the closed form via the substitution v = u^(1-p)
    spec = spec2(A=0.5, B=0.8)
    traj = evolve(constant(g16, 0.9), spec, 0.2, DtPolicy(fixed_dt=1e-4, field_stride=10**9, norm_stride=10**9))
    exact = constant_data_solution(0.9, spec, traj.times)
    assert np.max(np.abs(traj.sup_norm - exact) / exact) <= 1e-6


def test_convergence_order_in_dt(g16):
    spec = spec2(A=1.0, B=0.0)
    errors, dts = [], []
    for dt in (4e-3, 2e-3, 1e-3):
        traj = evolve(constant(g16, 1.0), spec, 0.25, DtPolicy(fixed_dt=dt, field_stride=10**9, norm_stride=10**9))
        exact = constant_data_solution(1.0, spec, traj.times[-1])
        errors.append(abs(traj.sup_norm[-1] - exact))
        dts.append(dt)
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_nonnegativity_precondition(g16):
    bad = ScalarField(g16, np.full(g16.shape, -0.5))
    with pytest.raises(NonnegativityViolation):
        evolve(bad, spec2(), 0.1)


def test_step_collapse(g16):
    # forced blow-up with an unreachable threshold drives dt under the floor
    with pytest.raises(StepCollapse):
        evolve(constant(g16, 2.0), spec2(), 1.0, DtPolicy(dt_min=1e-6), blowup_threshold=1e30)


def test_comparison_with_pure_heat(g16):
    rng = np.random.default_rng(1)
    u0 = random_field(g16, rng, smooth=0.02, nonneg=True)
    policy = DtPolicy(fixed_dt=2e-3, field_stride=10)
    traj_react = evolve(u0, spec2(A=0.5, B=0.3), 0.1, policy)
    traj_heat = evolve(u0, spec2(A=0.0, B=0.0), 0.1, policy)
    for t in traj_react.field_times:
        hi = traj_react.field_at(t).values
        lo = traj_heat.field_at(t).values
        assert np.min(hi - lo) >= -1e-10


def test_scale_consistency():
    # u_sigma(x, t) = sigma^(2/(p-1)) u(sigma x, sigma^2 t) solves the same
    # equation with A fixed; run the rescaled bubble on the rescaled grid
    sigma = 0.5
    p = 3.0
    amp, width, T = 0.8, 0.5, 0.2
    base_geom = TorusGeometry(n=2, L=4.0, N=32)
    scaled_geom = TorusGeometry(n=2, L=4.0 / sigma, N=32)
    spec = spec2(A=1.0, B=0.0)
    policy = lambda dt: DtPolicy(fixed_dt=dt, field_stride=10**9, norm_stride=10**9)
    traj = evolve(bubble(base_geom, amp, width), spec, T, policy(1e-3))
    traj_s = evolve(
        bubble(scaled_geom, sigma ** (2 / (p - 1)) * amp, width / sigma),
        spec,
        T / sigma**2,
        policy(1e-3 / sigma**2),
    )
    # compare sup norms at matching times: |u_sigma(t/sigma^2)| = sigma * |u(t)|
    for frac in (0.25, 0.5, 1.0):
        t = frac * T
        i = np.argmin(np.abs(traj.times - t))
        j = np.argmin(np.abs(traj_s.times - t / sigma**2))
        lhs = traj_s.sup_norm[j]
        rhs = sigma ** (2 / (p - 1)) * traj.sup_norm[i]
        assert abs(lhs - rhs) / rhs < 0.05


# -- integral-form verification ---------------------------------------------------


def test_subsolution_pure_heat(g16):
    rng = np.random.default_rng(2)
    u0 = random_field(g16, rng, smooth=0.02, nonneg=True)
    traj = evolve(u0, spec2(A=0.0, B=0.0), 0.1, DtPolicy(fixed_dt=5e-3))
    rep = verify_subsolution(traj, 0.0, 0.1)
    assert rep["max_violation"] <= 1e-10


def test_subsolution_constant_data_quadrature(g16):
    spec = spec2(A=1.0, B=0.0)
    dt = 2e-3
    traj = evolve(constant(g16, 1.0), spec, 0.2, DtPolicy(fixed_dt=dt))
    rep = verify_subsolution(traj, 0.0, 0.2)
    # defect bounded by the trapezoid error of the analytic Duhamel integral
    exact = constant_data_solution(1.0, spec, 0.2)
    assert rep["max_violation"] <= 10 * dt**2 * exact


def test_subsolution_refines(g16):
    violations = []
    for N, dt in [(16, 4e-3), (32, 2e-3)]:
        geom = TorusGeometry(n=2, L=4.0, N=N)
        traj = evolve(bubble(geom, 0.8, 0.6), spec2(A=1.0, B=0.5), 0.2, DtPolicy(fixed_dt=dt))
        violations.append(verify_subsolution(traj, 0.0, 0.2)["max_violation"])
    assert violations[1] <= 0.5 * violations[0]


def test_subsolution_time_lookup(g16):
    traj = evolve(constant(g16, 0.5), spec2(), 0.1, DtPolicy(fixed_dt=5e-3))
    with pytest.raises(TimesNotInTrajectory):
        verify_subsolution(traj, 0.0, 0.0123456)


def test_integrating_factor_reduces_at_b_zero(g16):
    rng = np.random.default_rng(3)
    u0 = random_field(g16, rng, smooth=0.02, nonneg=True)
    traj = evolve(u0, spec2(A=1.0, B=0.0), 0.1, DtPolicy(fixed_dt=5e-3))
    rep_plain = verify_subsolution(traj, 0.0, 0.1)
    rep_if = integrating_factor_check(traj, 0.0, 0.1)
    assert rep_if["max_violation"] == pytest.approx(rep_plain["max_violation"], abs=1e-14)
    assert all(r == 0 for r in rep_if["remainders"])


def test_integrating_factor_remainders(g16):
    traj = evolve(bubble(g16, 0.8, 0.6), spec2(A=1.0, B=0.8), 0.3, DtPolicy(fixed_dt=5e-3))
    rep = integrating_factor_check(traj, 0.0, 0.3)
    assert len(rep["remainders"]) == 6
    for ratio, bound in zip(rep["remainder_ratios"], rep["ratio_bounds"]):
        assert ratio <= bound * (1 + 1e-6)
    with pytest.raises(WindowTooLate):
        integrating_factor_check(traj, 0.0, 1.2)


# -- decay fits -------------------------------------------------------------------


def test_fit_decay_trivial_constant(g16):
    traj = evolve(constant(g16, 0.01), spec2(A=0.0, B=0.0), 1.0, DtPolicy(fixed_dt=0.05))
    fit = fit_decay(traj, (0.1, 1.0), target="critical")
    assert abs(fit.fitted_exponent) < 1e-8
    assert np.isfinite(fit.constant_hat)


def test_fit_decay_improved_pure_heat():
    # d^(-1/2) profile has finite (2, 1) norm; pure heat decays at alpha = 1/4
    geom = TorusGeometry(n=2, L=4.0, N=64)
    spec = ProblemSpec(n=2, p=3.0, A=0.0, B=0.0, q=2.0, r=3.0, q_improved=2.0, lam_improved=1.0)
    u0 = singular(geom, 0.5)
    traj = evolve(u0, spec, 0.12, DtPolicy(fixed_dt=5e-4, field_stride=10**9, norm_stride=10**9))
    fit = fit_decay(traj, (5e-3, 0.1), target="improved")
    assert fit.target_exponent == -0.25
    assert abs(fit.fitted_exponent - fit.target_exponent) / 0.25 <= 0.15
    assert np.isfinite(fit.constant_hat)


def test_fit_decay_blowup_window(g16):
    traj = evolve(constant(g16, 2.0), spec2(A=1.0, B=0.0), 1.0)
    assert traj.blown_up
    with pytest.raises(BlowupInWindow):
        fit_decay(traj, (0.01, 0.5), target="critical")


def test_morrey_stays_small_zero_and_heat(g16):
    traj0 = evolve(constant(g16, 0.0), spec2(A=0.0, B=0.0), 0.05, DtPolicy(fixed_dt=5e-3))
    assert morrey_stays_small(traj0)["max_ratio"] == 0.0

    rng = np.random.default_rng(4)
    u0 = random_field(g16, rng, smooth=0.02, nonneg=True)
    traj = evolve(u0, spec2(A=0.0, B=0.0), 0.3, DtPolicy(fixed_dt=5e-3))
    rep = morrey_stays_small(traj)
    assert 0 < rep["max_ratio"] <= 2.0  # delta includes the local-L^s part


# -- blow-up ----------------------------------------------------------------------


def test_blowup_analytic(g16):
    spec = spec2(A=1.0, B=0.0)
    assert constant_data_blowup_time(2.0, spec) == pytest.approx(0.125)
    results = blowup_study([2.0], spec, g16, T=1.0)
    entry = results[0]
    assert entry["detected"]
    assert abs(entry["t_star"] - 0.125) / 0.125 <= 0.05
    t1, t2 = entry["t_cross"]
    assert abs(t2 - t1) / t1 <= 0.02


def test_no_blowup_small_bubble(g16):
    traj = evolve(bubble(g16, 0.05, 0.5), spec2(A=1.0, B=0.0), 2.0, DtPolicy(norm_stride=10, field_stride=10**9))
    rep = detect_blowup(traj)
    assert rep["status"] == "no_blowup_in_window"
    assert not rep["detected"]


def test_blowup_flag_recorded(g16):
    traj = evolve(constant(g16, 2.0), spec2(A=1.0, B=0.0), 1.0)
    rep = detect_blowup(traj)
    assert rep["detected"] and rep["status"] == "blowup_detected"
    assert rep["t_star"] < 0.13


# -- initial layer ------------------------------------------------------------------


def test_initial_layer_bounded_data():
    geom = TorusGeometry(n=2, L=4.0, N=32)
    traj = evolve(bubble(geom, 0.5, 0.5), spec2(A=1.0, B=0.0), 0.02, DtPolicy(fixed_dt=5e-4))
    rep = initial_layer_check(traj)
    assert rep["sup_product"]["vanishing"]
    assert rep["morrey_r_product"]["vanishing"]


def test_initial_layer_spike_negative_control():
    geom = TorusGeometry(n=2, L=4.0, N=64)
    traj = evolve(spike(geom), spec2(A=0.0, B=0.0), 0.05, DtPolicy(fixed_dt=5e-4, norm_stride=10))
    rep = initial_layer_check(traj, t_max=0.05)
    assert not rep["sup_product"]["vanishing"]


def test_initial_layer_zero_data(g16):
    traj = evolve(constant(g16, 0.0), spec2(), 0.02, DtPolicy(fixed_dt=5e-4))
    rep = initial_layer_check(traj)
    assert rep["sup_product"]["vanishing"]
    assert rep["sup_product"]["values"] == (0.0, 0.0)


def test_initial_layer_needs_samples(g16):
    traj = evolve(constant(g16, 0.5), spec2(), 0.02, DtPolicy(fixed_dt=5e-3))
    with pytest.raises(InsufficientEarlySamples):
        initial_layer_check(traj)


# -- recorded norms match the oracle ---------------------------------------------


def test_trajectory_norms_match_brute_force():
    geom = TorusGeometry(n=2, L=4.0, N=8)
    rng = np.random.default_rng(5)
    u0 = random_field(geom, rng, nonneg=True)
    spec = spec2(A=0.5, B=0.2)
    ctx = MorreyContext(geom)
    traj = evolve(u0, spec, 0.02, DtPolicy(fixed_dt=5e-3), context=ctx)
    for i, t in enumerate(traj.norm_times):
        f = traj.field_at(t) if t in traj.field_times else None
        if f is None:
            continue
        assert traj.morrey_q[i] == pytest.approx(
            brute_force_morrey_norm(f, spec.q, spec.lam, ctx.radii), rel=1e-12
        )
        assert traj.morrey_r[i] == pytest.approx(
            brute_force_morrey_norm(f, spec.r, spec.lam, ctx.radii), rel=1e-12
        )
