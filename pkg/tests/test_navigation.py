"""Unit tests for the planar obstacle-avoidance construction."""

import dataclasses
import math

import numpy as np
import pytest

from syncon import numdiff
from syncon.engine import SimConfig, simulate
from syncon.errors import (
    GainValidation,
    NoRootBracketed,
    NonPositiveDistance,
    OutsideFreeSpace,
)
from syncon.navigation import (
    NavGains,
    NavigationWorld,
    backstep_closed_loop,
    backstep_controller,
    barrier,
    barrier_grad,
    barrier_hess,
    decomposed_feedback,
    find_critical_point,
    gradient_closed_loop,
    hybrid_closed_loop,
    max_synergy_gap,
    nav_gradient,
    nav_hessian,
    nav_potential,
    nominal_controller,
    obstacle_distance,
    rotate_about_obstacle,
    rotation_rate_bound,
    shell_projection,
    smooth_closed_loop,
    smooth_controller,
    switch_offset,
    switch_offset_bound,
    switch_offset_rate,
    switched_gradient_p,
    switched_gradient_theta,
    switched_potential,
)
from syncon.smoothing import SmoothedParams, check_reconstruction
from syncon.backstepping import BacksteppingParams
from syncon.synergy import assemble_closed_loop, v_excess


def demo_world() -> NavigationWorld:
    return NavigationWorld(p_o=np.array([5.0, 0.0]), r_o=2.0, epsilon=0.1,
                           p_d=np.zeros(2), r_s=0.5, varrho=15.0)


def demo_gains() -> NavGains:
    return NavGains(k_p=12.0, k_theta=0.02, gamma_theta=2.0264,
                    theta_candidates=np.array([0.2]), delta=0.0365)


def demo_smoothed() -> SmoothedParams:
    return SmoothedParams(gamma_s=0.0659, k_eta=100.0, delta_s=0.0036)


def demo_backstep() -> BacksteppingParams:
    return BacksteppingParams(gamma_b=0.5, k_b=40.0, delta_b=0.0036)


def narrow_world() -> NavigationWorld:
    return NavigationWorld(p_o=np.array([4.0, 0.0]), r_o=1.0, epsilon=0.1,
                           p_d=np.zeros(2), r_s=1.0, varrho=16.0)


def narrow_gains() -> NavGains:
    return NavGains(k_p=4.0, k_theta=0.5, gamma_theta=0.8,
                    theta_candidates=np.array([0.2]), delta=0.015)


def sample_free_points(world, rng, n, margin=0.05, lo=-15.0, hi=15.0):
    pts = []
    while len(pts) < n:
        p = rng.uniform(lo, hi, 2)
        if obstacle_distance(world, p) >= world.epsilon + margin:
            pts.append(p)
    return pts


# -- skirt function ----------------------------------------------------------

def test_barrier_frozen_values():
    assert barrier(0.5, 1.0) == pytest.approx(0.25 * math.log(2.0), abs=1e-15)
    assert barrier(0.5, 1.0) == pytest.approx(0.17328679513998632, abs=1e-15)
    assert barrier_grad(0.5, 1.0) == pytest.approx(-1.1931471805599454,
                                                   abs=1e-15)


def test_barrier_vanishes_twice_differentiably_at_the_rim():
    r_s = 0.5
    assert barrier(r_s, r_s) == 0.0
    assert barrier(2.0 * r_s, r_s) == 0.0
    assert barrier_grad(r_s, r_s) == 0.0
    assert barrier_hess(r_s, r_s) == 0.0
    h = 1e-6
    assert abs(barrier(r_s - h, r_s)) <= 1e-14
    assert abs(barrier_grad(r_s - h, r_s)) <= 1e-8
    assert abs(barrier_hess(r_s - h, r_s)) <= 1e-4


def test_barrier_derivatives_match_finite_differences():
    r_s = 0.7
    for z in (0.05, 0.2, 0.4, 0.65):
        fd_g = (barrier(z + 1e-7, r_s) - barrier(z - 1e-7, r_s)) / 2e-7
        assert barrier_grad(z, r_s) == pytest.approx(fd_g, abs=1e-6)
        fd_h = (barrier_grad(z + 1e-7, r_s) - barrier_grad(z - 1e-7, r_s)) / 2e-7
        assert barrier_hess(z, r_s) == pytest.approx(fd_h, abs=1e-5)


def test_barrier_rejects_nonpositive_distance():
    for z in (0.0, -0.3):
        with pytest.raises(NonPositiveDistance):
            barrier(z, 1.0)
        with pytest.raises(NonPositiveDistance):
            barrier_grad(z, 1.0)
        with pytest.raises(NonPositiveDistance):
            barrier_hess(z, 1.0)


# -- world and potential -----------------------------------------------------

def test_world_validation():
    with pytest.raises(ValueError):
        NavigationWorld(p_o=np.zeros(2), r_o=0.0, epsilon=0.1,
                        p_d=np.array([9.0, 0.0]), r_s=0.5, varrho=1.0)
    with pytest.raises(ValueError):
        NavigationWorld(p_o=np.zeros(2), r_o=2.0, epsilon=0.6,
                        p_d=np.array([9.0, 0.0]), r_s=0.5, varrho=1.0)
    with pytest.raises(ValueError):
        NavigationWorld(p_o=np.zeros(2), r_o=2.0, epsilon=0.0,
                        p_d=np.array([9.0, 0.0]), r_s=0.5, varrho=1.0)
    with pytest.raises(ValueError):
        NavigationWorld(p_o=np.zeros(2), r_o=2.0, epsilon=0.1,
                        p_d=np.array([2.4, 0.0]), r_s=0.5, varrho=1.0)
    with pytest.raises(ValueError):
        NavigationWorld(p_o=np.zeros(2), r_o=2.0, epsilon=0.1,
                        p_d=np.array([9.0, 0.0]), r_s=0.5, varrho=-1.0)


def test_obstacle_distance_sign():
    world = demo_world()
    assert obstacle_distance(world, np.array([12.0, 0.0])) == pytest.approx(5.0)
    assert obstacle_distance(world, np.array([5.0, 1.0])) == pytest.approx(-1.0)


def test_potential_guards_free_space():
    world = demo_world()
    inside_margin = np.array([5.0 + world.r_o + 0.05, 0.0])
    with pytest.raises(OutsideFreeSpace):
        nav_potential(world, inside_margin)
    # The unguarded variant still evaluates anywhere with positive clearance.
    assert nav_potential(world, inside_margin, check=False) > 0.0
    with pytest.raises(NonPositiveDistance):
        nav_potential(world, world.p_o, check=False)


def test_potential_is_plain_quadratic_outside_the_skirt():
    world = demo_world()
    p = np.array([12.0, 0.0])
    assert nav_potential(world, p) == 72.0
    assert np.allclose(nav_gradient(world, p), p - world.p_d)
    assert np.allclose(nav_hessian(world, p), np.eye(2))


def test_nav_gradient_and_hessian_match_finite_differences():
    world = demo_world()
    rng = np.random.default_rng(21)
    pts = sample_free_points(world, rng, 120)
    checked = 0
    for p in pts:
        # The skirt rim is only C^2, so skip a hair-thin band around it
        # where differencing the Hessian is ill-posed.
        if abs(obstacle_distance(world, p) - world.r_s) < 1e-2:
            continue
        g = nav_gradient(world, p, check=False)
        fd_g = numdiff.central_gradient(
            lambda v: nav_potential(world, v, check=False), p)
        assert np.all(np.abs(g - fd_g) <= 1e-6 * (1.0 + np.abs(fd_g)))

        h = nav_hessian(world, p, check=False)
        fd_h = numdiff.central_jacobian(
            lambda v: nav_gradient(world, v, check=False), p)
        assert np.all(np.abs(h - fd_h) <= 1e-5 * (1.0 + np.abs(fd_h)))
        checked += 1
    assert checked >= 100


# -- rotated family ----------------------------------------------------------

def test_rotation_preserves_obstacle_distance():
    world = demo_world()
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.uniform(-10, 10, 2)
        th = rng.uniform(-3, 3)
        rot = rotate_about_obstacle(world, p, th)
        assert obstacle_distance(world, rot) == pytest.approx(
            obstacle_distance(world, p), abs=1e-12)
    p = rng.uniform(-10, 10, 2)
    assert np.allclose(rotate_about_obstacle(world, p, 0.0), p)


def test_switched_potential_is_rotated_potential_plus_angle_penalty():
    world = demo_world()
    gains = demo_gains()
    rng = np.random.default_rng(17)
    for p in sample_free_points(world, rng, 30):
        th = rng.uniform(-0.3, 0.3)
        direct = switched_potential(world, gains, p, th, check=False)
        rebuilt = (nav_potential(world, rotate_about_obstacle(world, p, th),
                                 check=False)
                   + 0.5 * gains.gamma_theta * th * th)
        assert direct == pytest.approx(rebuilt, rel=1e-12, abs=1e-12)


def test_switched_potential_frozen_value():
    world = demo_world()
    gains = demo_gains()
    assert switched_potential(world, gains, np.array([12.0, 0.0]), 0.0) == 72.0


def test_switched_gradients_match_finite_differences():
    world = demo_world()
    gains = demo_gains()
    rng = np.random.default_rng(29)
    pts = sample_free_points(world, rng, 110)
    for p in pts:
        th = rng.uniform(-0.3, 0.3)
        gp = switched_gradient_p(world, gains, p, th, check=False)
        fd_p = numdiff.central_gradient(
            lambda v: switched_potential(world, gains, v, th, check=False), p)
        assert np.all(np.abs(gp - fd_p) <= 1e-6 * (1.0 + np.abs(fd_p)))

        gt = switched_gradient_theta(world, gains, p, th)
        fd_t = numdiff.central_gradient(
            lambda v: switched_potential(world, gains, p, float(v[0]),
                                         check=False), np.array([th]))
        assert abs(gt - fd_t[0]) <= 1e-6 * (1.0 + abs(fd_t[0]))


def test_switch_offset_identities():
    world = demo_world()
    assert np.allclose(switch_offset(world, 0.0), np.zeros(2))
    d = world.dest_range
    for th in (-0.4, -0.1, 0.2, 0.35):
        s = switch_offset(world, th)
        assert float(s @ s) == pytest.approx(2.0 * (1.0 - math.cos(th)) * d * d,
                                             rel=1e-12, abs=1e-12)
        fd = numdiff.central_gradient(
            lambda v, i=0: switch_offset(world, float(v[0]))[i],
            np.array([th]))
        rate = switch_offset_rate(world, th)
        assert abs(rate[0] - fd[0]) <= 1e-7
        fd = numdiff.central_gradient(
            lambda v: switch_offset(world, float(v[0]))[1], np.array([th]))
        assert abs(rate[1] - fd[0]) <= 1e-7


def test_position_gradient_splits_into_plain_descent_minus_offset():
    world = demo_world()
    gains = demo_gains()
    rng = np.random.default_rng(31)
    for p in sample_free_points(world, rng, 25):
        th = rng.uniform(-0.3, 0.3)
        fd_p = numdiff.central_gradient(
            lambda v: switched_potential(world, gains, v, th, check=False), p)
        split = nav_gradient(world, p, check=False) - switch_offset(world, th)
        assert np.all(np.abs(split - fd_p) <= 1e-6 * (1.0 + np.abs(fd_p)))


def test_switch_offset_bound_dominates_operational_spreads():
    world = demo_world()
    gains = demo_gains()
    d = world.dest_range
    c_kappa = switch_offset_bound(world, gains)
    assert c_kappa == pytest.approx((1.0 - math.cos(0.2)) * d * d, rel=1e-15)
    assert c_kappa == pytest.approx(0.49833555396895934, abs=1e-15)
    # Along the settling path theta runs from a candidate back to zero;
    # half the squared spread to that candidate never exceeds the bound.
    for tb in gains.theta_candidates:
        for t in np.linspace(0.0, 1.0, 21):
            diff = switch_offset(world, t * tb) - switch_offset(world, tb)
            assert 0.5 * float(diff @ diff) <= c_kappa + 1e-12


# -- gain bounds -------------------------------------------------------------

def test_rotation_rate_bound_and_gap_frozen_values():
    world = demo_world()
    gains = demo_gains()
    assert rotation_rate_bound(world) == pytest.approx(4.052847345693511,
                                                       abs=1e-12)
    gap = max_synergy_gap(world, gains)
    assert gap == pytest.approx(0.040528946913870226, abs=1e-12)
    by_hand = (2.0 * world.r_o * world.dest_range / math.pi ** 2
               - 0.5 * gains.gamma_theta) * min(abs(gains.theta_candidates)) ** 2
    assert gap == pytest.approx(by_hand, rel=1e-15)
    assert gains.delta <= gap


def test_validate_gains_flags_each_bound():
    world = demo_world()
    good = demo_gains()
    from syncon.navigation import validate_gains

    validate_gains(world, good)

    cases = [
        (dict(k_p=-1.0), "k_p"),
        (dict(k_theta=0.0), "k_theta"),
        (dict(gamma_theta=4.1), "gamma_theta"),
        (dict(gamma_theta=0.0), "gamma_theta"),
        (dict(theta_candidates=np.array([0.0])), "candidate angle"),
        (dict(theta_candidates=np.array([3.2])), "candidate angle"),
        (dict(delta=0.0), "delta"),
        (dict(delta=0.05), "delta"),
    ]
    for patch, fragment in cases:
        bad = dataclasses.replace(good, **patch)
        with pytest.raises(GainValidation, match=fragment):
            validate_gains(world, bad)

    # Several problems arrive in one aggregated report.
    bad = dataclasses.replace(good, k_p=-1.0, k_theta=-1.0)
    with pytest.raises(GainValidation) as err:
        validate_gains(world, bad)
    assert "k_p" in str(err.value) and "k_theta" in str(err.value)


# -- critical point ----------------------------------------------------------

def test_find_critical_point_frozen_clearance():
    world = demo_world()
    p_star = find_critical_point(world)
    z_star = obstacle_distance(world, p_star)
    assert z_star == pytest.approx(0.26902926425457707, abs=1e-9)
    # Collinear geometry: the saddle sits on the far side of the obstacle.
    assert p_star[0] == pytest.approx(world.p_o[0] + world.r_o + z_star,
                                      abs=1e-9)
    assert abs(p_star[1]) <= 1e-9
    assert np.linalg.norm(nav_gradient(world, p_star)) <= 1e-9


def test_find_critical_point_refinement_agrees_with_bisection():
    world = demo_world()
    coarse = find_critical_point(world, refine=False)
    fine = find_critical_point(world, refine=True)
    assert np.linalg.norm(coarse - fine) <= 1e-8
    assert (np.linalg.norm(nav_gradient(world, fine, check=False))
            <= np.linalg.norm(nav_gradient(world, coarse, check=False)) + 1e-15)


def test_find_critical_point_narrow_world():
    world = narrow_world()
    p_star = find_critical_point(world)
    assert p_star[0] == pytest.approx(5.694947385756899, abs=1e-9)
    assert abs(p_star[0] - 5.6865) <= 2e-2
    assert np.linalg.norm(nav_gradient(world, p_star)) <= 1e-8


def test_find_critical_point_requires_a_strong_skirt():
    weak = NavigationWorld(p_o=np.array([5.0, 0.0]), r_o=2.0, epsilon=0.1,
                           p_d=np.zeros(2), r_s=0.5, varrho=0.1)
    with pytest.raises(NoRootBracketed):
        find_critical_point(weak)


def test_excess_frozen_values_at_start_and_saddle():
    world = demo_world()
    gains = demo_gains()
    _, q = nominal_controller(world, gains)
    start = np.array([12.0, 0.0])
    assert v_excess(q, start, np.zeros(1)) == pytest.approx(
        0.6571417755565392, abs=1e-12)
    p_star = find_critical_point(world)
    mu_star = v_excess(q, p_star, np.zeros(1))
    assert mu_star == pytest.approx(0.18561959107482195, abs=1e-9)
    assert mu_star > gains.delta
    assert mu_star >= max_synergy_gap(world, gains) - 1e-9
    # At the lone candidate itself the excess vanishes.
    assert v_excess(q, start, np.array([0.2])) == 0.0


# -- safety shell ------------------------------------------------------------

def test_shell_projection_leaves_safe_states_alone():
    world = demo_world()
    project = shell_projection(world)
    v = np.array([12.0, 0.0, 0.05])
    assert project(v) is v


def test_shell_projection_clamps_to_the_margin():
    world = demo_world()
    project = shell_projection(world)
    v = np.array([5.0 + world.r_o + 0.01, 0.0, 0.7])
    out = project(v)
    assert out is not v
    assert obstacle_distance(world, out[:2]) >= world.epsilon
    assert obstacle_distance(world, out[:2]) == pytest.approx(world.epsilon,
                                                              abs=1e-9)
    # Angular position and trailing coordinates are untouched.
    assert out[1] == 0.0
    assert out[2] == 0.7
    centered = project(np.array([5.0, 0.0, 0.0]))
    assert obstacle_distance(world, centered[:2]) >= world.epsilon


# -- fused loops against the generic composition -----------------------------

def test_hybrid_loop_matches_generic_composition():
    world = demo_world()
    gains = demo_gains()
    fused = hybrid_closed_loop(world, gains, project=False)
    plant, q = nominal_controller(world, gains)
    generic = assemble_closed_loop(plant, q)
    assert fused.dim == generic.dim == 3

    rng = np.random.default_rng(41)
    for p in sample_free_points(world, rng, 40):
        v = np.array([p[0], p[1], rng.uniform(-0.25, 0.25)])
        assert np.allclose(fused.flow_map(v), generic.flow_map(v),
                           rtol=1e-9, atol=1e-9)
        assert fused.in_flow_set(v) == pytest.approx(generic.in_flow_set(v),
                                                     abs=1e-10)
        assert fused.in_jump_set(v) == pytest.approx(generic.in_jump_set(v),
                                                     abs=1e-10)
        cf = fused.jump_map(v)
        cg = generic.jump_map(v)
        assert len(cf) == len(cg)
        for a, b in zip(cf, cg):
            assert np.allclose(a, b, atol=1e-12)


def test_smooth_loop_matches_generic_composition():
    world = demo_world()
    gains = demo_gains()
    sp = demo_smoothed()
    fused = smooth_closed_loop(world, gains, sp, project=False)
    plant_s, q_s, _ = smooth_controller(world, gains, sp)
    generic = assemble_closed_loop(plant_s, q_s)
    assert fused.dim == generic.dim == 5

    rng = np.random.default_rng(43)
    for p in sample_free_points(world, rng, 30):
        v = np.concatenate([p, rng.normal(0.0, 3.0, 2),
                            rng.uniform(-0.25, 0.25, 1)])
        assert np.allclose(fused.flow_map(v), generic.flow_map(v),
                           rtol=1e-9, atol=1e-9)
        assert fused.in_flow_set(v) == pytest.approx(generic.in_flow_set(v),
                                                     abs=1e-10)
        cf = fused.jump_map(v)
        cg = generic.jump_map(v)
        assert len(cf) == len(cg)
        for a, b in zip(cf, cg):
            assert np.allclose(a, b, atol=1e-12)


def test_backstep_loop_matches_generic_composition():
    world = demo_world()
    gains = demo_gains()
    sp = demo_smoothed()
    bp = demo_backstep()
    fused = backstep_closed_loop(world, gains, sp, bp, project=False)
    plant_b, q_b, _, _ = backstep_controller(world, gains, sp, bp)
    generic = assemble_closed_loop(plant_b, q_b)
    assert fused.dim == generic.dim == 7

    rng = np.random.default_rng(47)
    for p in sample_free_points(world, rng, 25):
        v = np.concatenate([p, rng.normal(0.0, 3.0, 2),
                            rng.normal(0.0, 20.0, 2),
                            rng.uniform(-0.25, 0.25, 1)])
        ff = fused.flow_map(v)
        gf = generic.flow_map(v)
        assert np.all(np.abs(ff - gf) <= 1e-8 + 1e-8 * np.abs(gf))
        assert fused.in_flow_set(v) == pytest.approx(generic.in_flow_set(v),
                                                     abs=1e-10)
        cf = fused.jump_map(v)
        cg = generic.jump_map(v)
        assert len(cf) == len(cg)
        for a, b in zip(cf, cg):
            assert np.allclose(a, b, atol=1e-12)


def test_gradient_loop_descends_and_never_jumps():
    world = demo_world()
    gains = demo_gains()
    spec = gradient_closed_loop(world, gains)
    assert spec.dim == 3

    v = np.array([9.0, 3.0, 0.0])
    flow = spec.flow_map(v)
    expect = -gains.k_p * nav_gradient(world, v[:2])
    assert np.allclose(flow[:2], expect)
    assert flow[2] == 0.0
    assert spec.in_flow_set(v) < 0.0
    assert spec.in_jump_set(v) > 0.0
    assert spec.jump_map(v) == []

    arc = simulate(spec, np.array([9.0, 3.0, 0.0]),
                   SimConfig(dt=0.001, t_max=2.0))
    assert arc.n_jumps == 0
    # Plain descent makes progress toward the destination.
    start = math.hypot(9.0, 3.0)
    assert math.hypot(*arc.final_state[:2]) < start


def test_decomposition_reconstructs_the_switched_feedback():
    world = demo_world()
    gains = demo_gains()
    _, q = nominal_controller(world, gains)
    d = decomposed_feedback(world, gains)
    rng = np.random.default_rng(53)
    states = [(p, np.array([rng.uniform(-0.25, 0.25)]))
              for p in sample_free_points(world, rng, 30)]
    assert check_reconstruction(q, d, states) <= 1e-12
