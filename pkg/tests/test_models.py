import numpy as np
import pytest

from ccflow.errors import ConstraintDegeneracyError, ConstraintError, CoordinateSingularityError, DimensionError, InvalidMetricError
from ccflow.geometry import AnnihilatorBasis, RiemannianMetric, central_jacobian
from ccflow.hamiltonian import drift_report, integrate, involution_residual
from ccflow.lie import e3, heis3, lie_poisson_structure, so3
from ccflow.models import (
    EulerModel,
    RigidBodyParams,
    cartesian_to_polar,
    cc_euler_model,
    dalembert_model,
    degeneration_sweep,
    euclidean_metric,
    gd_degeneration_pair,
    heisenberg_dalembert_model,
    heisenberg_left_model,
    heisenberg_metric,
    heisenberg_right_model,
    magnetic_circle_oracle,
    polar_to_cartesian,
    project_left,
    project_right,
    random_rigid_body,
    reduce_heisenberg,
    reduce_right_polar,
    rigid_body_e3_model,
    so3_cc_euler_model,
)
from ccflow.runner import check_model

LEFT = heisenberg_left_model()
RIGHT = heisenberg_right_model()


# --- Heisenberg left ----------------------------------------------------------


def test_left_declares_four_integrals():
    assert tuple(LEFT.integrals) == ("I1", "I2", "I3", "I4")
    assert LEFT.involutive == ("I1", "I2", "I3")


def test_left_zero_lam3_is_straight_line():
    tr = integrate(LEFT, np.array([0.3, -0.5, 0.2, 0.7, -0.4, 0.0]), 1e-3, 1000)
    t = tr.times
    np.testing.assert_allclose(tr.column("x"), 0.3 + 0.7 * t, atol=1e-12)
    np.testing.assert_allclose(tr.column("y"), -0.5 - 0.4 * t, atol=1e-12)
    # z follows zdot = x ydot
    z_exact = 0.2 + (-0.4) * (0.3 * t + 0.35 * t * t)
    np.testing.assert_allclose(tr.column("z"), z_exact, atol=1e-12)


def test_left_admissibility_along_flow():
    tr = integrate(LEFT, np.array([0.1, 0.2, 0.3, -0.8, 0.6, 1.4]), 1e-3, 5000)
    vel = np.array([LEFT.vector_field(s)[:3] for s in tr.states])
    x = tr.column("x")
    assert np.max(np.abs(vel[:, 2] - x * vel[:, 1])) < 1e-12


# --- Heisenberg right ---------------------------------------------------------


def test_right_origin_hamiltonian():
    assert RIGHT.hamiltonian(np.array([0.0, 0.0, 1.0, 0.3, -0.8, 5.0])) == pytest.approx(0.5 * (0.09 + 0.64), abs=1e-15)


def test_right_third_integral_conserved():
    tr = integrate(RIGHT, np.array([0.5, -0.3, 0.2, 0.3, -0.2, 1.5]), 1e-3, 10_000)
    assert drift_report(tr, RIGHT)["I3"] < 1e-8


def test_right_reduced_integral_matches_full():
    red = reduce_heisenberg("right", 0.0)
    rng = np.random.default_rng(21)
    for z in rng.uniform(-2, 2, size=(100, 6)):
        C = z[5]
        red_C = reduce_heisenberg("right", C)
        assert abs(red_C.integrals["I2"](project_right(z)) - RIGHT.integrals["I3"](z)) < 1e-12
        assert abs(red_C.hamiltonian(project_right(z)) - RIGHT.hamiltonian(z)) < 1e-12
    assert red.C == 0.0


def test_right_reduced_integral_along_full_flow():
    z0 = np.array([0.4, 0.6, 0.0, -0.5, 0.2, 0.9])
    tr = integrate(RIGHT, z0, 1e-3, 10_000)
    red = reduce_heisenberg("right", z0[5])
    vals = red.integrals["I2"](project_right(tr.states))
    assert np.max(np.abs(vals - vals[0])) < 1e-8


# --- reductions ---------------------------------------------------------------


def test_reduced_left_brackets_and_free_case():
    z = np.zeros(4)
    left = reduce_heisenberg("left", 2.5)
    assert left.poisson.bracket_of_coords("u", "v", z) == -2.5
    assert left.poisson.bracket_of_coords("x", "u", z) == 1.0
    assert left.poisson.bracket_of_coords("x", "v", z) == 0.0
    free = reduce_heisenberg("left", 0.0)
    np.testing.assert_array_equal(free.poisson(z), np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]]))
    right = reduce_heisenberg("right", 2.5)
    assert right.poisson.bracket_of_coords("u", "v", z) == 2.5
    with pytest.raises(ValueError):
        reduce_heisenberg("middle", 1.0)


def test_reduced_right_origin_hamiltonian():
    m = reduce_heisenberg("right", 1.3)
    assert m.hamiltonian(np.array([0.0, 0.0, 0.6, -1.1])) == pytest.approx(0.5 * (0.36 + 1.21), abs=1e-15)


def test_left_reduced_second_integrals_commute_only_with_H():
    m = reduce_heisenberg("left", 1.5)
    names, mat = involution_residual(m, 50, seed=0)
    assert mat[names.index("H"), names.index("I2")] < 1e-12
    assert mat[names.index("H"), names.index("I3")] < 1e-12
    assert mat[names.index("I2"), names.index("I3")] == pytest.approx(1.5)


def test_projection_consistency_left():
    C = 0.8
    z0 = np.array([0.2, -0.1, 0.4, 0.6, -0.3, C])
    full = integrate(LEFT, z0, 1e-3, 10_000)
    red = integrate(reduce_heisenberg("left", C), project_left(z0), 1e-3, 10_000)
    assert np.max(np.abs(project_left(full.states, C) - red.states)) < 1e-6


def test_polar_metric_pullback():
    # reduced right metric: (1+y^2)dx^2 - 2xy dxdy + (1+x^2)dy^2
    rng = np.random.default_rng(2)
    for r, phi in zip(rng.uniform(0.3, 2, 20), rng.uniform(-np.pi, np.pi, 20)):
        x, y = r * np.cos(phi), r * np.sin(phi)
        g = np.array([[1 + y * y, -x * y], [-x * y, 1 + x * x]])
        Jac = central_jacobian(lambda p: np.array([p[0] * np.cos(p[1]), p[0] * np.sin(p[1])]), np.array([r, phi]))
        np.testing.assert_allclose(Jac.T @ g @ Jac, np.diag([1.0, r * r + r**4]), atol=1e-8)


def test_polar_coordinate_change_round_trip():
    rng = np.random.default_rng(3)
    s = np.column_stack([rng.uniform(0.2, 2, 50), rng.uniform(-1, 1, 50), rng.normal(size=50), rng.normal(size=50)])
    np.testing.assert_allclose(polar_to_cartesian(cartesian_to_polar(s)), s, atol=1e-13)
    # the change of variables preserves the Hamiltonian
    cart, pol = reduce_heisenberg("right", 1.0), reduce_right_polar(1.0)
    np.testing.assert_allclose(pol.hamiltonian(cartesian_to_polar(s)), cart.hamiltonian(s), atol=1e-13)


def test_polar_equivalence_and_integral():
    C = 1.0
    s0 = np.array([1.0, 0.5, 0.3, -0.4])
    cart = integrate(reduce_heisenberg("right", C), s0, 1e-3, 5000, method="rk4")
    pol_model = reduce_right_polar(C)
    pol = integrate(pol_model, cartesian_to_polar(s0), 1e-3, 10_000, method="rk4")
    assert np.max(np.abs(cart.states[:, :2] - polar_to_cartesian(pol.states[:5001])[:, :2])) < 1e-6
    assert drift_report(pol, pol_model)["I2"] < 1e-8


def test_polar_singularity():
    pol = reduce_right_polar(1.0)
    with pytest.raises(CoordinateSingularityError):
        pol.hamiltonian(np.array([0.0, 0.0, 1.0, 0.0]))
    with pytest.raises(CoordinateSingularityError):
        pol.vector_field(np.array([1e-8, 0.0, 1.0, 0.0]))
    with pytest.raises(CoordinateSingularityError):
        cartesian_to_polar(np.array([0.0, 0.0, 1.0, 0.0]))


# --- magnetic circle oracle -----------------------------------------------------


def test_oracle_examples():
    o = magnetic_circle_oracle(0.5, 1.0, (0.0, 0.0, 0.0))
    np.testing.assert_allclose(o.center, [0.0, 1.0], atol=1e-15)
    assert o.radius == pytest.approx(1.0)
    assert o.period == pytest.approx(2 * np.pi)
    o2 = magnetic_circle_oracle(0.5, -1.0, (0.0, 0.0, 0.0))
    np.testing.assert_allclose(o2.center, [0.0, -1.0], atol=1e-15)
    assert magnetic_circle_oracle(2.0, 1.0).radius == pytest.approx(2.0)
    for bad in ((0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)):
        with pytest.raises(ValueError):
            magnetic_circle_oracle(*bad)


def test_oracle_solves_reduced_equations():
    o = magnetic_circle_oracle(1.3, -0.7, (0.2, -0.4, 1.1))
    t = np.linspace(0, 5, 7)
    s = o.states(t)
    m = reduce_heisenberg("left", -0.7)
    deriv = central_jacobian(lambda tt: o.states(np.atleast_1d(tt[0]))[0], np.array([1.7]))[:, 0]
    np.testing.assert_allclose(deriv, m.vector_field(o.states(np.array([1.7]))[0]), atol=1e-8)
    np.testing.assert_allclose(np.hypot(*(s[:, :2] - o.center).T), o.radius, atol=1e-13)
    np.testing.assert_allclose(s[0], o.initial_state(), atol=1e-15)


def test_reduced_flow_matches_oracle():
    for C in (1.0, -2.0):
        o = magnetic_circle_oracle(0.5, C, (0.3, -0.2, 0.7))
        n = 10_000
        tr = integrate(reduce_heisenberg("left", C), o.initial_state(), o.period / n, n, method="rk4")
        assert np.max(np.abs(tr.states - o.states(tr.times))) < 1e-6


# --- Euler equations ------------------------------------------------------------


def test_so3_cc_euler_examples():
    m = so3_cc_euler_model()
    np.testing.assert_allclose(m.vector_field(np.array([1.0, 0.0, 2.0])), [0.0, 2.0, 0.0], atol=1e-15)
    np.testing.assert_array_equal(m.vector_field(np.array([0.0, 0.0, 3.0])), np.zeros(3))
    rng = np.random.default_rng(5)
    for M in rng.uniform(-2, 2, size=(100, 3)):
        assert abs(m.vector_field(M)[2]) < 1e-14
        np.testing.assert_allclose(m.vector_field(M), np.cross(M, [M[0], M[1], 0.0]), atol=1e-14)


def test_so3_integrals_are_the_two_quadratic_forms():
    m = so3_cc_euler_model()
    M = np.array([0.3, -1.2, 0.8])
    assert 2.0 * m.integrals["H"](M) == pytest.approx(M[0] ** 2 + M[1] ** 2)
    assert m.integrals["casimir"](M) == pytest.approx(M @ M)


def test_euler_model_forms():
    em = EulerModel(so3(), np.diag([1.0, 2.0, 3.0]), (0, 1))
    np.testing.assert_allclose(em.J0, np.diag([1.0, 2.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(em.omega([2.0, 4.0, 9.0]), [2.0, 2.0, 0.0])
    # J(omega, y) = <M, y> on G0
    J = np.array([[2.0, 0.5, 0.1], [0.5, 1.0, 0.3], [0.1, 0.3, 1.5]])
    em = EulerModel(so3(), J, (0, 2))
    M = np.array([0.4, -0.7, 1.2])
    w = em.omega(M)
    assert w[1] == 0.0
    for y in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])):
        assert w @ J @ y == pytest.approx(M @ y)
        assert (em.J0 @ w) @ y == pytest.approx(M @ y)


def test_euler_model_validation():
    with pytest.raises(DimensionError):
        EulerModel(so3(), np.eye(3), (0, 3))
    with pytest.raises(DimensionError):
        EulerModel(so3(), np.eye(2), (0,))
    with pytest.raises(InvalidMetricError):
        EulerModel(so3(), -np.eye(3), (0, 1))


def test_euler_on_other_algebras():
    for alg in (heis3(), e3()):
        em = EulerModel(alg, np.eye(alg.dim), tuple(range(alg.dim - 1)))
        m = cc_euler_model(em)
        results, _ = check_model(m, samples=30)
        assert all(r.passed for r in results), [(r.name, r.value) for r in results]


def test_gd_pair_rhs_gap():
    D = 10.0
    riem, cc = gd_degeneration_pair(D)
    M = np.array([1.0, 1.0, 1.0])
    fr, fc = riem.vector_field(M), cc.vector_field(M)
    assert fr[0] == pytest.approx(M[1] * M[2] / D - M[2] * M[1])
    assert fc[0] == pytest.approx(-M[2] * M[1])
    assert fr[0] - fc[0] == pytest.approx(M[1] * M[2] / D)
    big, _ = gd_degeneration_pair(1e12)
    np.testing.assert_allclose(big.vector_field(M), fc, atol=1e-11)
    with pytest.raises(ValueError):
        gd_degeneration_pair(0.0)


def test_degeneration_sweep_single_and_errors():
    rows, flag = degeneration_sweep([50.0], T=1.0, dt=1e-2)
    assert len(rows) == 1 and flag is None
    with pytest.raises(ValueError):
        degeneration_sweep([])


# --- rigid body -----------------------------------------------------------------


def test_rigid_body_structure():
    ps = rigid_body_e3_model(RigidBodyParams(np.eye(3), np.zeros(3))).poisson
    plus = lie_poisson_structure(e3(), coords=ps.coords)
    z = np.array([0.1, 0.2, 0.3, 1.0, 2.0, 3.0])
    assert plus.bracket_of_coords("m1", "g2", z) == z[5]
    np.testing.assert_array_equal(ps(z), -plus(z))


def test_rigid_body_rhs_is_poisson_gradient():
    rng = np.random.default_rng(0)
    for _ in range(10):
        m = rigid_body_e3_model(random_rigid_body(rng))
        for z in m.sample_states(20, 1):
            assert np.max(np.abs(m.vector_field(z) - m.poisson(z) @ m.gradient(z))) < 1e-12


def test_rigid_body_casimirs():
    m = rigid_body_e3_model(random_rigid_body(np.random.default_rng(4)))
    results, _ = check_model(m, samples=100, seed=4)
    cas = [r for r in results if r.name.startswith("casimir")]
    assert cas and cas[0].value < 1e-10


def test_rigid_body_casimir_drift():
    m = rigid_body_e3_model(random_rigid_body(np.random.default_rng(9)))
    tr = integrate(m, np.array([0.5, -0.3, 0.8, 0.0, 0.6, 0.8]), 1e-2, 5000)
    assert drift_report(tr, m)["gamma_sq"] < 1e-8


def test_rigid_body_params_validation():
    with pytest.raises(InvalidMetricError):
        RigidBodyParams(np.diag([1.0, -1.0, 1.0]), np.zeros(3))
    with pytest.raises(DimensionError):
        RigidBodyParams(np.eye(3), np.zeros(2))


# --- d'Alembert -------------------------------------------------------------------


def test_dalembert_multiplier_formula():
    m = heisenberg_dalembert_model()
    rng = np.random.default_rng(6)
    for _ in range(20):
        z = m.project_velocity(rng.uniform(-2, 2, 6))
        x, v = z[:3], z[3:]
        # constraint row (0, -x, 1) is unnormalised, so mu matches the closed form directly
        assert m.multipliers(z)[0] == pytest.approx(v[0] * v[1] / (1 + x[0] ** 2), abs=1e-12)


def test_dalembert_straight_line():
    m = heisenberg_dalembert_model()
    z0 = np.array([0.3, -0.2, 0.1, 0.7, 0.0, 0.0])
    tr = integrate(m, z0, 1e-3, 10_000)
    t = tr.times
    np.testing.assert_allclose(tr.column("x"), 0.3 + 0.7 * t, atol=1e-8)
    assert np.max(np.abs(tr.states[:, 1:3] - z0[1:3])) < 1e-8


def test_dalembert_energy_and_constraint():
    m = heisenberg_dalembert_model()
    z0 = np.array([0.3, -0.2, 0.1, 0.5, 0.8, 0.3 * 0.8])
    tr = integrate(m, z0, 1e-3, 10_000, method="rk4")
    assert drift_report(tr, m)["kinetic_energy"] < 1e-8
    assert max(m.constraint_violation(z) for z in tr.states) < 1e-8


def test_dalembert_unconstrained_is_geodesic():
    none = AnnihilatorBasis(3, 0, lambda p: np.zeros((0, 3)))
    flat = dalembert_model(euclidean_metric(3), none)
    z0 = np.array([0.0, 1.0, 2.0, 0.5, -0.5, 0.25])
    tr = integrate(flat, z0, 1e-2, 100)
    np.testing.assert_allclose(tr.states[-1, :3], z0[:3] + z0[3:], atol=1e-13)
    curved = dalembert_model(heisenberg_metric(), none)
    tr = integrate(curved, np.array([0.1, 0.0, 0.0, 0.3, 0.5, -0.2]), 1e-3, 2000, method="rk4")
    assert drift_report(tr, curved)["kinetic_energy"] < 1e-10


def test_dalembert_errors():
    m = heisenberg_dalembert_model()
    with pytest.raises(ConstraintError) as info:
        integrate(m, np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), 1e-3, 10)
    assert info.value.violation == pytest.approx(1.0)
    twice = AnnihilatorBasis(3, 2, lambda p: np.array([[0.0, -p[0], 1.0], [0.0, -p[0], 1.0]]))
    deg = dalembert_model(euclidean_metric(3), twice)
    with pytest.raises(ConstraintDegeneracyError):
        deg.vector_field(np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]))
    with pytest.raises(DimensionError):
        dalembert_model(euclidean_metric(2), twice)


def test_dalembert_with_fd_metric_derivative():
    g = heisenberg_metric()
    no_dg = RiemannianMetric(3, g.g_lower)
    a = dalembert_model(g, heisenberg_dalembert_model().constraints)
    b = dalembert_model(no_dg, heisenberg_dalembert_model().constraints)
    z = a.project_velocity(np.array([0.4, 0.1, -0.3, 0.2, 0.9, 0.0]))
    np.testing.assert_allclose(a.vector_field(z), b.vector_field(z), atol=1e-8)
