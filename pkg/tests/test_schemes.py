import math

import numpy as np
import pytest

from randrk import (AFFINE, NEWTON, ContractionViolated, FixedTau, IVP, NonConvergence,
                    SchemeId, SingularStage, StageSolverConfig, dahlquist, holder_problem,
                    integrate, integrate_paths, make_grid, solve_stage_affine,
                    solve_stage_newton, solve_stage_picard, step_det_rk2, step_det_s1,
                    step_det_s2, step_rand_expl_rk2, step_s1, step_s2, stiff_problem,
                    tau_stream)

CFG = StageSolverConfig()
CFG_AFF = StageSolverConfig(method=AFFINE)


def zero_problem(dim=1, eta=0.5):
    return IVP(dim=dim, t0=0.0, t1=1.0, eta=np.full(dim, eta),
               rhs=lambda t, x: np.zeros_like(x),
               exact=lambda t: np.full(dim, eta), lipschitz=0.0, rhs_vectorized=True)


class _TauSeq:
    def __init__(self, values):
        self.values = list(values)
        self.position = 0

    def next(self):
        self.position += 1
        return self.values[self.position - 1]


class TestExplicitSteps:
    def test_det_rk2_dahlquist(self):
        # multiplier 1 + z + z^2/2 at z = -1 is 1/2
        r = step_det_rk2(dahlquist(-1.0), 0.0, np.array([1.0]), 1.0)
        assert r.state[0] == pytest.approx(0.5, abs=1e-15)
        assert r.iters == 0 and r.residual == 0.0

    def test_det_rk2_zero_field(self):
        r = step_det_rk2(zero_problem(), 0.0, np.array([0.5]), 1.0)
        assert r.state[0] == 0.5

    def test_det_rk2_stiff_hand_evaluation(self):
        # two formula lines evaluated by hand for V=1, t=0, h=1/2 on the stiff problem
        r = step_det_rk2(stiff_problem(), 0.0, np.array([1.0]), 0.5)
        stage = 1.0 + 0.25 * (-50.0) * (1.0 - math.cos(0.0))
        state = 1.0 + 0.5 * (-50.0) * (stage - math.cos(0.25))
        assert r.stage[0] == stage
        assert r.state[0] == state

    def test_rand_expl_half_equals_det(self):
        ivp = stiff_problem()
        v = np.array([0.7])
        a = step_rand_expl_rk2(ivp, 1.0, v, 0.5, 0.5)
        b = step_det_rk2(ivp, 1.0, v, 0.5)
        assert np.array_equal(a.state, b.state)

    def test_rand_expl_multiplier(self):
        # multiplier 1 + z(1 + tau z): 0 at z=-1, tau=0; 288.5 at z=-25, tau=1/2
        r = step_rand_expl_rk2(dahlquist(-1.0), 0.0, np.array([1.0]), 1.0, 0.0)
        assert r.state[0] == pytest.approx(0.0, abs=1e-15)
        r = step_rand_expl_rk2(dahlquist(-25.0), 0.0, np.array([1.0]), 1.0, 0.5)
        assert r.state[0] == pytest.approx(288.5, rel=1e-14)

    def test_tau_validation(self):
        with pytest.raises(ValueError):
            step_rand_expl_rk2(dahlquist(-1.0), 0.0, np.array([1.0]), 1.0, 1.0)


class TestPicardSolver:
    def test_linear_contraction(self):
        v, iters, res = solve_stage_picard(lambda x: 0.5 * x + 1.0, np.array([0.0]), CFG)
        assert v[0] == pytest.approx(2.0, abs=1e-11)
        assert res <= CFG.tol * (1 + np.linalg.norm(v))

    def test_expansion_diverges(self):
        with pytest.raises(NonConvergence):
            solve_stage_picard(lambda x: 2.0 * x + 1.0, np.array([0.0]), CFG)

    def test_max_iter_exhausted(self):
        cfg = StageSolverConfig(max_iter=3)
        with pytest.raises(NonConvergence, match="3 iterations"):
            solve_stage_picard(lambda x: 0.999 * x + 1.0, np.array([0.0]), cfg)

    def test_s1_stage_closed_form(self):
        # stage of the semi-implicit step on x' = lam x solves to V/(1 - z*tau)
        r = step_s1(dahlquist(-0.5), 0.0, np.array([1.0]), 1.0, 0.5, CFG)
        assert r.stage[0] == pytest.approx(0.8, abs=1e-12)


class TestAffineSolver:
    def test_dahlquist_scalar(self):
        ivp = dahlquist(-2.0)
        x = solve_stage_affine(ivp, 0.3, np.array([1.0]), 0.25, 0.5)
        assert x[0] == pytest.approx(1.0 / (1.0 + 2.0 * 0.5 * 0.25), rel=1e-15)

    def test_zero_matrix(self):
        ivp = IVP(dim=1, t0=0.0, t1=1.0, eta=np.array([0.0]),
                  rhs=lambda t, x: np.full_like(x, 3.0),
                  affine=(lambda t: np.zeros((1, 1)), lambda t: np.array([3.0])))
        x = solve_stage_affine(ivp, 0.0, np.array([2.0]), 0.5, 0.25)
        assert x[0] == 2.0 + 0.5 * 0.25 * 3.0

    def test_stiff_det_s2_step_hand_solve(self):
        # V1 (1 + 12.5) = 1 - 12.5 + 25 cos(1/4), solved by hand
        r = step_det_s2(stiff_problem(), 0.0, np.array([1.0]), 0.5, CFG_AFF)
        want = (-11.5 + 25.0 * math.cos(0.25)) / 13.5
        assert r.state[0] == pytest.approx(want, rel=1e-14)
        assert r.iters == 1
        assert r.residual <= CFG_AFF.tol * (1 + abs(r.state[0]))

    def test_singular_at_z_two(self):
        with pytest.raises(SingularStage):
            step_det_s2(dahlquist(2.0), 0.0, np.array([1.0]), 1.0, CFG_AFF)

    def test_requires_affine(self):
        ivp = IVP(dim=1, t0=0.0, t1=1.0, eta=np.array([1.0]), rhs=lambda t, x: -x)
        with pytest.raises(ValueError):
            solve_stage_affine(ivp, 0.0, np.array([1.0]), 0.5, 0.1)


class TestNewtonSolver:
    def test_matches_affine_on_stiff_stage(self):
        # L*h*tau = 12.5: far outside the picard regime, newton still solves it
        cfg_n = StageSolverConfig(method=NEWTON, lipschitz_guard=False)
        rn = step_s1(stiff_problem(), 0.0, np.array([1.0]), 0.5, 0.5, cfg_n)
        ra = step_s1(stiff_problem(), 0.0, np.array([1.0]), 0.5, 0.5, CFG_AFF)
        assert rn.state[0] == pytest.approx(ra.state[0], rel=1e-12)

    def test_nonlinear_stage(self):
        # x = 1 + 0.1 sin(x) has a unique fixed point; check the residual contract
        v, _, _ = solve_stage_newton(lambda x: 1.0 + 0.1 * np.sin(x), np.array([0.0]), CFG)
        assert abs(v[0] - (1.0 + 0.1 * math.sin(v[0]))) <= 1e-11


class TestImplicitSteps:
    def test_s1_s2_share_multiplier(self):
        # both reduce to V (1 + z/(1 - z tau)) on the test equation
        for tau in (0.1, 0.5, 0.9):
            r1 = step_s1(dahlquist(-1.0), 0.0, np.array([1.0]), 1.0, tau, CFG_AFF)
            r2 = step_s2(dahlquist(-1.0), 0.0, np.array([1.0]), 1.0, tau, CFG_AFF)
            want = 1.0 - 1.0 / (1.0 + tau)
            assert r1.state[0] == pytest.approx(want, rel=1e-12)
            assert abs(r2.state[0] - r1.state[0]) <= 1e-10

    def test_s1_s2_agree_on_general_affine_problem(self):
        # the s2 chord point satisfies the s1 stage equation, so states coincide
        ivp = stiff_problem()
        rng = np.random.default_rng(5)
        for _ in range(20):
            v = np.array([rng.normal()])
            t, tau = 2.0 * rng.random(), rng.random()
            r1 = step_s1(ivp, t, v, 0.5, tau, CFG_AFF)
            r2 = step_s2(ivp, t, v, 0.5, tau, CFG_AFF)
            assert abs(r1.state[0] - r2.state[0]) <= 1e-10 * (1 + abs(r1.state[0]))
            assert np.allclose(r2.stage, (1 - tau) * v + tau * r2.state)

    def test_s1_zero_field(self):
        r = step_s1(zero_problem(), 0.0, np.array([0.5]), 1.0, 0.3, CFG)
        assert r.state[0] == 0.5 and r.stage[0] == 0.5
        assert r.iters == 1

    def test_s2_tau_zero_is_explicit_euler(self):
        ivp = dahlquist(-1.0)
        r = step_s2(ivp, 0.0, np.array([1.0]), 0.5, 0.0, CFG)
        assert r.state[0] == 1.0 + 0.5 * (-1.0)
        assert r.iters <= 2
        r = step_s2(ivp, 0.0, np.array([1.0]), 0.5, 0.0, CFG_AFF)
        assert r.state[0] == 0.5 and r.iters == 1

    def test_tau_half_matches_det_steps(self):
        ivp = stiff_problem()
        v = np.array([0.9])
        assert np.array_equal(step_s1(ivp, 1.0, v, 0.125, 0.5, CFG_AFF).state,
                              step_det_s1(ivp, 1.0, v, 0.125, CFG_AFF).state)
        assert np.array_equal(step_s2(ivp, 1.0, v, 0.125, 0.5, CFG_AFF).state,
                              step_det_s2(ivp, 1.0, v, 0.125, CFG_AFF).state)

    def test_contraction_guards(self):
        ivp = stiff_problem()  # L = 50
        with pytest.raises(ContractionViolated):
            step_s1(ivp, 0.0, np.array([1.0]), 0.5, 0.5, CFG)  # L h tau = 12.5
        with pytest.raises(ContractionViolated):
            step_s2(ivp, 0.0, np.array([1.0]), 0.05, 0.1, CFG)  # L h = 2.5
        # s1 guard uses L*h*tau: small tau passes where L*h alone would not
        r = step_s1(ivp, 0.0, np.array([1.0]), 0.05, 0.1, CFG)  # L h tau = 0.25
        assert np.isfinite(r.state[0])

    def test_guard_can_be_disabled(self):
        cfg = StageSolverConfig(lipschitz_guard=False, max_iter=2000)
        r = step_s1(stiff_problem(), 0.0, np.array([1.0]), 0.019, 0.9, cfg)  # L h tau = 0.855
        assert np.isfinite(r.state[0])

    def test_picard_affine_agreement(self):
        # L*h*tau <= 0.5 regime
        ivp = stiff_problem()
        for tau in (0.2, 0.5, 0.9):
            rp = step_s1(ivp, 0.3, np.array([1.1]), 0.01, tau, CFG)
            ra = step_s1(ivp, 0.3, np.array([1.1]), 0.01, tau, CFG_AFF)
            assert abs(rp.state[0] - ra.state[0]) <= 10 * CFG.tol
            rp = step_s2(ivp, 0.3, np.array([1.1]), 0.01, tau, CFG)
            ra = step_s2(ivp, 0.3, np.array([1.1]), 0.01, tau, CFG_AFF)
            assert abs(rp.state[0] - ra.state[0]) <= 10 * CFG.tol

    def test_multiplier_law_complex_lattice(self):
        # 20x20 window of z = lam (h=1), 2-d real embedding vs complex algebra
        worst = 0.0
        for re in np.linspace(-5, 5, 20):
            for im in np.linspace(-5, 5, 20):
                z = complex(re, im)
                ivp = dahlquist(z)
                for tau in (0.17, 0.5, 0.83):
                    if abs(1 - z * tau) <= 1e-6:
                        continue
                    want = 1 + z / (1 - z * tau)
                    for step in (step_s1, step_s2):
                        got = step(ivp, 0.0, np.array([1.0, 0.0]), 1.0, tau, CFG_AFF).state
                        err = abs(complex(got[0], got[1]) - want) / abs(want)
                        worst = max(worst, err)
        assert worst <= 1e-10


class TestIntegrate:
    def test_product_formula(self):
        # V^3 on the test equation is the product of the three step multipliers
        taus = [0.2, 0.5, 0.9]
        tr = integrate(dahlquist(-1.0), SchemeId.S1, make_grid(0, 3, 3), _TauSeq(taus), CFG_AFF)
        want = np.prod([1.0 - 1.0 / (1.0 + t) for t in taus])
        assert tr.states[-1, 0] == pytest.approx(want, rel=1e-12)
        assert np.array_equal(tr.taus, taus)

    def test_zero_field_all_schemes(self):
        ivp = zero_problem()
        g = make_grid(0, 1, 5)
        for scheme in SchemeId:
            taus = tau_stream(0, 0) if scheme.randomized else None
            tr = integrate(ivp, scheme, g, taus, CFG)
            assert np.all(tr.states == 0.5)
            assert tr.converged

    def test_stiff_det_s2_accuracy(self):
        ivp = stiff_problem()
        g = make_grid(0, 50, 400)
        tr = integrate(ivp, SchemeId.DET_S2, g, None, CFG_AFF)
        exact = np.array([ivp.exact(t)[0] for t in g.times()])
        assert np.max(np.abs(tr.states[:, 0] - exact)) <= 0.01

    def test_explicit_overflow_is_recorded_not_raised(self):
        tr = integrate(stiff_problem(), SchemeId.DET_RK2, make_grid(0, 50, 200), None)
        assert not np.all(np.isfinite(tr.states))

    def test_randomized_needs_taus(self):
        with pytest.raises(ValueError):
            integrate(dahlquist(-1.0), SchemeId.S1, make_grid(0, 1, 2), None, CFG)

    def test_error_names_step_index(self):
        with pytest.raises(ContractionViolated, match="step 1"):
            integrate(stiff_problem(), SchemeId.S2, make_grid(0, 50, 100), tau_stream(0), CFG)

    def test_specialization_tau_half_picard(self):
        # forced tau = 1/2 matches the deterministic run within tol * n
        ivp = dahlquist(-2.0)
        g = make_grid(0, 1, 32)
        a = integrate(ivp, SchemeId.S2, g, FixedTau(0.5), CFG)
        b = integrate(ivp, SchemeId.DET_S2, g, None, CFG)
        assert np.max(np.abs(a.states - b.states)) <= CFG.tol * g.n

    @pytest.mark.parametrize("scheme", [SchemeId.DET_S1, SchemeId.DET_S2])
    def test_order_two_sanity(self, scheme):
        ivp = dahlquist(-2.0)
        errs = []
        for k in range(4, 9):
            g = make_grid(0, 1, 2 ** k)
            tr = integrate(ivp, scheme, g, None, CFG)
            exact = np.array([ivp.exact(t)[0] for t in g.times()])
            errs.append(np.max(np.abs(tr.states[:, 0] - exact)))
        for e0, e1 in zip(errs, errs[1:]):
            assert 1.9 <= np.log2(e0 / e1) <= 2.1


class TestIntegratePaths:
    @pytest.mark.parametrize("ivp_fn", [lambda: dahlquist(-2.0), holder_problem])
    @pytest.mark.parametrize("scheme", [SchemeId.S1, SchemeId.S2, SchemeId.RAND_EXPL_RK2])
    def test_matches_scalar_paths_bitwise(self, ivp_fn, scheme):
        ivp = ivp_fn()
        g = make_grid(0, 1, 32)
        taus = np.stack([tau_stream(77, i).draw(g.n) for i in range(4)])
        batch = integrate_paths(ivp, scheme, g, taus)
        for i in range(4):
            tr = integrate(ivp, scheme, g, tau_stream(77, i))
            assert np.array_equal(batch[i], tr.states)

    def test_deterministic_schemes(self):
        ivp = stiff_problem()
        g = make_grid(0, 50, 100)
        batch = integrate_paths(ivp, SchemeId.DET_RK2, g, None, n_paths=2)
        tr = integrate(ivp, SchemeId.DET_RK2, g, None)
        assert np.array_equal(batch[0], tr.states)
        assert np.array_equal(batch[1], tr.states)

    def test_contraction_guard(self):
        with pytest.raises(ContractionViolated):
            integrate_paths(stiff_problem(), SchemeId.S2, make_grid(0, 50, 100),
                            np.full((2, 100), 0.5))

    def test_needs_vectorized_rhs(self):
        ivp = IVP(dim=1, t0=0.0, t1=1.0, eta=np.array([1.0]), rhs=lambda t, x: -x,
                  lipschitz=1.0)
        with pytest.raises(ValueError):
            integrate_paths(ivp, SchemeId.S1, make_grid(0, 1, 4), np.full((1, 4), 0.3))


class TestConfigValidation:
    def test_rejects_bad_method(self):
        with pytest.raises(ValueError):
            StageSolverConfig(method="bisection")

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            StageSolverConfig(tol=0.0)

    def test_rejects_bad_max_iter(self):
        with pytest.raises(ValueError):
            StageSolverConfig(max_iter=0)
