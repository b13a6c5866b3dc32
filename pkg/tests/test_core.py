import math

import numpy as np
import pytest

from asaopt.core import (
    CostFunctionError,
    ParameterSpec,
    ProblemSpec,
    RunConfig,
    accept_step,
    curvature_diagnostics,
    generate_candidate,
    init_run,
    round_half_to_zero,
    run,
)
from asaopt.distributions import asa_draw
from asaopt.schedules import T_FLOOR, asa_temperature
from asaopt.testfns import catalog

from conftest import quadratic


def test_parameter_validation():
    with pytest.raises(ValueError):
        ParameterSpec("a", 2.0, 1.0)
    with pytest.raises(ValueError):
        ParameterSpec("a", 0.0, 1.0, initial=3.0)
    with pytest.raises(ValueError):
        ParameterSpec("a", 0.2, 0.8, "integer")
    with pytest.raises(ValueError):
        ParameterSpec("a", 0.0, 3.0, "integer", initial=1.5)
    assert ParameterSpec("a", 3.0, 3.0).fixed
    assert ParameterSpec("a", 0.0, 10.0, "integer").initial == 5.0


def test_round_half_to_zero():
    assert [round_half_to_zero(v) for v in (2.5, -2.5, 2.51, -0.5, 0.49, 3.0)] == [2.0, -2.0, 3.0, -0.0, 0.0, 3.0]


def test_init_run():
    sphere = catalog("sphere").problem
    origin = ProblemSpec(tuple(ParameterSpec(p.name, -5, 5, initial=0.0) for p in sphere.parameters), sphere.cost)
    st = init_run(origin, RunConfig())
    assert st.Ta0 == 1e-18 and st.generated == 1 and st.k.tolist() == [0.0, 0.0] and st.ka == 0.0
    assert np.all(st.temps == 1.0)
    st = init_run(catalog("shubert").problem, RunConfig())
    assert st.Ta0 == pytest.approx(19.875836249802127)


def test_init_errors():
    bad = ProblemSpec((ParameterSpec("x", -1, 1, initial=0.5),), lambda x: 1.0, feasible=lambda x: x[0] < 0)
    with pytest.raises(ValueError, match="infeasible"):
        init_run(bad, RunConfig())
    nan = ProblemSpec((ParameterSpec("x", -1, 1),), lambda x: math.nan)
    with pytest.raises(ValueError):
        init_run(nan, RunConfig())


def test_config_validation():
    for bad in (dict(algorithm="ga"), dict(reanneal_every=0), dict(max_generated=0), dict(fd_step=0.0),
                dict(generation="random"), dict(seed=-1)):
        with pytest.raises(ValueError):
            RunConfig(**bad)


def mixed_problem():
    params = (
        ParameterSpec("fixed", 3.0, 3.0),
        ParameterSpec("n", 0.0, 10.0, "integer", 5.0),
        ParameterSpec("x", -1.0, 1.0),
    )
    return ProblemSpec(params, lambda x: (x[1] - 7) ** 2 + x[2] ** 2)


@pytest.mark.parametrize("algorithm", ["asa", "ba", "fa"])
def test_candidates_respect_ranges(algorithm):
    problem = mixed_problem()
    cfg = RunConfig(algorithm=algorithm, seed=3)
    st = init_run(problem, cfg)
    for _ in range(500):
        c = generate_candidate(st, problem, cfg)
        assert c.point[0] == 3.0
        assert c.point[1] == math.floor(c.point[1]) and 0 <= c.point[1] <= 10
        assert -1 <= c.point[2] <= 1
        accept_step(st, c, cfg, problem)


def test_sequential_moves_one_coordinate():
    problem = quadratic([1, 1, 1])
    cfg = RunConfig(generation="sequential", seed=1)
    st = init_run(problem, cfg)
    moved = []
    for _ in range(6):
        c = generate_candidate(st, problem, cfg)
        assert np.count_nonzero(c.point != st.current) <= 1
        moved.append(int(c.moved[0]))
    assert moved == [0, 1, 2, 0, 1, 2]


def test_cold_candidate_stays_put():
    # at the floor |y| = T^(1 - |2u-1|): negligible unless u is within a few percent of 0 or 1
    u = np.linspace(0.05, 0.95, 91)
    assert np.all(np.abs(asa_draw(u, np.full(u.size, T_FLOOR))) <= 1.0000001e-30)
    problem = quadratic([1, 1], initial=[0.3, -0.2])
    cfg = RunConfig(seed=2)
    st = init_run(problem, cfg)
    st.temps[:] = T_FLOOR
    close = 0
    for _ in range(1000):
        c = generate_candidate(st, problem, cfg)
        close += np.all(np.abs(c.point - st.current) < 1e-12)
    assert close >= 900


def test_redraw_cap_clamps_and_flags():
    problem = ProblemSpec((ParameterSpec("x", 0.0, 1.0, initial=1.0),), lambda x: x[0])
    cfg = RunConfig(algorithm="fa", seed=0, max_redraws=1)
    st = init_run(problem, cfg)
    st.temps[:] = 1e6  # nearly every step overshoots
    for _ in range(50):
        c = generate_candidate(st, problem, cfg)
        assert 0.0 <= c.point[0] <= 1.0
    assert st.clamped_draws > 0 and any("redraw cap" in f for f in st.flags)


def test_infeasible_not_costed():
    calls = []

    def cost(x):
        calls.append(x.copy())
        return float(x[0] ** 2)

    problem = ProblemSpec((ParameterSpec("x", -1, 1, initial=0.5),), cost, feasible=lambda x: x[0] > 0)
    rep = run(problem, RunConfig(max_generated=300, seed=4))
    assert rep.infeasible > 0
    assert all(c[0] > 0 for c in calls)
    assert len(calls) == rep.generated + rep.probe_evaluations
    assert rep.generated == rep.accepted + rep.rejected + 1


def test_accept_threshold():
    problem = quadratic([1.0])
    cfg = RunConfig(seed=0)
    st = init_run(problem, cfg)

    class FixedRng:
        def random(self):
            return 0.5

    st.rng = FixedRng()
    cand = generate_candidate(init_run(problem, cfg), problem, cfg)
    cand.cost = st.current_cost + st.Ta
    assert not accept_step(st, cand, cfg)
    cand.cost = st.current_cost - 1.0
    assert accept_step(st, cand, cfg)


def test_acceptance_rate_at_dE_equal_Ta():
    problem = quadratic([1.0])
    cfg = RunConfig(seed=7, freeze_temperatures=True)
    st = init_run(problem, cfg)
    Ta = st.Ta
    cand = generate_candidate(st, problem, cfg)
    hits = 0
    for _ in range(100_000):
        cand.cost = st.current_cost + Ta
        if accept_step(st, cand, cfg):
            hits += 1
            st.current_cost = cand.cost - Ta  # keep dE fixed
    assert hits / 100_000 == pytest.approx(math.exp(-1), abs=0.01)


def test_temperature_coupling_and_counters():
    problem = quadratic([1.0, 3.0])
    cfg = RunConfig(seed=11, reanneal=False)
    st = init_run(problem, cfg)
    best = st.best_cost
    for _ in range(300):
        c = generate_candidate(st, problem, cfg)
        accept_step(st, c, cfg, problem)
        for i, p in enumerate(st.param_schedules):
            assert st.temps[i] == asa_temperature(st.k[i], p)
        assert st.Ta == max(asa_temperature(st.ka, st.acc_schedule), T_FLOOR)
        assert st.best_cost <= best
        best = st.best_cost
        assert st.k[0] == st.generated - 1 and st.ka == st.accepted


def test_best_tracks_rejected_improvements():
    problem = quadratic([1.0])
    cfg = RunConfig(seed=0)
    st = init_run(problem, cfg)

    class Never:
        def random(self):
            return 1.0

    st.rng = Never()
    cand = generate_candidate(init_run(problem, cfg), problem, cfg)
    cand.cost = -1.0
    assert not accept_step(st, cand, cfg)
    assert st.best_cost == -1.0 and st.current_cost == 1.0


def test_nonfinite_candidate_rejected():
    problem = quadratic([1.0])
    cfg = RunConfig(seed=0)
    st = init_run(problem, cfg)
    cand = generate_candidate(st, problem, cfg)
    cand.cost = math.nan
    assert not accept_step(st, cand, cfg)
    assert st.flags


def test_sphere_sanity():
    rep = run(catalog("sphere").problem, RunConfig(max_generated=10_000, seed=0))
    assert rep.best_cost < 1e-4


def test_target_at_init():
    problem = catalog("sphere").problem
    rep = run(problem, RunConfig(target_cost=problem.cost(problem.initial)))
    assert rep.generated == 1 and rep.generated_at_target == 1 and rep.stop_reason == "target"


def test_trace_monotone_and_ranges():
    rep = run(catalog("shubert").problem, RunConfig(max_generated=3000, seed=5))
    best = [row[2] for row in rep.trace]
    assert all(a >= b for a, b in zip(best, best[1:]))
    assert rep.trace[0][0] == 1
    assert all(-10 <= v <= 10 for v in rep.best_point)


def test_stall_stops():
    flat = ProblemSpec((ParameterSpec("x", -1, 1),), lambda x: 1.0)
    rep = run(flat, RunConfig(max_generated=100_000, reanneal_every=5))
    assert rep.stop_reason == "stall" and rep.generated < 100_000


def test_cost_failure_propagates():
    def boom(x):
        if x[0] > 0.9:
            raise RuntimeError("kaput")
        return float(x[0])

    problem = ProblemSpec((ParameterSpec("x", -1, 1, initial=0.0),), boom)
    with pytest.raises(CostFunctionError, match="generated state"):
        run(problem, RunConfig(max_generated=10_000, seed=0))


@pytest.mark.parametrize("algorithm", ["asa", "ba", "fa"])
def test_determinism(algorithm):
    bp = catalog("shubert")
    cfg = RunConfig(algorithm=algorithm, max_generated=2000, seed=42, curvature=True)
    assert run(bp.problem, cfg) == run(bp.problem, cfg)


def test_batch_worker_independence():
    bp = catalog("corana")
    base = RunConfig(max_generated=3000, seed=9, batch_size=8)
    serial = run(bp.problem, base)
    for w in (2, 4):
        assert run(bp.problem, base.replace(workers=w)) == serial


def test_batch_one_matches_serial_loop():
    bp = catalog("shubert")
    assert run(bp.problem, RunConfig(seed=1, max_generated=500, batch_size=1)) == run(
        bp.problem, RunConfig(seed=1, max_generated=500)
    )


def test_curvature_quadratic():
    rep = curvature_diagnostics(quadratic([1, 1, 1]), np.zeros(3), 1e-4)
    np.testing.assert_allclose(rep.diagonal, 2.0, rtol=1e-6)
    np.testing.assert_allclose(rep.std_devs, 2**-0.5, rtol=1e-6)
    off = rep.hessian - np.diag(np.diag(rep.hessian))
    assert np.all(np.abs(off) < 1e-6)


def test_curvature_mixed_and_undefined():
    params = (ParameterSpec("a", -1, 1, initial=0.0), ParameterSpec("b", -1, 1, initial=0.0))
    rep = curvature_diagnostics(ProblemSpec(params, lambda x: x[0] * x[1]), [0.0, 0.0])
    assert rep.hessian[0, 1] == pytest.approx(1.0, abs=1e-6)
    assert rep.hessian[1, 0] == rep.hessian[0, 1]
    assert not rep.defined.any() and np.all(np.isnan(rep.std_devs))
