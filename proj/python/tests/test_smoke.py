import math

import numpy as np
import pytest

import entroflow as ef


def ou_kl(m, v):
    return 0.5 * (2 * v + 2 * m * m - 1 - math.log(2 * v))


@pytest.fixture(scope="module")
def ou():
    grid = ef.Grid(-8.0, 8.0, 512)
    pot = ef.Potential("quadratic", [1.0])
    gibbs = ef.GibbsMeasure(pot, grid)
    p0 = ef.gaussian_slice(grid, 1.0, 1.0)
    field = ef.solve_fokker_planck(pot, p0, grid, horizon=0.5, dt=1e-3)
    return grid, pot, gibbs, field


def test_version_and_subcommands():
    assert ef.__version__ == ef.version()
    assert set(ef.subcommands()) >= {"forward", "reverse", "verify-control", "entropy-report", "iterate", "ergodic"}


def test_gibbs_normalizer():
    grid = ef.Grid(-8.0, 8.0, 1024)
    q = ef.GibbsMeasure(ef.Potential("quadratic"), grid)
    assert q.normalizing_constant == pytest.approx(math.sqrt(math.pi), rel=1e-6)
    assert grid.integrate(q.density_nodes()) == pytest.approx(1.0, abs=1e-12)


def test_forward_entropy_matches_gaussian(ou):
    grid, _, gibbs, field = ou
    assert field.slices.shape == (len(field.times), len(grid))
    for t in (0.0, 0.25, 0.5):
        m = math.exp(-t)
        v = 0.5 + 0.5 * math.exp(-2 * t)
        assert ef.relative_entropy(field.at(t), gibbs) == pytest.approx(ou_kl(m, v), rel=2e-3)


def test_dissipation_and_score(ou):
    _, _, gibbs, field = ou
    score = ef.build_score(field, gibbs)
    report = ef.dissipation_check(field, score, gibbs)
    assert report["max_relative_residual"] < 0.02
    assert report["integral_relative_error"] < 0.01
    assert np.all(report["pinsker_margin"] >= -1e-6)
    # OU score at t = 0: grad log(p0/q) = 2x - (x - 1) = x + 1.
    assert score.score(0.0, 0.3) == pytest.approx(1.3, rel=1e-2)


def test_reversed_costs(ou):
    grid, pot, gibbs, field = ou
    score = ef.build_score(field, gibbs)
    x0 = ef.sample_from_slice(grid, field.at(0.5), 20000, 7)
    reference = ou_kl(math.exp(-0.5), 0.5 + 0.5 * math.exp(-1.0))
    opt = ef.simulate_reversed(pot, score, ef.ControlPolicy.score_optimal(), x0, 0.5, seed=7)
    cost = ef.expected_cost(opt, score, field, gibbs)
    assert abs(cost["total"] - reference) < max(0.01 * reference, 3 * cost["std_error"])
    shifted = ef.simulate_reversed(pot, score, ef.ControlPolicy.constant_shift(0.5), x0, 0.5, seed=7)
    assert ef.expected_cost(shifted, score, field, gibbs)["total"] > cost["total"] - 3 * cost["std_error"]
    w = np.exp(opt.final_log_weights())
    assert abs(w.mean() - 1.0) < 3 * w.std() / math.sqrt(w.size)


def test_python_callback_policy(ou):
    grid, pot, gibbs, field = ou
    score = ef.build_score(field, gibbs)
    x0 = ef.sample_from_slice(grid, field.at(0.5), 500, 3)
    policy = ef.ControlPolicy.perturbed("half", lambda t, x: 0.5)
    builtin = ef.ControlPolicy.constant_shift(0.5)
    a = ef.simulate_reversed(pot, score, policy, x0, 0.5, seed=3).final_states()
    b = ef.simulate_reversed(pot, score, builtin, x0, 0.5, seed=3).final_states()
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def broken(t, x):
        raise ZeroDivisionError("boom")

    with pytest.raises(RuntimeError, match="boom"):
        ef.simulate_reversed(pot, score, ef.ControlPolicy.custom("broken", broken), x0, 0.5, seed=3)


def test_iteration_decreases_entropy():
    grid = ef.Grid(-3.0, 3.0, 512)
    pot = ef.Potential("double_well", [1.0])
    gibbs = ef.GibbsMeasure(pot, grid)
    rows = ef.run_iteration(pot, gibbs, ef.gaussian_slice(grid, 1.0, 0.04), stage_horizon=1.0, stages=4)
    h = [r["entropy"] for r in rows]
    assert len(h) == 4 and all(b < a for a, b in zip(h, h[1:]))


def test_config_errors_are_value_errors(tmp_path):
    with pytest.raises(ValueError, match="horizn"):
        ef.run_config("forward", "[time]\nhorizn = 1.0\n", str(tmp_path))
    with pytest.raises(ef.ConfigError):
        ef.Potential("double_well", [-1.0])


def test_run_config_writes_artifacts(tmp_path):
    text = "[time]\nhorizon = 0.2\n[ensemble]\nparticles = 20000\n"
    outcome = ef.run_config("forward", text, str(tmp_path))
    assert outcome["pass"], outcome["checks"]
    assert (tmp_path / "density.csv").exists() and (tmp_path / "entropy.csv").exists()


def test_run_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[time]\nhorizon = \"x\"\n")
    code, _, err = ef.run("forward", str(tmp_path / "out"), config=str(bad))
    assert code == 2 and "horizon" in err
