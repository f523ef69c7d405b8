import math

import numpy as np
import pytest

from robsparse.core import Dataset, PipelineError, TuningParams, normalize_columns
from robsparse.preliminary import select_preliminary
from robsparse.robust import compute_weights, fit
from robsparse.selection import (
    PipelineConfig,
    SelectionError,
    bic_score,
    bic_terms,
    default_beta_grid,
    default_gamma_grid,
    full_pipeline,
    select_fit,
)
from robsparse.simulation import Scenario, evaluate, generate
from robsparse.thresholding import get_rule


def test_bic_example_n4():
    X, _ = normalize_columns(np.ones((4, 1)))
    ds = Dataset(y=np.array([1.0, 2.0, 0.0, 0.0]), X=X)
    fit_term, complexity = bic_terms(ds, np.zeros(1), np.array([0, 1.0, 0, 0]))
    assert fit_term == pytest.approx(0.125, abs=1e-15)
    assert complexity == pytest.approx(math.log(4) / 4, abs=1e-15)
    assert bic_score(ds, np.zeros(1), np.array([0, 1.0, 0, 0])) == pytest.approx(0.47157, abs=1e-5)


@pytest.fixture(scope="module")
def sim():
    ds, truth = generate(Scenario(n=100, p=60, s_star=5, g_star=8, seed=8))
    return ds, truth, select_preliminary(ds)


def test_select_fit_is_bic_argmin(sim):
    ds, _, prelim = sim
    rule = get_rule("hard")
    w = compute_weights(prelim)
    gb = default_beta_grid(ds, prelim, w, 5)
    gg = default_gamma_grid(ds, prelim, w, 4)
    best = select_fit(ds, prelim, rule, gb, gg, weights=w)
    scores = []
    for lg in gg:
        for lb in gb:
            res = fit(ds, prelim, rule, TuningParams(lb, lg, prelim.lambda_theta), weights=w)
            if res.converged:
                scores.append(bic_score(ds, res.beta, res.gamma))
    assert best.bic == pytest.approx(min(scores), rel=1e-12)
    assert best.tuning.lambda_beta in gb and best.tuning.lambda_gamma in gg


def test_ties_favour_larger_penalty(sim):
    ds, _, prelim = sim
    # both beta penalties kill every coefficient, so the fits are identical
    best = select_fit(ds, prelim, get_rule("soft"), [1e5, 1e6], [0.5])
    assert best.tuning.lambda_beta == 1e6


def test_single_point_grid(sim):
    ds, _, prelim = sim
    best = select_fit(ds, prelim, get_rule("scad"), [0.05], [0.7])
    assert best.tuning.lambda_beta == 0.05 and best.tuning.lambda_gamma == 0.7
    assert best.bic == pytest.approx(bic_score(ds, best.beta, best.gamma))


def test_no_converged_point_raises(sim):
    ds, _, prelim = sim
    with pytest.raises(SelectionError) as info:
        select_fit(ds, prelim, get_rule("hard"), [0.01], [0.5], stop_tol=0.0, max_outer=2)
    assert len(info.value.diagnostics) == 1


def test_default_grids(sim):
    ds, _, prelim = sim
    w = compute_weights(prelim)
    gb = default_beta_grid(ds, prelim, w, 10)
    assert len(gb) == 10 and np.all(np.diff(gb) < 0)
    gg = default_gamma_grid(ds, prelim, w, 10)
    r = np.abs(ds.y - ds.X @ prelim.beta_tilde)
    assert gg[0] * w.w_gamma.max() == pytest.approx(r.max())
    assert gg[-1] * w.w_gamma.max() == pytest.approx(np.median(r))


def test_pipeline_result_fields(sim):
    ds, _, _ = sim
    res = full_pipeline(ds, get_rule("hard"), PipelineConfig(grid_size=6, prelim="thpre"))
    assert res.prelim.thresholded
    assert len(res.grids["lambda_theta"]) == 6 and len(res.grids["lambda_beta"]) == 6
    assert res.grids["tau_theta"] == [0.5, 1.0, 2.0, 4.0]
    assert res.fit.converged and res.fit.bic is not None


def test_pipeline_stage_errors():
    X, _ = normalize_columns(np.random.default_rng(0).standard_normal((10, 3)))
    ds = Dataset(y=np.zeros(10), X=X)
    with pytest.raises(PipelineError) as info:
        full_pipeline(ds, get_rule("hard"))
    assert info.value.stage == "preliminary"
    assert str(info.value).startswith("[preliminary]")
    ds2, _ = generate(Scenario(n=50, p=20, s_star=3, g_star=3, seed=1))
    with pytest.raises(PipelineError) as info:
        full_pipeline(ds2, get_rule("hard"), PipelineConfig(grid_beta=[]))
    assert info.value.stage == "fit"


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(prelim="lasso")
    with pytest.raises(ValueError):
        PipelineConfig(grid_size=1)
    d = PipelineConfig().as_dict()
    assert d["grid_tau_theta"] == [0.5, 1.0, 2.0, 4.0] and d["R_w"] == 100.0


def test_recovers_full_support_most_of_the_time():
    hits = 0
    for seed in range(4):
        ds, truth = generate(Scenario(seed=seed))
        res = full_pipeline(ds, get_rule("hard"), PipelineConfig(grid_size=10))
        hits += evaluate(res.fit.beta, None, truth).tp == 10
    assert hits >= 3
