import math

import numpy as np
import pytest

from aflbt.btcore import Design, SingularInformation, fit_logistic
from aflbt.evaluate import PredictionOutcome
from aflbt.experiments import (
    VOTERS,
    EmptyFinalModel,
    FeatureCache,
    MissingVote,
    WindowSpec,
    backward_eliminate,
    choose_reference,
    independent_columns,
    majority_vote,
    run_covariate_experiment,
    run_outcome_experiment,
    run_round_experiment,
    run_strategy,
    screen_features,
    select_model,
    strategy_addition,
    strategy_full,
    strategy_incremental,
    strategy_substitution,
    windows,
)
from aflbt.ingest import GameRecord, build_dataset
from aflbt.synth import SynthSpec, generate_games, planted_design

from conftest import make_dataset


def _g(gid, home, away, home_wins):
    return GameRecord(gid, 2015, 1, "2015-03-01", home, away, 90 if home_wins else 60, 60 if home_wins else 90, "v")


def test_reference_unique_half():
    # A wins 10 of 20, C wins none, D wins all
    games = [_g(f"c{i}", "A", "C", True) for i in range(10)]
    games += [_g(f"d{i}", "D", "A", True) for i in range(10)]
    assert choose_reference(games) == "A"


def test_reference_tie_alphabetical():
    games = [_g("1", "Sydney", "Carlton", True), _g("2", "Carlton", "Sydney", True)]
    assert choose_reference(games) == "Carlton"


def test_reference_empty():
    with pytest.raises(ValueError):
        choose_reference([])


def test_windows():
    seasons = list(range(2015, 2024))
    one = windows(seasons, 1)
    assert len(one) == 9 and one[0] == WindowSpec((2015,), 2016) and one[-1].test_season is None
    assert [w.label for w in windows(seasons, 4)][:2] == ["2015-2018", "2016-2019"]
    assert windows(seasons, "all")[0].train_seasons == tuple(seasons)
    with pytest.raises(ValueError):
        WindowSpec((2015, 2017))
    with pytest.raises(ValueError):
        WindowSpec((2015,), 2017)


def _votes(pattern, gids=("g1",)):
    return {name: [PredictionOutcome(g, 0.7 if bit else 0.3, bit, True, False, name) for g in gids]
            for name, bit in zip(VOTERS, pattern)}


@pytest.mark.parametrize("pattern,home,p", [
    ((1, 1, 1, 1, 1), True, 1.0),
    ((1, 1, 1, 0, 0), True, 0.6),
    ((1, 1, 0, 0, 0), False, 0.4),
    ((0, 0, 0, 0, 0), False, 0.0),
])
def test_majority_examples(pattern, home, p):
    out = majority_vote(_votes([bool(b) for b in pattern]))[0]
    assert out.predicted_home_win is home and out.p_home == p and out.strategy == "majority"


def test_majority_order_invariant():
    votes = _votes([True, False, True, False, True], gids=("g2", "g1", "g3"))
    shuffled = {k: list(reversed(v)) for k, v in reversed(list(votes.items()))}
    assert sorted(majority_vote(votes), key=lambda o: o.game_id) == \
        sorted(majority_vote(shuffled), key=lambda o: o.game_id)
    assert [o.game_id for o in majority_vote(votes)] == ["g2", "g1", "g3"]


def test_majority_missing_vote():
    votes = _votes([True] * 5, gids=("g1", "g2"))
    votes["full"] = votes["full"][:1]
    with pytest.raises(MissingVote):
        majority_vote(votes)


def test_screen_empty():
    assert screen_features(planted_design(50, {"a": 1.0}, 0), []) == []


def test_screen_power():
    hits = sum("a" in screen_features(planted_design(400, {"a": 1.0}, s), ["a"]) for s in range(20))
    assert hits >= 19


def test_backward_drops_noise():
    kept = 0
    for s in range(20):
        d = planted_design(400, {"strong": 1.0, "noise": 0.0}, s)
        kept += backward_eliminate(d, ["strong", "noise"]).columns == ("strong",)
    assert kept >= 18


def test_backward_fixed_point():
    d = planted_design(400, {"strong": 1.0}, 1)
    assert backward_eliminate(d, ["strong"]).columns == ("strong",)


def test_backward_duplicate_columns():
    base = planted_design(300, {"a": 1.0}, 2)
    X = np.column_stack([base.X[:, 0], base.X[:, 0]])
    d = Design(("a", "b"), X, base.y)
    with pytest.raises(SingularInformation):
        fit_logistic(d)
    assert independent_columns(d, ["b", "a"]) == ["a"]
    assert backward_eliminate(d, ["a", "b"]).columns == ("a",)


def test_backward_all_eliminated():
    d = planted_design(200, {"n": 0.0}, 3)
    with pytest.raises(EmptyFinalModel):
        backward_eliminate(d, ["n"], alpha=1e-12)


def test_home_effect_only_signal():
    rng = np.random.default_rng(9)
    n = 600
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 3))])
    y = (rng.random(n) < 1 / (1 + math.exp(-0.8))).astype(float)
    sel = select_model(Design(("AT_HOME", "n1", "n2", "n3"), X, y))
    assert sel.retained == ("AT_HOME",) and not sel.fallback


def test_fallback_to_home_only():
    rng = np.random.default_rng(10)
    n = 200
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = np.tile([1.0, 0.0], n // 2)
    sel = select_model(Design(("AT_HOME", "n1", "n2"), X, y))
    assert sel.fallback and sel.retained == () and sel.fit.columns == ("AT_HOME",)
    with pytest.raises(EmptyFinalModel):
        select_model(Design(("AT_HOME", "n1", "n2"), X, y), fallback=False)


def test_outcome_experiment_two_teams():
    # 3 of 4 wins to Geelong at home: closed-form fit predicts Geelong every time
    ds = make_dataset([(2015, r, "Geelong", "Carlton", 90 if r != 2 else 60, 70) for r in range(1, 5)]
                      + [(2016, r, "Geelong", "Carlton", 90 if r % 2 else 60, 70) for r in range(1, 5)])
    r = run_outcome_experiment(ds, WindowSpec((2015,), 2016))
    assert r.reference_team == "Carlton"
    assert r.fit.coef("Geelong") == pytest.approx(math.log(3), abs=1e-8)
    assert r.train_accuracy == 0.75 and r.test_accuracy == 0.5
    assert r.aic == pytest.approx(2 - 2 * (math.log(4) + 3 * math.log(0.75) + math.log(0.25)), abs=1e-10)


def test_outcome_experiment_with_home_effect(league):
    r = run_outcome_experiment(league, WindowSpec((2015,), 2016), True)
    assert r.experiment == "e2" and "AT_HOME" in r.fit.columns
    assert r.n_test == len([g for g in league.games if g.season == 2016 and not g.is_draw])


@pytest.fixture(scope="module")
def small_league():
    ds = generate_games(SynthSpec(seasons=(2015, 2016), rounds_per_season=8, finals=False, seed=5))
    return ds


def _restrict(ds, keep):
    games = [g for g in ds.games if keep(g)]
    ids = {g.game_id for g in games}
    return build_dataset(games, {k: v for k, v in ds.pis.items() if k[0] in ids}, ds.ladder, ds.prev_ladder, ds.geo)


@pytest.mark.parametrize("strategy", [strategy_addition, strategy_substitution])
def test_single_test_round_matches_full(small_league, strategy):
    ds = _restrict(small_league, lambda g: g.season == 2015 or g.round == 1)
    a = [o.p_home for o in strategy(ds, 2015, 2016, "last4")]
    b = [o.p_home for o in strategy_full(ds, 2015, 2016, "last4")]
    assert a == b and len(a) == 9


def test_incremental_warmup_uses_previous_model(small_league):
    ds = _restrict(small_league, lambda g: g.season == 2015 or g.round <= 3)
    a = [o.p_home for o in strategy_incremental(ds, 2015, 2016, "season")]
    b = [o.p_home for o in strategy_full(ds, 2015, 2016, "season")]
    assert a == b


def test_round_experiment_reports(small_league):
    reports = run_round_experiment(small_league, 2015, 2016, "last4")
    assert [r.strategy for r in reports] == ["full", "addition", "substitution", "incremental", "majority"]
    for r in reports:
        assert r.n_test == 72 and 0 <= r.test_accuracy <= 1
    assert [o.game_id for o in reports[0].outcomes] == [o.game_id for o in reports[1].outcomes]


def test_run_strategy_unknown(small_league):
    with pytest.raises(ValueError):
        run_strategy(small_league, "psychic", 2015, 2016, "last4")


def test_covariate_experiment(small_league):
    r = run_covariate_experiment(small_league, WindowSpec((2015,), 2016), "season", FeatureCache(small_league))
    assert set(r.retained_features) <= set(r.significant_features) or r.retained_features == ()
    assert r.n_train == 72 and r.n_test == 72
    assert r.to_row()["encoding"] == "season"


@pytest.mark.slow
def test_full_sweep_runtime_at_real_scale():
    import time

    from aflbt.experiments import STRATEGIES

    ds = generate_games(SynthSpec(seasons=tuple(range(2015, 2024)), seed=1))
    cache = FeatureCache(ds)
    t0 = time.perf_counter()
    for w in windows(ds.seasons, 1):
        if w.test_season is not None:
            run_round_experiment(ds, w.train_seasons[0], w.test_season, "last4", STRATEGIES, cache)
    assert time.perf_counter() - t0 < 600
