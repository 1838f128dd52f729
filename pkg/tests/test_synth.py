import math

import numpy as np
import pytest

from aflbt.btcore import fit_standard
from aflbt.ingest import PI_NAMES, PI_RATES, decided_games
from aflbt.synth import (
    SynthSpec,
    TooManyTeams,
    generate_games,
    grid_mle_oracle,
    random_pair_counts,
    round_robin,
)


def test_same_seed_same_dataset():
    spec = SynthSpec(seasons=(2015,), rounds_per_season=5, seed=3)
    assert generate_games(spec) == generate_games(spec)
    assert generate_games(spec) != generate_games(SynthSpec(seasons=(2015,), rounds_per_season=5, seed=4))


def test_per_season_streams_are_independent_of_season_count():
    one = generate_games(SynthSpec(seasons=(2015,), rounds_per_season=5, finals=False, seed=8))
    two = generate_games(SynthSpec(seasons=(2015, 2016), rounds_per_season=5, finals=False, seed=8))
    assert one.games == tuple(g for g in two.games if g.season == 2015)


def test_fair_coin():
    spec = SynthSpec(strengths=(0.0,) * 18, home_effect=0.0, seasons=(2015,), rounds_per_season=112,
                     finals=False, seed=1)
    games = generate_games(spec).games
    n = len(games)
    assert n == 1008
    rate = sum(g.home_win for g in games) / n
    assert abs(rate - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_log3_win_rate():
    half = math.log(3) / 2
    spec = SynthSpec(strengths=(half, -half), teams=("Adelaide", "Brisbane Lions"), home_effect=0.0,
                     seasons=(2015,), rounds_per_season=2000, finals=False, seed=2)
    games = generate_games(spec).games
    rate = sum((g.home_team == "Adelaide") == g.home_win for g in games) / len(games)
    assert abs(rate - 0.75) <= 3 * math.sqrt(0.75 * 0.25 / len(games))


def test_scores_consistent_and_no_draws(league):
    for g in league.games:
        assert g.home_points != g.away_points
        assert min(g.home_points, g.away_points) >= 0


def test_pis_in_range(league):
    rates = np.array([n in PI_RATES for n in PI_NAMES])
    for v in league.pis.values():
        assert np.all(v >= 0) and np.all(v[rates] <= 100)


def test_finals_bracket(league):
    finals = [g for g in league.games if g.is_final and g.season == 2015]
    assert len(finals) == 9
    assert len({g.round for g in finals}) == 4
    assert finals[-1].venue == "MCG"


def test_round_robin_covers_all_pairs():
    teams = [f"T{i}" for i in range(6)]
    rounds = round_robin(teams, 5)
    pairs = set()
    for r in rounds:
        assert sorted(t for p in r for t in p) == sorted(teams)
        pairs |= {frozenset(p) for p in r}
    assert len(pairs) == 15


@pytest.mark.parametrize("kwargs", [dict(strengths=(1.0, 0.0)), dict(teams=("Adelaide", "Fitzroy"), strengths=(0.0, 0.0)),
                                    dict(teams=("Adelaide",), strengths=(0.0,))])
def test_invalid_synth_settings(kwargs):
    base = dict(teams=("Adelaide", "Carlton"), strengths=(0.5, -0.5))
    base.update(kwargs)
    with pytest.raises(ValueError):
        SynthSpec(**base)


def test_grid_oracle_two_teams():
    best, _ = grid_mle_oracle({("A", "B"): (3, 1)}, "B")
    assert 1.09 <= best["A"] <= 1.11


def test_grid_oracle_symmetric():
    counts = {(h, a): (2, 2) for h in "ABC" for a in "ABC" if h != a}
    best, _ = grid_mle_oracle(counts, "A")
    assert best == {"B": 0.0, "C": 0.0}


def test_grid_oracle_never_beats_fit():
    for seed in range(5):
        counts = random_pair_counts("ABC", seed)
        _, ll = grid_mle_oracle(counts, "A")
        assert ll <= fit_standard(counts, "A").log_likelihood + 1e-6


def test_grid_oracle_team_limit():
    with pytest.raises(TooManyTeams):
        grid_mle_oracle(random_pair_counts("ABCD", 0))


def test_ladder_is_permutation(league):
    for season in league.seasons:
        rounds = {r for (s, r, _) in league.ladder if s == season}
        for r in rounds:
            pos = sorted(p for (s, rr, _), p in league.ladder.items() if s == season and rr == r)
            assert pos == list(range(1, 19))
    assert decided_games(league)[1] == 0
