import os
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from aflbt.ingest import PI_NAMES, GameRecord, build_dataset
from aflbt.synth import SynthSpec, _standings, default_geo, generate_games

# first calls include numba compilation
settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_RESULTS = []

REAL_DATA = os.environ.get("AFLBT_REAL_DATA")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


def make_dataset(games, pis=None, prev=None, venue=None):
    """Dataset from ``(season, round, home, away, home_pts, away_pts[, venue[, is_final]])`` tuples.

    Ladders are derived from the results; PIs default to zeros.
    """
    records = []
    for i, g in enumerate(games):
        season, rnd, home, away, hp, ap = g[:6]
        v = g[6] if len(g) > 6 else (venue or sorted(default_geo().home_venues[home])[0])
        final = g[7] if len(g) > 7 else False
        records.append(GameRecord(f"g{i:04d}", season, rnd, (date(season, 3, 1) + timedelta(days=7 * (rnd - 1))).isoformat(),
                                  home, away, hp, ap, v, final))
    teams = sorted({t for r in records for t in (r.home_team, r.away_team)})
    ladder = {}
    for season in sorted({r.season for r in records}):
        played = []
        rounds = sorted({r.round for r in records if r.season == season and not r.is_final})
        for rnd in rounds:
            played += [(r.home_team, r.away_team, r.home_points, r.away_points)
                       for r in records if r.season == season and r.round == rnd]
            for team, pos in _standings(teams, played).items():
                ladder[(season, rnd, team)] = pos
    if prev is None:
        first = min(r.season for r in records) if records else 0
        prev = {(first - 1, t): i + 1 for i, t in enumerate(teams)}
    pi_map = {}
    for r in records:
        for team in (r.home_team, r.away_team):
            vals = np.zeros(len(PI_NAMES)) if pis is None else np.asarray(pis(r, team), dtype=float)
            vals.setflags(write=False)
            pi_map[(r.game_id, team)] = vals
    return build_dataset(records, pi_map, ladder, prev, default_geo())


@pytest.fixture(scope="session")
def league():
    """Two synthetic seasons with finals."""
    return generate_games(SynthSpec(seasons=(2015, 2016), seed=7))


@pytest.fixture(scope="session")
def _real_dataset():
    from aflbt.ingest import load_dataset_dir

    return load_dataset_dir(Path(REAL_DATA))


@pytest.fixture
def real_dataset(request):
    if not REAL_DATA:
        reason = "set AFLBT_REAL_DATA to a directory with the real 2015-2023 CSV export"
        number = int(request.node.name.split("_")[2])
        ACCEPTANCE_RESULTS.append(f"SKIP criterion {number:>2}: {request.node.name} [{reason}]")
        pytest.skip(reason)
    return request.getfixturevalue("_real_dataset")
