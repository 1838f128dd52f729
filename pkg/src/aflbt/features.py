"""Pre-game features and the two model-input shapes.

Two routes compute the same per-team values:

* the per-game functions (``form_features``, ``ladder_features``,
  ``difficulty_features``, ``pi_history``) walk a team's schedule directly
  and are the reference used by the tests;
* ``build_feature_table`` processes every team-season at once through the
  sequential-sum kernels and is what the experiments use.

Every value uses only the team's earlier games in the same season.  Draws
are excluded from the histories, just as they are excluded from modelling.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .btcore import Design
from .ingest import PI_NAMES, Dataset, GameRecord, GeoConfig, decided_games

# Ladder position used when no earlier standing exists.
NEUTRAL_POSITION = 9
LAST_N = 4
ENCODINGS = ("last4", "season")

DIFFICULTY_COLUMNS = ("AT_HOME", "HOMEGROUND", "INTERSTATE")
FORM_COLUMNS = (
    "CONSECUTIVE_LOSSES",
    "CONSECUTIVE_WINS",
    "L4G_WINS",
    "LADDER_POSITION_DIFF",
    "LADDERLY_POSITION_DIFF",
    "LG_WON",
    "PERCENTAGE_DIFF",
    "POINTSAGAINST_DIFF",
    "POINTSFOR_DIFF",
    "WINS_CUMULATIVE_DIFF",
)
INTERACTION_COLUMNS = ("AT_HOME_X_HOMEGROUND", "AT_HOME_X_INTERSTATE")


class MissingLadder(LookupError):
    def __init__(self, season, round_):
        self.season, self.round = season, round_
        super().__init__(f"no ladder for season {season} before round {round_}")


class MissingPrevLadder(LookupError):
    def __init__(self, season, team):
        self.season, self.team = season, team
        super().__init__(f"no previous-season final position for {team} (season {season})")


def pi_columns(encoding: str) -> tuple:
    if encoding == "last4":
        return tuple(f"{n}_L4_CSUM_DIFF" for n in PI_NAMES)
    if encoding == "season":
        return tuple(f"{n}_CSUM_DIFF" for n in PI_NAMES)
    raise ValueError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")


def design_columns(encoding: str, include_interactions: bool = False) -> tuple:
    """Canonical column order of the covariate design."""
    cols = DIFFICULTY_COLUMNS + FORM_COLUMNS + pi_columns(encoding)
    if include_interactions:
        cols += INTERACTION_COLUMNS
    return cols


@dataclass(frozen=True, eq=False)
class TeamRoundFeatures:
    game_id: str
    team: str
    AT_HOME: int
    HOMEGROUND: int
    INTERSTATE: int
    LG_WON: int
    L4G_WINS: int
    CONSECUTIVE_WINS: int
    CONSECUTIVE_LOSSES: int
    WINS_CUMULATIVE: int
    POINTSFOR: int
    POINTSAGAINST: int
    PERCENTAGE: float
    LADDER_POSITION: int
    LADDERLY_POSITION: int
    pi_season: np.ndarray = field(repr=False)
    pi_last4: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, TeamRoundFeatures):
            return NotImplemented
        scalars = [f for f in self.__dataclass_fields__ if not f.startswith("pi_")]
        return (all(getattr(self, f) == getattr(other, f) for f in scalars)
                and np.array_equal(self.pi_season, other.pi_season)
                and np.array_equal(self.pi_last4, other.pi_last4))

    __hash__ = None


@dataclass(frozen=True)
class DesignRow:
    game_id: str
    season: int
    round: int
    is_final: bool
    home_team: str
    away_team: str
    target: int
    x: Mapping[str, float]


# --- sequence helpers ------------------------------------------------------


def exclusive_season_cumulative(values: Sequence[float]) -> np.ndarray:
    """out[k] = sum(values[:k])."""
    return _kernels.exclusive_cumsum(np.asarray(values, dtype=np.float64))


def rolling_last4_sum(values: Sequence[float]) -> np.ndarray:
    """out[k] = sum(values[max(0, k-4):k])."""
    return _kernels.rolling_sum(np.asarray(values, dtype=np.float64), LAST_N)


def percentage(points_for, points_against) -> float:
    if points_against == 0:
        if points_for == 0:
            return 100.0
        return 100.0 * (points_for + 1) / (points_against + 1)
    return 100.0 * points_for / points_against


# --- binomial counts -------------------------------------------------------


def build_binomial_counts(games: Iterable[GameRecord]) -> dict:
    """(home, away) -> (home_wins, away_wins) over decided games."""
    counts = {}
    for g in games:
        if g.is_draw:
            raise ValueError(f"game {g.game_id} is a draw; pass decided games only")
        hw, aw = counts.get((g.home_team, g.away_team), (0, 0))
        counts[(g.home_team, g.away_team)] = (hw + 1, aw) if g.home_win else (hw, aw + 1)
    return dict(sorted(counts.items()))


# --- per-game reference route ----------------------------------------------


def team_schedule(dataset: Dataset, team: str, season: int) -> list:
    games, _ = decided_games(dataset)
    return [g for g in games if g.season == season and team in (g.home_team, g.away_team)]


def _prior_games(dataset, team, game):
    schedule = team_schedule(dataset, team, game.season)
    key = game.sort_key()
    return [g for g in schedule if g.sort_key() < key]


def _won(g: GameRecord, team: str) -> bool:
    return g.home_win if g.home_team == team else not g.home_win


def _points(g: GameRecord, team: str):
    return (g.home_points, g.away_points) if g.home_team == team else (g.away_points, g.home_points)


def form_features(dataset: Dataset, team: str, game: GameRecord) -> dict:
    prior = _prior_games(dataset, team, game)
    results = [_won(g, team) for g in prior]
    streak_w = streak_l = 0
    for r in reversed(results):
        if r and streak_l == 0:
            streak_w += 1
        elif not r and streak_w == 0:
            streak_l += 1
        else:
            break
    pf = sum(_points(g, team)[0] for g in prior)
    pa = sum(_points(g, team)[1] for g in prior)
    return {
        "LG_WON": int(bool(results) and results[-1]),
        "L4G_WINS": sum(results[-LAST_N:]),
        "CONSECUTIVE_WINS": streak_w,
        "CONSECUTIVE_LOSSES": streak_l,
        "WINS_CUMULATIVE": sum(results),
        "POINTSFOR": pf,
        "POINTSAGAINST": pa,
        "PERCENTAGE": percentage(pf, pa),
    }


def previous_final_position(dataset: Dataset, season: int, team: str) -> int:
    pos = dataset.prev_ladder.get((season - 1, team))
    if pos is not None:
        return pos
    if any(s == season - 1 for s, _ in dataset.prev_ladder):
        raise MissingPrevLadder(season, team)
    return NEUTRAL_POSITION


def ladder_features(dataset: Dataset, team: str, game: GameRecord):
    """(LADDER_POSITION, LADDERLY_POSITION) known before ``game``.

    The in-season position is the latest published standing from an earlier
    round; finals rounds have no standings of their own and reuse the last
    home-and-away ladder.  Round 1 falls back to last season's final position.
    """
    ladderly = previous_final_position(dataset, game.season, team)
    if game.round == 1:
        return ladderly, ladderly
    for r in range(game.round - 1, 0, -1):
        pos = dataset.ladder.get((game.season, r, team))
        if pos is not None:
            return pos, ladderly
    raise MissingLadder(game.season, game.round - 1)


def difficulty_features(geo: GeoConfig, game: GameRecord, team: str):
    """(AT_HOME, HOMEGROUND, INTERSTATE) flags for ``team`` in ``game``."""
    state = geo.state_of_venue(game.venue)
    at_home = int(team == game.home_team)
    homeground = int(game.venue in geo.home_venues[team])
    interstate = int(state != geo.team_state[team])
    return at_home, homeground, interstate


def pi_history(dataset: Dataset, team: str, game: GameRecord):
    """Season-to-date and last-4 PI sums, added oldest game first."""
    prior = _prior_games(dataset, team, game)
    season = np.zeros(len(PI_NAMES))
    last4 = np.zeros(len(PI_NAMES))
    for j in range(len(PI_NAMES)):
        vals = [float(dataset.pis[(g.game_id, team)][j]) for g in prior]
        season[j] = sum(vals)
        last4[j] = sum(vals[-LAST_N:])
    return season, last4


def team_round_features(dataset: Dataset, team: str, game: GameRecord) -> TeamRoundFeatures:
    at_home, homeground, interstate = difficulty_features(dataset.geo, game, team)
    ladder, ladderly = ladder_features(dataset, team, game)
    season, last4 = pi_history(dataset, team, game)
    return TeamRoundFeatures(
        game_id=game.game_id, team=team,
        AT_HOME=at_home, HOMEGROUND=homeground, INTERSTATE=interstate,
        LADDER_POSITION=ladder, LADDERLY_POSITION=ladderly,
        pi_season=season, pi_last4=last4,
        **form_features(dataset, team, game),
    )


# --- vectorised route ------------------------------------------------------


def _streaks(results):
    n = len(results)
    wins = np.zeros(n, dtype=np.int64)
    losses = np.zeros(n, dtype=np.int64)
    for k in range(1, n):
        if results[k - 1]:
            wins[k] = wins[k - 1] + 1
        else:
            losses[k] = losses[k - 1] + 1
    return wins, losses


def _ladder_index(dataset):
    # (season, team) -> sorted rounds with a published position
    idx = defaultdict(list)
    for (season, rnd, team) in dataset.ladder:
        idx[(season, team)].append(rnd)
    return {k: sorted(v) for k, v in idx.items()}


def build_feature_table(dataset: Dataset) -> dict:
    """(game_id, team) -> TeamRoundFeatures for every decided game."""
    games, _ = decided_games(dataset)
    by_team_season = defaultdict(list)
    for g in games:
        by_team_season[(g.season, g.home_team)].append(g)
        by_team_season[(g.season, g.away_team)].append(g)
    ladder_rounds = _ladder_index(dataset)
    table = {}
    for (season, team), sched in by_team_season.items():
        results = np.array([_won(g, team) for g in sched], dtype=np.float64)
        pts = np.array([_points(g, team) for g in sched], dtype=np.float64).reshape(-1, 2)
        wins_cum = exclusive_season_cumulative(results)
        l4 = rolling_last4_sum(results)
        pf = exclusive_season_cumulative(pts[:, 0])
        pa = exclusive_season_cumulative(pts[:, 1])
        streak_w, streak_l = _streaks(results)
        pi = np.array([dataset.pis[(g.game_id, team)] for g in sched]).reshape(len(sched), len(PI_NAMES))
        pi_season = np.column_stack([exclusive_season_cumulative(pi[:, j]) for j in range(len(PI_NAMES))])
        pi_last4 = np.column_stack([rolling_last4_sum(pi[:, j]) for j in range(len(PI_NAMES))])
        ladderly = previous_final_position(dataset, season, team)
        rounds = ladder_rounds.get((season, team), [])
        for k, g in enumerate(sched):
            at_home, homeground, interstate = difficulty_features(dataset.geo, g, team)
            if g.round == 1:
                ladder = ladderly
            else:
                earlier = [r for r in rounds if r < g.round]
                if not earlier:
                    raise MissingLadder(season, g.round - 1)
                ladder = dataset.ladder[(season, earlier[-1], team)]
            table[(g.game_id, team)] = TeamRoundFeatures(
                game_id=g.game_id, team=team,
                AT_HOME=at_home, HOMEGROUND=homeground, INTERSTATE=interstate,
                LG_WON=int(k > 0 and results[k - 1] == 1.0),
                L4G_WINS=int(l4[k]),
                CONSECUTIVE_WINS=int(streak_w[k]),
                CONSECUTIVE_LOSSES=int(streak_l[k]),
                WINS_CUMULATIVE=int(wins_cum[k]),
                POINTSFOR=int(pf[k]),
                POINTSAGAINST=int(pa[k]),
                PERCENTAGE=percentage(int(pf[k]), int(pa[k])),
                LADDER_POSITION=ladder,
                LADDERLY_POSITION=ladderly,
                pi_season=pi_season[k].copy(),
                pi_last4=pi_last4[k].copy(),
            )
    return table


def differential_row(home: TeamRoundFeatures, away: TeamRoundFeatures, encoding: str,
                     include_interactions: bool = False) -> dict:
    """Home-minus-away differentials; ladder diffs are away minus home."""
    x = {
        "AT_HOME": 1.0,
        "HOMEGROUND": float(home.HOMEGROUND - away.HOMEGROUND),
        "INTERSTATE": float(home.INTERSTATE - away.INTERSTATE),
        "CONSECUTIVE_LOSSES": float(home.CONSECUTIVE_LOSSES - away.CONSECUTIVE_LOSSES),
        "CONSECUTIVE_WINS": float(home.CONSECUTIVE_WINS - away.CONSECUTIVE_WINS),
        "L4G_WINS": float(home.L4G_WINS - away.L4G_WINS),
        "LADDER_POSITION_DIFF": float(away.LADDER_POSITION - home.LADDER_POSITION),
        "LADDERLY_POSITION_DIFF": float(away.LADDERLY_POSITION - home.LADDERLY_POSITION),
        "LG_WON": float(home.LG_WON - away.LG_WON),
        "PERCENTAGE_DIFF": home.PERCENTAGE - away.PERCENTAGE,
        "POINTSAGAINST_DIFF": float(home.POINTSAGAINST - away.POINTSAGAINST),
        "POINTSFOR_DIFF": float(home.POINTSFOR - away.POINTSFOR),
        "WINS_CUMULATIVE_DIFF": float(home.WINS_CUMULATIVE - away.WINS_CUMULATIVE),
    }
    diffs = (home.pi_last4 - away.pi_last4) if encoding == "last4" else (home.pi_season - away.pi_season)
    x.update(zip(pi_columns(encoding), diffs.tolist()))
    if include_interactions:
        # AT_HOME is 1 for the home side and 0 for the away side
        x["AT_HOME_X_HOMEGROUND"] = float(home.HOMEGROUND)
        x["AT_HOME_X_INTERSTATE"] = float(home.INTERSTATE)
    return {c: x[c] for c in design_columns(encoding, include_interactions)}


@dataclass(frozen=True, eq=False)
class DesignFrame:
    """All design rows of one encoding as arrays, for fast row/column slicing."""

    columns: tuple
    X: np.ndarray
    y: np.ndarray
    game_ids: tuple
    seasons: np.ndarray
    rounds: np.ndarray
    is_final: np.ndarray
    home_teams: tuple
    away_teams: tuple

    def __len__(self):
        return len(self.game_ids)

    def subset(self, mask) -> "DesignFrame":
        idx = np.flatnonzero(np.asarray(mask))
        return DesignFrame(
            self.columns, self.X[idx], self.y[idx],
            tuple(self.game_ids[i] for i in idx), self.seasons[idx], self.rounds[idx], self.is_final[idx],
            tuple(self.home_teams[i] for i in idx), tuple(self.away_teams[i] for i in idx),
        )

    def design(self, columns: Sequence[str] | None = None) -> Design:
        if columns is None:
            return Design(self.columns, self.X, self.y)
        idx = [self.columns.index(c) for c in columns]
        return Design(tuple(columns), self.X[:, idx], self.y)

    def rows(self) -> list:
        return [
            DesignRow(self.game_ids[i], int(self.seasons[i]), int(self.rounds[i]), bool(self.is_final[i]),
                      self.home_teams[i], self.away_teams[i], int(self.y[i]),
                      dict(zip(self.columns, self.X[i].tolist())))
            for i in range(len(self))
        ]

    def to_csv(self, path) -> None:
        """Dump as CSV: metadata, target, then the x columns in canonical order."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["game_id", "season", "round", "is_final", "home_team", "away_team", "target", *self.columns])
            for i in range(len(self)):
                w.writerow([self.game_ids[i], int(self.seasons[i]), int(self.rounds[i]), int(self.is_final[i]),
                            self.home_teams[i], self.away_teams[i], int(self.y[i]),
                            *(repr(float(v)) for v in self.X[i])])


def design_frame(dataset: Dataset, encoding: str, seasons: Iterable[int] | None = None,
                 include_interactions: bool = False, table: Mapping | None = None) -> DesignFrame:
    columns = design_columns(encoding, include_interactions)
    if table is None:
        table = build_feature_table(dataset)
    games, _ = decided_games(dataset)
    if seasons is not None:
        wanted = set(seasons)
        games = [g for g in games if g.season in wanted]
    X = np.zeros((len(games), len(columns)))
    for i, g in enumerate(games):
        row = differential_row(table[(g.game_id, g.home_team)], table[(g.game_id, g.away_team)],
                               encoding, include_interactions)
        X[i] = list(row.values())
    return DesignFrame(
        columns=columns,
        X=X,
        y=np.array([1.0 if g.home_win else 0.0 for g in games]),
        game_ids=tuple(g.game_id for g in games),
        seasons=np.array([g.season for g in games], dtype=np.int64),
        rounds=np.array([g.round for g in games], dtype=np.int64),
        is_final=np.array([g.is_final for g in games], dtype=bool),
        home_teams=tuple(g.home_team for g in games),
        away_teams=tuple(g.away_team for g in games),
    )


def assemble_design(dataset: Dataset, encoding: str, seasons: Iterable[int] | None = None,
                    include_interactions: bool = False) -> list:
    """One DesignRow per decided game of ``seasons`` (all seasons if None)."""
    return design_frame(dataset, encoding, seasons, include_interactions).rows()


def game_design_row(dataset: Dataset, game: GameRecord, encoding: str, include_interactions: bool = False) -> dict:
    """Differential row for one game through the per-game reference route."""
    home = team_round_features(dataset, game.home_team, game)
    away = team_round_features(dataset, game.away_team, game)
    return differential_row(home, away, encoding, include_interactions)
