"""Load and validate the five CSV tables that make up a season dataset.

File contract (UTF-8, comma separated, header row required)::

    matches.csv      game_id,season,round,date,home_team,away_team,
                     home_points,away_points,venue,is_final
    pis.csv          game_id,team,<one column per name in PI_NAMES>
    ladder.csv       season,round,team,position
    prev_ladder.csv  season,team,final_position
    geo.csv          kind,name,state,home_venues

``geo.csv`` holds two sections in one table: ``kind=venue`` rows map a venue
to its state (``home_venues`` empty) and ``kind=team`` rows give a team's
state and its home venues separated by ``;``.

``prev_ladder.csv`` rows are keyed by the season in which the final standing
was achieved; the standing of season S is used as the "last year" ladder for
season S + 1.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

ROSTER = (
    "Adelaide",
    "Brisbane Lions",
    "Carlton",
    "Collingwood",
    "Essendon",
    "Fremantle",
    "Geelong",
    "Gold Coast",
    "Greater Western Sydney",
    "Hawthorn",
    "Melbourne",
    "North Melbourne",
    "Port Adelaide",
    "Richmond",
    "St Kilda",
    "Sydney",
    "West Coast",
    "Western Bulldogs",
)

# Exact-match aliases only.  Keys are compared case-sensitively after
# whitespace stripping.
TEAM_ALIASES = {
    "Adelaide Crows": "Adelaide",
    "Brisbane": "Brisbane Lions",
    "Brisbane Bears": "Brisbane Lions",
    "Carlton Blues": "Carlton",
    "Collingwood Magpies": "Collingwood",
    "Essendon Bombers": "Essendon",
    "Fremantle Dockers": "Fremantle",
    "Geelong Cats": "Geelong",
    "Gold Coast Suns": "Gold Coast",
    "Gold Coast SUNS": "Gold Coast",
    "GWS": "Greater Western Sydney",
    "GWS Giants": "Greater Western Sydney",
    "GWS GIANTS": "Greater Western Sydney",
    "Hawthorn Hawks": "Hawthorn",
    "Melbourne Demons": "Melbourne",
    "North Melbourne Kangaroos": "North Melbourne",
    "Kangaroos": "North Melbourne",
    "Port Adelaide Power": "Port Adelaide",
    "Richmond Tigers": "Richmond",
    "Saint Kilda": "St Kilda",
    "St Kilda Saints": "St Kilda",
    "Sydney Swans": "Sydney",
    "West Coast Eagles": "West Coast",
    "Footscray": "Western Bulldogs",
}

# Raw per-game team totals.  The modelling features are these names with an
# ``_L4_CSUM_DIFF`` or ``_CSUM_DIFF`` suffix.
PI_NAMES = (
    "BOUNCES",
    "CLANGERS",
    "CLEARANCES_CENTRE",
    "CLEARANCES",
    "CLEARANCES_STOPPAGE",
    "CONTEST_DEFENSIVE_LOSS",
    "CONTEST_DEFENSIVE_LOSS_RATE",
    "CONTEST_OFFENSIVE_WIN",
    "CONTEST_OFFENSIVE_WIN_RATE",
    "DISPOSALS_EFFECTIVE",
    "DISPOSALS_EFFICIENCY",
    "DISPOSALS",
    "FREES_AGAINST",
    "GETS_GROUNDBALL",
    "GETS_GROUNDBALL50",
    "GOALS_ACCURACY",
    "GOALS_SHOTS",
    "HANDBALLS",
    "HITOUTS_ADVANTAGE",
    "HITOUTS_ADVANTAGE_RATE",
    "HITOUTS_WIN_RATE",
    "INSIDE50",
    "INTERCEPTS",
    "KICK2HANDBALL",
    "KICKS_EFFECTIVE",
    "KICKS_EFFICIENCY",
    "KICKS",
    "MARKS_CONTESTED",
    "MARKS_INSIDE50",
    "MARKS_INTERCEPT",
    "MARKS",
    "MARKS_ONLEAD",
    "METRES_GAINED",
    "ONE_PERCENTERS",
    "POSSESSIONS_CONTESTED",
    "POSSESSIONS_CONTESTED_RATE",
    "POSSESSIONS",
    "POSSESSIONS_UNCONTESTED",
    "PRESSURE_DEFENSEHALF",
    "PRESSURE",
    "REBOUND_INSIDE50S",
    "SCORE_LAUNCHES",
    "SPOILS",
    "TACKLES_INSIDE50",
    "TACKLES",
    "TURNOVERS",
)

# Percentages bounded to [0, 100]; every other PI is a non-negative count or ratio.
PI_RATES = frozenset(n for n in PI_NAMES if n.endswith(("_RATE", "_EFFICIENCY", "_ACCURACY")))

MATCH_COLUMNS = (
    "game_id", "season", "round", "date", "home_team", "away_team",
    "home_points", "away_points", "venue", "is_final",
)
PI_COLUMNS = ("game_id", "team") + PI_NAMES
LADDER_COLUMNS = ("season", "round", "team", "position")
PREV_LADDER_COLUMNS = ("season", "team", "final_position")
GEO_COLUMNS = ("kind", "name", "state", "home_venues")

FILE_NAMES = {
    "matches": "matches.csv",
    "pis": "pis.csv",
    "ladder": "ladder.csv",
    "prev_ladder": "prev_ladder.csv",
    "geo": "geo.csv",
}


class IngestError(ValueError):
    """Base class for dataset validation failures."""


class MissingFile(IngestError):
    pass


class SchemaViolation(IngestError):
    def __init__(self, path, row, column, message):
        self.path = str(path)
        self.row = row
        self.column = column
        super().__init__(f"{self.path}: row {row}, column {column!r}: {message}")


class UnknownTeam(IngestError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown team {name!r}")


class UnknownVenue(IngestError):
    def __init__(self, venue):
        self.venue = venue
        super().__init__(f"venue {venue!r} has no state in the geo table")


class OrphanPiRecord(IngestError):
    def __init__(self, game_id, team):
        self.game_id, self.team = game_id, team
        super().__init__(f"PI record ({game_id}, {team}) does not match any game")


class MissingPiRecord(IngestError):
    def __init__(self, game_id, team):
        self.game_id, self.team = game_id, team
        super().__init__(f"no PI record for ({game_id}, {team})")


class DuplicateGame(IngestError):
    def __init__(self, game_id):
        self.game_id = game_id
        super().__init__(f"duplicate game_id {game_id!r}")


def normalize_team(name: str) -> str:
    name = name.strip()
    if name in ROSTER:
        return name
    if name in TEAM_ALIASES:
        return TEAM_ALIASES[name]
    raise UnknownTeam(name)


@dataclass(frozen=True)
class GameRecord:
    game_id: str
    season: int
    round: int
    date: str
    home_team: str
    away_team: str
    home_points: int
    away_points: int
    venue: str
    is_final: bool = False

    @property
    def is_draw(self) -> bool:
        return self.home_points == self.away_points

    @property
    def home_win(self) -> bool:
        return self.home_points > self.away_points

    def sort_key(self):
        return (self.season, self.round, self.date, self.game_id)


@dataclass(frozen=True)
class GeoConfig:
    venue_state: Mapping[str, str]
    team_state: Mapping[str, str]
    home_venues: Mapping[str, frozenset]

    def state_of_venue(self, venue: str) -> str:
        try:
            return self.venue_state[venue]
        except KeyError:
            raise UnknownVenue(venue) from None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Joined, validated tables.  Games are kept in chronological order.

    ``pis`` maps ``(game_id, team)`` to a read-only float vector ordered as
    ``PI_NAMES``.
    """

    games: tuple
    pis: Mapping[tuple, np.ndarray]
    ladder: Mapping[tuple, int]
    prev_ladder: Mapping[tuple, int]
    geo: GeoConfig
    _by_id: Mapping[str, GameRecord] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", MappingProxyType({g.game_id: g for g in self.games}))

    def game(self, game_id: str) -> GameRecord:
        return self._by_id[game_id]

    @property
    def seasons(self) -> list:
        return sorted({g.season for g in self.games})

    def teams(self) -> list:
        return sorted({g.home_team for g in self.games} | {g.away_team for g in self.games})

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.games != other.games or dict(self.ladder) != dict(other.ladder):
            return False
        if dict(self.prev_ladder) != dict(other.prev_ladder) or self.geo != other.geo:
            return False
        if self.pis.keys() != other.pis.keys():
            return False
        return all(np.array_equal(v, other.pis[k]) for k, v in self.pis.items())

    __hash__ = None


def decided_games(dataset: Dataset):
    """Games with a winner in chronological order, plus the number of draws."""
    decided = [g for g in dataset.games if not g.is_draw]
    return sorted(decided, key=GameRecord.sort_key), len(dataset.games) - len(decided)


# --- parsing helpers -------------------------------------------------------


def _read_rows(path: Path, columns: Iterable[str]):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"missing input file {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise SchemaViolation(path, 0, None, "missing header row")
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaViolation(path, 0, missing[0], "column missing from header")
        # data rows are numbered from 1, header is row 0
        for i, row in enumerate(reader, start=1):
            if None in row or any(v is None for v in row.values()):
                raise SchemaViolation(path, i, None, "wrong number of fields")
            yield i, row


def _int(path, i, row, col, lo=None, hi=None):
    raw = row[col].strip()
    try:
        value = int(raw)
    except ValueError:
        raise SchemaViolation(path, i, col, f"expected integer, got {raw!r}") from None
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise SchemaViolation(path, i, col, f"value {value} out of range")
    return value


def _bool(path, i, row, col):
    raw = row[col].strip().lower()
    if raw in ("1", "true", "t", "yes"):
        return True
    if raw in ("0", "false", "f", "no", ""):
        return False
    raise SchemaViolation(path, i, col, f"expected boolean, got {raw!r}")


def _team(path, i, row, col):
    return normalize_team(row[col])


def _load_geo(path):
    venue_state, team_state, home_venues = {}, {}, {}
    for i, row in _read_rows(path, GEO_COLUMNS):
        kind = row["kind"].strip().lower()
        name, state = row["name"].strip(), row["state"].strip()
        if not state:
            raise SchemaViolation(path, i, "state", "empty state")
        if kind == "venue":
            venue_state[name] = state
        elif kind == "team":
            team = normalize_team(name)
            venues = frozenset(v.strip() for v in row["home_venues"].split(";") if v.strip())
            if not venues:
                raise SchemaViolation(path, i, "home_venues", "team needs at least one home venue")
            team_state[team] = state
            home_venues[team] = venues
        else:
            raise SchemaViolation(path, i, "kind", f"expected 'venue' or 'team', got {kind!r}")
    return GeoConfig(MappingProxyType(venue_state), MappingProxyType(team_state), MappingProxyType(home_venues))


def _load_matches(path):
    games, seen, slots = [], set(), set()
    for i, row in _read_rows(path, MATCH_COLUMNS):
        gid = row["game_id"].strip()
        if not gid:
            raise SchemaViolation(path, i, "game_id", "empty game_id")
        if gid in seen:
            raise DuplicateGame(gid)
        seen.add(gid)
        date = row["date"].strip()
        try:
            _dt.date.fromisoformat(date)
        except ValueError:
            raise SchemaViolation(path, i, "date", f"not an ISO-8601 date: {date!r}") from None
        game = GameRecord(
            game_id=gid,
            season=_int(path, i, row, "season"),
            round=_int(path, i, row, "round", lo=1),
            date=date,
            home_team=_team(path, i, row, "home_team"),
            away_team=_team(path, i, row, "away_team"),
            home_points=_int(path, i, row, "home_points", lo=0),
            away_points=_int(path, i, row, "away_points", lo=0),
            venue=row["venue"].strip(),
            is_final=_bool(path, i, row, "is_final"),
        )
        if game.home_team == game.away_team:
            raise SchemaViolation(path, i, "away_team", "team cannot play itself")
        for team in (game.home_team, game.away_team):
            slot = (game.season, game.round, team)
            if slot in slots:
                raise SchemaViolation(path, i, "round", f"{team} already plays in season {game.season} round {game.round}")
            slots.add(slot)
        games.append(game)
    return games


def _load_pis(path):
    pis = {}
    for i, row in _read_rows(path, PI_COLUMNS):
        key = (row["game_id"].strip(), normalize_team(row["team"]))
        if key in pis:
            raise SchemaViolation(path, i, "team", f"duplicate PI record {key}")
        values = np.empty(len(PI_NAMES))
        for j, name in enumerate(PI_NAMES):
            raw = row[name].strip()
            try:
                v = float(raw)
            except ValueError:
                raise SchemaViolation(path, i, name, f"expected number, got {raw!r}") from None
            if not math.isfinite(v) or v < 0 or (name in PI_RATES and v > 100):
                raise SchemaViolation(path, i, name, f"value {v} out of range")
            values[j] = v
        values.setflags(write=False)
        pis[key] = values
    return pis


def _check_permutations(path, groups, what):
    for key, positions in groups.items():
        if sorted(positions) != list(range(1, len(positions) + 1)):
            raise SchemaViolation(path, 0, what, f"positions for {key} are not a permutation of 1..{len(positions)}")


def _load_ladder(path):
    ladder, groups = {}, {}
    for i, row in _read_rows(path, LADDER_COLUMNS):
        season = _int(path, i, row, "season")
        rnd = _int(path, i, row, "round", lo=1)
        team = _team(path, i, row, "team")
        pos = _int(path, i, row, "position", lo=1, hi=len(ROSTER))
        if (season, rnd, team) in ladder:
            raise SchemaViolation(path, i, "team", "duplicate ladder entry")
        ladder[(season, rnd, team)] = pos
        groups.setdefault((season, rnd), []).append(pos)
    _check_permutations(path, groups, "position")
    return ladder


def _load_prev_ladder(path):
    prev, groups = {}, {}
    for i, row in _read_rows(path, PREV_LADDER_COLUMNS):
        season = _int(path, i, row, "season")
        team = _team(path, i, row, "team")
        pos = _int(path, i, row, "final_position", lo=1, hi=len(ROSTER))
        if (season, team) in prev:
            raise SchemaViolation(path, i, "team", "duplicate final-ladder entry")
        prev[(season, team)] = pos
        groups.setdefault(season, []).append(pos)
    _check_permutations(path, groups, "final_position")
    return prev


def build_dataset(games, pis, ladder, prev_ladder, geo) -> Dataset:
    """Cross-table validation shared by the CSV loader and the synthetic generator."""
    ids = set()
    for g in games:
        if g.game_id in ids:
            raise DuplicateGame(g.game_id)
        ids.add(g.game_id)
        geo.state_of_venue(g.venue)
        for team in (g.home_team, g.away_team):
            if team not in geo.team_state:
                raise UnknownTeam(team)
            if (g.game_id, team) not in pis:
                raise MissingPiRecord(g.game_id, team)
    participants = {(g.game_id, t) for g in games for t in (g.home_team, g.away_team)}
    for key in pis:
        if key not in participants:
            raise OrphanPiRecord(*key)
    return Dataset(
        games=tuple(sorted(games, key=GameRecord.sort_key)),
        pis=MappingProxyType(dict(pis)),
        ladder=MappingProxyType(dict(ladder)),
        prev_ladder=MappingProxyType(dict(prev_ladder)),
        geo=geo,
    )


def load_dataset(matches_path, pis_path, ladder_path, prev_ladder_path, geo_path) -> Dataset:
    geo = _load_geo(geo_path)
    games = _load_matches(matches_path)
    pis = _load_pis(pis_path)
    ladder = _load_ladder(ladder_path)
    prev = _load_prev_ladder(prev_ladder_path)
    return build_dataset(games, pis, ladder, prev, geo)


def load_dataset_dir(directory) -> Dataset:
    d = Path(directory)
    return load_dataset(*(d / FILE_NAMES[k] for k in ("matches", "pis", "ladder", "prev_ladder", "geo")))


def _fmt_float(v: float) -> str:
    return repr(float(v))


def write_dataset(dataset: Dataset, directory) -> None:
    """Write the five CSVs so that ``load_dataset_dir`` reproduces ``dataset``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with (d / FILE_NAMES["matches"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATCH_COLUMNS)
        for g in dataset.games:
            w.writerow([g.game_id, g.season, g.round, g.date, g.home_team, g.away_team,
                        g.home_points, g.away_points, g.venue, int(g.is_final)])
    with (d / FILE_NAMES["pis"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PI_COLUMNS)
        for g in dataset.games:
            for team in (g.home_team, g.away_team):
                w.writerow([g.game_id, team] + [_fmt_float(v) for v in dataset.pis[(g.game_id, team)]])
    with (d / FILE_NAMES["ladder"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LADDER_COLUMNS)
        for (season, rnd, team), pos in sorted(dataset.ladder.items()):
            w.writerow([season, rnd, team, pos])
    with (d / FILE_NAMES["prev_ladder"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREV_LADDER_COLUMNS)
        for (season, team), pos in sorted(dataset.prev_ladder.items()):
            w.writerow([season, team, pos])
    with (d / FILE_NAMES["geo"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GEO_COLUMNS)
        for venue, state in sorted(dataset.geo.venue_state.items()):
            w.writerow(["venue", venue, state, ""])
        for team, state in sorted(dataset.geo.team_state.items()):
            w.writerow(["team", team, state, ";".join(sorted(dataset.geo.home_venues[team]))])
