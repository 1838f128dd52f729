"""Synthetic leagues and brute-force oracles.

Random streams: ``numpy.random.SeedSequence(seed).spawn(n_seasons)`` gives one
child sequence per season (in season order), each driving a PCG64
generator.  PCG64 output is platform independent, so a given seed and numpy
version reproduce the same league everywhere.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .btcore import Design, log_likelihood, strength_design
from .ingest import PI_NAMES, PI_RATES, ROSTER, GameRecord, GeoConfig, build_dataset

VENUE_STATES = {
    "Adelaide Oval": "SA",
    "Bellerive Oval": "TAS",
    "Carrara": "QLD",
    "Gabba": "QLD",
    "Kardinia Park": "VIC",
    "Manuka Oval": "ACT",
    "Mars Stadium": "VIC",
    "Marvel Stadium": "VIC",
    "MCG": "VIC",
    "Perth Stadium": "WA",
    "SCG": "NSW",
    "Sydney Showground": "NSW",
    "York Park": "TAS",
}

TEAM_GEO = {
    "Adelaide": ("SA", ("Adelaide Oval",)),
    "Brisbane Lions": ("QLD", ("Gabba",)),
    "Carlton": ("VIC", ("MCG", "Marvel Stadium")),
    "Collingwood": ("VIC", ("MCG",)),
    "Essendon": ("VIC", ("MCG", "Marvel Stadium")),
    "Fremantle": ("WA", ("Perth Stadium",)),
    "Geelong": ("VIC", ("Kardinia Park",)),
    "Gold Coast": ("QLD", ("Carrara",)),
    "Greater Western Sydney": ("NSW", ("Manuka Oval", "Sydney Showground")),
    "Hawthorn": ("VIC", ("MCG", "York Park")),
    "Melbourne": ("VIC", ("MCG",)),
    "North Melbourne": ("VIC", ("Bellerive Oval", "Marvel Stadium")),
    "Port Adelaide": ("SA", ("Adelaide Oval",)),
    "Richmond": ("VIC", ("MCG",)),
    "St Kilda": ("VIC", ("Marvel Stadium",)),
    "Sydney": ("NSW", ("SCG",)),
    "West Coast": ("WA", ("Perth Stadium",)),
    "Western Bulldogs": ("VIC", ("Mars Stadium", "Marvel Stadium")),
}

GRAND_FINAL_VENUE = "MCG"

# Loadings of per-game PI values on team strength; every other PI is noise.
DEFAULT_PI_EFFECTS = MappingProxyType({
    "INSIDE50": 6.0,
    "GOALS_SHOTS": 4.0,
    "SCORE_LAUNCHES": 3.0,
    "CONTEST_DEFENSIVE_LOSS": -3.0,
})


class TooManyTeams(ValueError):
    pass


def default_geo() -> GeoConfig:
    return GeoConfig(
        MappingProxyType(dict(VENUE_STATES)),
        MappingProxyType({t: s for t, (s, _) in TEAM_GEO.items()}),
        MappingProxyType({t: frozenset(v) for t, (_, v) in TEAM_GEO.items()}),
    )


def spread_strengths(n: int, scale: float = 1.0) -> tuple:
    """Evenly spaced, zero-sum strengths from +scale down to -scale."""
    if n == 1:
        return (0.0,)
    return tuple(float(v) for v in np.linspace(scale, -scale, n))


@dataclass(frozen=True)
class SynthSpec:
    strengths: tuple = field(default_factory=lambda: spread_strengths(len(ROSTER)))
    home_effect: float = 0.3
    seasons: tuple = (2015, 2016, 2017)
    rounds_per_season: int = 23
    finals: bool = True
    teams: tuple = ROSTER
    pi_effects: Mapping[str, float] = DEFAULT_PI_EFFECTS
    pi_noise: float = 8.0
    pi_base: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if len(self.strengths) != len(self.teams):
            raise ValueError("one strength per team required")
        if not all(math.isfinite(s) for s in self.strengths):
            raise ValueError("strengths must be finite")
        if abs(sum(self.strengths)) > 1e-9:
            raise ValueError("strengths must sum to zero")
        if len(self.teams) < 2 or len(self.teams) % 2:
            raise ValueError("need an even number of at least two teams")
        if any(t not in TEAM_GEO for t in self.teams):
            raise ValueError("teams must come from the roster")
        unknown = set(self.pi_effects) - set(PI_NAMES)
        if unknown:
            raise ValueError(f"unknown PI names {sorted(unknown)}")

    @property
    def strength(self) -> dict:
        return dict(zip(self.teams, self.strengths))


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def round_robin(teams: Sequence[str], n_rounds: int) -> list:
    """Circle-method fixtures: list of rounds, each a list of (home, away).

    Home/away alternates between successive passes through the cycle.
    """
    teams = list(teams)
    n = len(teams)
    fixed, rot = teams[0], teams[1:]
    rounds = []
    for r in range(n_rounds):
        cycle, k = divmod(r, n - 1)
        order = [fixed] + rot[k:] + rot[:k] if n > 2 else [fixed] + rot
        pairs = []
        for i in range(n // 2):
            a, b = order[i], order[n - 1 - i]
            if (i + k) % 2:
                a, b = b, a
            if cycle % 2:
                a, b = b, a
            pairs.append((a, b))
        rounds.append(pairs)
    return rounds


def _standings(teams, results):
    """Positions from (points, percentage, name); results = list of (home, away, hp, ap)."""
    prem = dict.fromkeys(teams, 0)
    pf = dict.fromkeys(teams, 0)
    pa = dict.fromkeys(teams, 0)
    for h, a, hp, ap in results:
        pf[h] += hp
        pa[h] += ap
        pf[a] += ap
        pa[a] += hp
        if hp > ap:
            prem[h] += 4
        elif ap > hp:
            prem[a] += 4
        else:
            prem[h] += 2
            prem[a] += 2
    pct = {t: (pf[t] / pa[t] if pa[t] else float(pf[t] > 0)) for t in teams}
    order = sorted(teams, key=lambda t: (-prem[t], -pct[t], t))
    return {t: i + 1 for i, t in enumerate(order)}


class _SeasonSim:
    def __init__(self, spec: SynthSpec, season: int, rng: np.random.Generator):
        self.spec, self.season, self.rng = spec, season, rng
        self.strength = spec.strength
        self.games, self.pis, self.ladder = [], {}, {}
        self._n = 0
        self._effects = np.array([spec.pi_effects.get(n, 0.0) for n in PI_NAMES])
        self._rates = np.array([n in PI_RATES for n in PI_NAMES])

    def _venue(self, home, final_round=False):
        if final_round:
            return GRAND_FINAL_VENUE
        venues = sorted(TEAM_GEO[home][1])
        return venues[int(self.rng.integers(len(venues)))]

    def _pi(self, team):
        v = self.spec.pi_base + self._effects * self.strength[team] + self.spec.pi_noise * self.rng.standard_normal(len(PI_NAMES))
        v = np.maximum(v, 0.0)
        return np.where(self._rates, np.minimum(v, 100.0), v)

    def play(self, rnd, home, away, is_final=False, venue=None):
        p = _sigmoid(self.strength[home] - self.strength[away] + self.spec.home_effect)
        home_win = bool(self.rng.random() < p)
        loser = 40 + int(self.rng.poisson(30))
        winner = loser + 1 + int(self.rng.geometric(0.05))
        hp, ap = (winner, loser) if home_win else (loser, winner)
        self._n += 1
        date = _dt.date(self.season, 3, 1) + _dt.timedelta(days=7 * (rnd - 1))
        g = GameRecord(f"{self.season}-R{rnd:02d}-G{self._n:03d}", self.season, rnd, date.isoformat(),
                       home, away, hp, ap, venue or self._venue(home), is_final)
        self.games.append(g)
        for team in (home, away):
            vals = self._pi(team)
            vals.setflags(write=False)
            self.pis[(g.game_id, team)] = vals
        return g

    def run(self):
        spec = self.spec
        results = []
        for r, pairs in enumerate(round_robin(spec.teams, spec.rounds_per_season), start=1):
            for home, away in pairs:
                g = self.play(r, home, away)
                results.append((g.home_team, g.away_team, g.home_points, g.away_points))
            for team, pos in _standings(spec.teams, results).items():
                self.ladder[(self.season, r, team)] = pos
        final_ladder = _standings(spec.teams, results)
        ranked = sorted(spec.teams, key=final_ladder.get)
        if spec.finals and len(spec.teams) >= 8:
            placing = self._finals(ranked, spec.rounds_per_season)
        else:
            placing = ranked
        return {t: i + 1 for i, t in enumerate(placing)}

    def _finals(self, ranked, last_round):
        """Top-eight bracket: 9 games over 4 rounds; returns final placing order."""
        pos = {t: i for i, t in enumerate(ranked)}

        def game(rnd, a, b):
            home, away = (a, b) if pos[a] < pos[b] else (b, a)
            g = self.play(rnd, home, away, is_final=True,
                          venue=GRAND_FINAL_VENUE if rnd == last_round + 4 else None)
            return (g.home_team, g.away_team) if g.home_win else (g.away_team, g.home_team)

        t = ranked
        r1 = last_round + 1
        qf1_w, qf1_l = game(r1, t[0], t[3])
        qf2_w, qf2_l = game(r1, t[1], t[2])
        ef1_w, ef1_l = game(r1, t[4], t[7])
        ef2_w, ef2_l = game(r1, t[5], t[6])
        sf1_w, sf1_l = game(r1 + 1, qf1_l, ef1_w)
        sf2_w, sf2_l = game(r1 + 1, qf2_l, ef2_w)
        pf1_w, pf1_l = game(r1 + 2, qf1_w, sf2_w)
        pf2_w, pf2_l = game(r1 + 2, qf2_w, sf1_w)
        gf_w, gf_l = game(r1 + 3, pf1_w, pf2_w)
        by_ladder = lambda teams: sorted(teams, key=pos.get)
        placing = [gf_w, gf_l] + by_ladder([pf1_l, pf2_l]) + by_ladder([sf1_l, sf2_l]) + by_ladder([ef1_l, ef2_l])
        return placing + [x for x in ranked if x not in placing]


def generate_games(spec: SynthSpec):
    """Full synthetic Dataset (games, PIs, ladders, geography)."""
    children = np.random.SeedSequence(spec.seed).spawn(len(spec.seasons))
    games, pis, ladder, prev = [], {}, {}, {}
    # standing before the first season follows the true strengths
    for i, team in enumerate(sorted(spec.teams, key=lambda t: (-spec.strength[t], t))):
        prev[(spec.seasons[0] - 1, team)] = i + 1
    for season, child in zip(spec.seasons, children):
        sim = _SeasonSim(spec, season, np.random.Generator(np.random.PCG64(child)))
        final = sim.run()
        games += sim.games
        pis.update(sim.pis)
        ladder.update(sim.ladder)
        for team, pos in final.items():
            prev[(season, team)] = pos
    return build_dataset(games, pis, ladder, prev, default_geo())


def planted_design(n: int, effects: Mapping[str, float], seed: int) -> Design:
    """Standard-normal columns with logistic outcome sigma(X @ effects)."""
    rng = np.random.default_rng(seed)
    names = tuple(effects)
    X = rng.standard_normal((n, len(names)))
    beta = np.array([effects[k] for k in names])
    p = 1.0 / (1.0 + np.exp(-(X @ beta)))
    y = (rng.random(n) < p).astype(np.float64)
    return Design(names, X, y)


def random_pair_counts(teams: Sequence[str], seed: int, max_wins: int = 5) -> dict:
    """Every ordered pair gets 1..max_wins wins for each side, so the MLE is finite."""
    rng = np.random.default_rng(seed)
    counts = {}
    for h in teams:
        for a in teams:
            if h != a:
                counts[(h, a)] = (int(rng.integers(1, max_wins + 1)), int(rng.integers(1, max_wins + 1)))
    return counts


# --- oracles ---------------------------------------------------------------


def grid_mle_oracle(pair_counts: Mapping, reference_team: str | None = None,
                    grid_step: float = 0.01, grid_range: float = 3.0):
    """Exhaustive search of the standard model's likelihood on a grid.

    Returns ``(best, best_loglik)`` where ``best`` maps every non-reference
    team to its grid coordinate.  The likelihood is reported on the same
    grouped-binomial scale as ``fit_standard``.
    """
    teams = sorted({t for pair in pair_counts for t in pair})
    if len(teams) > 3:
        raise TooManyTeams(f"grid oracle supports at most 3 teams, got {len(teams)}")
    if reference_team is None:
        reference_team = teams[0]
    design, _ = strength_design(pair_counts, reference_team)
    m = int(round(2 * grid_range / grid_step))
    grid = np.round(np.linspace(-grid_range, grid_range, m + 1), 10)
    surface = _kernels.grid_loglik(design.X, design.y, design.w, grid)
    flat = int(np.argmax(surface))
    coords = np.unravel_index(flat, surface.shape)
    best = {c: float(grid[i]) for c, i in zip(design.columns, coords)}
    return best, float(surface[coords]) + design.loglik_constant


def finite_difference_gradient(beta, design: Design, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``log_likelihood`` per coordinate."""
    beta = np.asarray(beta, dtype=np.float64)
    grad = np.empty_like(beta)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        grad[j] = (log_likelihood(beta + e, design) - log_likelihood(beta - e, design)) / (2 * h)
    return grad
