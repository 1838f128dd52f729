"""Training/testing protocols for the four experiments.

Experiments 1-2 fit team strengths (optionally with a home effect) on season
windows and predict the following season.  Experiment 3 selects covariates
by univariate Wald screening followed by backward elimination.  Experiment 4
predicts a season round by round under several retraining strategies and
combines them by majority vote.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .btcore import (
    Design,
    FitOptions,
    FitResult,
    SingularInformation,
    fit_contest,
    fit_logistic,
    fit_standard,
    predict_game,
    wald_pvalues,
)
from .evaluate import PredictionOutcome, accuracy, finals_accuracy
from .features import DesignFrame, build_feature_table, build_binomial_counts, design_frame
from .ingest import Dataset, GameRecord, decided_games

log = logging.getLogger(__name__)

ALPHA = 0.05
STRATEGIES = ("full", "addition", "substitution", "incremental", "majority")
VOTERS = ("contest", "full", "addition", "substitution", "incremental")
INCREMENTAL_WARMUP = 3


class EmptyFinalModel(RuntimeError):
    """Backward elimination removed every feature."""


class MissingVote(KeyError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    train_seasons: tuple
    test_season: int | None = None
    encoding: str | None = None

    def __post_init__(self):
        seasons = tuple(int(s) for s in self.train_seasons)
        if not seasons:
            raise ValueError("window needs at least one training season")
        if list(seasons) != list(range(seasons[0], seasons[0] + len(seasons))):
            raise ValueError(f"training seasons must be contiguous: {seasons}")
        if self.test_season is not None and self.test_season != seasons[-1] + 1:
            raise ValueError("test season must follow the last training season")
        object.__setattr__(self, "train_seasons", seasons)

    @property
    def label(self) -> str:
        s = self.train_seasons
        return str(s[0]) if len(s) == 1 else f"{s[0]}-{s[-1]}"


def windows(seasons: Sequence[int], size: int | str) -> list:
    """All contiguous windows of ``size`` seasons; ``"all"`` gives one window."""
    seasons = sorted(seasons)
    if size == "all":
        return [WindowSpec(tuple(seasons), None)]
    size = int(size)
    out = []
    for i in range(len(seasons) - size + 1):
        train = tuple(seasons[i:i + size])
        test = train[-1] + 1 if train[-1] + 1 in seasons else None
        out.append(WindowSpec(train, test))
    return out


@dataclass
class ExperimentReport:
    experiment: str
    window: str
    model: str
    strategy: str
    encoding: str | None
    train_seasons: tuple
    test_season: int | None
    reference_team: str | None = None
    aic: float | None = None
    train_accuracy: float | None = None
    test_accuracy: float | None = None
    n_train: int = 0
    n_test: int = 0
    finals_correct: int = 0
    finals_total: int = 0
    retained_features: tuple = ()
    significant_features: tuple = ()
    fit: FitResult | None = field(default=None, repr=False)
    outcomes: list = field(default_factory=list, repr=False)

    def to_row(self) -> dict:
        return {
            "experiment": self.experiment,
            "window": self.window,
            "model": self.model,
            "strategy": self.strategy,
            "encoding": self.encoding or "",
            "train_seasons": ";".join(map(str, self.train_seasons)),
            "test_season": "" if self.test_season is None else self.test_season,
            "reference_team": self.reference_team or "",
            "aic": "" if self.aic is None else round(self.aic, 6),
            "train_accuracy": "" if self.train_accuracy is None else round(self.train_accuracy, 6),
            "test_accuracy": "" if self.test_accuracy is None else round(self.test_accuracy, 6),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "finals_correct": self.finals_correct,
            "finals_total": self.finals_total,
            "retained_features": ";".join(self.retained_features),
            "significant_features": ";".join(self.significant_features),
        }


class FeatureCache:
    """Feature table and design frames of one dataset, built once."""

    def __init__(self, dataset: Dataset, include_interactions: bool = False):
        self.dataset = dataset
        self.include_interactions = include_interactions
        self._table = None
        self._frames = {}

    @property
    def table(self):
        if self._table is None:
            self._table = build_feature_table(self.dataset)
        return self._table

    def frame(self, encoding: str) -> DesignFrame:
        if encoding not in self._frames:
            self._frames[encoding] = design_frame(self.dataset, encoding, None, self.include_interactions, self.table)
        return self._frames[encoding]


def _cache(dataset, cache):
    return cache if cache is not None else FeatureCache(dataset)


def _season_games(dataset, seasons):
    wanted = set(seasons)
    return [g for g in decided_games(dataset)[0] if g.season in wanted]


# --- Experiments 1 and 2 ---------------------------------------------------


def choose_reference(games: Sequence[GameRecord]) -> str:
    """Team whose win fraction is closest to 0.5; ties go alphabetically first."""
    if not games:
        raise ValueError("no games in window")
    wins, played = Counter(), Counter()
    for g in games:
        played[g.home_team] += 1
        played[g.away_team] += 1
        wins[g.home_team if g.home_win else g.away_team] += 1
    return min(played, key=lambda t: (abs(wins[t] / played[t] - 0.5), t))


def _strength_outcomes(fit, games, strategy):
    return [
        PredictionOutcome.from_probability(g.game_id, predict_game(fit, g.home_team, g.away_team),
                                           g.home_win, g.is_final, strategy)
        for g in games
    ]


def run_outcome_experiment(dataset: Dataset, window: WindowSpec, with_home_effect: bool = False,
                           options: FitOptions = FitOptions()) -> ExperimentReport:
    train = _season_games(dataset, window.train_seasons)
    counts = build_binomial_counts(train)
    reference = choose_reference(train)
    fitter = fit_contest if with_home_effect else fit_standard
    fit = fitter(counts, reference, options)
    model = "contest" if with_home_effect else "standard"
    train_out = _strength_outcomes(fit, train, model)
    report = ExperimentReport(
        experiment="e2" if with_home_effect else "e1",
        window=window.label,
        model=model,
        strategy="full",
        encoding=None,
        train_seasons=window.train_seasons,
        test_season=window.test_season,
        reference_team=reference,
        aic=fit.aic,
        train_accuracy=accuracy(train_out),
        n_train=len(train),
        fit=fit,
    )
    if window.test_season is not None:
        test = _season_games(dataset, [window.test_season])
        if test:
            outcomes = _strength_outcomes(fit, test, model)
            report.outcomes = outcomes
            report.test_accuracy = accuracy(outcomes)
            report.n_test = len(test)
            report.finals_correct, report.finals_total = finals_accuracy(outcomes)
    return report


# --- feature selection -----------------------------------------------------


def screen_features(design: Design, candidates: Sequence[str], alpha: float = ALPHA,
                    options: FitOptions = FitOptions()) -> list:
    """Candidates whose one-column model is significant at ``alpha``.

    Unconverged, separated or degenerate one-column fits count as not
    significant.  Order of ``candidates`` is preserved.
    """
    candidates = list(candidates)
    if not candidates:
        return []
    idx = [design.columns.index(c) for c in candidates]
    X = design.X[:, idx]
    beta, info, _, _, converged = _kernels.univariate_newton(
        X, design.y, design.w, options.max_iter, options.tol, options.max_halvings)
    keep = []
    for j, name in enumerate(candidates):
        if not converged[j] or abs(beta[j]) > options.separation_threshold or not info[j] > 0:
            continue
        se = 1.0 / np.sqrt(info[j])
        _, p = wald_pvalues([beta[j]], [se])
        if p[0] < alpha:
            keep.append(name)
    return keep


def independent_columns(design: Design, columns: Sequence[str]) -> list:
    """Greedy full-rank subset, visiting columns alphabetically.

    Later (alphabetically) members of a linearly dependent group are dropped,
    as are all-zero columns.
    """
    kept = []
    rank = 0
    for c in sorted(columns):
        trial = kept + [c]
        r = np.linalg.matrix_rank(design.select(trial).X)
        if r > rank:
            kept, rank = trial, r
    return [c for c in columns if c in kept]


def backward_eliminate(design: Design, start_set: Sequence[str], alpha: float = ALPHA,
                       options: FitOptions = FitOptions()) -> FitResult:
    """Drop the least significant feature until every p-value is <= ``alpha``.

    Equal p-values drop the alphabetically last name.  A separated fit keeps
    its coefficients but gets p = 1 on any coefficient with an unusable
    standard error, so the diverging feature goes first.
    """
    current = list(start_set)
    if not current:
        raise ValueError("backward elimination needs a non-empty start set")
    while True:
        try:
            fit = fit_logistic(design.select(current), options)
        except SingularInformation:
            reduced = independent_columns(design, current)
            if len(reduced) == len(current):
                raise
            log.debug("dropping collinear columns %s", sorted(set(current) - set(reduced)))
            current = reduced
            if not current:
                raise EmptyFinalModel("no linearly independent features") from None
            continue
        _, pvals = wald_pvalues(fit.beta, fit.se)
        worst = max(range(len(current)), key=lambda j: (pvals[j], current[j]))
        if pvals[worst] <= alpha and not fit.separation_flag:
            return fit
        del current[worst]
        if not current:
            raise EmptyFinalModel("every feature was eliminated")


@dataclass(frozen=True)
class Selection:
    fit: FitResult
    retained: tuple
    significant: tuple
    fallback: bool = False


def select_model(design: Design, candidates: Sequence[str] | None = None, alpha: float = ALPHA,
                 options: FitOptions = FitOptions(), fallback: bool = True) -> Selection:
    """Screen, then eliminate.  With ``fallback`` an empty result becomes an AT_HOME-only fit."""
    candidates = list(design.columns if candidates is None else candidates)
    significant = screen_features(design, candidates, alpha, options)
    try:
        if not significant:
            raise EmptyFinalModel("no individually significant features")
        fit = backward_eliminate(design, significant, alpha, options)
        return Selection(fit, fit.columns, tuple(significant))
    except EmptyFinalModel:
        if not fallback:
            raise
        fit = fit_logistic(design.select(["AT_HOME"]), options)
        return Selection(fit, (), tuple(significant), fallback=True)


def _predict_rows(fit: FitResult, frame: DesignFrame, strategy: str) -> list:
    idx = [frame.columns.index(c) for c in fit.columns]
    # row-wise sums keep each game's probability independent of batch size
    eta = (frame.X[:, idx] * fit.beta).sum(axis=1)
    p = 1.0 / (1.0 + np.exp(-eta))
    return [
        PredictionOutcome.from_probability(frame.game_ids[i], p[i], frame.y[i] == 1.0, frame.is_final[i], strategy)
        for i in range(len(frame))
    ]


def _design_of(frame: DesignFrame, rows) -> Design:
    rows = np.asarray(sorted(rows), dtype=np.int64)
    return Design(frame.columns, frame.X[rows], frame.y[rows])


# --- Experiment 3 ----------------------------------------------------------


def run_covariate_experiment(dataset: Dataset, window: WindowSpec, encoding: str | None = None,
                             cache: FeatureCache | None = None,
                             options: FitOptions = FitOptions()) -> ExperimentReport:
    encoding = encoding or window.encoding or "last4"
    cache = _cache(dataset, cache)
    frame = cache.frame(encoding)
    train = frame.subset(np.isin(frame.seasons, window.train_seasons))
    sel = select_model(train.design(), options=options)
    train_out = _predict_rows(sel.fit, train, "full")
    report = ExperimentReport(
        experiment="e3",
        window=window.label,
        model="ts-tv",
        strategy="full",
        encoding=encoding,
        train_seasons=window.train_seasons,
        test_season=window.test_season,
        aic=sel.fit.aic,
        train_accuracy=accuracy(train_out),
        n_train=len(train),
        retained_features=sel.retained,
        significant_features=sel.significant,
        fit=sel.fit,
    )
    if window.test_season is not None:
        test = frame.subset(frame.seasons == window.test_season)
        if len(test):
            outcomes = _predict_rows(sel.fit, test, "full")
            report.outcomes = outcomes
            report.test_accuracy = accuracy(outcomes)
            report.n_test = len(test)
            report.finals_correct, report.finals_total = finals_accuracy(outcomes)
    return report


# --- Experiment 4 ----------------------------------------------------------


def _split(frame, train_season, test_season):
    train_rows = set(np.flatnonzero(frame.seasons == train_season).tolist())
    test_idx = np.flatnonzero(frame.seasons == test_season)
    rounds = sorted(set(frame.rounds[test_idx].tolist()))
    by_round = {r: [int(i) for i in test_idx if frame.rounds[i] == r] for r in rounds}
    return train_rows, rounds, by_round


def _predict_round(fit, frame, rows, strategy):
    return _predict_rows(fit, frame.subset(np.isin(np.arange(len(frame)), rows)), strategy)


def strategy_addition(dataset: Dataset, train_season: int, test_season: int, encoding: str,
                      cache: FeatureCache | None = None, options: FitOptions = FitOptions()) -> list:
    """Predict each test round, then add it to the training data and reselect."""
    frame = _cache(dataset, cache).frame(encoding)
    train_rows, rounds, by_round = _split(frame, train_season, test_season)
    fit = select_model(_design_of(frame, train_rows), options=options).fit
    outcomes = []
    for k, r in enumerate(rounds):
        outcomes += _predict_round(fit, frame, by_round[r], "addition")
        train_rows.update(by_round[r])
        if k + 1 < len(rounds):
            fit = select_model(_design_of(frame, train_rows), options=options).fit
    return outcomes


def strategy_substitution(dataset: Dataset, train_season: int, test_season: int, encoding: str,
                          cache: FeatureCache | None = None, options: FitOptions = FitOptions()) -> list:
    """Like addition, but the same-numbered round of the training season is removed."""
    frame = _cache(dataset, cache).frame(encoding)
    train_rows, rounds, by_round = _split(frame, train_season, test_season)
    fit = select_model(_design_of(frame, train_rows), options=options).fit
    outcomes = []
    for k, r in enumerate(rounds):
        outcomes += _predict_round(fit, frame, by_round[r], "substitution")
        old = {i for i in train_rows if frame.seasons[i] == train_season and frame.rounds[i] == r}
        train_rows.difference_update(old)
        train_rows.update(by_round[r])
        if k + 1 < len(rounds):
            fit = select_model(_design_of(frame, train_rows), options=options).fit
    return outcomes


def strategy_incremental(dataset: Dataset, train_season: int, test_season: int, encoding: str,
                         cache: FeatureCache | None = None, options: FitOptions = FitOptions()) -> list:
    """Previous-season model for the first rounds, then models fitted on the test season alone.

    After each round from the third onwards, selection is rerun on all test
    rounds played so far.  A non-empty model replaces the current one; an
    empty one reverts to the previous-season model.
    """
    frame = _cache(dataset, cache).frame(encoding)
    train_rows, rounds, by_round = _split(frame, train_season, test_season)
    base = select_model(_design_of(frame, train_rows), options=options).fit
    fit = base
    seen = []
    outcomes = []
    for k, r in enumerate(rounds, start=1):
        outcomes += _predict_round(fit, frame, by_round[r], "incremental")
        seen += by_round[r]
        if k >= INCREMENTAL_WARMUP and k < len(rounds):
            try:
                fit = select_model(_design_of(frame, seen), options=options, fallback=False).fit
            except EmptyFinalModel:
                fit = base
    return outcomes


def strategy_full(dataset: Dataset, train_season: int, test_season: int, encoding: str,
                  cache: FeatureCache | None = None, options: FitOptions = FitOptions()) -> list:
    window = WindowSpec((train_season,), test_season)
    return run_covariate_experiment(dataset, window, encoding, cache, options).outcomes


def strategy_contest(dataset: Dataset, train_season: int, test_season: int, encoding: str | None = None,
                     cache: FeatureCache | None = None, options: FitOptions = FitOptions()) -> list:
    window = WindowSpec((train_season,), test_season)
    outcomes = run_outcome_experiment(dataset, window, True, options).outcomes
    return [PredictionOutcome(o.game_id, o.p_home, o.predicted_home_win, o.actual_home_win, o.is_final, "contest")
            for o in outcomes]


def majority_vote(votes: Mapping[str, Sequence[PredictionOutcome]], strategy: str = "majority") -> list:
    """Home win when at least 3 of the 5 voters pick the home team."""
    if len(votes) != len(VOTERS):
        raise ValueError(f"expected {len(VOTERS)} voters, got {sorted(votes)}")
    per_model = {name: {o.game_id: o for o in outs} for name, outs in votes.items()}
    game_ids = sorted(set().union(*(m.keys() for m in per_model.values())))
    order = {}
    for outs in votes.values():
        for i, o in enumerate(outs):
            order[o.game_id] = min(order.get(o.game_id, i), i)
    out = []
    for gid in sorted(game_ids, key=lambda g: (order[g], g)):
        picks = []
        for name in sorted(per_model):
            if gid not in per_model[name]:
                raise MissingVote(gid)
            picks.append(per_model[name][gid])
        home_votes = sum(o.predicted_home_win for o in picks)
        ref = picks[0]
        out.append(PredictionOutcome(gid, home_votes / len(picks), home_votes >= 3,
                                     ref.actual_home_win, ref.is_final, strategy))
    return out


_STRATEGY_FUNCS = {
    "contest": strategy_contest,
    "full": strategy_full,
    "addition": strategy_addition,
    "substitution": strategy_substitution,
    "incremental": strategy_incremental,
}


def run_strategy(dataset: Dataset, strategy: str, train_season: int, test_season: int, encoding: str,
                 cache: FeatureCache | None = None, options: FitOptions = FitOptions()) -> list:
    cache = _cache(dataset, cache)
    if strategy == "majority":
        votes = {name: _STRATEGY_FUNCS[name](dataset, train_season, test_season, encoding, cache, options)
                 for name in VOTERS}
        return majority_vote(votes)
    try:
        func = _STRATEGY_FUNCS[strategy]
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}") from None
    return func(dataset, train_season, test_season, encoding, cache, options)


def run_round_experiment(dataset: Dataset, train_season: int, test_season: int, encoding: str,
                         strategies: Sequence[str] = STRATEGIES, cache: FeatureCache | None = None,
                         options: FitOptions = FitOptions()) -> list:
    """One report per strategy; voters are computed once and reused for the majority vote."""
    cache = _cache(dataset, cache)
    needed = set(strategies)
    if "majority" in needed:
        needed |= set(VOTERS)
    results = {name: _STRATEGY_FUNCS[name](dataset, train_season, test_season, encoding, cache, options)
               for name in VOTERS if name in needed}
    if "majority" in needed:
        results["majority"] = majority_vote({v: results[v] for v in VOTERS})
    window = WindowSpec((train_season,), test_season)
    reports = []
    for name in strategies:
        outcomes = results[name]
        fc, ft = finals_accuracy(outcomes)
        reports.append(ExperimentReport(
            experiment="e4", window=window.label, model="ts-tv" if name != "contest" else "contest",
            strategy=name, encoding=encoding, train_seasons=window.train_seasons, test_season=test_season,
            test_accuracy=accuracy(outcomes) if outcomes else None, n_test=len(outcomes),
            finals_correct=fc, finals_total=ft, outcomes=outcomes,
        ))
    return reports
