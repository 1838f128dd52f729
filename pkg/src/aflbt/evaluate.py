"""Accuracy metrics over prediction outcomes."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .ingest import Dataset


class EmptyPredictionSet(ValueError):
    pass


@dataclass(frozen=True)
class PredictionOutcome:
    game_id: str
    p_home: float
    predicted_home_win: bool
    actual_home_win: bool
    is_final: bool
    strategy: str

    @classmethod
    def from_probability(cls, game_id, p_home, actual_home_win, is_final, strategy):
        # ties at exactly 0.5 go to the away side
        return cls(game_id, float(p_home), bool(p_home > 0.5), bool(actual_home_win), bool(is_final), strategy)

    @property
    def correct(self) -> bool:
        return self.predicted_home_win == self.actual_home_win


@dataclass(frozen=True)
class MetricsReport:
    n_games: int
    accuracy: float
    finals_correct: int
    finals_total: int
    per_team_accuracy: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def accuracy(outcomes: Sequence[PredictionOutcome]) -> float:
    if not outcomes:
        raise EmptyPredictionSet("no predictions to score")
    return sum(o.correct for o in outcomes) / len(outcomes)


def finals_accuracy(outcomes: Sequence[PredictionOutcome]):
    """(correct, total) over finals games."""
    finals = [o for o in outcomes if o.is_final]
    return sum(o.correct for o in finals), len(finals)


def per_team_accuracy(outcomes: Sequence[PredictionOutcome], dataset: Dataset) -> dict:
    """Accuracy by home team, averaged with equal weight over strategies.

    For each strategy, accuracy is computed on the home games of each team;
    a team's value is the unweighted mean over the strategies that predicted
    at least one of its home games.
    """
    by_strategy = defaultdict(lambda: defaultdict(list))
    for o in outcomes:
        home = dataset.game(o.game_id).home_team
        by_strategy[o.strategy][home].append(o.correct)
    per_team = defaultdict(list)
    for teams in by_strategy.values():
        for team, hits in teams.items():
            per_team[team].append(sum(hits) / len(hits))
    return {team: sum(v) / len(v) for team, v in sorted(per_team.items())}


def metrics_report(outcomes: Sequence[PredictionOutcome], dataset: Dataset | None = None) -> MetricsReport:
    correct, total = finals_accuracy(outcomes)
    return MetricsReport(
        n_games=len(outcomes),
        accuracy=accuracy(outcomes),
        finals_correct=correct,
        finals_total=total,
        per_team_accuracy=per_team_accuracy(outcomes, dataset) if dataset is not None else {},
    )
