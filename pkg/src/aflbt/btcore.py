"""Maximum-likelihood fitting for Bradley-Terry models.

All three model variants reduce to a logistic GLM without intercept on a
home-minus-away design:

* standard:   logit P(home wins) = lambda_home - lambda_away
* contest:    ... + delta * AT_HOME
* covariate:  sum_k beta_k * (X_home,k - X_away,k)

Team-strength designs use one +1/-1 column per non-reference team and carry
win counts as row weights.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from ._kernels import LL_NOISE, STEP_TOL
# a fit whose every weighted row has fitted probability this close to its outcome is separated
PERFECT_FIT_TOL = 1e-6

__all__ = [
    "Design",
    "FitResult",
    "FitOptions",
    "BTError",
    "DimensionMismatch",
    "SingularInformation",
    "NonFinite",
    "ColumnMismatch",
    "InvalidSE",
    "EmptyDesign",
    "DisconnectedComparisonGraph",
    "log_likelihood",
    "score",
    "fit_logistic",
    "strength_design",
    "fit_standard",
    "fit_contest",
    "fit_covariate",
    "predict_prob",
    "strength_row",
    "predict_game",
    "wald_inference",
    "aic",
]


class BTError(ArithmeticError):
    """Numerical failure while fitting or using a model."""


class DimensionMismatch(BTError, ValueError):
    pass


class SingularInformation(BTError):
    """Observed information is not invertible at the optimum (collinear columns)."""


class NonFinite(BTError):
    pass


class ColumnMismatch(BTError, ValueError):
    pass


class InvalidSE(BTError):
    """Standard errors are not usable (separated or unconverged fit)."""


class EmptyDesign(BTError, ValueError):
    pass


class DisconnectedComparisonGraph(UserWarning):
    """Some teams are never compared, directly or indirectly, with the rest."""


@dataclass(frozen=True, eq=False)
class Design:
    columns: tuple
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray = None
    # Added to the Bernoulli log-likelihood of a fit: sum of log binomial
    # coefficients when rows aggregate win counts, so that the reported
    # likelihood and AIC are on the grouped-binomial scale.
    loglik_constant: float = 0.0

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        w = np.ones(X.shape[0]) if self.w is None else np.ascontiguousarray(self.w, dtype=np.float64)
        columns = tuple(self.columns)
        if X.shape[1] != len(columns) or y.shape != (X.shape[0],) or w.shape != (X.shape[0],):
            raise DimensionMismatch(f"X {X.shape}, y {y.shape}, w {w.shape}, {len(columns)} columns")
        if len(columns) < 1:
            raise DimensionMismatch("design needs at least one column")
        if len(set(columns)) != len(columns):
            raise DimensionMismatch("column names must be unique")
        if not (np.isfinite(X).all() and np.isfinite(y).all() and np.isfinite(w).all()):
            raise NonFinite("design contains non-finite entries")
        if (w < 0).any():
            raise DimensionMismatch("row weights must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "columns", columns)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def select(self, columns: Sequence[str]) -> "Design":
        idx = [self.columns.index(c) for c in columns]
        return Design(tuple(columns), self.X[:, idx], self.y, self.w, self.loglik_constant)

    def rows(self, mask) -> "Design":
        return Design(self.columns, self.X[mask], self.y[mask], self.w[mask])


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 50
    tol: float = 1e-10
    separation_threshold: float = 15.0
    max_halvings: int = 30


@dataclass(frozen=True, eq=False)
class FitResult:
    columns: tuple
    beta: np.ndarray
    se: np.ndarray
    log_likelihood: float
    aic: float
    iterations: int
    converged: bool
    separation_flag: bool
    reference_team: str | None = None
    teams: tuple = field(default=())

    @property
    def p(self) -> int:
        return len(self.columns)

    def coef(self, name: str) -> float:
        return float(self.beta[self.columns.index(name)])

    def coefficients(self) -> dict:
        return dict(zip(self.columns, self.beta.tolist()))

    def strengths(self) -> dict:
        """Log-strength per team, reference pinned at 0."""
        if self.reference_team is None:
            raise ValueError("not a team-strength fit")
        out = {t: float(self.beta[self.columns.index(t)]) for t in self.teams if t != self.reference_team}
        out[self.reference_team] = 0.0
        return dict(sorted(out.items()))

    def to_dict(self) -> dict:
        try:
            z, pvals = wald_inference(self)
            z, pvals = z.tolist(), pvals.tolist()
        except InvalidSE:
            z = pvals = None
        return {
            "columns": list(self.columns),
            "beta": self.beta.tolist(),
            "se": [float(s) if math.isfinite(s) else None for s in self.se],
            "z": z,
            "p": pvals,
            "loglik": self.log_likelihood,
            "aic": self.aic,
            "converged": self.converged,
            "separation": self.separation_flag,
            "reference_team": self.reference_team,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _check_beta(beta, design):
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (design.p,):
        raise DimensionMismatch(f"beta has shape {beta.shape}, design has {design.p} columns")
    return beta


def log_likelihood(beta, design: Design) -> float:
    """Weighted Bernoulli log-likelihood of the logistic link."""
    beta = _check_beta(beta, design)
    return _kernels.loglik(design.X, design.y, design.w, beta)


def score(beta, design: Design) -> np.ndarray:
    """Analytic gradient of ``log_likelihood``."""
    beta = _check_beta(beta, design)
    return np.asarray(_kernels.loglik_score_info(design.X, design.y, design.w, beta)[1])


def _newton_step(info, grad):
    try:
        step = np.linalg.solve(info, grad)
        if np.isfinite(step).all():
            return step
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(info, grad, rcond=None)[0]


def _is_singular(info) -> bool:
    if info.shape[0] == 0:
        return True
    eig = np.linalg.eigvalsh(info)
    top = max(abs(eig[-1]), 0.0)
    return not (eig[0] > 0.0 and eig[0] > top * 1e-12)


def _perfect_fit(X, y, w, beta) -> bool:
    eta = X @ beta
    rows = w > 0
    # probability given to the outcome that was not observed
    miss = np.where(y[rows] == 1.0, 1.0 / (1.0 + np.exp(eta[rows])), 1.0 / (1.0 + np.exp(-eta[rows])))
    return bool(miss.size) and bool(np.all(miss < PERFECT_FIT_TOL))


def fit_logistic(design: Design, options: FitOptions = FitOptions(), *, reference_team=None, teams=()) -> FitResult:
    """Newton iterations with step halving from beta = 0.

    Stops when the log-likelihood changes by less than ``options.tol`` and
    no coefficient moved by more than ``STEP_TOL``.
    Standard errors come from the inverse observed information.
    """
    if design.n == 0 or design.w.sum() == 0:
        raise EmptyDesign("cannot fit an empty design")
    X, y, w = design.X, design.y, design.w
    beta = np.zeros(design.p)
    ll = _kernels.loglik(X, y, w, beta)
    converged = False
    it = 0
    while it < options.max_iter:
        it += 1
        ll, grad, info = _kernels.loglik_score_info(X, y, w, beta)
        step = _newton_step(info, grad)
        t = 1.0
        accepted = False
        for _ in range(options.max_halvings + 1):
            cand = beta + t * step
            cll = _kernels.loglik(X, y, w, cand)
            if cll >= ll - LL_NOISE * (1.0 + abs(ll)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # the likelihood no longer resolves the improvement; a small Newton
            # step is still trustworthy, so finish with it
            converged = bool(np.max(np.abs(grad)) < 1e-6)
            if converged and np.max(np.abs(step)) < 1e-6:
                beta = beta + step
            break
        if not (np.isfinite(cand).all() and math.isfinite(cll)):
            raise NonFinite(f"non-finite iterate at iteration {it}")
        delta = cll - ll
        moved = float(np.max(np.abs(cand - beta))) if beta.size else 0.0
        beta, ll = cand, cll
        # the likelihood flattens before beta settles; one more Newton step costs little
        if abs(delta) < options.tol and moved < STEP_TOL:
            converged = True
            break

    separated = bool(np.any(np.abs(beta) > options.separation_threshold)) or _perfect_fit(X, y, w, beta)
    ll, grad, info = _kernels.loglik_score_info(X, y, w, beta)
    if _is_singular(info):
        if not separated:
            raise SingularInformation(f"information matrix is singular; columns {design.columns}")
        se = np.full(design.p, np.inf)
    else:
        cov = np.linalg.inv(info)
        with np.errstate(invalid="ignore"):
            se = np.sqrt(np.diag(cov))
        if not np.isfinite(se).all() or (se <= 0).any():
            if not separated:
                raise SingularInformation("non-positive variance estimate")
            se = np.where(np.isfinite(se) & (se > 0), se, np.inf)
    ll_total = float(ll) + design.loglik_constant
    return FitResult(
        columns=design.columns,
        beta=beta,
        se=se,
        log_likelihood=ll_total,
        aic=2 * design.p - 2 * ll_total,
        iterations=it,
        converged=converged,
        separation_flag=separated,
        reference_team=reference_team,
        teams=tuple(teams),
    )


# --- team-strength models --------------------------------------------------


def _comparison_graph_connected(pair_counts, teams) -> bool:
    parent = {t: t for t in teams}

    def find(t):
        while parent[t] != t:
            parent[t] = parent[parent[t]]
            t = parent[t]
        return t

    for (h, a), (hw, aw) in pair_counts.items():
        if hw + aw > 0:
            parent[find(h)] = find(a)
    return len({find(t) for t in teams}) <= 1


def strength_design(pair_counts: Mapping, reference_team: str, home_effect: bool = False):
    """Grouped design for team-strength fits.

    Each ordered pair contributes a success row (weight = home wins) and a
    failure row (weight = away wins).  Returns ``(design, teams)``.
    """
    teams = sorted({t for pair in pair_counts for t in pair})
    if not pair_counts:
        raise EmptyDesign("no games to fit")
    if reference_team not in teams:
        raise ValueError(f"reference team {reference_team!r} does not appear in the data")
    columns = [t for t in teams if t != reference_team]
    if home_effect:
        columns.append("AT_HOME")
    index = {t: i for i, t in enumerate(columns)}
    X, y, w = [], [], []
    constant = 0.0
    for (home, away), (hw, aw) in sorted(pair_counts.items()):
        row = np.zeros(len(columns))
        if home in index:
            row[index[home]] = 1.0
        if away in index:
            row[index[away]] = -1.0
        if home_effect:
            row[index["AT_HOME"]] = 1.0
        for outcome, count in ((1.0, hw), (0.0, aw)):
            if count > 0:
                X.append(row)
                y.append(outcome)
                w.append(float(count))
        constant += math.lgamma(hw + aw + 1) - math.lgamma(hw + 1) - math.lgamma(aw + 1)
    design = Design(tuple(columns), np.array(X), np.array(y), np.array(w), loglik_constant=constant)
    return design, tuple(teams)


def _fit_strengths(pair_counts, reference_team, home_effect, options):
    design, teams = strength_design(pair_counts, reference_team, home_effect)
    connected = _comparison_graph_connected(pair_counts, teams)
    if not connected:
        warnings.warn("comparison graph is disconnected; strengths are not identifiable",
                      DisconnectedComparisonGraph, stacklevel=3)
        try:
            fit = fit_logistic(design, options, reference_team=reference_team, teams=teams)
        except SingularInformation:
            return _flagged_fit(design, reference_team, teams, options)
        return replace(fit, separation_flag=True)
    return fit_logistic(design, options, reference_team=reference_team, teams=teams)


def _flagged_fit(design, reference_team, teams, options):
    # Minimum-norm Newton solution when the information matrix is singular.
    beta = np.zeros(design.p)
    ll = _kernels.loglik(design.X, design.y, design.w, beta)
    it = 0
    for it in range(1, options.max_iter + 1):
        ll, grad, info = _kernels.loglik_score_info(design.X, design.y, design.w, beta)
        step = np.linalg.lstsq(info, grad, rcond=None)[0]
        cand = beta + step
        cll = _kernels.loglik(design.X, design.y, design.w, cand)
        if cll < ll:
            break
        beta, done = cand, abs(cll - ll) < options.tol
        ll = cll
        if done:
            break
    total = float(ll) + design.loglik_constant
    return FitResult(design.columns, beta, np.full(design.p, np.inf), total, 2 * design.p - 2 * total,
                     it, False, True, reference_team, teams)


def fit_standard(pair_counts: Mapping, reference_team: str, options: FitOptions = FitOptions()) -> FitResult:
    """Standard Bradley-Terry: log-strengths relative to ``reference_team``."""
    return _fit_strengths(pair_counts, reference_team, False, options)


def fit_contest(pair_counts: Mapping, reference_team: str, options: FitOptions = FitOptions()) -> FitResult:
    """Bradley-Terry with a home-advantage order effect (column ``AT_HOME``)."""
    return _fit_strengths(pair_counts, reference_team, True, options)


def fit_covariate(design: Design, options: FitOptions = FitOptions()) -> FitResult:
    """Team-specific, time-variant model on home-minus-away feature differentials."""
    return fit_logistic(design, options)


# --- prediction ------------------------------------------------------------


def _sigmoid(eta: float) -> float:
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def predict_prob(fit: FitResult, x_row) -> float:
    """P(home win) for one design row given as a mapping or a vector."""
    if isinstance(x_row, Mapping):
        if set(x_row) != set(fit.columns):
            raise ColumnMismatch(f"row columns {sorted(x_row)} do not match fit columns {list(fit.columns)}")
        x = np.array([x_row[c] for c in fit.columns], dtype=np.float64)
    else:
        x = np.asarray(x_row, dtype=np.float64)
        if x.shape != (fit.p,):
            raise ColumnMismatch(f"row has shape {x.shape}, fit has {fit.p} columns")
    return _sigmoid(float(x @ fit.beta))


def strength_row(fit: FitResult, home: str, away: str) -> dict:
    """Design row of a strength fit for a home/away pairing."""
    if fit.reference_team is None:
        raise ValueError("not a team-strength fit")
    row = dict.fromkeys(fit.columns, 0.0)
    for team, sign in ((home, 1.0), (away, -1.0)):
        if team == fit.reference_team:
            continue
        if team not in row:
            raise ColumnMismatch(f"team {team!r} was not in the training data")
        row[team] += sign
    if "AT_HOME" in row:
        row["AT_HOME"] = 1.0
    return row


def predict_game(fit: FitResult, home: str, away: str) -> float:
    return predict_prob(fit, strength_row(fit, home, away))


# --- inference -------------------------------------------------------------


def wald_inference(fit: FitResult):
    """Two-sided Wald z-test per coefficient.  Returns ``(z, p)`` arrays."""
    if not fit.converged or fit.separation_flag or not np.all(np.isfinite(fit.se)) or np.any(fit.se <= 0):
        raise InvalidSE("standard errors are not valid for this fit")
    return wald_pvalues(fit.beta, fit.se)


def wald_pvalues(beta, se):
    """z and two-sided normal p-values; infinite se gives p = 1."""
    beta = np.asarray(beta, dtype=np.float64)
    se = np.asarray(se, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(np.isfinite(se) & (se > 0), beta / se, 0.0)
    p = np.array([math.erfc(abs(v) / math.sqrt(2.0)) for v in z])
    return z, p


def aic(fit: FitResult) -> float:
    return 2 * fit.p - 2 * fit.log_likelihood
