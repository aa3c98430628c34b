"""Product-of-experts option models and their MAP weight fitting.

Every expert targets one binary abstract feature.  An active expert
predicting value v contributes q(v') = 1 - eta if v' == v else eta, raised to
its weight.  For binary targets the normalized product reduces to a logistic
model: log-odds(1) = sum_i theta_i * x_i with x_i = +-log((1 - eta) / eta) for
active experts and 0 for gated-off ones, so fitting is a concave,
bound-constrained logistic regression with a Gaussian prior.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ..env.state import AbstractState, PartialStateAccess, SymbolicState
from .preconditions import Precondition, precondition_from_dict

log = logging.getLogger(__name__)

ETA = 0.01

# predictor kinds
SET1 = "set1"
SET0 = "set0"
NO_CHANGE = "no_change"

PRECONDITION_PRIOR = (0.5, 0.1)
BLANKET_PRIOR = (0.5, 0.001)
NO_CHANGE_PRIOR = (0.5, 0.1)
CHANGE_PRIOR_DEFAULT = (0.001, 0.1)
CHANGE_PRIOR_TIGHT = (0.5, 0.001)


@dataclass
class Expert:
    target: int
    predictor: str
    condition: Optional[Precondition] = None
    theta: float = 0.5
    mu: float = 0.5
    sigma: float = 0.1
    role: str = ""

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("prior sigma must be positive")
        if self.theta < 0:
            raise ValueError("expert weight must be nonnegative")

    def evaluate(self, s: SymbolicState, f: AbstractState) -> Tuple[bool, int]:
        """(active, predicted value).  Reading an unknown field raises PartialStateAccess."""
        if self.condition is not None and not self.condition.evaluate(s, f):
            return False, 0
        if self.predictor == SET1:
            return True, 1
        if self.predictor == SET0:
            return True, 0
        v = f[self.target]
        if v is None:
            raise PartialStateAccess(f"abstract[{self.target}]")
        return True, int(v)

    def to_dict(self) -> dict:
        return {"target": self.target, "predictor": self.predictor, "role": self.role,
                "condition": None if self.condition is None else self.condition.to_dict(),
                "theta": self.theta, "mu": self.mu, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "Expert":
        cond = d.get("condition")
        return cls(target=int(d["target"]), predictor=d["predictor"], role=d.get("role", ""),
                   condition=None if cond is None else precondition_from_dict(cond),
                   theta=float(d["theta"]), mu=float(d["mu"]), sigma=float(d["sigma"]))


@dataclass
class OptionModel:
    option_id: int
    target: int
    success_experts: List[Expert]
    conditional_experts: Dict[int, List[Expert]] = field(default_factory=dict)

    @property
    def blanket(self) -> Expert:
        return next(e for e in self.success_experts if e.role == "blanket")

    def preconditions(self) -> List[Precondition]:
        return [e.condition for e in self.success_experts if e.condition is not None]

    def groups(self) -> List[Tuple[int, List[Expert]]]:
        return [(self.target, self.success_experts)] + sorted(self.conditional_experts.items())

    def to_dict(self) -> dict:
        return {"option_id": self.option_id, "target": self.target,
                "success": [e.to_dict() for e in self.success_experts],
                "conditional": {str(k): [e.to_dict() for e in v]
                                for k, v in sorted(self.conditional_experts.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "OptionModel":
        return cls(option_id=int(d["option_id"]), target=int(d["target"]),
                   success_experts=[Expert.from_dict(e) for e in d["success"]],
                   conditional_experts={int(k): [Expert.from_dict(e) for e in v]
                                        for k, v in d["conditional"].items()})


def success_experts(target: int, proposals: Sequence[Precondition]) -> List[Expert]:
    out = [Expert(target, SET1, p, *_prior3(PRECONDITION_PRIOR), role="precondition")
           for p in proposals]
    out.append(Expert(target, SET0, None, *_prior3(BLANKET_PRIOR), role="blanket"))
    return out


def _prior3(prior):
    mu, sigma = prior
    return max(mu, 0.0), mu, sigma


def build_option_model(option_id: int, target: int, proposals: Sequence[Precondition],
                       n_goals: int, tight_change_priors: bool = False) -> OptionModel:
    """One expert per proposed precondition plus the blanket expert for f'_target; three
    conditional experts (no-change, set-1, set-0) for every other feature."""
    change = CHANGE_PRIOR_TIGHT if tight_change_priors else CHANGE_PRIOR_DEFAULT
    seen: List[Precondition] = []
    for p in proposals:
        if p not in seen:
            seen.append(p)
    cond = {}
    for i in range(n_goals):
        if i == target:
            continue
        cond[i] = [Expert(i, NO_CHANGE, None, *_prior3(NO_CHANGE_PRIOR), role="no_change"),
                   Expert(i, SET1, None, *_prior3(change), role="set1"),
                   Expert(i, SET0, None, *_prior3(change), role="set0")]
    return OptionModel(option_id, target, success_experts(target, seen), cond)


def log_odds_unit(eta: float = ETA) -> float:
    return math.log((1.0 - eta) / eta)


def expert_features(experts: Sequence[Expert], s: SymbolicState, f: AbstractState,
                    eta: float = ETA) -> np.ndarray:
    """x_i = +-log((1-eta)/eta) if expert i is active (sign by its prediction), else 0."""
    unit = log_odds_unit(eta)
    x = np.zeros(len(experts))
    for k, e in enumerate(experts):
        active, v = e.evaluate(s, f)
        if active:
            x[k] = unit if v == 1 else -unit
    return x


def poe_predict(experts: Sequence[Expert], s: SymbolicState, f: AbstractState,
                eta: float = ETA) -> np.ndarray:
    """Normalized distribution [p(0), p(1)] of the experts' weighted product."""
    logp = np.zeros(2)
    for e in experts:
        active, v = e.evaluate(s, f)
        if not active:
            continue
        for value in (0, 1):
            logp[value] += e.theta * math.log(1.0 - eta if value == v else eta)
    logp -= logp.max()
    p = np.exp(logp)
    return p / p.sum()


def prob_one(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    z = x @ theta
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def map_objective(theta: np.ndarray, X: np.ndarray, y: np.ndarray,
                  mu: np.ndarray, sigma: np.ndarray) -> Tuple[float, np.ndarray]:
    """Log-likelihood of y under the PoE plus Gaussian log-prior; returns (value, gradient)."""
    z = X @ theta if len(y) else np.zeros(0)
    # log sigmoid(z) and log sigmoid(-z), computed stably
    ll = float(np.sum(y * -np.logaddexp(0.0, -z) + (1.0 - y) * -np.logaddexp(0.0, z)))
    prior = float(np.sum(-0.5 * ((theta - mu) / sigma) ** 2 - np.log(sigma) - 0.5 * math.log(2 * math.pi)))
    p = 0.5 * (1.0 + np.tanh(0.5 * z))
    grad = (X.T @ (y - p) if len(y) else np.zeros_like(theta)) - (theta - mu) / sigma ** 2
    return ll + prior, grad


@dataclass
class FitReport:
    ok: bool
    objective: float
    iterations: int
    message: str = ""


def map_fit_arrays(X: np.ndarray, y: np.ndarray, mu: np.ndarray, sigma: np.ndarray,
                   theta0: Optional[np.ndarray] = None, max_iter: int = 2000) -> Tuple[np.ndarray, FitReport]:
    """Maximize map_objective subject to theta >= 0.

    Optimizes in the whitened coordinates u = (theta - mu) / sigma with a
    quasi-Newton bound-constrained solver; tight priors (sigma = 1e-3) make the
    raw problem badly conditioned for plain gradient steps.
    """
    mu = np.asarray(mu, float)
    sigma = np.asarray(sigma, float)
    X = np.asarray(X, float).reshape(len(y), len(mu))
    y = np.asarray(y, float)
    if theta0 is None:
        theta0 = np.maximum(mu, 0.0)
    if len(y) == 0 and np.all(mu >= 0):
        theta = mu.copy()
        return theta, FitReport(True, map_objective(theta, X, y, mu, sigma)[0], 0, "prior mode")

    def neg(u):
        theta = mu + sigma * u
        val, g = map_objective(theta, X, y, mu, sigma)
        return -val, -g * sigma

    lo = -mu / sigma
    u0 = (np.maximum(theta0, 0.0) - mu) / sigma
    val0, g0 = neg(u0)
    if not (np.isfinite(val0) and np.all(np.isfinite(g0))):
        return np.maximum(theta0, 0.0), FitReport(False, float("nan"), 0, "non-finite objective")
    res = minimize(neg, u0, jac=True, method="L-BFGS-B",
                   bounds=[(l, None) for l in lo],
                   options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-10})
    theta = np.maximum(mu + sigma * res.x, 0.0)
    val, g = map_objective(theta, X, y, mu, sigma)
    if not (np.isfinite(val) and np.all(np.isfinite(g))):
        return np.maximum(theta0, 0.0), FitReport(False, float("nan"), int(res.nit), "non-finite result")
    return theta, FitReport(True, val, int(res.nit), str(res.message))


@dataclass
class Transition:
    """An option execution: start state, f(start) and f(end)."""
    s: SymbolicState
    f: AbstractState
    f_next: AbstractState

    def to_dict(self) -> dict:
        return {"s": self.s.to_dict(), "f": list(self.f), "f_next": list(self.f_next)}

    @classmethod
    def from_dict(cls, d: dict) -> "Transition":
        return cls(SymbolicState.from_dict(d["s"]), tuple(d["f"]), tuple(d["f_next"]))


def group_design(experts: Sequence[Expert], data: Sequence[Transition], target: int,
                 condition_on: Optional[int] = None, eta: float = ETA):
    """Feature matrix and labels for one feature group.  Conditional groups only use
    transitions where f'_condition_on = 1; transitions with unknown labels are skipped."""
    rows, ys = [], []
    for tr in data:
        if condition_on is not None and tr.f_next[condition_on] != 1:
            continue
        label = tr.f_next[target]
        if label is None:
            continue
        rows.append(expert_features(experts, tr.s, tr.f, eta))
        ys.append(float(label))
    X = np.array(rows, float).reshape(len(rows), len(experts))
    return X, np.array(ys, float)


def map_fit(model: OptionModel, data: Sequence[Transition], eta: float = ETA) -> List[FitReport]:
    """Fit every feature group independently; failed groups keep their previous weights."""
    reports = []
    for target, experts in model.groups():
        cond = None if target == model.target else model.target
        X, y = group_design(experts, data, target, cond, eta)
        mu = np.array([e.mu for e in experts])
        sigma = np.array([e.sigma for e in experts])
        theta0 = np.array([e.theta for e in experts])
        theta, rep = map_fit_arrays(X, y, mu, sigma, theta0)
        if rep.ok:
            for e, t in zip(experts, theta):
                e.theta = float(t)
        else:
            log.warning("option %d feature %d: fit aborted (%s)", model.option_id, target, rep.message)
        reports.append(rep)
    return reports


def sample_outcome(model: OptionModel, s: SymbolicState, f: AbstractState,
                   rng: np.random.Generator, eta: float = ETA) -> AbstractState:
    """Sample f'_target first; on failure every other feature is unknown (None)."""
    n = 1 + len(model.conditional_experts)
    out: List[Optional[int]] = [None] * n
    p = poe_predict(model.success_experts, s, f, eta)
    success = int(rng.random() < p[1])
    out[model.target] = success
    if not success:
        return tuple(out)
    for i, experts in sorted(model.conditional_experts.items()):
        q = poe_predict(experts, s, f, eta)
        out[i] = int(rng.random() < q[1])
    return tuple(out)
