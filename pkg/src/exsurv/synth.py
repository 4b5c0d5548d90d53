"""Synthetic cohorts with known Weibull-Cox ground truth.

Event times follow a Weibull baseline with hazard scaled by exp(eta),
where eta is a linear predictor optionally augmented with threshold and
pairwise-product terms (so tree ensembles can demonstrably beat a linear
Cox fit). Censoring is exponential with its rate solved by bisection to
hit a target marginal censoring probability, then clipped at the study
horizon. All draws are deterministic per seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import Cohort, FeatureSpec

DEFAULT_HORIZON_DAYS = 6142.0  # 16.8 years


@dataclass
class NonlinearTerm:
    """Either a step effect 1{x_f > cut} * coef or an interaction
    x_a * x_b * coef."""

    kind: str                  # "threshold" | "interaction"
    coef: float
    feature: int | None = None
    cut: float = 0.0
    pair: tuple[int, int] | None = None

    def apply(self, X):
        if self.kind == "threshold":
            return self.coef * (X[:, self.feature] > self.cut)
        if self.kind == "interaction":
            a, b = self.pair
            return self.coef * X[:, a] * X[:, b]
        raise ValueError(f"unknown nonlinear term kind {self.kind!r}")


@dataclass
class CohortSpec:
    n: int
    p: int
    beta: np.ndarray                     # length p; entries for categorical features
                                         # act on the integer level code
    weibull_shape: float = 1.5
    weibull_scale: float = 3000.0
    censoring_target: float = 0.5
    horizon: float = DEFAULT_HORIZON_DAYS
    missing_rates: dict[int, float] = field(default_factory=dict)
    categorical: dict[int, int] = field(default_factory=dict)  # index -> n levels
    corr_blocks: list[list[int]] = field(default_factory=list)
    block_rho: float = 0.5
    nonlinear: list[NonlinearTerm] = field(default_factory=list)
    n_incomplete_required: int = 0       # extra rows with a required-field gap
    seed: int = 0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.size != self.p:
            raise ValueError("beta must have length p")
        if not 0 <= self.censoring_target < 1:
            raise ValueError("censoring target must lie in [0, 1)")
        for r in self.missing_rates.values():
            if not 0 <= r < 1:
                raise ValueError("missingness rates must lie in [0, 1)")


@dataclass
class OracleTruth:
    eta: np.ndarray
    beta: np.ndarray
    weibull_shape: float
    weibull_scale: float
    seed: int

    def risk(self, i: int) -> float:
        return float(self.eta[i])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"eta": self.eta.tolist(), "beta": self.beta.tolist(),
                       "weibull_shape": self.weibull_shape,
                       "weibull_scale": self.weibull_scale, "seed": self.seed}, fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(np.array(d["eta"]), np.array(d["beta"]), d["weibull_shape"],
                   d["weibull_scale"], d["seed"])


def _draw_latent(rng, n, spec: CohortSpec) -> np.ndarray:
    """Standard-normal latents with optional block correlation (Gaussian
    copula: equicorrelated within each block)."""
    Z = rng.standard_normal((n, spec.p))
    for block in spec.corr_blocks:
        shared = rng.standard_normal(n)
        rho = spec.block_rho
        for j in block:
            Z[:, j] = np.sqrt(rho) * shared + np.sqrt(1 - rho) * Z[:, j]
    return Z

def _event_times(rng, eta, shape, scale):
    u = rng.uniform(size=eta.size)
    return scale * (-np.log(u) * np.exp(-eta)) ** (1.0 / shape)


def _solve_censor_rate(T, target, horizon):
    """Exponential censoring rate whose combined (exponential +
    administrative) censoring probability hits the target, by bisection."""
    def frac_censored(rate):
        # P(censored | T): C ~ Exp(rate) clipped at horizon
        t_eff = np.minimum(T, horizon)
        p_exp = 1.0 - np.exp(-rate * t_eff)    # C before min(T, horizon)
        p_admin = (T > horizon) * np.exp(-rate * horizon)
        return float(np.mean(p_exp + p_admin))

    admin_only = frac_censored(0.0)
    if target < admin_only - 1e-9:
        raise ValueError(
            f"censoring target {target} unattainable: administrative censoring at the "
            f"horizon alone yields {admin_only:.3f}")
    if target <= admin_only + 1e-12:
        return 0.0
    lo, hi = 0.0, 1.0 / np.median(T)
    while frac_censored(hi) < target:
        hi *= 2
        if hi > 1e6:
            raise ValueError(f"censoring target {target} unattainable")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if frac_censored(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_cohort(spec: CohortSpec) -> tuple[Cohort, OracleTruth]:
    rng = np.random.default_rng(spec.seed)
    n_total = spec.n + spec.n_incomplete_required
    Z = _draw_latent(rng, n_total, spec)

    X = Z.copy()
    features = []
    for j in range(spec.p):
        if j in spec.categorical:
            k = spec.categorical[j]
            # threshold the latent normal into k equal-probability levels
            qs = [np.quantile(Z[:, j], q) for q in np.linspace(0, 1, k + 1)[1:-1]]
            X[:, j] = np.digitize(Z[:, j], qs)
            features.append(FeatureSpec(f"f{j:03d}", kind="categorical",
                                        levels=tuple(f"L{v}" for v in range(k)),
                                        required=True))
        else:
            features.append(FeatureSpec(f"f{j:03d}", kind="continuous",
                                        required=(j == 0)))

    eta = X @ spec.beta
    for term in spec.nonlinear:
        eta = eta + term.apply(X)
    eta = eta - float(np.mean(eta))

    T = _event_times(rng, eta, spec.weibull_shape, spec.weibull_scale)
    rate = _solve_censor_rate(T, spec.censoring_target, spec.horizon)
    C = rng.exponential(1.0 / rate, size=n_total) if rate > 0 else np.full(n_total, np.inf)
    C = np.minimum(C, spec.horizon)
    times = np.minimum(T, C)
    events = T <= C
    times = np.maximum(times, 1e-6)  # guard against a zero draw

    missing = np.zeros((n_total, spec.p), dtype=bool)
    for j, r in spec.missing_rates.items():
        if features[j].kind == "categorical" or features[j].required:
            raise ValueError("missingness can only be injected into optional "
                             "continuous features")
        missing[:, j] = rng.uniform(size=n_total) < r
    if spec.n_incomplete_required:
        # planted rows that the incomplete-sample drop must remove
        gap_rows = rng.choice(n_total, size=spec.n_incomplete_required, replace=False)
        req = [j for j, f in enumerate(features) if f.required and f.kind == "continuous"]
        if not req:
            raise ValueError("n_incomplete_required needs a required continuous feature")
        for i in gap_rows:
            missing[i, rng.choice(req)] = True
    X = np.where(missing, np.nan, X)

    cohort = Cohort(features, X, missing, times, events.astype(bool))
    truth = OracleTruth(eta, spec.beta.copy(), spec.weibull_shape, spec.weibull_scale,
                        spec.seed)
    return cohort, truth


def oracle_risk(truth: OracleTruth, index: int) -> float:
    return truth.risk(index)


def reference_cohort_spec(seed: int = 0, n_incomplete_required: int = 0) -> CohortSpec:
    """554 patients x 123 features, ~36% event rate, 16.8-year horizon,
    10 informative features, one feature missing in >20% of rows."""
    p = 123
    beta = np.zeros(p)
    informative = np.arange(10)
    beta[informative] = np.array([0.8, -0.6, 0.5, 0.45, -0.4, 0.35, 0.3, -0.3, 0.25, 0.2])
    missing_rates = {30: 0.30, 40: 0.05, 50: 0.10, 60: 0.02}
    categorical = {120: 2, 121: 2, 122: 3}
    return CohortSpec(
        n=554, p=p, beta=beta,
        weibull_shape=1.4, weibull_scale=5500.0,
        censoring_target=0.64, horizon=DEFAULT_HORIZON_DAYS,
        missing_rates=missing_rates, categorical=categorical,
        corr_blocks=[[10, 11, 12, 13], [20, 21, 22]],
        n_incomplete_required=n_incomplete_required,
        seed=seed,
    )


def nonlinear_spec(n: int = 1500, seed: int = 0) -> CohortSpec:
    """Threshold-interaction cohort where tree models beat linear Cox."""
    p = 8
    beta = np.zeros(p)
    beta[0] = 0.15
    return CohortSpec(
        n=n, p=p, beta=beta,
        weibull_shape=1.5, weibull_scale=4000.0,
        censoring_target=0.35, horizon=DEFAULT_HORIZON_DAYS,
        nonlinear=[
            NonlinearTerm("threshold", coef=1.6, feature=1, cut=0.4),
            NonlinearTerm("threshold", coef=-1.2, feature=2, cut=-0.3),
            NonlinearTerm("interaction", coef=1.0, pair=(3, 4)),
        ],
        seed=seed,
    )
