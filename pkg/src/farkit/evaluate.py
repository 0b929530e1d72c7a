"""Forecast-error metrics, the Monte Carlo benchmark, and theory probes.

The benchmark fits every configured method to shared simulated training
paths and scores one-step forecasts on independent test paths, producing a
flat record list from which regret, worst-case, and tuning tables are
derived. A closed-form diagonal probe checks the ridge regularization-bias
inequality without any linear solves.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    InsufficientDataError,
    NumericalError,
)
from .fpca import SpectralDecomposition, eigendecompose, fpca_far_fit
from .grid import Curve, uniform_grid
from .moments import (
    FunctionalSample,
    OperatorEstimate,
    WeightedMomentPair,
    apply_kernel_matrix,
    weighted_moments,
)
from .simulate import REGIMES, draw_regime_operator, operator_kernel, simulate_far1
from .tikhonov import (
    AlphaGrid,
    application_alpha_grid,
    cv_select_alpha,
    default_alpha_grid,
    tikhonov_fit,
)

__all__ = [
    "MethodSpec",
    "parse_method",
    "fit_method",
    "CellResult",
    "BenchmarkConfig",
    "BenchmarkReport",
    "TheoryProbe",
    "misfe",
    "ise",
    "mean_misfe_table",
    "regret_table",
    "worst_case_table",
    "tuning_summary",
    "rate_slope",
    "rate_slope_from_report",
    "run_benchmark",
    "verify_bias_bound",
    "operator_error_slope",
    "CheckResult",
    "run_verification_suite",
]

# seed-stream tags: operator draw is keyed per regime; each replication has
# independent train and test streams
_REGIME_CODES = {"I": 1, "II": 2, "III": 3}
_TRAIN_TAG = 0
_TEST_TAG = 1

# exceptions recorded as failed fits instead of aborting a benchmark run
_FIT_ERRORS = (NumericalError, DegenerateSpectrumError, InsufficientDataError, ValueError)


# ---------------------------------------------------------------------------
# method specifications


@dataclass(frozen=True)
class MethodSpec:
    """A parsed estimator id: truncation rule or ridge with fixed/CV strength."""

    kind: str  # "fpca" | "tikhonov"
    tau: float | None = None
    k: int | None = None
    alpha: float | None = None
    cv: bool = False
    label: str = ""


def parse_method(label: str) -> MethodSpec:
    """Parse an estimator id.

    Accepted forms: ``fpca:TAU`` (variance threshold in (0, 1]),
    ``fpca:K=INT`` (explicit truncation), ``tikhonov:ALPHA`` (fixed
    strength), and ``tikhonov:cv`` (cross-validated strength).
    """
    kind, _, arg = label.partition(":")
    if not arg:
        raise ValueError(f"malformed method id {label!r}; expected 'kind:argument'")
    if kind == "fpca":
        if arg.startswith("K="):
            return MethodSpec("fpca", k=int(arg[2:]), label=label)
        tau = float(arg)
        if not 0 < tau <= 1:
            raise ValueError(f"variance threshold must lie in (0, 1], got {tau}")
        return MethodSpec("fpca", tau=tau, label=label)
    if kind == "tikhonov":
        if arg == "cv":
            return MethodSpec("tikhonov", cv=True, label=label)
        alpha = float(arg)
        if alpha <= 0:
            raise ValueError(f"ridge strength must be positive, got {alpha}")
        return MethodSpec("tikhonov", alpha=alpha, label=label)
    raise ValueError(f"unknown method kind {kind!r}")


def fit_method(
    sample: FunctionalSample,
    method: MethodSpec | str,
    *,
    moments: WeightedMomentPair | None = None,
    decomposition: SpectralDecomposition | None = None,
    cv_scheme: str = "holdout",
    alpha_grid: AlphaGrid | None = None,
    cv_folds: int = 5,
) -> OperatorEstimate:
    """Fit one estimator id to a sample.

    For ``tikhonov:cv`` the strength is selected with ``cv_scheme`` and the
    estimator is refitted on the full sample. When no alpha grid is given,
    the holdout scheme searches the fixed default grid and the forward
    k-fold scheme searches the grid scaled to the sample's leading
    covariance eigenvalue.
    """
    if isinstance(method, str):
        method = parse_method(method)
    if moments is None:
        moments = weighted_moments(sample)
    if method.kind == "fpca":
        return fpca_far_fit(
            sample, tau=method.tau, k=method.k, moments=moments, decomposition=decomposition
        )
    if decomposition is None:
        decomposition = eigendecompose(moments)
    if not method.cv:
        return tikhonov_fit(moments, method.alpha, decomposition=decomposition)
    if alpha_grid is None:
        if cv_scheme == "holdout":
            alpha_grid = default_alpha_grid()
        else:
            lam1 = float(decomposition.eigenvalues[0])
            if lam1 <= 0:
                raise DegenerateSpectrumError("covariance spectrum is identically zero")
            alpha_grid = application_alpha_grid(lam1)
    cv = cv_select_alpha(sample, alpha_grid, scheme=cv_scheme, n_folds=cv_folds)
    est = tikhonov_fit(moments, cv.selected_alpha, decomposition=decomposition)
    tuning = dict(est.tuning)
    tuning["selected_by"] = cv.scheme
    return replace(est, tuning=tuning)


# ---------------------------------------------------------------------------
# forecast-error metrics


def misfe(op: OperatorEstimate, test: FunctionalSample) -> float:
    """Mean integrated squared one-step forecast error along a path.

    Every curve after the first is predicted from its predecessor via the
    kernel; squared errors are integrated with the grid's quadrature
    weights and averaged over the T-1 forecast pairs.
    """
    if test.n < 2:
        raise InsufficientDataError("forecast evaluation needs at least 2 curves")
    preds = apply_kernel_matrix(op, test.values[:-1])
    sq_err = (test.values[1:] - preds) ** 2
    return float(np.mean(sq_err @ test.grid.weights))


def ise(forecast: Curve, actual: Curve, weighted: bool = False) -> float:
    """Integrated squared error of a single forecast curve.

    The default is the flat 1/M average of squared pointwise errors used by
    the rolling application protocol; ``weighted=True`` integrates with the
    quadrature weights instead (the convention the simulation metric uses).
    """
    if forecast.values.size != actual.values.size:
        raise ValueError("forecast and actual curves have different lengths")
    diff = forecast.values - actual.values
    if weighted:
        return float(np.sum(actual.grid.weights * diff**2))
    return float(np.mean(diff**2))


# ---------------------------------------------------------------------------
# benchmark records and derived tables


@dataclass(frozen=True)
class CellResult:
    """One (regime, n, method, replication) outcome."""

    regime: str
    n: int
    method: str
    replication: int
    misfe: float
    tuning: float  # resolved K for truncation methods, selected alpha for ridge
    seconds: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class BenchmarkConfig:
    """Grid of the Monte Carlo benchmark plus its master seed."""

    regimes: tuple = ("I", "II", "III")
    n_values: tuple = (100, 200, 400, 800)
    methods: tuple = (
        "fpca:0.80",
        "fpca:0.85",
        "fpca:0.90",
        "fpca:0.95",
        "fpca:0.99",
        "tikhonov:cv",
    )
    replications: int = 50
    master_seed: int = 14
    test_length: int = 200
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple(self.regimes))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        for regime in self.regimes:
            if regime not in REGIMES:
                raise ValueError(f"unknown regime id {regime!r}")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.test_length < 2:
            raise ValueError("test paths need at least 2 curves")
        if self.threads < 1:
            raise ValueError("thread count must be at least 1")
        for label in self.methods:
            parse_method(label)

    def to_dict(self) -> dict:
        return {
            "regimes": list(self.regimes),
            "n_values": list(self.n_values),
            "methods": list(self.methods),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "test_length": self.test_length,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown benchmark config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class BenchmarkReport:
    """All cell results of one benchmark run plus the resolved config."""

    records: tuple
    config: BenchmarkConfig
    wall_clock_seconds: float = 0.0


def _regime_seed(master_seed: int, regime: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), _REGIME_CODES[regime]])


def _path_seed(master_seed, regime, n, replication, tag) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        [int(master_seed), _REGIME_CODES[regime], int(n), int(replication), int(tag)]
    )


def _tuning_value(method: MethodSpec, est: OperatorEstimate) -> float:
    if method.kind == "fpca":
        return float(est.tuning["k"])
    return float(est.tuning["alpha"])


def run_benchmark(config: BenchmarkConfig) -> BenchmarkReport:
    """Run the full (regime x n x method x replication) benchmark.

    Each replication simulates one training path and one independent test
    path (both after burn-in, from the regime's single operator draw),
    fits every method to the same training path, and records the test-path
    forecast error, the resolved tuning value, and the incremental fit
    time. Fit failures are recorded on the cell and never abort the run.
    The report is a pure function of the config (timings aside).
    """
    t_start = time.perf_counter()
    methods = [parse_method(label) for label in config.methods]
    operators = {
        regime: draw_regime_operator(REGIMES[regime], _regime_seed(config.master_seed, regime))
        for regime in config.regimes
    }
    tasks = [
        (regime, n, rep)
        for regime in config.regimes
        for n in config.n_values
        for rep in range(config.replications)
    ]

    def run_replication(task):
        regime, n, rep = task
        spec = REGIMES[regime]
        op = operators[regime]
        train = simulate_far1(
            op, spec, n, _path_seed(config.master_seed, regime, n, rep, _TRAIN_TAG)
        )
        test = simulate_far1(
            op,
            spec,
            config.test_length,
            _path_seed(config.master_seed, regime, n, rep, _TEST_TAG),
        )
        mom = weighted_moments(train)
        dec = eigendecompose(mom)
        results = []
        for method in methods:
            t0 = time.perf_counter()
            try:
                est = fit_method(train, method, moments=mom, decomposition=dec)
                value = misfe(est, test)
                results.append(
                    CellResult(
                        regime,
                        n,
                        method.label,
                        rep,
                        misfe=value,
                        tuning=_tuning_value(method, est),
                        seconds=time.perf_counter() - t0,
                    )
                )
            except _FIT_ERRORS as exc:
                results.append(
                    CellResult(
                        regime,
                        n,
                        method.label,
                        rep,
                        misfe=float("nan"),
                        tuning=float("nan"),
                        seconds=time.perf_counter() - t0,
                        error=f"{type(exc).__name__}: {exc}",
                    )
                )
        return results

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            per_task = list(pool.map(run_replication, tasks))
    else:
        per_task = [run_replication(task) for task in tasks]

    records = tuple(record for task_records in per_task for record in task_records)
    return BenchmarkReport(records, config, wall_clock_seconds=time.perf_counter() - t_start)


def _cells(records):
    """Group successful records by (regime, n, method), preserving order."""
    grouped: dict = {}
    for record in records:
        grouped.setdefault((record.regime, record.n, record.method), []).append(record)
    return grouped


def mean_misfe_table(report: BenchmarkReport) -> dict:
    """Per-cell mean forecast error with its Monte Carlo standard error.

    Returns {(regime, n, method): (mean, stderr, count)} over successful
    replications only; failed fits reduce the count and are never imputed.
    """
    table = {}
    for key, cell in _cells(report.records).items():
        values = np.array([r.misfe for r in cell if not r.failed])
        if values.size == 0:
            table[key] = (float("nan"), float("nan"), 0)
        else:
            stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
            table[key] = (float(values.mean()), stderr, int(values.size))
    return table


def _fpca_tau_methods(report: BenchmarkReport):
    labels = []
    for label in report.config.methods:
        spec = parse_method(label)
        if spec.kind == "fpca" and spec.tau is not None:
            labels.append(label)
    return labels


def regret_table(report: BenchmarkReport) -> dict:
    """Percent excess mean forecast error over the best truncation rule per cell.

    The oracle in each (regime, n) cell is the smallest mean error among
    the variance-threshold methods, so the best of them has regret exactly
    0 and a ridge method may land below 0.
    """
    fpca_labels = _fpca_tau_methods(report)
    if not fpca_labels:
        raise ValueError("regret needs at least one variance-threshold method")
    means = mean_misfe_table(report)
    regrets = {}
    for regime in report.config.regimes:
        for n in report.config.n_values:
            oracle_values = []
            for label in fpca_labels:
                entry = means.get((regime, n, label))
                if entry is None or entry[2] == 0:
                    raise ValueError(
                        f"cell ({regime}, {n}) is missing results for {label}"
                    )
                oracle_values.append(entry[0])
            oracle = min(oracle_values)
            for label in report.config.methods:
                entry = means.get((regime, n, label))
                if entry is None:
                    continue
                regrets[(regime, n, label)] = 100.0 * (entry[0] - oracle) / oracle
    return regrets


def worst_case_table(report: BenchmarkReport) -> dict:
    """Worst per-regime mean forecast error for each (method, n)."""
    means = mean_misfe_table(report)
    table = {}
    for label in report.config.methods:
        for n in report.config.n_values:
            cell_means = []
            for regime in report.config.regimes:
                entry = means.get((regime, n, label))
                if entry is None or entry[2] == 0:
                    raise ValueError(f"missing regime {regime} at n={n} for {label}")
                cell_means.append(entry[0])
            table[(label, n)] = max(cell_means)
    return table


def tuning_summary(report: BenchmarkReport) -> dict:
    """Per-cell mean tuning value: resolved K, or log10 of the selected alpha."""
    table = {}
    for key, cell in _cells(report.records).items():
        spec = parse_method(key[2])
        values = np.array([r.tuning for r in cell if not r.failed])
        if values.size == 0:
            table[key] = float("nan")
        elif spec.kind == "tikhonov":
            table[key] = float(np.mean(np.log10(values)))
        else:
            table[key] = float(values.mean())
    return table


def rate_slope(points) -> float:
    """Least-squares slope of mean log10(alpha) against log10(n).

    ``points`` is a sequence of (n, mean_log10_alpha) pairs pooled across
    regimes; at least two distinct n values are required.
    """
    points = list(points)
    ns = np.array([float(p[0]) for p in points])
    values = np.array([float(p[1]) for p in points])
    if np.unique(ns).size < 2:
        raise ValueError("rate slope needs at least 2 distinct sample sizes")
    slope, _ = np.polyfit(np.log10(ns), values, 1)
    return float(slope)


def rate_slope_from_report(report: BenchmarkReport) -> float:
    """Pooled tuning-rate slope of every cross-validated ridge cell."""
    summary = tuning_summary(report)
    points = []
    for (regime, n, label), value in summary.items():
        if parse_method(label).kind == "tikhonov" and np.isfinite(value):
            points.append((n, value))
    return rate_slope(points)


# ---------------------------------------------------------------------------
# closed-form verification of the regularization-bias inequality


@dataclass(frozen=True, eq=False)
class TheoryProbe:
    """A finite diagonal model with known smoothness for bias-bound checks.

    The covariance has eigenvalues ``lambdas``; the target operator is
    ``factor @ diag(lambdas**beta)`` with ``||factor||_F <= rho``, so the
    regularization bias is available entrywise with no linear solves.
    """

    beta: float
    rho: float
    factor: np.ndarray  # coefficient matrix F
    lambdas: np.ndarray

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("smoothness exponent beta must be positive")
        factor = np.asarray(self.factor, dtype=float)
        lambdas = np.asarray(self.lambdas, dtype=float)
        if lambdas.ndim != 1 or np.any(lambdas <= 0):
            raise ValueError("covariance eigenvalues must be positive")
        if factor.shape != (lambdas.size, lambdas.size):
            raise ValueError("factor must be square and match the eigenvalues")
        norm = float(np.linalg.norm(factor))
        if norm > self.rho * (1 + 1e-12):
            raise ValueError(f"||F|| = {norm:.6g} exceeds the bound rho = {self.rho:.6g}")
        object.__setattr__(self, "factor", factor)
        object.__setattr__(self, "lambdas", lambdas)

    @property
    def target(self) -> np.ndarray:
        """The operator F C0^beta the probe regularizes toward."""
        return self.factor * (self.lambdas**self.beta)[None, :]

    @classmethod
    def diagonal(
        cls,
        beta: float,
        n_components: int = 60,
        eigen_decay: float = 2.0,
        rho: float = 1.0,
        eigen_scale: float = 1.0,
    ) -> "TheoryProbe":
        """Diagonal probe with eigen_scale * k**-eigen_decay eigenvalues, ||F||_F = rho.

        The envelope rho * alpha**min(beta, 1) is valid whenever the leading
        eigenvalue is at most 1; an ``eigen_scale`` above 1 with ``beta > 1``
        deliberately breaks it (useful as a negative control).
        """
        k = np.arange(1, n_components + 1, dtype=float)
        lambdas = eigen_scale * k ** (-eigen_decay)
        profile = 1.0 / k
        factor = np.diag(profile * (rho / np.linalg.norm(profile)))
        return cls(beta=beta, rho=rho, factor=factor, lambdas=lambdas)


def verify_bias_bound(probe: TheoryProbe, alphas) -> list:
    """Regularization bias against its theoretical envelope, per alpha.

    For each alpha, the smoothed operator is the target with its columns
    shrunk by lambda/(lambda + alpha); the bias is the Frobenius distance
    to the target and the envelope is rho * alpha**min(beta, 1). Returns
    [(alpha, bias, bound), ...] in input order.
    """
    psi = probe.target
    exponent = min(probe.beta, 1.0)
    rows = []
    for alpha in np.asarray(alphas, dtype=float):
        if alpha <= 0:
            raise ValueError("bias probe requires positive alpha")
        shrink = alpha / (probe.lambdas + alpha)
        bias = float(np.linalg.norm(psi * shrink[None, :]))
        rows.append((float(alpha), bias, float(probe.rho * alpha**exponent)))
    return rows


def operator_error_slope(
    regime: str = "II",
    n_values=(100, 200, 400),
    replications: int = 3,
    master_seed: int = 20260222,
):
    """Soft diagnostic: log-log slope of ridge estimation error against n.

    Fits the cross-validated ridge estimator to fresh paths and measures
    the weighted Frobenius distance between the fitted and the true kernel.
    Returned as (slope, points) for reporting only; the regimes are not
    built around a single smoothness exponent, so no band is asserted.
    """
    spec = REGIMES[regime]
    op = draw_regime_operator(spec, _regime_seed(master_seed, regime))
    points = []
    for n in n_values:
        errors = []
        for rep in range(replications):
            train = simulate_far1(
                op, spec, n, _path_seed(master_seed, regime, n, rep, _TRAIN_TAG)
            )
            est = fit_method(train, "tikhonov:cv")
            truth = operator_kernel(op, train.grid)
            w = train.grid.weights
            scale = np.sqrt(np.outer(w, w))
            errors.append(float(np.linalg.norm((est.kernel - truth.kernel) * scale)))
        points.append((n, float(np.log10(np.mean(errors)))))
    slope = rate_slope(points)
    return slope, points


# ---------------------------------------------------------------------------
# verification suite (drives the verify command)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def run_verification_suite(probes=None, seed: int = 1234) -> list:
    """Named numerical self-checks: bias bounds plus estimator equivalences.

    ``probes`` defaults to the diagonal family with smoothness exponents
    {0.25, 0.5, 1, 2}; an explicitly empty list is a configuration error.
    Returns a list of CheckResult; the run never raises on a failed check.
    """
    if probes is None:
        probes = [TheoryProbe.diagonal(beta) for beta in (0.25, 0.5, 1.0, 2.0)]
    probes = list(probes)
    if not probes:
        raise ValueError("verification needs at least one bias probe")
    checks = []
    alphas = default_alpha_grid().values

    for probe in probes:
        rows = verify_bias_bound(probe, alphas)
        violations = [(a, b, bd) for a, b, bd in rows if b > bd * (1 + 1e-12)]
        worst = max((b / bd for _, b, bd in rows), default=0.0)
        checks.append(
            CheckResult(
                f"bias-bound beta={probe.beta:g}",
                not violations,
                f"max bias/bound ratio {worst:.4f} over {len(rows)} alphas",
            )
        )

    rng = np.random.default_rng(seed)
    spectral_ok, spectral_worst = True, 0.0
    for _ in range(5):
        n, m = int(rng.integers(40, 90)), int(rng.integers(8, 24))
        sample = FunctionalSample(rng.standard_normal((n, m)), uniform_grid(m))
        mom = weighted_moments(sample)
        dec = eigendecompose(mom)
        for alpha in alphas[::6]:
            est = tikhonov_fit(mom, alpha, decomposition=dec)
            dense = np.linalg.solve(
                (mom.c0_tilde + alpha * np.eye(m)).T, mom.c1_tilde.T
            ).T
            sw = sample.grid.sqrt_weights
            spectral = est.kernel * np.outer(sw, sw)
            rel = float(np.linalg.norm(spectral - dense)) / max(
                float(np.linalg.norm(dense)), 1e-300
            )
            spectral_worst = max(spectral_worst, rel)
            spectral_ok = spectral_ok and rel <= 1e-10
    checks.append(
        CheckResult(
            "ridge spectral-vs-dense",
            spectral_ok,
            f"worst relative error {spectral_worst:.3e}",
        )
    )

    limit_ok, limit_worst = True, 0.0
    for _ in range(5):
        m = int(rng.integers(6, 12))
        n = 4 * m
        sample = FunctionalSample(rng.standard_normal((n, m)), uniform_grid(m))
        mom = weighted_moments(sample)
        dec = eigendecompose(mom)
        full = fpca_far_fit(sample, k=m, moments=mom, decomposition=dec)
        ridge = tikhonov_fit(mom, 1e-12 * float(dec.eigenvalues[0]), decomposition=dec)
        x = sample.curve(sample.n - 1)
        a = full.predict(x).values
        b = ridge.predict(x).values
        rel = float(np.linalg.norm(a - b)) / max(float(np.linalg.norm(b)), 1e-300)
        limit_worst = max(limit_worst, rel)
        limit_ok = limit_ok and rel <= 1e-6
    checks.append(
        CheckResult(
            "full-rank truncation matches vanishing ridge",
            limit_ok,
            f"worst relative prediction gap {limit_worst:.3e}",
        )
    )
    return checks
