"""Two-stage polychoric estimation from fuzzy frequency tables.

``fit_fem`` runs the fuzzy EM loop: the E-step filters each fuzzy cell count
through a Binomial(I, pi_rc) model, the M-step re-estimates thresholds from
the cumulative marginals of the filtered counts and then solves the score
equation for rho with thresholds held fixed.  ``fit_dml`` is the classical
two-stage estimator applied to defuzzified counts.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gammaln, xlog1py, xlogy

from .counting import FORMAT, FuzzyCount, FuzzyFrequencyTable
from .errors import (
    DegenerateConditional,
    EmptyMarginal,
    EstimationFailed,
    SingularInformation,
)
from .latent import (
    RHO_GUARD,
    LlcParams,
    cell_prob_drho,
    cell_probabilities,
    std_normal_quantile,
)

log = logging.getLogger(__name__)

PI_FLOOR = 1e-300
METHODS = ("fEM", "dML-max", "dML-mean")


@dataclass
class FitOptions:
    tol: float = 1e-9
    max_iter: int = 500
    compat_eq8: bool = False
    monotone_slack: float = 1e-10
    grid_points: int = 41
    start: LlcParams | None = None


@dataclass
class FitResult:
    params: LlcParams
    se_rho: float
    loglik_trace: list[float]
    iterations: int
    converged: bool
    method: str
    score: float = 0.0
    counts: np.ndarray | None = field(default=None, repr=False)
    monotone: bool = True

    @property
    def rho(self) -> float:
        return self.params.rho

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "method": self.method,
            "params": self.params.to_dict(),
            "se_rho": self.se_rho,
            "loglik_trace": list(map(float, self.loglik_trace)),
            "iterations": self.iterations,
            "converged": self.converged,
            "monotone": self.monotone,
            "score": self.score,
        }


@dataclass(frozen=True)
class FilteredCounts:
    """E-step output: conditional means and Taylor-approximated E[N ln N]."""

    n_hat: np.ndarray
    logfact_hat: np.ndarray
    variance: np.ndarray

    def expected_log_factorial(self) -> np.ndarray:
        """Stirling form E[ln N!] ~ E[N ln N] - E[N]."""
        return self.logfact_hat - self.n_hat


# --- E-step -----------------------------------------------------------------

def _log_binom_coef(size: int) -> np.ndarray:
    n = np.arange(size + 1)
    return gammaln(size + 1) - gammaln(n + 1) - gammaln(size - n + 1)


def _log_weights(xi: np.ndarray, pi: np.ndarray, size: int, logc: np.ndarray | None = None) -> np.ndarray:
    """log(xi(n) * Bin(n; I, pi)) with the cell axes leading, n last."""
    if logc is None:
        logc = _log_binom_coef(size)
    n = np.arange(size + 1)
    pi = np.clip(np.asarray(pi, dtype=float), PI_FLOOR, 1.0)[..., None]
    with np.errstate(divide="ignore"):
        lxi = np.log(xi)
    return lxi + logc + xlogy(n, pi) + xlog1py(size - n, -pi)


def _normalise(logw: np.ndarray, compat_eq8: bool) -> np.ndarray:
    top = logw.max(axis=-1, keepdims=True)
    if np.any(~np.isfinite(top)):
        raise DegenerateConditional("fuzzy count has no support where the binomial model has mass")
    w = np.exp(logw - top)
    if compat_eq8:
        n = np.arange(w.shape[-1])
        denom = (w * n).sum(axis=-1, keepdims=True)
        # a count with all mass at n = 0 has a zero denominator under this reading
        return np.divide(w, denom, out=np.zeros_like(w), where=denom > 0)
    return w / w.sum(axis=-1, keepdims=True)


def conditional_density(count: FuzzyCount, pi_rc: float, size: int, compat_eq8: bool = False) -> np.ndarray:
    """p(n | fuzzy count) proportional to xi(n) Bin(n; I, pi_rc), n = 0..I."""
    xi = count.memberships
    if xi.size != size + 1:
        raise ValueError(f"count has support 0..{xi.size - 1}, expected 0..{size}")
    return _normalise(_log_weights(xi, pi_rc, size), compat_eq8)


def _moments(p: np.ndarray):
    n = np.arange(p.shape[-1])
    mean = (p * n).sum(axis=-1)
    var = (p * (n - mean[..., None]) ** 2).sum(axis=-1)
    return mean, var


def _xlogx_taylor(mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mean)
    pos = mean > 0
    m = mean[pos]
    out[pos] = m * np.log(m) + var[pos] / (2.0 * m)
    return out


def e_step(table: FuzzyFrequencyTable, params: LlcParams, compat_eq8: bool = False,
           _logc: np.ndarray | None = None) -> FilteredCounts:
    xi = table.membership_array()
    if xi.shape[:2] != params.shape:
        raise ValueError(f"table is {xi.shape[:2]} but parameters describe {params.shape}")
    pi = cell_probabilities(params)
    p = _normalise(_log_weights(xi, pi, table.sample_size, _logc), compat_eq8)
    mean, var = _moments(p)
    return FilteredCounts(mean, _xlogx_taylor(mean, var), var)


# --- M-step -----------------------------------------------------------------

def _cumulative_thresholds(margin: np.ndarray, name: str) -> np.ndarray:
    total = margin.sum()
    if total <= 0:
        raise EmptyMarginal(f"{name} margin has no mass")
    cum = np.cumsum(margin)[:-1] / total
    # a category whose share is lost to rounding is as empty as a zero one
    if np.any(margin <= 0) or np.any(np.diff(np.r_[0.0, cum, 1.0]) <= 0):
        raise EmptyMarginal(f"{name} margin has an empty category: {margin}")
    return np.atleast_1d(std_normal_quantile(cum))


def m_step_thresholds(n_hat, sample_size: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Thresholds from cumulative marginal proportions of the (filtered) counts.

    Proportions are taken relative to the grid total, which equals I for
    crisp tables.
    """
    n_hat = np.asarray(n_hat, dtype=float)
    return (_cumulative_thresholds(n_hat.sum(axis=1), "row"),
            _cumulative_thresholds(n_hat.sum(axis=0), "column"))


def _objective(n_hat, pi):
    return float(np.sum(xlogy(n_hat, np.maximum(pi, PI_FLOOR))))


def score_rho(n_hat, params: LlcParams) -> float:
    """dQ/drho = sum n_rc / pi_rc * dpi_rc/drho over cells with positive counts."""
    n_hat = np.asarray(n_hat, dtype=float)
    pi = np.maximum(cell_probabilities(params), PI_FLOOR)
    d = cell_prob_drho(params)
    pos = n_hat > 0
    return float(np.sum(n_hat[pos] / pi[pos] * d[pos]))


def m_step_rho(n_hat, tau_row, tau_col, rho_init: float = 0.0, grid_points: int = 41,
               score_tol: float = 1e-8) -> float:
    """Maximise sum n_rc ln pi_rc(rho) over rho for fixed thresholds.

    A coarse grid locates sign changes of the score; Brent's method refines the
    bracket with the best objective.  Without a sign change the objective is
    maximised by bounded golden-section search instead.
    """
    n_hat = np.asarray(n_hat, dtype=float)
    base = LlcParams(rho_init, tau_row, tau_col)
    lo, hi = -1.0 + RHO_GUARD, 1.0 - RHO_GUARD

    def score(r):
        return score_rho(n_hat, base.with_rho(r))

    grid = np.linspace(lo, hi, grid_points)
    s = np.array([score(r) for r in grid])
    brackets = [i for i in range(len(grid) - 1) if s[i] > 0 >= s[i + 1]]
    if brackets:
        best, best_obj = None, -np.inf
        for i in brackets:
            if s[i + 1] == 0:
                root = grid[i + 1]
            else:
                root = brentq(score, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            obj = _objective(n_hat, cell_probabilities(base.with_rho(root)))
            if obj > best_obj:
                best, best_obj = root, obj
        return _polish(score, best, lo, hi, score_tol)
    log.debug("score has no sign change on the grid; falling back to golden-section search")
    res = minimize_scalar(lambda r: -_objective(n_hat, cell_probabilities(base.with_rho(r))),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def _polish(score, root: float, lo: float, hi: float, score_tol: float) -> float:
    # Brent stops on bracket width; step to the neighbouring float with the
    # smaller |score| when the residual is still above tolerance
    best, best_s = root, abs(score(root))
    if best_s <= score_tol:
        return float(best)
    for direction in (-np.inf, np.inf):
        r = root
        for _ in range(8):
            r = float(np.nextafter(r, direction))
            if not lo <= r <= hi:
                break
            v = abs(score(r))
            if v < best_s:
                best, best_s = r, v
    return float(best)


# --- log-likelihoods ----------------------------------------------------------

def complete_loglik(params: LlcParams, filtered: FilteredCounts, sample_size: int) -> float:
    """ln I! + sum n_hat ln pi - sum E[ln N!], the Stirling-approximated
    complete-data log-likelihood at the filtered counts."""
    pi = cell_probabilities(params)
    return float(gammaln(sample_size + 1) + _objective(filtered.n_hat, pi)
                 - np.sum(filtered.expected_log_factorial()))


def crisp_loglik(params: LlcParams, counts, sample_size: int | None = None) -> float:
    counts = np.asarray(counts, dtype=float)
    size = counts.sum() if sample_size is None else sample_size
    return float(gammaln(size + 1) + _objective(counts, cell_probabilities(params)) - np.sum(gammaln(counts + 1)))


def fuzzy_loglik(params: LlcParams, table: FuzzyFrequencyTable) -> float:
    """Observed-data log-likelihood sum_rc ln sum_n xi_rc(n) Bin(n; I, pi_rc)."""
    logw = _log_weights(table.membership_array(), cell_probabilities(params), table.sample_size)
    top = logw.max(axis=-1)
    return float(np.sum(top + np.log(np.exp(logw - top[..., None]).sum(axis=-1))))


# --- estimators ---------------------------------------------------------------

def information_rho(n_hat, params: LlcParams) -> float:
    """Outer product of per-observation scores: sum_rc n_rc (dpi_rc/drho / pi_rc)^2."""
    n_hat = np.asarray(n_hat, dtype=float)
    pi = cell_probabilities(params)
    d = cell_prob_drho(params)
    pos = (n_hat > 0) & (pi > 0)
    return float(np.sum(n_hat[pos] * (d[pos] / pi[pos]) ** 2))


def standard_error(fit: FitResult, table: FuzzyFrequencyTable | None = None) -> float:
    """SE of rho from the outer-product information at the fitted counts."""
    counts = fit.counts
    if counts is None:
        if table is None:
            raise ValueError("fit carries no counts; pass the table")
        counts = table.defuzzified("mean")
    info = information_rho(counts, fit.params)
    if not info > 0:
        raise SingularInformation("information for rho is zero")
    return 1.0 / math.sqrt(info)


def two_stage(counts, rho_init: float = 0.0, grid_points: int = 41) -> LlcParams:
    """Classical two-stage estimate on crisp (possibly real-valued) counts."""
    tau_r, tau_c = m_step_thresholds(counts)
    rho = m_step_rho(counts, tau_r, tau_c, rho_init, grid_points)
    return LlcParams(rho, tau_r, tau_c)


def fit_dml(table: FuzzyFrequencyTable, mode: str = "mean", opts: FitOptions | None = None) -> FitResult:
    """Two-stage ML on max- or mean-defuzzified counts."""
    opts = opts or FitOptions()
    counts = table.defuzzified(mode)
    params = two_stage(counts, grid_points=opts.grid_points)
    fit = FitResult(
        params=params,
        se_rho=float("nan"),
        loglik_trace=[crisp_loglik(params, counts, table.sample_size)],
        iterations=1,
        converged=True,
        method=f"dML-{mode}",
        score=score_rho(counts, params),
        counts=counts,
    )
    fit.se_rho = _safe_se(fit)
    return fit


def _safe_se(fit: FitResult) -> float:
    try:
        return standard_error(fit)
    except SingularInformation:
        return float("nan")


def fit_fem(table: FuzzyFrequencyTable, opts: FitOptions | None = None) -> FitResult:
    """Fuzzy EM two-stage estimator, started from dML on mean-defuzzified counts."""
    opts = opts or FitOptions()
    theta = opts.start or fit_dml(table, "mean", opts).params
    size = table.sample_size
    logc = _log_binom_coef(size)
    trace: list[float] = []
    monotone = True
    converged = False
    filtered = None
    q = 0
    for q in range(1, opts.max_iter + 1):
        filtered = e_step(table, theta, opts.compat_eq8, logc)
        tau_r, tau_c = m_step_thresholds(filtered.n_hat)
        rho = m_step_rho(filtered.n_hat, tau_r, tau_c, theta.rho, opts.grid_points)
        theta = LlcParams(rho, tau_r, tau_c)
        ll = complete_loglik(theta, filtered, size)
        trace.append(ll)
        if len(trace) > 1:
            delta = trace[-1] - trace[-2]
            if delta < -opts.monotone_slack:
                monotone = False
                log.warning("log-likelihood decreased by %.3g at iteration %d", -delta, q)
            # a small overshoot is possible, so stop on the size of the change
            if abs(delta) < opts.tol:
                converged = True
                break
    if not converged:
        log.warning("fuzzy EM hit max_iter=%d without converging", opts.max_iter)
    fit = FitResult(
        params=theta,
        se_rho=float("nan"),
        loglik_trace=trace,
        iterations=q,
        converged=converged,
        method="fEM",
        score=score_rho(filtered.n_hat, theta),
        counts=filtered.n_hat,
        monotone=monotone,
    )
    fit.se_rho = _safe_se(fit)
    return fit


def fit(table: FuzzyFrequencyTable, method: str = "fEM", opts: FitOptions | None = None) -> FitResult:
    key = method.lower().replace("_", "-")
    if key == "fem":
        return fit_fem(table, opts)
    if key in ("dml-max", "dml-mean"):
        return fit_dml(table, key.split("-")[1], opts)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


# --- correlation matrices -------------------------------------------------------

def smooth_correlation(mat, floor: float = 1e-8, tol: float = 1e-10) -> tuple[np.ndarray, bool]:
    """Clip negative eigenvalues to ``floor`` and rescale to unit diagonal."""
    mat = np.asarray(mat, dtype=float)
    mat = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(mat)
    if vals.min() >= -tol:
        return mat, False
    vals = np.maximum(vals, floor)
    out = (vecs * vals) @ vecs.T
    d = np.sqrt(np.diag(out))
    out = out / np.outer(d, d)
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 1.0)
    return out, True


@dataclass
class CorrelationMatrix:
    labels: list
    matrix: np.ndarray
    raw: np.ndarray
    fits: dict
    smoothed: bool

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "labels": [str(x) for x in self.labels],
            "matrix": self.matrix.tolist(),
            "raw_matrix": self.raw.tolist(),
            "smoothed": self.smoothed,
            "pairs": [
                {"pair": [str(j), str(k)], **f.to_dict()} for (j, k), f in self.fits.items()
            ],
        }

    def to_csv(self) -> str:
        labels = [str(x) for x in self.labels]
        lines = ["," + ",".join(labels)]
        for lab, row in zip(labels, self.matrix):
            lines.append(lab + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def assemble_matrix(tables: dict, method: str = "fEM", opts: FitOptions | None = None,
                    labels: list | None = None, jobs: int = 1) -> CorrelationMatrix:
    """Pairwise correlation matrix with eigenvalue-clipping when it is indefinite."""
    if labels is None:
        labels = []
        for j, k in tables:
            for v in (j, k):
                if v not in labels:
                    labels.append(v)
    index = {v: i for i, v in enumerate(labels)}

    def run(item):
        pair, tab = item
        try:
            return pair, fit(tab, method, opts)
        except Exception as exc:  # noqa: BLE001 - re-raised with the pair attached
            raise EstimationFailed(pair, exc) from exc

    items = list(tables.items())
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run, items))
    else:
        results = [run(it) for it in items]

    raw = np.eye(len(labels))
    for (j, k), f in results:
        raw[index[j], index[k]] = raw[index[k], index[j]] = f.rho
    mat, smoothed = smooth_correlation(raw)
    return CorrelationMatrix(labels, mat, raw, dict(results), smoothed)


__all__ = [
    "FitOptions", "FitResult", "FilteredCounts", "CorrelationMatrix",
    "conditional_density", "e_step", "m_step_thresholds", "m_step_rho", "score_rho",
    "fit_fem", "fit_dml", "fit", "standard_error", "information_rho", "two_stage",
    "complete_loglik", "crisp_loglik", "fuzzy_loglik", "smooth_correlation", "assemble_matrix",
]
