"""Monte Carlo harness: fuzzy tables from a known latent model, three estimators, bias/RMSE.

Each cell starts from its expected count n_rc = I * pi_rc.  A perturbed
centre m1 is drawn from a discrete Gamma around n_rc, and the cell's
possibility distribution is a discrete Gamma pmf around m1 rescaled to unit
height (probability-possibility transform).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .counting import FORMAT, FuzzyFrequencyTable
from .estimation import METHODS, FitOptions, fit
from .latent import LlcParams, cell_probabilities

log = logging.getLogger(__name__)

DESIGN_THRESHOLDS = {
    4: (-2.00, -0.66, 0.66, 2.00),
    6: (-2.00, -1.20, -0.40, 0.40, 1.20, 2.00),
}
DESIGN_I = (150, 250, 500, 1000)
DESIGN_RHO = (0.15, 0.50, 0.85)
DESIGN_RC = (4, 6)
DESK_B = 200
FULL_B = 5000

# hyper-parameters of the spread draw
M0 = 1.0
S0 = 0.25


@dataclass(frozen=True)
class SimCondition:
    I: int
    rho0: float
    rc: int = 4
    B: int = DESK_B
    seed: int = 0
    thresholds: tuple[float, ...] | None = None

    @property
    def tau(self) -> np.ndarray:
        if self.thresholds is not None:
            return np.asarray(self.thresholds, dtype=float)
        try:
            return np.asarray(DESIGN_THRESHOLDS[self.rc], dtype=float)
        except KeyError:
            raise ValueError(f"no design thresholds for R=C={self.rc}; pass thresholds explicitly") from None

    @property
    def params(self) -> LlcParams:
        return LlcParams(self.rho0, self.tau, self.tau)

    @property
    def label(self) -> str:
        return f"I={self.I},rho0={self.rho0:g},RC={self.rc}"


def gamma_rate(m: float, s: float) -> float:
    """Rate from the printed mean/variance reparameterisation, (m + m^2 + 4 s^2)^(1/2) / (2 s^2)."""
    return math.sqrt(m + m * m + 4.0 * s * s) / (2.0 * s * s)


def discrete_gamma_pmf(n, shape: float, rate: float) -> np.ndarray:
    """f(n) = S(n) - S(n+1) of the continuous Gamma(shape, rate)."""
    n = np.asarray(n, dtype=float)
    dist = stats.gamma(shape, scale=1.0 / rate)
    # take the difference on whichever tail avoids cancellation
    lower = dist.cdf(n + 1) - dist.cdf(n)
    upper = dist.sf(n) - dist.sf(n + 1)
    return np.where(n + 1 <= dist.median(), lower, upper)


def sample_discrete_gamma(rng: np.random.Generator, shape: float, rate: float, upper: int) -> int:
    """Inverse-CDF draw from the survival-difference pmf; mass above ``upper`` lumped into it."""
    u = rng.random()
    x = stats.gamma.ppf(u, shape, scale=1.0 / rate)
    if not np.isfinite(x):
        return upper
    return int(min(math.floor(x), upper))


def cell_possibility(m1: int, s1: float, size: int) -> np.ndarray:
    """Unit-height possibility distribution over 0..size centred near m1.

    The shape uses alpha = 1 + m1 * (1 + beta), beta = (m1 + m1^2 + 4 s1^2)^(1/2) / (2 s1^2).
    The printed text also defines the multiplier from the spread hyper-parameters
    (m0, s0); that reading centres every cell near 24 s1^2 whatever m1 is, so
    the inline definition is used.
    """
    beta = gamma_rate(m1, s1)
    alpha = 1.0 + m1 * (1.0 + beta)
    f = discrete_gamma_pmf(np.arange(size + 1), alpha, beta)
    top = f.max()
    if not top > 0:
        # pmf underflowed everywhere on 0..size; fall back to the nearest point
        xi = np.zeros(size + 1)
        xi[min(m1, size)] = 1.0
        return xi
    return f / top


def generate_table(cond: SimCondition, rng: np.random.Generator) -> FuzzyFrequencyTable:
    pi = cell_probabilities(cond.params)
    n_rc = cond.I * pi
    beta_s = gamma_rate(M0, S0)
    alpha_s = 1.0 + M0 * beta_s
    R, C = pi.shape
    xi = np.empty((R, C, cond.I + 1))
    for r in range(R):
        for c in range(C):
            # continuous draw: a discrete draw would give s1 = 0 (undefined rate) ~40% of the time
            s1 = rng.gamma(alpha_s, 1.0 / beta_s)
            n = n_rc[r, c]
            beta_m = gamma_rate(n, s1)
            m1 = sample_discrete_gamma(rng, 1.0 + n * beta_m, beta_m, cond.I)
            xi[r, c] = cell_possibility(m1, s1, cond.I)
    return FuzzyFrequencyTable.from_array(xi, sample_size=cond.I,
                                          meta={"rho0": cond.rho0, "tau": cond.tau.tolist()})


def crisp_table(cond: SimCondition, rng: np.random.Generator) -> FuzzyFrequencyTable:
    """Degenerate generator: a multinomial crosstab with no imprecision."""
    counts = rng.multinomial(cond.I, cell_probabilities(cond.params).ravel())
    return FuzzyFrequencyTable.from_crisp(counts.reshape(cond.params.shape))


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


@dataclass
class ReplicateResult:
    rep: int
    estimates: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)


def run_replicate(cond: SimCondition, rep: int, methods=METHODS, opts: FitOptions | None = None,
                  generator=generate_table) -> ReplicateResult:
    out = ReplicateResult(rep)
    try:
        table = generator(cond, replicate_rng(cond.seed, rep))
    except Exception as exc:  # noqa: BLE001 - recorded per replicate
        for m in methods:
            out.errors[m] = f"generation: {exc}"
        return out
    for m in methods:
        try:
            f = fit(table, m, opts)
            out.estimates[m] = {
                "rho": f.rho,
                "tau_row": f.params.tau_row.tolist(),
                "tau_col": f.params.tau_col.tolist(),
                "converged": f.converged,
                "iterations": f.iterations,
                "monotone": f.monotone,
            }
        except Exception as exc:  # noqa: BLE001
            out.errors[m] = f"{type(exc).__name__}: {exc}"
    return out


def _run_args(args):
    return run_replicate(*args)


@dataclass
class MethodSummary:
    bias_rho: float
    rmse_rho: float
    bias_tau: float
    rmse_tau: float
    n_ok: int
    n_failed: int
    tau_bias_components: list[float]
    tau_var_components: list[float]


def _summarise(cond: SimCondition, reps: list[ReplicateResult], method: str) -> MethodSummary:
    ok = [r.estimates[method] for r in reps if method in r.estimates]
    failed = sum(method in r.errors for r in reps)
    if not ok:
        nan = float("nan")
        return MethodSummary(nan, nan, nan, nan, 0, failed, [], [])
    rho = np.array([e["rho"] for e in ok])
    taus = np.array([e["tau_row"] for e in ok])
    tau0 = cond.tau
    d_rho = rho - cond.rho0
    d_tau = taus.sum(axis=1) - tau0.sum()
    return MethodSummary(
        bias_rho=float(np.mean(d_rho)),
        rmse_rho=float(np.sqrt(np.mean(d_rho ** 2))),
        bias_tau=float(np.mean(d_tau)),
        rmse_tau=float(np.sqrt(np.mean(d_tau ** 2))),
        n_ok=len(ok),
        n_failed=failed,
        tau_bias_components=(taus.mean(axis=0) - tau0).tolist(),
        tau_var_components=taus.var(axis=0).tolist(),
    )


@dataclass
class ConditionReport:
    condition: SimCondition
    summaries: dict
    replicates: list[ReplicateResult]

    @property
    def failure_rate(self) -> float:
        total = len(self.replicates) * len(self.summaries)
        failed = sum(s.n_failed for s in self.summaries.values())
        return failed / total if total else 0.0


@dataclass
class SimReport:
    conditions: list[ConditionReport]
    methods: tuple = METHODS

    def summary(self, cond_index: int, method: str) -> MethodSummary:
        return self.conditions[cond_index].summaries[method]

    @property
    def failure_rate(self) -> float:
        rates = [c.failure_rate for c in self.conditions]
        return max(rates) if rates else 0.0

    def to_csv(self, target: str = "rho") -> str:
        """Condition rows by method bias/rmse columns; ``target`` is 'rho' or 'tau'."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["I", "rho0", "RC", "B", "seed"]
        for m in self.methods:
            header += [f"{m}_bias", f"{m}_rmse"]
        header += [f"{m}_failed" for m in self.methods]
        w.writerow(header)
        for cr in self.conditions:
            c = cr.condition
            row = [c.I, c.rho0, c.rc, c.B, c.seed]
            for m in self.methods:
                s = cr.summaries[m]
                row += ([s.bias_rho, s.rmse_rho] if target == "rho" else [s.bias_tau, s.rmse_tau])
            row += [cr.summaries[m].n_failed for m in self.methods]
            w.writerow(row)
        return buf.getvalue()

    def thresholds_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["I", "rho0", "RC", "method", "component", "tau0", "bias", "variance"])
        for cr in self.conditions:
            c = cr.condition
            for m in self.methods:
                s = cr.summaries[m]
                for i, (b, v) in enumerate(zip(s.tau_bias_components, s.tau_var_components), start=1):
                    w.writerow([c.I, c.rho0, c.rc, m, i, c.tau[i - 1], b, v])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "methods": list(self.methods),
            "conditions": [
                {
                    "condition": {**asdict(cr.condition), "thresholds": cr.condition.tau.tolist()},
                    "summaries": {m: asdict(s) for m, s in cr.summaries.items()},
                    "replicates": [asdict(r) for r in cr.replicates],
                }
                for cr in self.conditions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=True)

    def format_table(self) -> str:
        lines = [f"{'condition':<28}" + "".join(f"{m + ' bias':>14}{m + ' rmse':>14}" for m in self.methods)]
        for cr in self.conditions:
            row = f"{cr.condition.label:<28}"
            for m in self.methods:
                s = cr.summaries[m]
                row += f"{s.bias_rho:>14.5f}{s.rmse_rho:>14.5f}"
            lines.append(row)
        return "\n".join(lines)


def run_condition(cond: SimCondition, methods=METHODS, opts: FitOptions | None = None, jobs: int = 1,
                  generator=generate_table) -> ConditionReport:
    """All replicates of one condition; ``generator`` must be picklable when jobs > 1."""
    if cond.B < 1:
        raise ValueError("B must be at least 1")
    args = [(cond, b, methods, opts, generator) for b in range(cond.B)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reps = list(ex.map(_run_args, args, chunksize=max(1, cond.B // (4 * jobs))))
    else:
        reps = [_run_args(a) for a in args]
    for r in reps:
        for m, err in r.errors.items():
            log.info("%s replicate %d %s failed: %s", cond.label, r.rep, m, err)
    return ConditionReport(cond, {m: _summarise(cond, reps, m) for m in methods}, reps)


def run_study(conds, methods=METHODS, opts: FitOptions | None = None, jobs: int = 1,
              generator=generate_table) -> SimReport:
    return SimReport([run_condition(c, methods, opts, jobs, generator) for c in conds], tuple(methods))


def design_grid(B: int = DESK_B, seed: int = 0, I_levels=DESIGN_I, rho_levels=DESIGN_RHO, rc_levels=DESIGN_RC):
    return [SimCondition(I, rho, rc, B, seed) for rc in rc_levels for rho in rho_levels for I in I_levels]
