"""Maximize normalized probability products over constraint-satisfying wavepackets.

Every probability is a quadratic form in the projected Fourier vector v.  The
objective is

    V(v) = prod_l  v^dag P_l(t_l) v / (v^dag P_total(t_max) v)

where t_max maximizes the total non-initial probability over a time grid.  V is
invariant under v -> c v, so no explicit normalization constraint is needed.

Two search methods share the same gradient:

* ``ascent``: the plain randomized gradient iteration
  v <- v + eps |v|^2 [sum_l P_l v / p_l - l_M P_total(t_max) v / p_total].
* ``smoothed`` (default): the worst-case total is replaced by a p-norm over
  the grid, maximized with a quasi-Newton method while p is raised, then the
  result is polished by ``ascent`` on the exact max.  The max over time is
  nonsmooth wherever the constraint is active on an interval, which stalls
  the plain iteration; the continuation walks around that.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .model import SystemParams
from .projection import ProjectionData, project_matrix, projection_for
from .spectral import FourierBasis, Kind, SpectralModel, build_basis, default_size

NORMALIZATION_POINTS = 257
SAMPLES_PER_RADIAN = 16 / math.pi
AUDIT_FACTOR = 4
REFINE_PEAKS = 32
CONTINUATION = (8, 32, 128, 512, 2048, 8192, 32768)


class DegenerateVectorError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizationTarget:
    """Product of probabilities prod_l P_{kind_l}(t_l)."""

    terms: tuple[tuple[Kind, float], ...]
    T: float

    def __post_init__(self):
        terms = tuple((Kind.parse(k), float(t)) for k, t in self.terms)
        if not terms:
            raise ValueError("a target needs at least one term")
        for k, t in terms:
            if not 0 < t <= self.T * (1 + 1e-12):
                raise ValueError(f"term time {t} outside (0, T={self.T}]")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def emission(cls, T: float, *channels: int) -> "OptimizationTarget":
        """prod_j P_kappa_j(T); defaults to channel 1."""
        channels = channels or (1,)
        return cls(tuple((Kind("emission", j), T) for j in channels), T)

    @property
    def l_M(self) -> int:
        return len(self.terms)

    def __str__(self):
        return "*".join(f"{k}({t:g})" for k, t in self.terms)


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "smoothed"
    normalization_points: int | None = None
    max_iterations: int = 4000
    epsilon_range: tuple[float, float] = (1e-4, 1e-2)
    stall_iterations: int = 200
    stall_rtol: float = 1e-9
    restarts: int = 1
    noise: float = 0.01
    continuation: tuple[int, ...] = CONTINUATION
    inner_iterations: int = 2000
    lowpass: int | None = None
    norm_penalty: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("smoothed", "ascent"):
            raise ValueError(f"unknown method {self.method!r}")
        lo, hi = self.epsilon_range
        if not 0 < lo <= hi:
            raise ValueError("epsilon_range must satisfy 0 < lo <= hi")
        if self.normalization_points is not None and self.normalization_points < 2:
            raise ValueError("need at least two normalization times")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.norm_penalty < 0:
            raise ValueError("norm_penalty must be >= 0")


@dataclass
class OptimizerState:
    v: np.ndarray
    objective: float
    t_max: float
    iteration: int = 0
    epsilon_range: tuple[float, float] = (1e-4, 1e-2)
    normalization_times: np.ndarray | None = None


@dataclass
class WavepacketSolution:
    v: np.ndarray
    coefficients: np.ndarray
    objective: float
    term_values: list[float]
    times: np.ndarray
    probability_traces: dict[str, np.ndarray]
    t_max: float
    converged: bool
    iterations: int
    history: list[tuple[int, float, float]] = field(default_factory=list)
    audit_max_total: float = float("nan")
    restart_objectives: list[float] = field(default_factory=list)
    target: OptimizationTarget | None = None
    basis: FourierBasis | None = None
    params: SystemParams | None = None

    @property
    def restart_spread(self) -> float:
        r = self.restart_objectives
        return float(max(r) - min(r)) if r else 0.0

    def history_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "t_max"])
            for i, v, t in self.history:
                w.writerow([i, f"{v:.12g}", f"{t:.12g}"])


class ProjectedProblem:
    """Projected matrices and fast expectations on a fixed normalization grid."""

    def __init__(self, params: SystemParams, basis: FourierBasis, proj: ProjectionData,
                 target: OptimizationTarget, points: int | None = None):
        if points is None:
            points = normalization_points(basis, target.T)
        self.params = params
        self.basis = basis
        self.proj = proj
        self.target = target
        grid = np.linspace(0.0, target.T, points)
        extra = [t for _, t in target.terms]
        self.times = np.unique(np.concatenate([grid, extra]))
        self.model = SpectralModel(basis, params, self.times)
        self.term_index = [int(np.argmin(np.abs(self.times - t))) for _, t in target.terms]
        self.Q = proj.Q

    # -- elementary pieces -------------------------------------------------
    def lift(self, v) -> np.ndarray:
        return self.Q @ v

    def projected_matrix(self, kind, index: int) -> np.ndarray:
        return project_matrix(self.model.matrix(kind, index), self.proj)

    def totals(self, v) -> np.ndarray:
        return self.model.expectation(self.lift(v), Kind("total"))

    def find_tmax(self, v) -> int:
        return find_tmax_index(self.totals(v))

    def term_values(self, ex) -> list[float]:
        return [float(ex[k][i]) for (k, _), i in zip(self.target.terms, self.term_index)]

    def evaluate(self, v):
        """(V, t_max index, raw term values, raw total at t_max)."""
        ex = self.model.expectations(self.lift(v))
        tot = ex[Kind("total")]
        im = find_tmax_index(tot)
        b = float(tot[im])
        if not b > 0:
            raise DegenerateVectorError("vector has zero total probability")
        a = self.term_values(ex)
        V = float(np.prod(a)) / b ** len(a)
        return V, im, a, b

    def correction(self, v, im=None, weights=None) -> np.ndarray:
        """Gradient of log V w.r.t. conj(v) (up to a factor 2).

        With ``weights`` the worst-case total is replaced by the weighted sum
        sum_t w_t P_total(t) (used by the smoothed objective).
        """
        c = self.lift(v)
        ex = self.model.expectations(c)
        a = self.term_values(ex)
        Qh = self.Q.conj().T
        g = np.zeros(self.Q.shape[0], dtype=complex)
        for (k, _), i, ai in zip(self.target.terms, self.term_index, a):
            if ai <= 0:
                raise DegenerateVectorError("a target probability vanishes")
            g += self.model.matrix(k, i) @ c / ai
        if weights is None:
            if im is None:
                im = find_tmax_index(ex[Kind("total")])
            Bc = self.model.matrix("total", im) @ c
        else:
            Bc = self.model.weighted_total(weights) @ c
        b = float(np.real(np.vdot(c, Bc)))
        g -= self.target.l_M * Bc / b
        return Qh @ g


def normalization_points(basis: FourierBasis, T: float) -> int:
    """Grid size resolving the fastest quadratic-form oscillation (at least 257).

    Totals oscillate at up to 2 omega_max; sampling that at ~8 points per
    period keeps the peak between grid times within ~1e-5 of the grid max.
    """
    return max(NORMALIZATION_POINTS, int(math.ceil(SAMPLES_PER_RADIAN * basis.omega_max * T)) + 1)


def find_tmax_index(values) -> int:
    """Index of the largest value; ties go to the latest index."""
    vals = np.asarray(values)
    if vals.size == 0:
        raise ValueError("empty normalization grid")
    return int(len(vals) - 1 - np.argmax(vals[::-1]))


def find_tmax(v, totals, times) -> float:
    """Grid time maximizing v^dag P_total(t) v over the given projected matrices."""
    v = np.asarray(v)
    vals = [float(np.real(np.vdot(v, M @ v))) for M in totals]
    return float(np.asarray(times)[find_tmax_index(vals)])


def normalized_probability(problem: ProjectedProblem, v, kind, t_index: int,
                           tmax_index: int | None = None) -> float:
    """v^dag P_kind(t) v / v^dag P_total(t_max) v."""
    c = problem.lift(v)
    ex = problem.model.expectations(c)
    tot = ex[Kind("total")]
    im = find_tmax_index(tot) if tmax_index is None else tmax_index
    if not tot[im] > 0:
        raise DegenerateVectorError("vector has zero total probability")
    return float(ex[Kind.parse(kind)][t_index] / tot[im])


def evaluate_product(problem: ProjectedProblem, v) -> float:
    return problem.evaluate(v)[0]


def gradient_step(state: OptimizerState, problem: ProjectedProblem, rng=None,
                  metric: np.ndarray | None = None) -> np.ndarray:
    """One randomized correction of v; t_max is recomputed from v.

    ``metric`` optionally preconditions the correction (v <- v + eps M M^dag g).
    """
    rng = np.random.default_rng() if rng is None else rng
    v = np.asarray(state.v, dtype=complex)
    g = problem.correction(v)
    if metric is not None:
        g = metric @ (metric.conj().T @ g)
    eps = rng.uniform(*state.epsilon_range)
    scale = float(np.real(np.vdot(v, v)))
    if metric is not None:
        z = np.linalg.lstsq(metric, v, rcond=None)[0]
        scale = float(np.real(np.vdot(z, z)))
    return v + eps * scale * g


# -- initialization -------------------------------------------------------
def half_sine_coefficients(basis: FourierBasis, T: float, samples: int = 8193) -> np.ndarray:
    """Fourier coefficients of sin(pi t / T) on [0, T], zero on (T, T_b]."""
    t = np.linspace(0.0, T, samples)
    a = np.sin(np.pi * t / T)
    E = np.exp(-1j * np.multiply.outer(basis.omega, t))
    return np.trapezoid(E * a, t, axis=1) / math.sqrt(basis.T_b)


def initial_vector(problem: ProjectedProblem, rng, noise: float = 0.01) -> np.ndarray:
    v = problem.Q.conj().T @ half_sine_coefficients(problem.basis, problem.target.T)
    scale = noise * np.linalg.norm(v) / math.sqrt(len(v))
    return v + scale * (rng.normal(size=len(v)) + 1j * rng.normal(size=len(v)))


def _metric(problem: ProjectedProblem) -> np.ndarray:
    """Whitening map M with M^dag P_total(T) M = I on the resolved subspace."""
    B = problem.projected_matrix("total", len(problem.times) - 1)
    lam, V = np.linalg.eigh(B)
    lam = np.maximum(lam, 1e-10 * lam.max())
    return V / np.sqrt(lam)


# -- search methods -------------------------------------------------------
def _smoothed(problem: ProjectedProblem, v0, M, config: OptimizerConfig, history):
    """Maximize the p-norm-smoothed log objective with continuation in p.

    Coefficient energy outside [0, T] is free in the basis, and the whitened
    coordinates amplify steps along those directions.  The scale-invariant
    penalty rho |v|^2 / P_p keeps the vector well conditioned; at the optimum
    it costs about rho per unit of norm ratio.
    """
    z = np.linalg.solve(M, v0)
    n = len(z)
    Mh = M.conj().T
    Qh = problem.Q.conj().T
    l_M = problem.target.l_M
    rho = config.norm_penalty

    def objective(x, p):
        zz = x[:n] + 1j * x[n:]
        v = M @ zz
        c = problem.lift(v)
        ex = problem.model.expectations(c)
        tot = ex[Kind("total")]
        a = problem.term_values(ex)
        if min(a) <= 0:
            return np.inf, np.zeros_like(x)
        top = tot.max()
        r = tot / top
        w = r ** (p - 1)
        S = float(w @ r)
        Pp = top * S ** (1.0 / p)
        F = sum(math.log(ai) for ai in a) - l_M * math.log(Pp)
        g = problem.correction(v, weights=w)
        if rho:
            nv = float(np.real(np.vdot(v, v)))
            Bc = problem.model.weighted_total(w) @ c
            F -= rho * nv / Pp
            g = g - rho * (v - nv * (Qh @ Bc) / float(np.real(np.vdot(c, Bc)))) / Pp
        g = 2 * (Mh @ g)
        return -F, -np.concatenate([g.real, g.imag])

    x = np.concatenate([z.real, z.imag])
    it = 0
    for p in config.continuation:
        res = minimize(objective, x, args=(p,), jac=True, method="L-BFGS-B",
                       options={"maxiter": config.inner_iterations, "gtol": 1e-12, "ftol": 1e-15})
        x = res.x
        it += int(res.nit)
        v = M @ (x[:n] + 1j * x[n:])
        V, im, _, _ = problem.evaluate(v)
        history.append((it, V, float(problem.times[im])))
    return v, it


def _ascent(problem: ProjectedProblem, v0, M, config: OptimizerConfig, rng, history,
            start_iteration: int = 0):
    """Randomized gradient iteration on the exact worst-case total.

    A step that lowers V is rejected and shrinks the step range; an accepted
    step widens it again.  Stops once the best objective has changed by less
    than ``stall_rtol`` (relative) for ``stall_iterations`` iterations.
    """
    V, im, _, b = problem.evaluate(v0)
    state = OptimizerState(v=v0 / math.sqrt(b), objective=V, t_max=float(problem.times[im]),
                           iteration=start_iteration, epsilon_range=config.epsilon_range,
                           normalization_times=problem.times)
    best_v, best_V = state.v, V
    scale = 1.0
    lo, hi = config.epsilon_range
    quiet = 0
    converged = False
    for k in range(config.max_iterations):
        state.epsilon_range = (lo * scale, hi * scale)
        cand = gradient_step(state, problem, rng, metric=M)
        Vc, imc, _, bc = problem.evaluate(cand)
        state.iteration += 1
        prev = best_V
        if Vc >= state.objective:
            state.v, state.objective, state.t_max = cand / math.sqrt(bc), Vc, float(problem.times[imc])
            scale = min(scale * 1.5, 1e4)
        else:
            scale *= 0.5
        if state.objective > best_V:
            best_v, best_V = state.v, state.objective
        history.append((state.iteration, state.objective, state.t_max))
        if abs(best_V - prev) <= config.stall_rtol * abs(best_V):
            quiet += 1
        else:
            quiet = 0
        if quiet >= config.stall_iterations:
            converged = True
            break
    return best_v, state.iteration, converged


def lowpass(problem: ProjectedProblem, v, n_cut: int) -> np.ndarray:
    """Drop Fourier components with |n| > n_cut and re-impose the initial vacancy."""
    c = problem.lift(v)
    c = np.where(np.abs(problem.basis.n) <= n_cut, c, 0.0)
    return problem.Q.conj().T @ c


def _single_run(problem, config: OptimizerConfig, rng, M):
    history: list[tuple[int, float, float]] = []
    v = initial_vector(problem, rng, config.noise)
    it = 0
    if config.method == "smoothed":
        v, it = _smoothed(problem, v, M, config, history)
    v, it, converged = _ascent(problem, v, M, config, rng, history, start_iteration=it)
    return v, it, converged, history


def audit_grid(problem: ProjectedProblem, factor: int = AUDIT_FACTOR) -> np.ndarray:
    K = len(problem.times)
    return np.unique(np.concatenate([np.linspace(0.0, problem.target.T, factor * (K - 1) + 1),
                                     problem.times]))


def continuous_peak(model: SpectralModel, c, times, tot, tol: float = 1e-13) -> tuple[float, float]:
    """Maximum of the total over [0, T], refined between samples by golden section."""
    T = times[-1]
    top = tot.max()
    interior = np.r_[True, tot[1:] >= tot[:-1]] & np.r_[tot[:-1] >= tot[1:], True]
    cand = np.flatnonzero(interior & (tot >= top * (1 - 1e-3)))
    cand = cand[np.argsort(tot[cand])[::-1][:REFINE_PEAKS]]

    def total(t):
        return float(model.expectations_at(c, [t])[Kind("total")][0])

    best_t, best = float(times[find_tmax_index(tot)]), float(top)
    phi = (math.sqrt(5) - 1) / 2
    for i in cand:
        a, b = times[max(i - 1, 0)], times[min(i + 1, len(times) - 1)]
        x1, x2 = b - phi * (b - a), a + phi * (b - a)
        f1, f2 = total(x1), total(x2)
        while b - a > tol * max(T, 1.0):
            if f1 >= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - phi * (b - a)
                f1 = total(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + phi * (b - a)
                f2 = total(x2)
        for t, f in ((x1, f1), (x2, f2)):
            if f > best or (f == best and t > best_t):
                best_t, best = float(t), f
    return best_t, best


def optimize(params: SystemParams, target: OptimizationTarget, config: OptimizerConfig | None = None,
             basis: FourierBasis | None = None, proj: ProjectionData | None = None,
             report_points: int | None = None) -> WavepacketSolution:
    """Best normalized product over ``config.restarts`` independent runs.

    The returned vector is normalized on the 4x audit grid, so the reported
    objective already accounts for any peak of the total falling between
    working-grid times.
    """
    config = config or OptimizerConfig()
    if basis is None:
        T_b, N = default_size(target.T, params)
        basis = build_basis(target.T, T_b, N, params)
    proj = proj or projection_for(basis, params)
    problem = ProjectedProblem(params, basis, proj, target, config.normalization_points)
    M = _metric(problem)
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    runs = []
    for s in seeds:
        rng = np.random.default_rng(s)
        runs.append(_single_run(problem, config, rng, M))
    objectives = [problem.evaluate(r[0])[0] for r in runs]
    best = int(np.argmax(objectives))
    v, iterations, converged, history = runs[best]
    if config.lowpass is not None:
        v = lowpass(problem, v, config.lowpass)

    return finalize(problem, v, converged, iterations, history, objectives, report_points)


def finalize(problem: ProjectedProblem, v, converged=True, iterations=0, history=(),
             objectives=(), report_points: int | None = None) -> WavepacketSolution:
    """Normalize ``v`` by its worst-case total over the whole window and report.

    ``audit_max_total`` is the 4x-grid maximum of the total under the
    working-grid normalization, i.e. how far the optimizer's own grid let the
    total exceed 1 between samples.
    """
    c = problem.lift(v)
    b_grid = float(problem.totals(v).max())
    fine = audit_grid(problem)
    fine_model = SpectralModel(problem.basis, problem.params, fine)
    tot = fine_model.expectation(c, Kind("total"))
    audit = float(tot.max() / b_grid)
    t_max, peak = continuous_peak(fine_model, c, fine, tot)
    v = v / math.sqrt(peak)
    c = problem.lift(v)
    times = np.union1d(fine, [t_max]) if report_points is None else \
        np.union1d(np.linspace(0.0, problem.target.T, report_points), [t_max])
    ex = fine_model.expectations_at(c, times)
    term_vals = [float(problem.model.expectations_at(c, [t])[k][0]) for k, t in problem.target.terms]
    traces = {str(k): np.asarray(val) for k, val in ex.items()}
    return WavepacketSolution(
        v=v, coefficients=c, objective=float(np.prod(term_vals)),
        term_values=term_vals, times=times, probability_traces=traces,
        t_max=t_max, converged=converged, iterations=iterations,
        history=list(history), audit_max_total=audit,
        restart_objectives=[float(o) for o in objectives], target=problem.target,
        basis=problem.basis, params=problem.params,
    )


def dual_upper_bound(params: SystemParams, target: OptimizationTarget,
                     basis: FourierBasis | None = None, points: int | None = None,
                     iterations: int = 2000, step: float = 2.0) -> float:
    """Certified upper bound for a single-probability target.

    For any weights mu on the grid (mu_t >= 0, sum 1) and any v,
    a(v) <= lambda_max(A, sum_t mu_t B_t) * max_t b_t(v), so the smallest
    generalized eigenvalue found over mu bounds the grid-constrained optimum.
    mu is updated by exponentiated subgradient steps.
    """
    if target.l_M != 1:
        raise ValueError("the eigenvalue bound covers single-probability targets only")
    if basis is None:
        T_b, N = default_size(target.T, params)
        basis = build_basis(target.T, T_b, N, params)
    proj = projection_for(basis, params)
    problem = ProjectedProblem(params, basis, proj, target, points)
    (kind, _), idx = target.terms[0], problem.term_index[0]
    A = problem.projected_matrix(kind, idx)
    K = len(problem.times)
    mu = np.full(K, 1.0 / K)
    Qh = problem.Q.conj().T
    best = np.inf
    for it in range(iterations):
        B = Qh @ problem.model.weighted_total(mu) @ problem.Q
        B = 0.5 * (B + B.conj().T)
        # the ridge only lowers the eigenvalue by a relative ~1e-12
        B += 1e-12 * np.trace(B).real / len(B) * np.eye(len(B))
        lam, z = sla.eigh(A, B, subset_by_index=[len(B) - 1, len(B) - 1])
        best = min(best, float(lam[0]))
        tot = problem.totals(z[:, 0])
        mu = mu * np.exp(step / math.sqrt(it + 1) * tot / tot.max())
        mu = np.maximum(mu / mu.sum(), 1e-300)
    return best
