"""Entropic optimal transport between copula histograms on a fixed grid.

The ground cost is squared Euclidean distance between cell centers of the
m-by-m grid scaled to the unit square, so the exact optimum is a discretized
squared 2-Wasserstein distance. The Gibbs kernel of that cost separates into
two one-axis factors, which is what makes the scaling iterations fast: every
kernel application is two m-by-m contractions instead of one m^2-by-m^2
product. A dense LP oracle over the support cells provides exact values for
desk-scale instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import logsumexp

from .copula import CopulaHistogram
from .errors import (
    ConvergenceFailure,
    InvalidData,
    InvalidParameter,
    OracleTooLarge,
    UnderflowDetected,
)

__all__ = [
    "GroundCost",
    "SinkhornConfig",
    "TransportPlan",
    "default_lambda",
    "exact_ot",
    "pairwise_distance_matrix",
    "sinkhorn_distance",
    "sinkhorn_divergence",
    "wasserstein_barycenter",
]

_CHECK_EVERY = 10   # marginal residual is evaluated every this many iterations
_SOR_THETA = 1.7    # over-relaxation factor for the scaling updates (in (1, 2))


def default_lambda(m: int) -> float:
    """Default entropic sharpness: one grid step costs 1/m^2, so the kernel
    weight for a one-cell move is exp(-10) at this value. Sharp enough that
    entropic values track the exact optimum to well under 1% on copula-scale
    distances, soft enough that the scaling iterations converge in thousands
    of iterations rather than hundreds of thousands."""
    return 10.0 * m * m


@dataclass(frozen=True)
class GroundCost:
    """Squared Euclidean cost between cell centers of an m-by-m unit grid."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise InvalidParameter(f"grid resolution m must be >= 2, got {self.m}")

    @property
    def axis_cost(self) -> np.ndarray:
        """One-axis factor: axis_cost[i, j] = (i - j)^2 / m^2."""
        d = np.arange(self.m, dtype=float)
        return (d[:, None] - d[None, :]) ** 2 / (self.m * self.m)

    @property
    def matrix(self) -> np.ndarray:
        """Dense m^2-by-m^2 view; flat index (p, q) -> p * m + q."""
        ax = self.axis_cost
        m = self.m
        return (ax[:, None, :, None] + ax[None, :, None, :]).reshape(m * m, m * m)

    @property
    def euclidean_matrix(self) -> np.ndarray:
        """Non-squared (metric) version of `matrix`."""
        return np.sqrt(self.matrix)


@dataclass(frozen=True)
class SinkhornConfig:
    """Controls for the scaling iterations.

    lam is the sharpness of the dual form: the plan solves
    min <P, M> - h(P)/lam over the transportation polytope. Larger lam means
    closer to the exact optimum and slower convergence. tol is the iteration
    target for the L-inf marginal violation; the 1e-4 default reflects how
    scaling iterations behave at sharp lam, where marginals tighten at
    roughly 1/iterations while the value is already accurate. Sparse
    histograms can stagnate at their float64 equilibration floor above tol
    (the contraction factor degrades like 1 - exp(-lam * cost gap)); the
    solver then stops early, and the polytope rounding restores exact plan
    marginals either way, so returned values are always feasible-plan costs.
    """

    lam: float
    max_iter: int = 10000
    tol: float = 1e-4
    log_domain: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParameter(f"lam must be positive, got {self.lam}")
        if not self.tol > 0:
            raise InvalidParameter(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidParameter(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class TransportPlan:
    """Entropic plan rounded onto the transportation polytope.

    Stored as P = diag(u) K diag(v) + outer(err_r, err_c) / sum(err_r): the
    factored scaling part plus the rank-one feasibility correction that gives
    the plan exact marginals even when the scaling iterations stopped at a
    finite residual.
    """

    m: int
    lam: float
    log_u: np.ndarray   # (m, m) grid over the source cells
    log_v: np.ndarray   # (m, m) grid over the destination cells
    err_r: np.ndarray   # (m, m) leftover source mass closed by the correction
    err_c: np.ndarray   # (m, m) leftover destination mass
    correction: tuple | None = None  # (idx_r, idx_c, small_plan) or None for rank-one

    def _log_kernel(self) -> np.ndarray:
        return -self.lam * GroundCost(self.m).axis_cost

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column marginals of the plan, as m-by-m grids."""
        lk = self._log_kernel()
        row = np.exp(self.log_u + _log_kernel_apply(lk, self.log_v))
        col = np.exp(self.log_v + _log_kernel_apply(lk, self.log_u))
        s = self.err_r.sum()
        if s > 0.0:
            if self.correction is None:
                row = row + self.err_r * (self.err_c.sum() / s)
                col = col + self.err_c
            else:
                idx_r, idx_c, small = self.correction
                add_r = np.zeros(self.m * self.m)
                add_c = np.zeros(self.m * self.m)
                add_r[idx_r] = small.sum(axis=1)
                add_c[idx_c] = small.sum(axis=0)
                row = row + add_r.reshape(self.m, self.m)
                col = col + add_c.reshape(self.m, self.m)
        return row, col

    def dense(self) -> np.ndarray:
        """Materialize the full m^2-by-m^2 plan (small grids only)."""
        if self.m > 40:
            raise InvalidParameter(f"dense plan for m={self.m} would need m^4 entries")
        lk = self._log_kernel()
        m = self.m
        four = (
            self.log_u[:, :, None, None]
            + lk[:, None, :, None]
            + lk[None, :, None, :]
            + self.log_v[None, None, :, :]
        )
        plan = np.exp(four).reshape(m * m, m * m)
        s = self.err_r.sum()
        if s > 0.0:
            if self.correction is None:
                plan = plan + np.outer(self.err_r.ravel(), self.err_c.ravel()) / s
            else:
                idx_r, idx_c, small = self.correction
                plan[np.ix_(idx_r, idx_c)] += small
        return plan


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    # Lean logsumexp: high call volume makes scipy's generality too costly here.
    amax = np.max(a, axis=axis, keepdims=True)
    amax_safe = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - amax_safe), axis=axis))
    return out + np.squeeze(amax_safe, axis=axis)


def _log_kernel_apply(lk: np.ndarray, lw: np.ndarray) -> np.ndarray:
    """out[..., p, q] = LSE_{p', q'} (lk[p, p'] + lk[q, q'] + lw[..., p', q'])."""
    inner = _lse(lw[..., :, None, :] + lk, axis=-1)  # (..., p', q)
    return _lse(lk[:, :, None] + inner[..., None, :, :], axis=-2)


def _kernel_apply(k: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Plain-domain counterpart of `_log_kernel_apply` (k symmetric)."""
    return k @ w @ k


def _plan_value_log(axis_cost: np.ndarray, lk: np.ndarray,
                    lu: np.ndarray, lv: np.ndarray) -> np.ndarray:
    # <P, M> via the two pair-axis marginals of the plan; entries of the
    # exponentiated contractions are plan masses, so exp is overflow-safe.
    b1 = _lse(lu[..., :, :, None] + lk[None, :, :], axis=-2)   # (..., p, q')
    t1 = _lse(b1[..., :, None, :] + lv[..., None, :, :], axis=-1)  # (..., p, p')
    s1 = np.sum(axis_cost * np.exp(lk + t1), axis=(-2, -1))
    b2 = _lse(lu[..., :, :, None] + lk[:, None, :], axis=-3)   # (..., q, p')
    t2 = _lse(b2[..., :, :, None] + lv[..., None, :, :], axis=-2)  # (..., q, q')
    s2 = np.sum(axis_cost * np.exp(lk + t2), axis=(-2, -1))
    return s1 + s2


def _plan_value_plain(axis_cost: np.ndarray, k: np.ndarray,
                      u: np.ndarray, v: np.ndarray) -> float:
    w_row = k * (u @ k @ v.T)
    w_col = k * (u.T @ k @ v)
    return float(np.sum(axis_cost * (w_row + w_col)))


def _safe_log(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def _round_to_polytope(lk, lr, lc, R, C, lu, lv):
    """Project the factored plan onto the transportation polytope.

    Scales rows then columns down to never exceed their targets, and closes
    the remaining mass deficit with a rank-one term. The result has exact
    marginals, so its cost is a true upper bound on the transport optimum
    regardless of where the iterations stopped. Returns adjusted potentials
    plus the deficit grids (err_r, err_c).
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        row = np.exp(lu + _log_kernel_apply(lk, lv))
        lu = lu + np.minimum(lr - _safe_log(row), 0.0)
        lu = np.where(np.isnan(lu), -np.inf, lu)
        col = np.exp(lv + _log_kernel_apply(lk, lu))
        lv = lv + np.minimum(lc - _safe_log(col), 0.0)
        lv = np.where(np.isnan(lv), -np.inf, lv)
    err_r = np.clip(R - np.exp(lu + _log_kernel_apply(lk, lv)), 0.0, None)
    err_c = np.clip(C - np.exp(lv + _log_kernel_apply(lk, lu)), 0.0, None)
    return lu, lv, err_r, err_c


def _rank_one_cost(axis_cost, err_r, err_c):
    """<outer(err_r, err_c) / sum(err_r), M> for the separable squared cost."""
    s = err_r.sum()
    if s <= 0.0:
        return 0.0
    num = (
        err_r.sum(axis=1) @ axis_cost @ err_c.sum(axis=1)
        + err_r.sum(axis=0) @ axis_cost @ err_c.sum(axis=0)
    )
    return float(num / s)


_CLOSURE_LP_LIMIT = 4096  # max deficit-support product for the optimal closure


def _close_deficit(err_r: np.ndarray, err_c: np.ndarray, m: int):
    """Cost and coupling that close the rounding deficit.

    Small deficits are closed optimally with a tiny transport LP over their
    support cells; large-support deficits fall back to the rank-one coupling
    (their mass is tol-scale, so the coarser routing is immaterial there).
    Returns (cost, correction) where correction is None for the rank-one case
    or (idx_r, idx_c, small_plan) otherwise.
    """
    s_r = err_r.sum()
    s_c = err_c.sum()
    # The two deficits agree up to float rounding; once either is at noise
    # level the plan is already feasible to that level and closure would just
    # amplify rounding junk.
    if s_r <= 1e-12 or s_c <= 1e-12:
        return 0.0, None
    # Support cells carrying under a billionth of the deficit are rounding
    # noise: pruning them keeps the LP well-scaled at no meaningful cost to
    # the restored marginals.
    idx_r = np.flatnonzero(err_r.ravel() > 1e-9 * s_r)
    idx_c = np.flatnonzero(err_c.ravel() > 1e-9 * s_c)
    if idx_r.size == 0 or idx_c.size == 0:
        return 0.0, None
    if idx_r.size * idx_c.size > _CLOSURE_LP_LIMIT:
        return _rank_one_cost(GroundCost(m).axis_cost, err_r, err_c), None
    # Solve in unit-mass units: deficit totals can sit below the LP solver's
    # feasibility tolerance, where the raw problem looks degenerate to it.
    kept_r = err_r.ravel()[idx_r]
    kept_c = err_c.ravel()[idx_c]
    sub = _support_cost(idx_r, idx_c, m)
    value, small_plan = _transport_lp(
        sub, kept_r / kept_r.sum(), kept_c / kept_c.sum(), tight=False
    )
    return value * s_r, (idx_r, idx_c, small_plan * s_r)


def _anneal_schedule(lam: float, m: int) -> list[float]:
    # Sharpness ramp for warm starts: begin where lam * neighbor-cost ~ 1
    # (one grid step costs 1/m^2) and quadruple up to the requested lam.
    base = float(m * m)
    if lam <= base:
        return [lam]
    schedule = [lam]
    while schedule[-1] / 4.0 > base:
        schedule.append(schedule[-1] / 4.0)
    schedule.append(base)
    return schedule[::-1]


def _scaling_loop(lr, lc, lk, R, C, tol, max_iter, lu, lv):
    """Over-relaxed scaling updates with per-problem stopping.

    Over-relaxation keeps the plain Sinkhorn fixed point but contracts much
    faster in the sharp-kernel regime; where the residual stops improving the
    relaxation factor is walked back toward plain updates, whose float64
    stagnation floor is lower. Cells with zero mass keep their potentials
    pinned at -inf, outside the relaxation combination.

    The updates are elementwise-independent across the batch, and every
    problem freezes its potentials the moment its own stopping rule fires
    (tolerance reached, or stagnation at the equilibration floor), so each
    result is a pure function of its own inputs, never of its batch mates.
    Returns (lu, lv, residuals, iterations, stalled) with per-problem
    residuals and stall flags.
    """
    B = R.shape[0]
    sup_r = np.isfinite(lr)
    sup_c = np.isfinite(lc)
    neg_inf = np.float64(-np.inf)
    theta = np.full((B, 1, 1), _SOR_THETA)
    best = np.full(B, np.inf)
    stagnant = np.zeros(B, dtype=int)
    done = np.zeros(B, dtype=bool)
    stalled = np.zeros(B, dtype=bool)
    out_lu = lu.copy()
    out_lv = lv.copy()
    residuals = np.full(B, np.inf)
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(invalid="ignore"):
            step = lr - _log_kernel_apply(lk, lv)
            lu = np.where(sup_r, (1.0 - theta) * lu + theta * step, neg_inf)
            step = lc - _log_kernel_apply(lk, lu)
            lv = np.where(sup_c, (1.0 - theta) * lv + theta * step, neg_inf)
        if it % _CHECK_EVERY == 0 or it == max_iter:
            row = np.exp(lu + _log_kernel_apply(lk, lv))
            col = np.exp(lv + _log_kernel_apply(lk, lu))
            res = np.maximum(
                np.abs(row - R).max(axis=(-2, -1)),
                np.abs(col - C).max(axis=(-2, -1)),
            )
            open_ = ~done
            converged = open_ & (res < tol)
            no_gain = open_ & ~converged & (res > 0.9 * best)
            improving = open_ & ~converged & ~no_gain
            hot = theta[:, 0, 0] > 1.0
            theta[:, 0, 0] = np.where(
                no_gain & hot, np.maximum(1.0, theta[:, 0, 0] - 0.35), theta[:, 0, 0]
            )
            # Plain updates that no longer improve have hit the float64
            # equilibration floor: the contraction factor degrades like
            # 1 - exp(-lam * cost gap), so further iterations are futile.
            stagnant = np.where(no_gain & ~hot, stagnant + 1, stagnant)
            stagnant[improving] = 0
            newly_stalled = open_ & (stagnant >= 5)
            freeze = converged | newly_stalled
            if it == max_iter:
                freeze = freeze | open_
            stalled |= newly_stalled
            if np.any(freeze):
                out_lu[freeze] = lu[freeze]
                out_lv[freeze] = lv[freeze]
                residuals[freeze] = res[freeze]
                done |= freeze
            best = np.minimum(best, res)
            if done.all():
                break
    return out_lu, out_lv, residuals, it, stalled


def _lex_swap_mask(R: np.ndarray, C: np.ndarray) -> np.ndarray:
    """True where (R, C) should swap so argument order never affects results.

    The transport value is symmetric in its arguments, but the alternating
    updates are not; solving each pair in a canonical orientation makes
    d(r, c) and d(c, r) bitwise identical.
    """
    B = R.shape[0]
    mask = np.zeros(B, dtype=bool)
    for b in range(B):
        diff = R[b].ravel() != C[b].ravel()
        if diff.any():
            k = int(np.argmax(diff))
            mask[b] = R[b].ravel()[k] > C[b].ravel()[k]
    return mask


def _sinkhorn_log_many(R: np.ndarray, C: np.ndarray, cost: GroundCost, cfg: SinkhornConfig):
    """Batched log-domain scaling iterations with sharpness annealing.

    R, C have shape (B, m, m); returns (values, log_u, log_v, err_r, err_c,
    corrections, iters). Warm-starting through the sharpness ramp changes
    nothing about the fixed point at cfg.lam; it only accelerates
    convergence, and the schedule is a pure function of (lam, m). Every
    problem stops on its own rule, so batching never changes results. The
    final plan is rounded onto the polytope, making the returned values costs
    of exactly feasible plans.
    """
    swap = _lex_swap_mask(R, C)[:, None, None]
    R, C = np.where(swap, C, R), np.where(swap, R, C)
    lr = _safe_log(R)
    lc = _safe_log(C)
    lv = np.zeros_like(C)
    lu = np.zeros_like(R)
    schedule = _anneal_schedule(cfg.lam, cost.m)
    total_iters = 0
    residuals = np.full(R.shape[0], np.inf)
    stalled = np.zeros(R.shape[0], dtype=bool)
    for stage, lam_s in enumerate(schedule):
        lk = -lam_s * cost.axis_cost
        last = stage == len(schedule) - 1
        if last:
            tol, budget = cfg.tol, max(cfg.max_iter - total_iters, 1)
        else:
            tol, budget = max(cfg.tol, 1e-4), min(1000, cfg.max_iter)
        lu, lv, residuals, it, stalled = _scaling_loop(lr, lc, lk, R, C, tol, budget, lu, lv)
        total_iters += it
        if not last:
            ratio = schedule[stage + 1] / lam_s
            lu = lu * ratio
            lv = lv * ratio
    lk = -cfg.lam * cost.axis_cost
    failed = (residuals >= cfg.tol) & ~stalled
    if np.any(failed):
        values = _plan_value_log(cost.axis_cost, lk, lu, lv)
        worst = float(residuals[failed].max())
        raise ConvergenceFailure(
            f"sinkhorn residual {worst:.3e} >= tol {cfg.tol:.1e} after "
            f"{total_iters} iterations (lam={cfg.lam:g})",
            residual=worst,
            value=float(values[0]) if len(values) == 1 else values.tolist(),
        )
    lu, lv, err_r, err_c = _round_to_polytope(lk, lr, lc, R, C, lu, lv)
    values = _plan_value_log(cost.axis_cost, lk, lu, lv)
    corrections = []
    for b in range(R.shape[0]):
        extra, corr = _close_deficit(err_r[b], err_c[b], cost.m)
        values[b] += extra
        if swap[b, 0, 0] and corr is not None:
            corr = (corr[1], corr[0], corr[2].T)
        corrections.append(corr)
    # undo the canonical orientation so plans describe the caller's direction
    out_lu = np.where(swap, lv, lu)
    out_lv = np.where(swap, lu, lv)
    out_er = np.where(swap, err_c, err_r)
    out_ec = np.where(swap, err_r, err_c)
    return values, out_lu, out_lv, out_er, out_ec, corrections, total_iters


def _sinkhorn_plain(r: np.ndarray, c: np.ndarray, cost: GroundCost,
                    cfg: SinkhornConfig) -> tuple[float, np.ndarray, np.ndarray, int]:
    k = np.exp(-cfg.lam * cost.axis_cost)
    u = np.ones_like(r)
    v = np.ones_like(c)
    residual = np.inf
    for it in range(1, cfg.max_iter + 1):
        kv = _kernel_apply(k, v)
        if np.any((kv == 0.0) & (r > 0.0)):
            raise UnderflowDetected(
                f"kernel application underflowed at lam={cfg.lam:g}; "
                "retry with log_domain=True"
            )
        u = np.divide(r, kv, out=np.zeros_like(r), where=kv > 0.0)
        ku = _kernel_apply(k, u)
        if np.any((ku == 0.0) & (c > 0.0)):
            raise UnderflowDetected(
                f"kernel application underflowed at lam={cfg.lam:g}; "
                "retry with log_domain=True"
            )
        v = np.divide(c, ku, out=np.zeros_like(c), where=ku > 0.0)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise UnderflowDetected(
                f"scaling vectors overflowed at lam={cfg.lam:g}; "
                "retry with log_domain=True"
            )
        if it % _CHECK_EVERY == 0 or it == cfg.max_iter:
            residual = float(np.max(np.abs(u * _kernel_apply(k, v) - r)))
            if residual < cfg.tol:
                break
    if residual >= cfg.tol:
        raise ConvergenceFailure(
            f"sinkhorn residual {residual:.3e} >= tol {cfg.tol:.1e} "
            f"after {cfg.max_iter} iterations (lam={cfg.lam:g})",
            residual=residual,
            value=_plan_value_plain(cost.axis_cost, k, u, v),
        )
    lk = -cfg.lam * cost.axis_cost
    lu, lv, err_r, err_c = _round_to_polytope(
        lk, _safe_log(r), _safe_log(c), r, c, _safe_log(u), _safe_log(v)
    )
    value = float(_plan_value_log(cost.axis_cost, lk, lu, lv))
    extra, corr = _close_deficit(err_r, err_c, cost.m)
    return value + extra, lu, lv, err_r, err_c, corr, it


def _check_pair(r: CopulaHistogram, c: CopulaHistogram, cost: GroundCost):
    if r.m != c.m:
        raise InvalidData(f"histogram resolutions differ: {r.m} vs {c.m}")
    if r.m != cost.m:
        raise InvalidData(f"cost resolution {cost.m} does not match histograms ({r.m})")


def sinkhorn_distance(r: CopulaHistogram, c: CopulaHistogram, cost: GroundCost,
                      cfg: SinkhornConfig) -> tuple[float, TransportPlan, int]:
    """Dual-Sinkhorn distance <P_lam, M> plus the factored plan and iteration count.

    The value is always an upper bound on the exact transport optimum because
    the entropic plan is feasible for the unregularized problem.
    """
    _check_pair(r, c, cost)
    if cfg.log_domain:
        values, lu, lv, er, ec, corrs, iters = _sinkhorn_log_many(
            r.mass[None, :, :], c.mass[None, :, :], cost, cfg
        )
        plan = TransportPlan(cost.m, cfg.lam, lu[0], lv[0], er[0], ec[0], corrs[0])
        return float(values[0]), plan, iters
    value, lu, lv, er, ec, corr, iters = _sinkhorn_plain(r.mass, c.mass, cost, cfg)
    return value, TransportPlan(cost.m, cfg.lam, lu, lv, er, ec, corr), iters


def sinkhorn_values_batch(rs, cs, cost: GroundCost, cfg: SinkhornConfig) -> np.ndarray:
    """Dual-Sinkhorn values for aligned lists of histograms (log domain only)."""
    if len(rs) != len(cs) or not rs:
        raise InvalidData("need equally many source and destination histograms")
    for r, c in zip(rs, cs):
        _check_pair(r, c, cost)
    R = np.stack([h.mass for h in rs])
    C = np.stack([h.mass for h in cs])
    values = _sinkhorn_log_many(R, C, cost, cfg)[0]
    return np.asarray(values, dtype=float)


def sinkhorn_divergence(r: CopulaHistogram, c: CopulaHistogram, cost: GroundCost,
                        cfg: SinkhornConfig) -> float:
    """Debiased value S(r, c) = d(r, c) - (d(r, r) + d(c, c)) / 2.

    Symmetric by construction and exactly zero for identical inputs, which
    removes the entropic self-distance bias near the 0/1 ends of the
    target/forget coefficient.
    """
    if r.same_bits(c):
        return 0.0
    values = sinkhorn_values_batch([r, r, c], [c, r, c], cost, cfg)
    return float(values[0] - 0.5 * (values[1] + values[2]))


def pairwise_distance_matrix(hists, cost: GroundCost, cfg: SinkhornConfig,
                             batch_size: int = 64) -> np.ndarray:
    """Symmetric matrix of dual-Sinkhorn values over all unordered pairs.

    The diagonal stores the entropic self-distance (not forced to zero).
    Evaluation order is fixed, so the output never depends on scheduling.
    """
    hists = list(hists)
    n = len(hists)
    if n == 0:
        raise InvalidData("need at least one histogram")
    for h in hists:
        _check_pair(h, hists[0], cost)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    out = np.zeros((n, n))
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        try:
            values = sinkhorn_values_batch(
                [hists[i] for i, _ in chunk], [hists[j] for _, j in chunk], cost, cfg
            )
        except ConvergenceFailure as exc:
            exc.pair = chunk[0] if len(chunk) == 1 else tuple(chunk)
            raise
        for (i, j), val in zip(chunk, values):
            out[i, j] = out[j, i] = val
    return out


def wasserstein_barycenter(hists, weights, cost: GroundCost,
                           cfg: SinkhornConfig) -> CopulaHistogram:
    """Fixed-support entropic barycenter via iterative Bregman projections.

    Minimizes sum_i w_i d_lam(mu, nu_i) over histograms mu on the same grid.
    Stops when the barycenter iterate moves less than cfg.tol in L-inf.
    """
    hists = list(hists)
    if not hists:
        raise InvalidData("need at least one histogram")
    for h in hists:
        _check_pair(h, hists[0], cost)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(hists),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InvalidData("weights must be a simplex vector matching the histogram count")

    lk = -cfg.lam * cost.axis_cost
    la = _safe_log(np.stack([h.mass for h in hists]))  # (n, m, m)
    lu = np.zeros_like(la)
    mu = np.full((cost.m, cost.m), 1.0 / (cost.m * cost.m))
    residual = np.inf
    for it in range(1, cfg.max_iter + 1):
        lv = la - _log_kernel_apply(lk, lu)
        lkv = _log_kernel_apply(lk, lv)
        lmu = np.tensordot(w, lu + lkv, axes=(0, 0))
        lmu -= logsumexp(lmu)
        lu = lmu[None, :, :] - lkv
        if it % _CHECK_EVERY == 0 or it == cfg.max_iter:
            new_mu = np.exp(lmu)
            residual = float(np.max(np.abs(new_mu - mu)))
            mu = new_mu
            if residual < cfg.tol:
                break
    if residual >= cfg.tol:
        raise ConvergenceFailure(
            f"barycenter moved {residual:.3e} >= tol {cfg.tol:.1e} at iteration cap "
            f"{cfg.max_iter} (lam={cfg.lam:g})",
            residual=residual,
        )
    return CopulaHistogram(mu / mu.sum())


def _transport_lp(sub_cost: np.ndarray, r_sup: np.ndarray, c_sup: np.ndarray,
                  tight: bool = True):
    """Solve min <P, sub_cost> over plans with the given support marginals.

    The last column-sum constraint is implied by the others and dropped, which
    also absorbs float-level mismatch between sum(r_sup) and sum(c_sup). The
    tight tolerances serve the oracle; they must not be used on problems whose
    marginal entries approach 1e-10, where presolve reads them as zero.
    """
    n_r, n_c = sub_cost.shape
    rows_i = np.repeat(np.arange(n_r), n_c)
    cols_i = np.tile(np.arange(n_c), n_r)
    var = np.arange(n_r * n_c)
    a_rows = sparse.coo_matrix((np.ones(var.size), (rows_i, var)), shape=(n_r, var.size))
    keep = cols_i < n_c - 1
    a_cols = sparse.coo_matrix(
        (np.ones(int(keep.sum())), (cols_i[keep], var[keep])), shape=(n_c - 1, var.size)
    )
    a_eq = sparse.vstack([a_rows, a_cols]).tocsr()
    b_eq = np.concatenate([r_sup, c_sup[:-1]])
    options = {
        "primal_feasibility_tolerance": 1e-10,
        "dual_feasibility_tolerance": 1e-10,
    } if tight else {}
    res = linprog(
        sub_cost.ravel(),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        options=options,
    )
    if not res.success:  # pragma: no cover - feasible by construction
        raise ConvergenceFailure(f"transport LP failed: {res.message}")
    return float(res.fun), res.x.reshape(n_r, n_c)


def _support_cost(sup_r: np.ndarray, sup_c: np.ndarray, m: int) -> np.ndarray:
    pr, qr = sup_r // m, sup_r % m
    pc, qc = sup_c // m, sup_c % m
    return ((pr[:, None] - pc[None, :]) ** 2 + (qr[:, None] - qc[None, :]) ** 2) / (m * m)


def exact_ot(r: CopulaHistogram, c: CopulaHistogram, cost) -> tuple[float, np.ndarray]:
    """Exact transport optimum by LP over the support cells (test oracle).

    `cost` may be a GroundCost (squared Euclidean) or a precomputed
    m^2-by-m^2 matrix, e.g. its Euclidean square root. Returns the optimal
    value and the full plan matrix.
    """
    if isinstance(cost, GroundCost):
        _check_pair(r, c, cost)
        cost_matrix = None
        m = cost.m
    else:
        cost_matrix = np.asarray(cost, dtype=float)
        m = r.m
        if r.m != c.m or cost_matrix.shape != (m * m, m * m):
            raise InvalidData("cost matrix must be m^2 x m^2 for the common resolution")

    r_flat = r.mass.ravel()
    c_flat = c.mass.ravel()
    sup_r = np.flatnonzero(r_flat > 0.0)
    sup_c = np.flatnonzero(c_flat > 0.0)
    if sup_r.size + sup_c.size > 4096:
        raise OracleTooLarge(
            f"combined support {sup_r.size + sup_c.size} exceeds the 4096-cell oracle limit"
        )
    if cost_matrix is None:
        sub = _support_cost(sup_r, sup_c, m)
    else:
        sub = cost_matrix[np.ix_(sup_r, sup_c)]
    value, sub_plan = _transport_lp(sub, r_flat[sup_r], c_flat[sup_c])
    plan = np.zeros((m * m, m * m))
    plan[np.ix_(sup_r, sup_c)] = sub_plan
    return value, plan
