"""Dependence coefficients: the target/forget coefficient and baselines.

The target/forget coefficient (tfdc) scores a copula by where it sits
between its nearest "forget" copula (score 0) and its nearest "target"
copula (score 1) under transport distance. The baselines (pearson, spearman,
distance correlation, randomized dependence coefficient) exist for the power
benchmark and for sanity checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.stats import rankdata

from .copula import CopulaHistogram
from .errors import AmbiguousSpec, DegenerateColumn, InvalidData
from .transport import GroundCost, SinkhornConfig, sinkhorn_values_batch

__all__ = [
    "TFDCSpec",
    "distance_correlation",
    "pearson",
    "rdc",
    "spearman",
    "tfdc",
]


@dataclass(frozen=True)
class TFDCSpec:
    """Targets, forgets and the distance configuration for the coefficient."""

    targets: tuple[CopulaHistogram, ...]
    forgets: tuple[CopulaHistogram, ...]
    cost: GroundCost
    cfg: SinkhornConfig
    debias: bool = False

    def __post_init__(self):
        targets = tuple(self.targets)
        forgets = tuple(self.forgets)
        if not targets or not forgets:
            raise InvalidData("target and forget sets must both be non-empty")
        m = self.cost.m
        for h in (*targets, *forgets):
            if h.m != m:
                raise InvalidData(
                    f"histogram resolution {h.m} does not match ground cost ({m})"
                )
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "forgets", forgets)


def tfdc(c: CopulaHistogram, spec: TFDCSpec) -> float:
    """Target/forget dependence coefficient in [0, 1].

    min_l d(F_l, c) / (min_l d(F_l, c) + min_k d(c, T_k)); exactly 0 when c
    is bit-equal to a forget copula and exactly 1 when bit-equal to a target,
    short-circuiting before any transport solve so the boundary identities
    hold despite the entropic self-distance bias.
    """
    if c.m != spec.cost.m:
        raise InvalidData(f"copula resolution {c.m} does not match spec ({spec.cost.m})")
    in_targets = any(c.same_bits(t) for t in spec.targets)
    in_forgets = any(c.same_bits(f) for f in spec.forgets)
    if in_targets and in_forgets:
        raise AmbiguousSpec("copula belongs to both the target and the forget set")
    if in_forgets:
        return 0.0
    if in_targets:
        return 1.0

    if spec.debias:
        # One batch for d(x, c), d(x, x) over both sets, plus d(c, c) once.
        refs = list(spec.forgets) + list(spec.targets)
        rs = refs + refs + [c]
        cs = [c] * len(refs) + refs + [c]
        vals = sinkhorn_values_batch(rs, cs, spec.cost, spec.cfg)
        cross = vals[: len(refs)]
        self_ref = vals[len(refs): 2 * len(refs)]
        self_c = vals[-1]
        debiased = np.maximum(cross - 0.5 * (self_ref + self_c), 0.0)
        d_forget = float(debiased[: len(spec.forgets)].min())
        d_target = float(debiased[len(spec.forgets):].min())
    else:
        refs = list(spec.forgets) + list(spec.targets)
        vals = sinkhorn_values_batch(refs, [c] * len(refs), spec.cost, spec.cfg)
        d_forget = float(vals[: len(spec.forgets)].min())
        d_target = float(vals[len(spec.forgets):].min())

    denom = d_forget + d_target
    if denom <= 0.0:
        raise AmbiguousSpec("copula is at distance zero from both sets")
    return d_forget / denom


def _finite_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidData(f"expected equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise InvalidData("need at least 2 observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidData("inputs contain non-finite values")
    return x, y


def pearson(x, y) -> float:
    """Product-moment correlation."""
    x, y = _finite_pair(x, y)
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        raise DegenerateColumn("constant input has no correlation")
    r = float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))
    return min(1.0, max(-1.0, r))


def spearman(x, y) -> float:
    """Rank correlation: pearson on average-tie normalized ranks."""
    x, y = _finite_pair(x, y)
    if x.min() == x.max() or y.min() == y.max():
        raise DegenerateColumn("constant input has no rank correlation")
    return pearson(rankdata(x, method="average"), rankdata(y, method="average"))


def distance_correlation(x, y) -> float:
    """Distance correlation (V-statistic form, O(T^2) memory).

    Zero characterizes independence only in the population limit; on samples
    it is strictly positive, so tests assert null-simulation bounds instead.
    """
    x, y = _finite_pair(x, y)
    if x.size < 4:
        raise InvalidData("distance correlation needs at least 4 observations")
    if x.min() == x.max() or y.min() == y.max():
        raise DegenerateColumn("constant input")
    a = np.abs(x[:, None] - x[None, :])
    b = np.abs(y[:, None] - y[None, :])
    a = a - a.mean(axis=0) - a.mean(axis=1)[:, None] + a.mean()
    b = b - b.mean(axis=0) - b.mean(axis=1)[:, None] + b.mean()
    dcov2 = (a * b).mean()
    dvar_x = (a * a).mean()
    dvar_y = (b * b).mean()
    denom = np.sqrt(dvar_x * dvar_y)
    if denom <= 0.0:
        raise DegenerateColumn("degenerate distance variance")
    return float(np.sqrt(max(dcov2, 0.0) / denom))


def rdc(x, y, k: int = 20, s: float = 1.0 / 6.0, seed: int = 0) -> float:
    """Randomized dependence coefficient.

    Largest canonical correlation between k random sine/cosine features of
    the rank-transformed inputs. Both variables share one seeded projection
    matrix, so identical inputs give identical feature sets and swapping the
    arguments changes the value only at float rounding level. Deterministic
    given the seed.
    """
    x, y = _finite_pair(x, y)
    if x.size <= k:
        raise InvalidData(f"need more than k={k} observations, got {x.size}")
    if x.min() == x.max() or y.min() == y.max():
        raise DegenerateColumn("constant input")
    n = x.size
    w = np.random.default_rng(seed).standard_normal((2, k))

    def features(v):
        u = np.column_stack([rankdata(v, method="average") / n, np.ones(n)])
        proj = (s / 2.0) * u @ w
        return np.column_stack([np.cos(proj), np.sin(proj)])

    return _largest_canonical_correlation(features(x), features(y))


def _largest_canonical_correlation(fx: np.ndarray, fy: np.ndarray) -> float:
    fx = fx - fx.mean(axis=0)
    fy = fy - fy.mean(axis=0)
    qx, rx, _ = linalg.qr(fx, mode="economic", pivoting=True)
    qy, ry, _ = linalg.qr(fy, mode="economic", pivoting=True)

    def effective_rank(r):
        d = np.abs(np.diag(r))
        if d.size == 0 or d[0] == 0.0:
            return 0
        return int(np.sum(d > d[0] * max(fx.shape) * np.finfo(float).eps))

    kx, ky = effective_rank(rx), effective_rank(ry)
    if kx == 0 or ky == 0:
        return 0.0
    sv = linalg.svd(qx[:, :kx].T @ qy[:, :ky], compute_uv=False)
    return float(min(1.0, max(0.0, sv[0])))
