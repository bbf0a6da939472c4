"""Penalized B-spline regression on a single regressor.

The engine fits ``y_i = f(x_i) + noise`` by expanding ``f`` in a B-spline
basis over equally spaced knots and penalizing squared differences of
adjacent basis coefficients.  The penalty weight is selected by generalized
cross-validation over a fixed grid unless the caller pins it.  Fitted curves
extrapolate as constants outside the training range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import (
    EmptyInput,
    InvalidOrder,
    ShapeMismatch,
    SingularSystem,
    TooFewPoints,
)

# GCV is known to undersmooth badly on a small fraction of draws when the
# candidate grid reaches into the near-unpenalized regime; a floor of 1e-2
# keeps the selector stable without constraining any fit that actually wants
# smoothing.
DEFAULT_LAMBDA_GRID: tuple[float, ...] = tuple(np.logspace(-2.0, 4.0, 25))

#: Bounds on the automatic knot-interval count.
MIN_SEGMENTS = 5
MAX_SEGMENTS = 40

_RIDGE_JITTER = 1e-10
_DEGENERATE_SPAN = 1e-8
_DEGENERATE_HALFWIDTH = 1e-6
_RANGE_PAD_FRACTION = 1e-9


def default_segments(n: int) -> int:
    """Knot-interval count for ``n`` observations: ceil(sqrt(n)) clamped to [5, 40].

    Generous knots with penalty control; the cap keeps every solve at most
    ``MAX_SEGMENTS + degree`` dimensional.
    """
    return max(MIN_SEGMENTS, min(int(math.ceil(math.sqrt(n))), MAX_SEGMENTS))


@dataclass(frozen=True)
class SplineSpec:
    """Configuration of the penalized basis.

    ``segments=None`` defers the interval count to :func:`default_segments`
    at fit time.  ``lambda_fixed`` bypasses the GCV grid search entirely.
    """

    degree: int = 3
    segments: int | None = None
    penalty_order: int = 1
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    lambda_fixed: float | None = None

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.segments is not None and self.segments < 1:
            raise ValueError("segments must be >= 1")
        if self.penalty_order < 1:
            raise ValueError("penalty_order must be >= 1")
        if self.segments is not None and self.penalty_order > self.segments + self.degree - 1:
            raise ValueError("penalty_order must be <= segments + degree - 1")
        if self.lambda_fixed is not None:
            if not math.isfinite(self.lambda_fixed) or self.lambda_fixed <= 0:
                raise ValueError("lambda_fixed must be a positive real")
        else:
            grid = tuple(float(v) for v in self.lambda_grid)
            if not grid:
                raise ValueError("lambda_grid must be nonempty")
            if any(v <= 0 or not math.isfinite(v) for v in grid):
                raise ValueError("lambda_grid entries must be positive reals")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("lambda_grid must be strictly increasing")
            object.__setattr__(self, "lambda_grid", grid)

    def resolve_segments(self, n: int) -> int:
        return self.segments if self.segments is not None else default_segments(n)


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Strictly increasing interior knots plus degree-repeated boundary padding."""

    interior: np.ndarray
    degree: int

    def __post_init__(self) -> None:
        interior = np.asarray(self.interior, dtype=float)
        if interior.ndim != 1 or interior.size < 2:
            raise ValueError("interior knots need at least two points")
        if np.any(np.diff(interior) <= 0):
            raise ValueError("interior knots must be strictly increasing")
        interior.setflags(write=False)
        object.__setattr__(self, "interior", interior)

    @property
    def segments(self) -> int:
        return self.interior.size - 1

    @property
    def dimension(self) -> int:
        return self.segments + self.degree

    @property
    def lo(self) -> float:
        return float(self.interior[0])

    @property
    def hi(self) -> float:
        return float(self.interior[-1])

    def padded(self, degree: int | None = None) -> np.ndarray:
        """Full knot sequence with ``degree`` repeats beyond each boundary."""
        d = self.degree if degree is None else degree
        return np.concatenate(
            [np.full(d, self.interior[0]), self.interior, np.full(d, self.interior[-1])]
        )


def build_knots(x_values, spec: SplineSpec) -> KnotVector:
    """Equally spaced knots spanning the observed range of ``x_values``.

    The span is padded by ``1e-9 * range`` on each side so every observation
    falls strictly inside a knot interval.  A degenerate sample (range below
    1e-8) collapses to a single interval of half-width 1e-6 around the
    common value.
    """
    x = np.asarray(x_values, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInput("x_values is empty")
    lo = float(np.min(x))
    hi = float(np.max(x))
    if hi - lo < _DEGENERATE_SPAN:
        center = 0.5 * (lo + hi)
        interior = np.array(
            [center - _DEGENERATE_HALFWIDTH, center + _DEGENERATE_HALFWIDTH]
        )
    else:
        pad = _RANGE_PAD_FRACTION * (hi - lo)
        interior = np.linspace(lo - pad, hi + pad, spec.resolve_segments(x.size) + 1)
    return KnotVector(interior=interior, degree=spec.degree)


def _compact_basis(t: np.ndarray, degree: int, x: np.ndarray):
    """Nonzero B-spline values at each point of ``x``.

    Returns ``(first, vals)`` where ``vals[m, k]`` is basis function
    ``first[m] + k`` evaluated at ``x[m]`` for ``k = 0..degree``.  ``x`` must
    already lie within the knot span; the caller clamps.
    """
    n_basis = t.size - degree - 1
    j = np.searchsorted(t, x, side="right") - 1
    j = np.clip(j, degree, n_basis - 1)
    vals = np.zeros((x.size, degree + 1))
    vals[:, 0] = 1.0
    for r in range(1, degree + 1):
        saved = np.zeros(x.size)
        for k in range(r):
            t_right = t[j + k + 1]
            t_left = t[j + k - r + 1]
            # Positive for any interval index reachable after clamping.
            term = vals[:, k] / (t_right - t_left)
            vals[:, k] = saved + (t_right - x) * term
            saved = (x - t_left) * term
        vals[:, r] = saved
    return j - degree, vals


def basis_matrix(knots: KnotVector, degree: int, x) -> np.ndarray:
    """Dense design matrix of all basis functions evaluated at ``x``.

    Points are clamped to the knot span, making evaluation total.
    """
    t = knots.padded(degree)
    dim = knots.segments + degree
    xs = np.clip(np.asarray(x, dtype=float).ravel(), knots.lo, knots.hi)
    first, vals = _compact_basis(t, degree, xs)
    out = np.zeros((xs.size, dim))
    rows = np.arange(xs.size)[:, None]
    out[rows, first[:, None] + np.arange(degree + 1)[None, :]] = vals
    return out


def eval_basis(knots: KnotVector, degree: int, x: float) -> np.ndarray:
    """All basis-function values at a single point (clamped to the knot span)."""
    return basis_matrix(knots, degree, [x])[0]


def difference_penalty(dimension: int, order: int) -> np.ndarray:
    """Penalty matrix D'D for the ``order``-th difference operator D."""
    if order >= dimension:
        raise InvalidOrder(f"difference order {order} needs dimension > {order}")
    d = np.eye(dimension)
    for _ in range(order):
        d = np.diff(d, axis=0)
    return d.T @ d


@dataclass(frozen=True, eq=False)
class SplineFit:
    """A fitted penalized spline: basis geometry, coefficients, diagnostics."""

    knots: KnotVector
    degree: int
    coefficients: np.ndarray
    lam: float
    train_min: float
    train_max: float
    edf: float
    rss: float

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.shape != (self.knots.segments + self.degree,):
            raise ShapeMismatch("coefficient length must equal the basis dimension")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)


def predict(fit: SplineFit, x):
    """Evaluate the fitted curve, extending it as a constant outside the
    training range.

    Accepts a scalar or an array; returns the matching shape.
    """
    arr = np.asarray(x, dtype=float)
    flat = np.clip(arr.ravel(), fit.train_min, fit.train_max)
    t = fit.knots.padded(fit.degree)
    first, vals = _compact_basis(t, fit.degree, flat)
    idx = first[:, None] + np.arange(fit.degree + 1)[None, :]
    out = np.einsum("mk,mk->m", vals, fit.coefficients[idx])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _constant_fit(x: np.ndarray, y: np.ndarray, spec: SplineSpec) -> SplineFit:
    knots = build_knots(x, spec)
    ybar = float(np.mean(y))
    lam = spec.lambda_fixed if spec.lambda_fixed is not None else spec.lambda_grid[0]
    return SplineFit(
        knots=knots,
        degree=spec.degree,
        coefficients=np.full(knots.dimension, ybar),
        lam=float(lam),
        train_min=float(np.min(x)),
        train_max=float(np.max(x)),
        edf=1.0,
        rss=float(np.sum((y - ybar) ** 2)),
    )


def _normal_equations(x: np.ndarray, y: np.ndarray, spec: SplineSpec):
    """Knots plus B'B, B'y, y'y, and the penalty matrix.

    Exploits the basis's local support: with at most degree+1 nonzero values
    per observation, the cross products accumulate over index bands rather
    than through a dense n-by-dim design matrix.
    """
    knots = build_knots(x, spec)
    degree = spec.degree
    dim = knots.dimension
    t = knots.padded(degree)
    xs = np.clip(x, knots.lo, knots.hi)
    first, vals = _compact_basis(t, degree, xs)
    width = degree + 1
    btb = np.zeros(dim * dim)
    bty = np.zeros(dim)
    for a in range(width):
        bty += np.bincount(first + a, weights=vals[:, a] * y, minlength=dim)
        for c in range(width):
            flat = (first + a) * dim + (first + c)
            btb += np.bincount(flat, weights=vals[:, a] * vals[:, c], minlength=dim * dim)
    penalty = difference_penalty(dim, spec.penalty_order)
    return knots, btb.reshape(dim, dim), bty, float(y @ y), penalty


def _penalized_solve(btb, bty, yty, penalty, lam, n):
    """Solve the penalized normal equations at one smoothing weight.

    Returns ``(beta, edf, rss, gcv)``; ``gcv`` is +inf for a saturated fit
    (edf >= n).
    """
    a = btb + lam * penalty
    a[np.diag_indices_from(a)] += _RIDGE_JITTER
    try:
        factor = cho_factor(a, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise SingularSystem(
            f"normal equations singular at lambda={lam:g} despite ridge jitter"
        ) from exc
    solved = cho_solve(
        factor, np.column_stack([bty, btb]), check_finite=False
    )
    beta = solved[:, 0]
    edf = float(np.trace(solved[:, 1:]))
    rss = max(float(yty - 2.0 * beta @ bty + beta @ btb @ beta), 0.0)
    if edf >= n:
        return beta, edf, rss, math.inf
    return beta, edf, rss, n * rss / (n - edf) ** 2


def _validate_xy(x, y):
    xa = np.asarray(x, dtype=float).ravel()
    ya = np.asarray(y, dtype=float).ravel()
    if xa.size != ya.size:
        raise ShapeMismatch(f"x has {xa.size} points but y has {ya.size}")
    if xa.size == 0:
        raise EmptyInput("empty regression sample")
    return xa, ya


def fit_pspline(x, y, spec: SplineSpec | None = None) -> SplineFit:
    """Fit a penalized spline of ``y`` on ``x``.

    The smoothing weight minimizes GCV over ``spec.lambda_grid`` unless
    ``spec.lambda_fixed`` is set.  A regressor with no spread (range below
    1e-8) short-circuits to the constant fit ``mean(y)``; otherwise at least
    ``2 * (degree + 1)`` observations are required.
    """
    if spec is None:
        spec = SplineSpec()
    xa, ya = _validate_xy(x, y)
    if float(np.max(xa)) - float(np.min(xa)) < _DEGENERATE_SPAN:
        return _constant_fit(xa, ya, spec)
    n = xa.size
    if n < 2 * (spec.degree + 1):
        raise TooFewPoints(
            f"need at least {2 * (spec.degree + 1)} points for degree {spec.degree}, got {n}"
        )
    knots, btb, bty, yty, penalty = _normal_equations(xa, ya, spec)
    if spec.lambda_fixed is not None:
        candidates: tuple[float, ...] = (spec.lambda_fixed,)
    else:
        candidates = spec.lambda_grid
    best = None
    for lam in candidates:
        beta, edf, rss, score = _penalized_solve(btb, bty, yty, penalty, lam, n)
        if best is None or score < best[0]:
            best = (score, lam, beta, edf, rss)
    _, lam, beta, edf, rss = best
    return SplineFit(
        knots=knots,
        degree=spec.degree,
        coefficients=beta,
        lam=float(lam),
        train_min=float(np.min(xa)),
        train_max=float(np.max(xa)),
        edf=edf,
        rss=rss,
    )


def gcv_score(x, y, spec: SplineSpec | None, lam: float) -> float:
    """Generalized cross-validation score ``n * rss / (n - edf)^2`` at ``lam``.

    Recomputes the fit from scratch; +inf marks a saturated fit and is never
    selected by the grid search.
    """
    if spec is None:
        spec = SplineSpec()
    if lam <= 0:
        raise ValueError("lambda must be positive")
    xa, ya = _validate_xy(x, y)
    n = xa.size
    if float(np.max(xa)) - float(np.min(xa)) < _DEGENERATE_SPAN:
        rss = float(np.sum((ya - np.mean(ya)) ** 2))
        return math.inf if n <= 1 else n * rss / (n - 1.0) ** 2
    if n < 2 * (spec.degree + 1):
        raise TooFewPoints(
            f"need at least {2 * (spec.degree + 1)} points for degree {spec.degree}, got {n}"
        )
    _, btb, bty, yty, penalty = _normal_equations(xa, ya, spec)
    _, _, _, score = _penalized_solve(btb, bty, yty, penalty, float(lam), n)
    return score
