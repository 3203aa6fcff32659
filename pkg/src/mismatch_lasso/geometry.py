"""Convex hypothesis sets and Gaussian mean-width complexity measures.

A hypothesis set is one of a small tagged family of convex sets (balls,
boxes, capped subspaces, shifts and linear images of these). Each variant
has a closed-form support function h_K(g) = sup_{v in K} <g, v>, which is
all the Monte Carlo global mean width w(K) = E[h_K(g)], g standard normal,
needs. Conic complexity is only certified for the descent cone of the l1
ball at a sparse point, through the classical statistical-dimension upper
bound minimized over its free threshold parameter; everything else is
exposed as an upper bound, never as the exact local width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import gaussian_excess_sq

DEFAULT_TAU_GRID_SIZE = 4001
DEFAULT_TAU_MAX = 10.0


class UnboundedSetError(ValueError):
    """Raised when an operation needs a bounded set but got an unbounded one."""


@dataclass(frozen=True)
class L2Ball:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class L1Ball:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must satisfy lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass(frozen=True, eq=False)
class Subspace:
    """Span of orthonormal basis rows, optionally capped at Euclidean radius."""

    basis: np.ndarray
    radius: float | None = None

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if np.max(np.abs(B @ B.T - np.eye(B.shape[0]))) > 1e-10:
            raise ValueError("basis rows must be orthonormal within 1e-10")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("radius cap must be > 0 when given")
        object.__setattr__(self, "basis", B)


@dataclass(frozen=True, eq=False)
class Shifted:
    """inner + center."""

    inner: object
    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).ravel())


@dataclass(frozen=True, eq=False)
class LinearImage:
    """{M v : v in inner}. Supports h_K and widths only; it has no projection."""

    matrix: np.ndarray
    inner: object

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.atleast_2d(np.asarray(self.matrix, dtype=float)))


HypothesisSet = L2Ball | L1Ball | Box | Subspace | Shifted | LinearImage


def is_bounded(K) -> bool:
    if isinstance(K, (L2Ball, L1Ball, Box)):
        return True
    if isinstance(K, Subspace):
        return K.radius is not None
    if isinstance(K, (Shifted, LinearImage)):
        return is_bounded(K.inner)
    raise TypeError(f"not a hypothesis set: {K!r}")


def support_function(K, g) -> float | np.ndarray:
    """Support function h_K(g); ``g`` may carry leading batch dimensions.

    Convention for linear images: h_{M K}(g) = h_K(M^T g).
    """
    g = np.asarray(g, dtype=float)
    if isinstance(K, L2Ball):
        return K.radius * np.linalg.norm(g, axis=-1)
    if isinstance(K, L1Ball):
        return K.radius * np.max(np.abs(g), axis=-1)
    if isinstance(K, Box):
        return np.sum(np.maximum(K.lo * g, K.hi * g), axis=-1)
    if isinstance(K, Subspace):
        if K.radius is None:
            raise UnboundedSetError("uncapped subspaces have an infinite support function")
        return K.radius * np.linalg.norm(g @ K.basis.T, axis=-1)
    if isinstance(K, Shifted):
        return g @ K.center + support_function(K.inner, g)
    if isinstance(K, LinearImage):
        return support_function(K.inner, g @ K.matrix)
    raise TypeError(f"not a hypothesis set: {K!r}")


@dataclass(frozen=True)
class WidthEstimate:
    """A mean-width value together with its Monte Carlo precision."""

    value: float
    stderr: float
    n_mc: int
    kind: str

    def to_json(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n_mc": self.n_mc, "kind": self.kind}


def mean_width_global(K, d: int, n_mc: int = 20000, seed: int = 0) -> WidthEstimate:
    """Monte Carlo estimate of w(K) = E[sup_{v in K} <g, v>] in ambient dimension d."""
    if not is_bounded(K):
        raise UnboundedSetError("global mean width needs a bounded set")
    if n_mc < 2:
        raise ValueError("need at least 2 Monte Carlo draws")
    rng = np.random.default_rng(seed)
    vals = support_function(K, rng.standard_normal((n_mc, d)))
    return WidthEstimate(
        value=float(np.mean(vals)),
        stderr=float(np.std(vals, ddof=1) / math.sqrt(n_mc)),
        n_mc=n_mc,
        kind="global",
    )


def conic_width_l1_descent(d: int, s: int, tau_grid=None) -> WidthEstimate:
    """Certified upper bound on the conic width of the l1-ball descent cone.

    At an s-sparse point on the boundary of an l1 ball in R^d, the squared
    conic width is at most

        min over tau >= 0 of  s (1 + tau^2) + (d - s) E[(|g| - tau)_+^2],

    the statistical-dimension bound for that cone. The minimum is taken over
    ``tau_grid`` (default: 4001 points on [0, 10]) and the square root is
    returned. Deterministic, so the estimate carries zero stderr.
    """
    if not 1 <= s <= d:
        raise ValueError(f"sparsity must satisfy 1 <= s <= d, got s={s}, d={d}")
    if tau_grid is None:
        tau_grid = np.linspace(0.0, DEFAULT_TAU_MAX, DEFAULT_TAU_GRID_SIZE)
    tau_grid = np.asarray(tau_grid, dtype=float)
    delta = s * (1.0 + tau_grid**2) + (d - s) * gaussian_excess_sq(tau_grid)
    return WidthEstimate(value=float(math.sqrt(np.min(delta))), stderr=0.0, n_mc=0, kind="conic_l1")


def local_width_bound(K, z, t: float, n_mc: int = 20000, seed: int = 0) -> WidthEstimate:
    """Upper bound on the local mean width of K - z at scale t.

    Always includes the branch w(K - z) / t; when K is an l1 ball and z sits
    on its boundary, the descent-cone bound for the sparsity of z is also
    admissible, and the smaller branch wins. This is a certified upper
    bound, not the local width itself. The caller is responsible for z in K.
    """
    if not t > 0:
        raise ValueError(f"scale must be > 0, got {t}")
    z = np.asarray(z, dtype=float).ravel()
    shifted = Shifted(inner=K, center=-z)
    w_global = mean_width_global(shifted, z.size, n_mc=n_mc, seed=seed)
    best = WidthEstimate(value=w_global.value / t, stderr=w_global.stderr / t, n_mc=n_mc, kind="local_bound")
    if isinstance(K, L1Ball) and abs(np.sum(np.abs(z)) - K.radius) <= 1e-9:
        s = int(np.count_nonzero(np.abs(z) > 1e-12))
        if s >= 1:
            conic = conic_width_l1_descent(z.size, s)
            if conic.value < best.value:
                best = WidthEstimate(value=conic.value, stderr=0.0, n_mc=0, kind="local_bound")
    return best


def required_samples(width_sq: float, kappa: float, delta: float, regime: str, C: float = 1.0) -> int:
    """Sample-size calculator: ceil(C kappa^4 delta^-q width_sq), q = 4 or 2.

    ``regime='global'`` pairs with the squared global width of the
    transformed hypothesis set (exponent 4); ``regime='conic'`` pairs with
    the squared conic width at the target (exponent 2). The absolute
    constant C is not pinned by the theory; it defaults to 1.
    """
    if width_sq < 0:
        raise ValueError("squared width must be >= 0")
    if kappa <= 0 or C <= 0:
        raise ValueError("kappa and C must be positive")
    if not 0 < delta <= 1:
        raise ValueError(f"accuracy parameter must lie in (0, 1], got {delta}")
    if regime == "global":
        power = -4.0
    elif regime == "conic":
        power = -2.0
    else:
        raise ValueError(f"regime must be 'global' or 'conic', got {regime!r}")
    return int(math.ceil(C * kappa**4 * delta**power * width_sq))
