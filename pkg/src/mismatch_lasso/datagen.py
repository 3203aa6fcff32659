"""Synthetic data generation for semi-parametric regression experiments.

The sampling process is always the same three-step pipeline:

1. draw latent factors ``s_i`` (rows of an (n, d) matrix) i.i.d. from an
   isotropic distribution (each coordinate centered with unit variance),
2. correlate them through a fixed mixing matrix, ``x_i = A s_i``,
3. produce outputs ``y_i`` from the latent factors according to one of the
   observation models below (single index, dithered one-bit, logistic,
   multi index, variable selection, superimposed, noisy split).

Conventions
-----------
- Samples are stored in shape (n, d): rows are observations.
- Index sets (active variables) are 0-based.
- All randomness is derived from explicit integer seeds via counter-based
  Philox substreams, allocated in fixed-size row chunks. Regenerating with
  the same seed is bit-exact, and enlarging n never perturbs earlier rows,
  so sweeps over the sample size reuse their common prefix.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

# Rows are generated in independent chunks of this size; each chunk has its
# own counter-derived Philox stream, so the layout is independent of n.
ROW_CHUNK = 4096

_DIST_KINDS = ("gaussian", "rademacher", "uniform_scaled")

# Per-kind sub-Gaussian constants under the moment-grid convention of
# mismatch.subgaussian_norm: sup over q in {1,2,4,8,16} of
# q^(-1/2) * (E|v|^q)^(1/q) for the 1-D marginal. The sup is attained at
# q = 1 for all three kinds.
_SUBGAUSSIAN_CONSTANT = {
    "gaussian": math.sqrt(2.0 / math.pi),
    "rademacher": 1.0,
    "uniform_scaled": math.sqrt(3.0) / 2.0,
}


def _chunked_rows(seed: int, tag: int, n: int, draw) -> np.ndarray:
    """Fill n rows from counter-based substreams, chunk by chunk.

    ``draw(rng, m)`` must return an array whose leading dimension is m.
    Chunk k uses the Philox stream with key (seed, tag) and counter k, so
    rows below any given index never depend on the total row count.
    """
    out = None
    for start in range(0, n, ROW_CHUNK):
        m = min(ROW_CHUNK, n - start)
        rng = np.random.Generator(
            np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, tag], counter=[0, 0, 0, start])
        )
        block = draw(rng, m)
        if out is None:
            out = np.empty((n,) + block.shape[1:], dtype=block.dtype)
        out[start : start + m] = block
    return out


@dataclass(frozen=True)
class LatentDistribution:
    """An isotropic latent-factor distribution on R^d.

    Parameters
    ----------
    kind : str
        One of ``gaussian``, ``rademacher``, ``uniform_scaled``. Every kind
        has centered coordinates with unit variance; ``uniform_scaled`` is
        uniform on [-sqrt(3), sqrt(3)].
    dim : int
        Ambient dimension d >= 1.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in _DIST_KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}; choose from {_DIST_KINDS}")
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")

    @property
    def subgaussian_constant(self) -> float:
        """Moment-grid sub-Gaussian norm of a 1-D marginal (fixed per kind)."""
        return _SUBGAUSSIAN_CONSTANT[self.kind]


def sample_latent(dist: LatentDistribution, n: int, seed: int) -> np.ndarray:
    """Draw an (n, d) matrix with rows i.i.d. from ``dist``, deterministically in ``seed``."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    d = dist.dim
    if dist.kind == "gaussian":
        draw = lambda rng, m: rng.standard_normal((m, d))
    elif dist.kind == "rademacher":
        draw = lambda rng, m: rng.integers(0, 2, size=(m, d)).astype(float) * 2.0 - 1.0
    else:
        root3 = math.sqrt(3.0)
        draw = lambda rng, m: rng.uniform(-root3, root3, size=(m, d))
    return _chunked_rows(seed, 0, n, draw)


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """A deterministic p x d factor-loading matrix with its rank recorded."""

    entries: np.ndarray
    rank: int

    @classmethod
    def from_array(cls, A) -> "MixingMatrix":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(entries=A, rank=int(np.linalg.matrix_rank(A)))

    @classmethod
    def identity(cls, d: int) -> "MixingMatrix":
        return cls(entries=np.eye(d), rank=d)

    @property
    def shape(self):
        return self.entries.shape


def isotropic_decomposition(sigma, rank: int | None = None, tol: float = 1e-10) -> MixingMatrix:
    """Factor a PSD covariance as A A^T with A = U diag(sqrt(eigenvalues)).

    Eigenvalues are sorted descending; eigenvalues below ``tol`` are treated
    as rank deficiency and dropped (or checked against ``rank`` if given).
    Each column's sign is fixed so that its largest-magnitude entry is
    positive, which removes the eigenvector sign ambiguity and makes the
    output deterministic.

    Raises
    ------
    ValueError
        If ``sigma`` is not symmetric within ``tol``, has an eigenvalue
        below ``-tol``, or has fewer than ``rank`` significant eigenvalues.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError(f"covariance must be square, got shape {sigma.shape}")
    if np.max(np.abs(sigma - sigma.T)) > tol:
        raise ValueError("covariance is not symmetric within tolerance 1e-10")
    vals, vecs = np.linalg.eigh(sigma)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    if vals.size and vals[-1] < -tol:
        raise ValueError(f"covariance has negative eigenvalue {vals[-1]:.3e}")
    significant = int(np.sum(vals > tol))
    if rank is None:
        rank = significant
    elif rank > significant:
        raise ValueError(f"requested rank {rank} but only {significant} eigenvalues exceed tolerance")
    vals, vecs = vals[:rank], vecs[:, :rank]
    # Sign fix: largest-magnitude entry of every column made positive.
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(rank)])
    signs[signs == 0] = 1.0
    A = vecs * signs * np.sqrt(vals)
    return MixingMatrix(entries=A, rank=rank)


def apply_mixing(A: MixingMatrix, latent: np.ndarray) -> np.ndarray:
    """Row-wise inputs x_i = A s_i, i.e. latent @ A^T."""
    entries = A.entries if isinstance(A, MixingMatrix) else np.asarray(A, dtype=float)
    latent = np.asarray(latent, dtype=float)
    if latent.shape[1] != entries.shape[1]:
        raise ValueError(
            f"latent dimension {latent.shape[1]} does not match mixing shape {entries.shape}"
        )
    return latent @ entries.T


# ---------------------------------------------------------------------------
# Scalar and multivariate output functions
# ---------------------------------------------------------------------------

_OUTPUT_FN_KINDS = ("sign", "identity", "identity_plus_gauss", "tanh", "abs", "sign_with_flip")


@dataclass(frozen=True)
class OutputFn:
    """A scalar output nonlinearity, possibly with independent randomness.

    ``sigma`` is used by ``identity_plus_gauss`` (additive noise level) and
    ``keep_prob`` by ``sign_with_flip`` (probability of keeping the sign;
    a flip happens with probability 1 - keep_prob, independently per row).
    """

    kind: str
    sigma: float = 0.0
    keep_prob: float = 1.0

    def __post_init__(self):
        if self.kind not in _OUTPUT_FN_KINDS:
            raise ValueError(f"unknown output function {self.kind!r}; choose from {_OUTPUT_FN_KINDS}")
        if self.kind == "identity_plus_gauss" and self.sigma < 0:
            raise ValueError("noise level must be >= 0")
        if self.kind == "sign_with_flip" and not 0.0 <= self.keep_prob <= 1.0:
            raise ValueError("keep probability must lie in [0, 1]")

    def apply(self, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Realize y = g(t), drawing any internal randomness from ``rng``."""
        if self.kind == "sign":
            return np.sign(t)
        if self.kind == "identity":
            return t.copy()
        if self.kind == "identity_plus_gauss":
            return t + self.sigma * rng.standard_normal(t.shape)
        if self.kind == "tanh":
            return np.tanh(t)
        if self.kind == "abs":
            return np.abs(t)
        flips = np.where(rng.random(t.shape) < self.keep_prob, 1.0, -1.0)
        return flips * np.sign(t)

    def conditional_mean(self, t: np.ndarray) -> np.ndarray:
        """E[g(t) | t], with the independent randomness integrated out."""
        if self.kind == "sign":
            return np.sign(t)
        if self.kind in ("identity", "identity_plus_gauss"):
            return np.asarray(t, dtype=float)
        if self.kind == "tanh":
            return np.tanh(t)
        if self.kind == "abs":
            return np.abs(t)
        return (2.0 * self.keep_prob - 1.0) * np.sign(t)


_MULTI_FN_KINDS = ("sum", "sum_of_signs", "sign_of_first", "product")


@dataclass(frozen=True)
class MultiFn:
    """A deterministic output function of several latent coordinates."""

    kind: str

    def __post_init__(self):
        if self.kind not in _MULTI_FN_KINDS:
            raise ValueError(f"unknown multi-variable function {self.kind!r}; choose from {_MULTI_FN_KINDS}")

    def apply(self, V: np.ndarray) -> np.ndarray:
        """Evaluate on an (n, S) array of projections, one output per row."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        if self.kind == "sum":
            return V.sum(axis=1)
        if self.kind == "sum_of_signs":
            return np.sign(V).sum(axis=1)
        if self.kind == "sign_of_first":
            return np.sign(V[:, 0])
        return V.prod(axis=1)


# ---------------------------------------------------------------------------
# Observation models
# ---------------------------------------------------------------------------


def _as_index(z) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0 or not np.any(z):
        raise ValueError("index vector must be nonzero")
    return z


@dataclass(frozen=True, eq=False)
class Linear:
    """y = <s, index> + noise, noise ~ N(0, noise_sd^2) independent per row."""

    index: np.ndarray
    noise_sd: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "index", _as_index(self.index))
        if self.noise_sd < 0:
            raise ValueError("noise level must be >= 0")


@dataclass(frozen=True, eq=False)
class SIM:
    """Single-index observations y = g(<s, index>)."""

    index: np.ndarray
    g: OutputFn

    def __post_init__(self):
        object.__setattr__(self, "index", _as_index(self.index))


@dataclass(frozen=True, eq=False)
class DitheredOneBit:
    """y = delta * sign(<s, index> + tau), tau ~ Uniform[-delta, delta] per row."""

    index: np.ndarray
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "index", _as_index(self.index))
        if not self.delta > 0:
            raise ValueError(f"dither level must be > 0, got {self.delta}")


@dataclass(frozen=True, eq=False)
class GLMLogistic:
    """Binary outputs with P(y = 1 | s) = 1 / (1 + exp(-<s, index>))."""

    index: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "index", _as_index(self.index))


@dataclass(frozen=True, eq=False)
class MultiIndex:
    """y = G(<s, z_1>, ..., <s, z_S>) for an orthonormal system of index rows."""

    indices: np.ndarray
    G: MultiFn

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.indices, dtype=float))
        gram = Z @ Z.T
        if np.max(np.abs(gram - np.eye(Z.shape[0]))) > 1e-10:
            raise ValueError("index vectors must be orthonormal within 1e-10")
        object.__setattr__(self, "indices", Z)


@dataclass(frozen=True, eq=False)
class VariableSelection:
    """y = G(s_{k_1}, ..., s_{k_S}) for a 0-based active set of coordinates."""

    active: tuple
    dim: int
    G: MultiFn

    def __post_init__(self):
        active = tuple(int(k) for k in self.active)
        if len(active) == 0:
            raise ValueError("active set must be nonempty")
        if list(active) != sorted(set(active)):
            raise ValueError("active set must be sorted and duplicate-free")
        if active[0] < 0 or active[-1] >= self.dim:
            raise ValueError(f"active set must lie in [0, {self.dim})")
        object.__setattr__(self, "active", active)

    @property
    def indices(self) -> np.ndarray:
        Z = np.zeros((len(self.active), self.dim))
        Z[np.arange(len(self.active)), list(self.active)] = 1.0
        return Z


@dataclass(frozen=True, eq=False)
class Superimposed:
    """Averaged superposition of single-index observations.

    M independent latent blocks s^1, ..., s^M share one unit-norm index;
    the observed pair is (s, y) with s = M^(-1/2) * sum_j s^j and
    y = M^(-1/2) * sum_j g_j(<s^j, index>).
    """

    index: np.ndarray
    fns: tuple

    def __post_init__(self):
        z = _as_index(self.index)
        if abs(np.linalg.norm(z) - 1.0) > 1e-10:
            raise ValueError("superimposed index vector must have unit norm")
        object.__setattr__(self, "index", z)
        fns = tuple(self.fns)
        if len(fns) == 0:
            raise ValueError("at least one branch function is required")
        object.__setattr__(self, "fns", fns)


@dataclass(frozen=True, eq=False)
class NoisySplit:
    """Latent factors split as s = (v, n); y = G(v) reads only the first d1 coordinates."""

    d1: int
    d2: int
    G: MultiFn

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 0:
            raise ValueError("need d1 >= 1 and d2 >= 0")


ObservationModel = (
    Linear | SIM | DitheredOneBit | GLMLogistic | MultiIndex | VariableSelection | Superimposed | NoisySplit
)

_SINGLE_INDEX_MODELS = (Linear, SIM, DitheredOneBit, GLMLogistic)


def model_dim(model) -> int:
    """Latent dimension the model prescribes."""
    if isinstance(model, _SINGLE_INDEX_MODELS) or isinstance(model, Superimposed):
        return model.index.size
    if isinstance(model, MultiIndex):
        return model.indices.shape[1]
    if isinstance(model, VariableSelection):
        return model.dim
    if isinstance(model, NoisySplit):
        return model.d1 + model.d2
    raise TypeError(f"not an observation model: {model!r}")


def model_digest(model) -> str:
    """Stable hex digest of the model's kind and parameters."""
    parts = [type(model).__name__]
    for name, value in sorted(vars(model).items()):
        if isinstance(value, np.ndarray):
            parts.append(f"{name}={value.tobytes().hex()}")
        else:
            parts.append(f"{name}={value!r}")
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


def _check_dim(model, d: int):
    want = model_dim(model)
    if want is not None and want != d:
        raise ValueError(f"model dimension {want} does not match latent dimension {d}")


def generate_outputs(model, latent: np.ndarray, seed: int):
    """Generate outputs for every row of ``latent`` under ``model``.

    Row-level randomness (noise, dither thresholds, logistic coins, bit
    flips) is drawn from counter-based substreams of ``seed``, independent
    of the stream that produced ``latent``. Returns a length-n vector,
    except for ``Superimposed`` where the extra M-1 latent blocks are drawn
    internally (standard normal, matching the gaussian-only generation of
    build_sample_set) and the returned value is the pair ``(outputs,
    averaged_latent)``; the averaged block is what any downstream estimator
    should see as input.
    """
    latent = np.asarray(latent, dtype=float)
    n, d = latent.shape
    _check_dim(model, d)

    if isinstance(model, Linear):
        y = latent @ model.index
        if model.noise_sd > 0:
            noise = _chunked_rows(seed, 1, n, lambda rng, m: rng.standard_normal(m))
            y = y + model.noise_sd * noise
    elif isinstance(model, SIM):
        t = latent @ model.index
        y = _chunked_rows(seed, 1, n, _apply_fn_chunked(model.g, t))
    elif isinstance(model, DitheredOneBit):
        t = latent @ model.index
        tau = _chunked_rows(seed, 1, n, lambda rng, m: rng.uniform(-model.delta, model.delta, size=m))
        y = model.delta * np.sign(t + tau)
    elif isinstance(model, GLMLogistic):
        t = latent @ model.index
        p = expit(t)
        u = _chunked_rows(seed, 1, n, lambda rng, m: rng.random(m))
        y = (u < p).astype(float)
    elif isinstance(model, MultiIndex):
        y = model.G.apply(latent @ model.indices.T)
    elif isinstance(model, VariableSelection):
        y = model.G.apply(latent[:, list(model.active)])
    elif isinstance(model, NoisySplit):
        y = model.G.apply(latent[:, : model.d1])
    elif isinstance(model, Superimposed):
        M = len(model.fns)
        blocks = [latent]
        for j in range(1, M):
            blocks.append(_chunked_rows(seed, 10 + j, n, lambda rng, m, dd=d: rng.standard_normal((m, dd))))
        y = np.zeros(n)
        for j, (block, g) in enumerate(zip(blocks, model.fns)):
            t = block @ model.index
            part = _chunked_rows(seed, 100 + j, n, _apply_fn_chunked(g, t))
            y += part
        y /= math.sqrt(M)
        averaged = sum(blocks) / math.sqrt(M)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("generated outputs are not finite")
        return y, averaged
    else:
        raise TypeError(f"not an observation model: {model!r}")

    if not np.all(np.isfinite(y)):
        raise FloatingPointError("generated outputs are not finite")
    return y


def _apply_fn_chunked(g: OutputFn, t: np.ndarray):
    """Adapter feeding successive slices of t to OutputFn.apply per chunk."""
    offset = {"pos": 0}

    def draw(rng, m):
        lo = offset["pos"]
        offset["pos"] += m
        return g.apply(t[lo : lo + m], rng)

    return draw


def dithering_scale(kappa: float, lam: float, n: int, C: float = 1.0) -> float:
    """Dither level C * kappa * lam * sqrt(log 2n) matched to the sample size."""
    if kappa <= 0 or lam <= 0 or C <= 0:
        raise ValueError("kappa, lam and C must be positive")
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    return C * kappa * lam * math.sqrt(math.log(2 * n))


# ---------------------------------------------------------------------------
# Sample sets
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SampleSet:
    """A generated triplet (latent, inputs, outputs) plus the seed that made it."""

    latent: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    seed: int
    extras: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.latent.shape[0]


def build_sample_set(dist: LatentDistribution, model, n: int, seed: int, A: MixingMatrix | None = None) -> SampleSet:
    """Draw latent factors, mix them, and generate outputs, all from one seed.

    For ``Superimposed`` models the stored latent block is the averaged one
    (the only input an estimator ever sees); the raw first block is kept in
    ``extras['raw_first_block']``.
    """
    _check_dim(model, dist.dim)
    latent = sample_latent(dist, n, seed)
    extras = {}
    if isinstance(model, Superimposed):
        if dist.kind != "gaussian":
            raise ValueError("superimposed generation draws Gaussian blocks; use a gaussian distribution")
        outputs, averaged = generate_outputs(model, latent, seed)
        extras["raw_first_block"] = latent
        latent = averaged
    else:
        outputs = generate_outputs(model, latent, seed)
    if A is None:
        A = MixingMatrix.identity(dist.dim)
    inputs = apply_mixing(A, latent)
    return SampleSet(latent=latent, inputs=inputs, outputs=outputs, seed=seed, extras=extras)


def save_sample_set(ss: SampleSet, csv_path) -> Path:
    """Write samples to CSV (columns s_1..s_d, x_1..x_p, y) plus a JSON manifest."""
    csv_path = Path(csv_path)
    n, d = ss.latent.shape
    p = ss.inputs.shape[1]
    header = [f"s_{j+1}" for j in range(d)] + [f"x_{j+1}" for j in range(p)] + ["y"]
    with open(csv_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            row = [repr(float(v)) for v in ss.latent[i]] + [repr(float(v)) for v in ss.inputs[i]]
            fh.write(",".join(row + [repr(float(ss.outputs[i]))]) + "\n")
    manifest = {"seed": int(ss.seed), "n": int(n), "d": int(d), "p": int(p)}
    manifest_path = csv_path.with_suffix(".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_sample_set(csv_path) -> SampleSet:
    """Read a CSV written by :func:`save_sample_set` back into a SampleSet."""
    csv_path = Path(csv_path)
    manifest = json.loads(csv_path.with_suffix(".manifest.json").read_text())
    d, p = manifest["d"], manifest["p"]
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    return SampleSet(
        latent=data[:, :d],
        inputs=data[:, d : d + p],
        outputs=data[:, d + p],
        seed=manifest["seed"],
    )
