"""Shared linear-algebra substrate: tensor factors, density operators, spectra.

Conventions enforced here and relied on everywhere else:

* subsystem order is significant and never silently permuted,
* Hermitian input is accepted up to an absolute deviation of 1e-10 and
  symmetrized on construction,
* traces are normalized to exactly 1 when within 1e-10, otherwise rejected,
* eigenvalues in [-1e-10, 0) count as zero; anything more negative is an error.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_ATOL = 1e-10
EIGENVALUE_CLAMP = 1e-10
TRACE_ATOL = 1e-10


class GuardExceeded(ValueError):
    """A desk-scale dimension or enumeration guard was hit.

    Kept as a ValueError subclass so library callers need not care, while the
    CLI can map it to its own exit code."""


@dataclass(frozen=True)
class SpaceShape:
    """Ordered tensor-factor dimensions, optionally labeled."""

    dims: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be positive, got {dims}")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(dims):
                raise ValueError(
                    f"{len(labels)} labels for {len(dims)} factors"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def subshape(self, keep: Sequence[int]) -> "SpaceShape":
        keep = _check_factor_indices(keep, len(self.dims))
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[i] for i in keep)
        return SpaceShape(tuple(self.dims[i] for i in keep), labels)


def as_shape(shape) -> SpaceShape:
    """Coerce an int, a dims sequence, or a SpaceShape to a SpaceShape."""
    if isinstance(shape, SpaceShape):
        return shape
    if isinstance(shape, (int, np.integer)):
        return SpaceShape((int(shape),))
    return SpaceShape(tuple(int(d) for d in shape))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_factor_indices(keep: Sequence[int], n: int) -> tuple[int, ...]:
    keep = tuple(int(i) for i in keep)
    if any(i < 0 or i >= n for i in keep):
        raise ValueError(f"factor index out of range for {n} factors: {keep}")
    if len(set(keep)) != len(keep):
        raise ValueError(f"duplicate factor index in {keep}")
    if any(a >= b for a, b in zip(keep, keep[1:])):
        # reordering subsystems must be explicit, not a side effect of keep
        raise ValueError(f"keep indices must be strictly increasing, got {keep}")
    return keep


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive semidefinite trace-one operator on a SpaceShape.

    The matrix is checked Hermitian within 1e-10, symmetrized, trace-normalized
    and stored read-only as complex128.
    """

    shape: SpaceShape
    matrix: np.ndarray

    def __post_init__(self):
        shape = as_shape(self.shape)
        object.__setattr__(self, "shape", shape)
        m = np.array(self.matrix, dtype=complex)
        d = shape.dim
        if m.shape != (d, d):
            raise ValueError(f"matrix has shape {m.shape}, expected ({d}, {d})")
        dev = np.abs(m - m.conj().T).max()
        if dev > HERMITICITY_ATOL:
            raise ValueError(f"matrix deviates from Hermitian by {dev:.3e}")
        m = (m + m.conj().T) / 2
        tr = float(m.trace().real)
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"trace is {tr!r}, expected 1 within {TRACE_ATOL}")
        m /= tr
        low = float(np.linalg.eigvalsh(m)[0])
        if low < -EIGENVALUE_CLAMP:
            raise ValueError(f"negative eigenvalue {low:.3e} beyond clamp window")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.shape.dim

    def eigenvalues(self) -> np.ndarray:
        """Descending, clamped to [0, 1]."""
        return clamp_spectrum(np.linalg.eigvalsh(self.matrix)[::-1])


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector on a SpaceShape; normalized on construction."""

    shape: SpaceShape
    vector: np.ndarray

    def __post_init__(self):
        shape = as_shape(self.shape)
        object.__setattr__(self, "shape", shape)
        v = np.array(self.vector, dtype=complex).reshape(-1)
        if v.shape != (shape.dim,):
            raise ValueError(f"vector has length {v.size}, expected {shape.dim}")
        norm = float(np.linalg.norm(v))
        if norm <= 0.0:
            raise ValueError("zero vector cannot be normalized")
        v /= norm
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)

    def density(self) -> DensityOperator:
        return DensityOperator(self.shape, np.outer(self.vector, self.vector.conj()))


def clamp_spectrum(w: np.ndarray) -> np.ndarray:
    """Zero out eigenvalues in [-1e-10, 0); error below the window."""
    w = np.asarray(w, dtype=float)
    low = float(w.min(initial=0.0))
    if low < -EIGENVALUE_CLAMP:
        raise ValueError(f"eigenvalue {low:.3e} beyond clamp window")
    return np.where(w < 0.0, 0.0, w)


def tensor(a, b):
    """Tensor product of two states; factor lists concatenate in order."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        shape = SpaceShape(a.shape.dims + b.shape.dims, _cat_labels(a.shape, b.shape))
        return PureState(shape, np.kron(a.vector, b.vector))
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        shape = SpaceShape(a.shape.dims + b.shape.dims, _cat_labels(a.shape, b.shape))
        return DensityOperator(shape, np.kron(a.matrix, b.matrix))
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def _cat_labels(a: SpaceShape, b: SpaceShape):
    if a.labels is None and b.labels is None:
        return None
    la = a.labels if a.labels is not None else ("",) * len(a)
    lb = b.labels if b.labels is not None else ("",) * len(b)
    return la + lb


def partial_trace_raw(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace on a raw matrix; kept factors stay in their original order."""
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    keep = _check_factor_indices(keep, n)
    drop = sorted(set(range(n)) - set(keep), reverse=True)
    t = m.reshape(dims + dims)
    live = n
    for ax in drop:
        t = np.trace(t, axis1=ax, axis2=ax + live)
        live -= 1
    d = math.prod(dims[i] for i in keep) if keep else 1
    return t.reshape(d, d)


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    """Trace out every factor not listed in keep (strictly increasing indices)."""
    out = partial_trace_raw(rho.matrix, rho.shape.dims, keep)
    return DensityOperator(rho.shape.subshape(keep), out)


def permute_factors_raw(m: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a raw matrix: output factor j is input factor order[j]."""
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order {order} is not a permutation of {n} factors")
    t = m.reshape(dims + dims)
    d = math.prod(dims)
    return t.transpose(order + tuple(i + n for i in order)).reshape(d, d)


def permute_factors(rho: DensityOperator, order: Sequence[int]) -> DensityOperator:
    out = permute_factors_raw(rho.matrix, rho.shape.dims, order)
    dims = tuple(rho.shape.dims[i] for i in order)
    labels = rho.shape.labels
    if labels is not None:
        labels = tuple(labels[i] for i in order)
    return DensityOperator(SpaceShape(dims, labels), out)


def eig_hermitian(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues descending with matching eigenvector columns."""
    m = np.asarray(m, dtype=complex)
    dev = np.abs(m - m.conj().T).max()
    if dev > HERMITICITY_ATOL:
        raise ValueError(f"matrix deviates from Hermitian by {dev:.3e}")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return w[::-1].copy(), v[:, ::-1].copy()


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False).sum())


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    """Unnormalized trace-norm distance ||a - b||_1."""
    if a.shape.dims != b.shape.dims:
        raise ValueError(f"shape mismatch {a.shape.dims} vs {b.shape.dims}")
    return trace_norm(a.matrix - b.matrix)


def random_density(shape, rank: int | None = None, seed=0) -> DensityOperator:
    """Ginibre-induced random state: G of the given rank, return GG+/tr(GG+)."""
    shp = as_shape(shape)
    d = shp.dim
    r = d if rank is None else int(rank)
    if not 1 <= r <= d:
        raise ValueError(f"rank {r} outside [1, {d}]")
    rng = as_rng(seed)
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    m = g @ g.conj().T
    return DensityOperator(shp, m / m.trace().real)


def random_pure_vector(dim: int, rng) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def purification(rho: DensityOperator, atol: float = 1e-12) -> PureState:
    """Purify onto an appended reference factor of dimension rank(rho)."""
    w, v = eig_hermitian(rho.matrix)
    w = clamp_spectrum(w)
    rank = max(1, int((w > atol).sum()))
    d = rho.dim
    vec = np.zeros(d * rank, dtype=complex)
    for i in range(rank):
        vec += math.sqrt(w[i]) * np.kron(v[:, i], _basis(rank, i))
    shape = SpaceShape(rho.shape.dims + (rank,))
    return PureState(shape, vec)


def _basis(dim: int, index: int) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    return e


def basis_ket(dim: int, index: int) -> np.ndarray:
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} outside [0, {dim})")
    return _basis(dim, index)


def max_mixed(shape) -> DensityOperator:
    shp = as_shape(shape)
    return DensityOperator(shp, np.eye(shp.dim) / shp.dim)


def bell_state() -> DensityOperator:
    """(|00> + |11>)/sqrt(2) on two qubits."""
    v = (basis_ket(4, 0) + basis_ket(4, 3)) / math.sqrt(2)
    return PureState(SpaceShape((2, 2)), v).density()


def ghz_state(n: int = 3) -> DensityOperator:
    if n < 2:
        raise ValueError("GHZ needs at least two qubits")
    d = 2**n
    v = (basis_ket(d, 0) + basis_ket(d, d - 1)) / math.sqrt(2)
    return PureState(SpaceShape((2,) * n), v).density()


def werner_state(p: float) -> DensityOperator:
    """p * singlet + (1 - p) * I/4 on two qubits; separable exactly when p <= 1/3."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing weight {p} outside [0, 1]")
    singlet = (basis_ket(4, 1) - basis_ket(4, 2)) / math.sqrt(2)
    m = p * np.outer(singlet, singlet.conj()) + (1.0 - p) * np.eye(4) / 4
    return DensityOperator(SpaceShape((2, 2)), m)


def product_state(*factors: DensityOperator) -> DensityOperator:
    if not factors:
        raise ValueError("need at least one factor")
    out = factors[0]
    for f in factors[1:]:
        out = tensor(out, f)
    return out


def matrix_from_literal(lit) -> np.ndarray:
    """Decode a nested row-major array of [re, im] pairs."""
    arr = np.asarray(lit, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("matrix literal must be rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def matrix_to_literal(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return np.stack([m.real, m.imag], axis=-1).tolist()


def content_fingerprint(*parts) -> str:
    """Stable sha256 over arrays, numbers and strings, for cache keys and reports."""
    h = hashlib.sha256()
    for p in _flatten(parts):
        if isinstance(p, np.ndarray):
            a = np.ascontiguousarray(p, dtype=complex)
            h.update(b"ndarray")
            h.update(repr(a.shape).encode())
            h.update(a.tobytes())
        elif isinstance(p, (bool, int, float, complex, np.number)):
            h.update(repr(p).encode())
        elif isinstance(p, str):
            h.update(p.encode())
        elif p is None:
            h.update(b"none")
        else:
            raise TypeError(f"cannot fingerprint {type(p).__name__}")
        h.update(b"\x00")
    return h.hexdigest()


def _flatten(parts) -> Iterable:
    for p in parts:
        if isinstance(p, (list, tuple)):
            yield from _flatten(p)
        else:
            yield p
