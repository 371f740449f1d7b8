"""Kraus channels with an optional classical flag register.

A flagged channel keeps its flag as an explicit final tensor factor whose
basis states carry sector labels (an erasure bit, or the surviving subset of
positions). Sector structure is stored alongside the full Kraus list so that
information quantities can be evaluated block by block.

Products of flagged channels are represented canonically: quantum output
factors first, in constituent order, with a single merged trailing flag
register. That equals the literal tensor product up to a factor permutation
and is the only form constructed here; nothing is reordered silently after
construction.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .qcore import (
    as_rng,
    as_shape,
    basis_ket,
    DensityOperator,
    eig_hermitian,
    GuardExceeded,
    matrix_from_literal,
    matrix_to_literal,
    max_mixed,
    SpaceShape,
    trace_norm,
)

COMPLETENESS_ATOL = 1e-10
HERALDED_DIM_GUARD = 4096
CHOI_DIM_GUARD = 4096
_SUPEROP_ENTRY_GUARD = 1 << 21


@dataclass(frozen=True, eq=False)
class FlagSector:
    """One classical block: label, firing probability, and a CPTP Kraus set.

    When the sector output factorizes as G(rho) (x) C with a constant state C
    (replaced positions of a heralded channel, the failure branch of an
    erasure), active_kraus holds G and constant_spectrum the spectrum of C.
    Spectral quantities of the block are then computed on the active part
    alone; the factorization reorders factors, which no spectrum sees.
    """

    label: object
    weight: float
    kraus: tuple[np.ndarray, ...]
    active_kraus: tuple[np.ndarray, ...] | None = None
    constant_spectrum: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Completely positive trace-preserving map between multi-factor spaces."""

    in_shape: SpaceShape
    out_shape: SpaceShape
    kraus: tuple[np.ndarray, ...]
    flag_sectors: tuple[FlagSector, ...] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "in_shape", as_shape(self.in_shape))
        object.__setattr__(self, "out_shape", as_shape(self.out_shape))
        kraus = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        object.__setattr__(self, "kraus", kraus)
        din, dout = self.in_shape.dim, self.out_shape.dim
        if not kraus:
            raise ValueError("channel needs at least one Kraus operator")
        for k in kraus:
            if k.shape != (dout, din):
                raise ValueError(f"Kraus shape {k.shape}, expected ({dout}, {din})")
        if self.flag_sectors is not None:
            self._validate_sectors()
        else:
            acc = np.zeros((din, din), dtype=complex)
            for k in kraus:
                acc += k.conj().T @ k
            dev = np.abs(acc - np.eye(din)).max()
            if dev > COMPLETENESS_ATOL:
                raise ValueError(f"Kraus completeness violated by {dev:.3e}")

    def _validate_sectors(self):
        sectors = self.flag_sectors
        din = self.in_shape.dim
        nsec = len(sectors)
        if len(self.out_shape) < 2 or self.out_shape.dims[-1] != nsec:
            raise ValueError(
                f"flag register must be the last output factor with dimension {nsec}"
            )
        labels = [s.label for s in sectors]
        if len(set(labels)) != nsec:
            raise ValueError("sector labels must be distinct")
        total = 0.0
        dq = self.quantum_out_shape.dim
        for s in sectors:
            if not -1e-12 <= s.weight <= 1.0 + 1e-12:
                raise ValueError(f"sector weight {s.weight} outside [0, 1]")
            total += s.weight
            acc = np.zeros((din, din), dtype=complex)
            for k in s.kraus:
                if k.shape != (dq, din):
                    raise ValueError(
                        f"sector Kraus shape {k.shape}, expected ({dq}, {din})"
                    )
                acc += k.conj().T @ k
            dev = np.abs(acc - np.eye(din)).max()
            if dev > COMPLETENESS_ATOL:
                raise ValueError(
                    f"sector {s.label!r} Kraus completeness violated by {dev:.3e}"
                )
            if s.active_kraus is not None:
                acc = np.zeros((din, din), dtype=complex)
                for k in s.active_kraus:
                    acc += k.conj().T @ k
                dev = np.abs(acc - np.eye(din)).max()
                if dev > COMPLETENESS_ATOL:
                    raise ValueError(
                        f"sector {s.label!r} active Kraus not trace preserving ({dev:.3e})"
                    )
        if abs(total - 1.0) > COMPLETENESS_ATOL:
            raise ValueError(f"sector weights sum to {total!r}, expected 1")

    @property
    def quantum_out_shape(self) -> SpaceShape:
        """Output factors without the trailing flag register."""
        if self.flag_sectors is None:
            return self.out_shape
        return self.out_shape.subshape(range(len(self.out_shape) - 1))

    @cached_property
    def superoperator(self) -> np.ndarray | None:
        """Row-major vec action sum_k K (x) conj(K), or None above the size guard."""
        din, dout = self.in_shape.dim, self.out_shape.dim
        if din * din * dout * dout > _SUPEROP_ENTRY_GUARD:
            return None
        ks = np.stack(self.kraus)
        s = np.einsum("kab,kcd->acbd", ks, ks.conj())
        return s.reshape(dout * dout, din * din)

    @cached_property
    def sector_superops(self) -> np.ndarray | None:
        """Stacked per-sector superoperators (nsec, dq^2, din^2), or None."""
        if self.flag_sectors is None:
            return None
        din = self.in_shape.dim
        dq = self.quantum_out_shape.dim
        nsec = len(self.flag_sectors)
        if nsec * din * din * dq * dq > _SUPEROP_ENTRY_GUARD:
            return None
        out = np.zeros((nsec, dq * dq, din * din), dtype=complex)
        for i, s in enumerate(self.flag_sectors):
            ks = np.stack(s.kraus)
            out[i] = np.einsum("kab,kcd->acbd", ks, ks.conj()).reshape(dq * dq, din * din)
        return out

    @cached_property
    def active_superops(self) -> np.ndarray | None:
        """Superoperators of the sectors' active parts, padded to a common output dim.

        Shape (nsec, dmax^2, din^2); the active dact x dact output of sector i
        lands in the upper-left block, the rest stays zero. None when any
        sector lacks the factorization (spectral work then falls back to
        sector_superops on the full blocks).
        """
        if self.flag_sectors is None:
            return None
        if any(s.active_kraus is None for s in self.flag_sectors):
            return None
        din = self.in_shape.dim
        dacts = [s.active_kraus[0].shape[0] for s in self.flag_sectors]
        dmax = max(dacts)
        nsec = len(self.flag_sectors)
        if nsec * din * din * dmax * dmax > _SUPEROP_ENTRY_GUARD:
            return None
        out = np.zeros((nsec, dmax * dmax, din * din), dtype=complex)
        for i, (s, da) in enumerate(zip(self.flag_sectors, dacts)):
            ks = np.stack(s.active_kraus)
            sup = np.einsum("kab,kcd->acbd", ks, ks.conj()).reshape(da * da, din * din)
            rows = (np.arange(da)[:, None] * dmax + np.arange(da)[None, :]).reshape(-1)
            out[i, rows, :] = sup
        return out

    def sector_weights(self) -> np.ndarray:
        if self.flag_sectors is None:
            raise ValueError("channel has no flag sectors")
        return np.array([s.weight for s in self.flag_sectors], dtype=float)


def channel_from_sectors(
    in_shape,
    quantum_out_shape,
    sectors: Sequence[FlagSector],
    name: str = "",
    meta: dict | None = None,
) -> KrausChannel:
    """Assemble the full channel rho -> sum_y w_y Phi_y(rho) (x) |y><y|."""
    in_shape = as_shape(in_shape)
    qshape = as_shape(quantum_out_shape)
    sectors = tuple(sectors)
    nsec = len(sectors)
    dq, din = qshape.dim, in_shape.dim
    full: list[np.ndarray] = []
    for y, s in enumerate(sectors):
        root = math.sqrt(max(s.weight, 0.0))
        for k in s.kraus:
            padded = np.zeros((dq * nsec, din), dtype=complex)
            padded[y::nsec, :] = root * k
            full.append(padded)
    out_shape = SpaceShape(qshape.dims + (nsec,))
    return KrausChannel(
        in_shape, out_shape, tuple(full), flag_sectors=sectors, name=name,
        meta=dict(meta or {}),
    )


def _sandwich(kraus: Sequence[np.ndarray], m: np.ndarray) -> np.ndarray:
    acc = kraus[0] @ m @ kraus[0].conj().T
    for k in kraus[1:]:
        acc += k @ m @ k.conj().T
    return acc


def apply_raw(channel: KrausChannel, m: np.ndarray) -> np.ndarray:
    """Apply to a raw matrix living exactly on the channel input space."""
    s = channel.superoperator
    dout = channel.out_shape.dim
    if s is not None:
        return (s @ m.reshape(-1)).reshape(dout, dout)
    return _sandwich(channel.kraus, m)


def sector_apply_raw(channel: KrausChannel, m: np.ndarray) -> np.ndarray:
    """Stacked unnormalized sector outputs w_y * Phi_y(m), shape (nsec, dq, dq)."""
    if channel.flag_sectors is None:
        raise ValueError("channel has no flag sectors")
    dq = channel.quantum_out_shape.dim
    w = channel.sector_weights()
    ss = channel.sector_superops
    if ss is not None:
        outs = (ss @ m.reshape(-1)).reshape(len(w), dq, dq)
    else:
        outs = np.stack([_sandwich(s.kraus, m) for s in channel.flag_sectors])
    return w[:, None, None] * outs


def apply(channel: KrausChannel, rho: DensityOperator, acting_on: Sequence[int] | None = None) -> DensityOperator:
    """Apply the channel to a contiguous run of factors, identity elsewhere.

    The acted factors are replaced in place by the channel's output factors.
    """
    dims = rho.shape.dims
    n = len(dims)
    idx = tuple(range(n)) if acting_on is None else tuple(int(i) for i in acting_on)
    if not idx or any(b - a != 1 for a, b in zip(idx, idx[1:])):
        raise ValueError(f"acting_on must be a contiguous ascending run, got {idx}")
    if idx[0] < 0 or idx[-1] >= n:
        raise ValueError(f"acting_on {idx} out of range for {n} factors")
    acted = tuple(dims[i] for i in idx)
    if acted != channel.in_shape.dims:
        raise ValueError(
            f"channel expects input factors {channel.in_shape.dims}, got {acted}"
        )
    start, stop = idx[0], idx[-1] + 1
    new_dims = dims[:start] + channel.out_shape.dims + dims[stop:]
    if start == 0 and stop == n:
        out = apply_raw(channel, rho.matrix)
        return DensityOperator(SpaceShape(new_dims), out)
    pre = math.prod(dims[:start])
    post = math.prod(dims[stop:])
    din, dout = channel.in_shape.dim, channel.out_shape.dim
    t = rho.matrix.reshape(pre, din, post, pre, din, post)
    out = np.zeros((pre, dout, post, pre, dout, post), dtype=complex)
    for k in channel.kraus:
        out += np.einsum("oi,piqrjs,Oj->poqrOs", k, t, k.conj(), optimize=True)
    d = pre * dout * post
    return DensityOperator(SpaceShape(new_dims), out.reshape(d, d))


def identity_channel(d: int) -> KrausChannel:
    shp = as_shape(d)
    return KrausChannel(
        shp, shp, (np.eye(shp.dim, dtype=complex),), name=f"identity({d})",
        meta={"declared_chi": math.log2(shp.dim), "strongly_additive": True},
    )


def trivial_channel(in_shape, sigma: DensityOperator | None = None) -> KrausChannel:
    """Constant channel rho -> sigma; sigma defaults to maximally mixed on the input space."""
    in_shape = as_shape(in_shape)
    if sigma is None:
        sigma = max_mixed(in_shape)
    w, v = eig_hermitian(sigma.matrix)
    din, dout = in_shape.dim, sigma.dim
    kraus = []
    for j in range(dout):
        if w[j] <= 1e-14:
            continue
        for i in range(din):
            kraus.append(math.sqrt(w[j]) * np.outer(v[:, j], basis_ket(din, i).conj()))
    return KrausChannel(
        in_shape, sigma.shape, tuple(kraus), name="trivial",
        meta={"declared_chi": 0.0, "declared_chi_pot": 0.0, "constant": True,
              "constant_spectrum": tuple(float(x) for x in w if x > 1e-14)},
    )


def depolarizing_channel(d: int, p: float) -> KrausChannel:
    """rho -> (1-p) rho + p I/d, Kraus from the discrete displacement set."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise weight {p} outside [0, 1]")
    shp = as_shape(d)
    dd = shp.dim
    omega = np.exp(2j * np.pi / dd)
    shift = np.roll(np.eye(dd), 1, axis=0).astype(complex)
    clock = np.diag(omega ** np.arange(dd))
    kraus = []
    for a in range(dd):
        for b in range(dd):
            w = math.sqrt(1.0 - p + p / dd**2) if a == b == 0 else math.sqrt(p) / dd
            kraus.append(w * np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
    top = 1.0 - p + p / dd
    rest = p / dd
    spec = [top] + [rest] * (dd - 1)
    chi = math.log2(dd) + sum(x * math.log2(x) for x in spec if x > 0)
    return KrausChannel(
        shp, shp, tuple(kraus), name=f"depolarizing({d},{p})",
        meta={"declared_chi": chi, "strongly_additive": True},
    )


def dephasing_channel(p: float) -> KrausChannel:
    """Qubit rho -> (1-p) rho + p Z rho Z."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise weight {p} outside [0, 1]")
    z = np.diag([1.0, -1.0]).astype(complex)
    kraus = (math.sqrt(1.0 - p) * np.eye(2, dtype=complex), math.sqrt(p) * z)
    return KrausChannel(
        as_shape(2), as_shape(2), kraus, name=f"dephasing({p})",
        meta={"declared_chi": 1.0, "strongly_additive": True},
    )


def erasure_channel(inner: KrausChannel, lam: float, sigma: DensityOperator | None = None) -> KrausChannel:
    """Generalized erasure: lam * inner(rho) (x) |success> + (1-lam) * sigma (x) |failure>."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"success weight {lam} outside [0, 1]")
    if inner.flag_sectors is not None:
        raise ValueError("inner channel of an erasure must be unflagged")
    theta = trivial_channel(inner.in_shape, sigma)
    if theta.out_shape.dim != inner.out_shape.dim:
        raise ValueError("sigma must live on the inner channel's output space")
    sectors = (
        FlagSector("success", lam, inner.kraus, active_kraus=inner.kraus),
        FlagSector(
            "failure", 1.0 - lam, theta.kraus,
            active_kraus=_trace_kraus(inner.in_shape.dim),
            constant_spectrum=np.asarray(theta.meta["constant_spectrum"]),
        ),
    )
    return channel_from_sectors(
        inner.in_shape, inner.out_shape, sectors,
        name=f"erasure({inner.name or 'channel'},{lam})",
    )


def _resolve_sigmas(phis: Sequence[KrausChannel], sigma) -> list[DensityOperator]:
    if sigma is None:
        return [max_mixed(phi.out_shape) for phi in phis]
    if isinstance(sigma, DensityOperator):
        sigma = [sigma] * len(phis)
    sigma = list(sigma)
    if len(sigma) != len(phis):
        raise ValueError(f"{len(sigma)} replacement states for {len(phis)} positions")
    for s, phi in zip(sigma, phis):
        if s.dim != phi.out_shape.dim:
            raise ValueError("replacement state dimension mismatch")
    return sigma


def _position_product(kraus_sets: Sequence[Sequence[np.ndarray]]) -> tuple[np.ndarray, ...]:
    out = [np.eye(1, dtype=complex)]
    for ks in kraus_sets:
        out = [np.kron(a, k) for a in out for k in ks]
    return tuple(out)


def _trace_kraus(d: int) -> tuple[np.ndarray, ...]:
    """Kraus rows of the trace map rho -> tr(rho), the active part of a replacement."""
    eye = np.eye(d, dtype=complex)
    return tuple(eye[i : i + 1, :] for i in range(d))


def flagged_switch_channel(
    phis: Sequence[KrausChannel],
    psis: Sequence[KrausChannel],
    k: int,
    name: str = "",
) -> KrausChannel:
    """Uniformly heralded switch: subset R of size k gets Phi, the rest get Psi.

    The flag register (last output factor) records R; sector labels are the
    k-subsets of positions in lexicographic order.
    """
    n = len(phis)
    if n == 0:
        raise ValueError("need at least one position")
    if len(psis) != n:
        raise ValueError(f"{len(psis)} fallback channels for {n} positions")
    if not 0 <= k <= n:
        raise ValueError(f"subset size {k} outside [0, {n}]")
    for phi, psi in zip(phis, psis):
        if phi.flag_sectors is not None or psi.flag_sectors is not None:
            raise ValueError("constituent channels must be unflagged")
        if phi.in_shape.dims != psi.in_shape.dims or phi.out_shape.dims != psi.out_shape.dims:
            raise ValueError("Phi and Psi must share input and output spaces per position")
    in_shape = SpaceShape(tuple(d for phi in phis for d in phi.in_shape.dims))
    qdims = tuple(d for phi in phis for d in phi.out_shape.dims)
    subsets = list(itertools.combinations(range(n), k))
    dq = math.prod(qdims)
    if dq * len(subsets) > HERALDED_DIM_GUARD:
        raise GuardExceeded(
            f"output dimension {dq * len(subsets)} exceeds guard {HERALDED_DIM_GUARD}"
        )
    constant_fallbacks = all(psi.meta.get("constant") for psi in psis)
    weight = 1.0 / len(subsets)
    sectors = []
    for r in subsets:
        sets = [phis[i].kraus if i in r else psis[i].kraus for i in range(n)]
        active = None
        cspec = None
        if constant_fallbacks:
            active = _position_product(
                [phis[i].kraus if i in r else _trace_kraus(phis[i].in_shape.dim)
                 for i in range(n)]
            )
            if k < n:
                cspec = np.ones(1)
                for i in range(n):
                    if i not in r:
                        cspec = np.kron(
                            cspec, np.asarray(psis[i].meta["constant_spectrum"])
                        )
        sectors.append(
            FlagSector(r, weight, _position_product(sets),
                       active_kraus=active, constant_spectrum=cspec)
        )
    return channel_from_sectors(in_shape, SpaceShape(qdims), sectors, name=name)


def heralded_channel(
    phis: Sequence[KrausChannel], k: int, sigma=None
) -> KrausChannel:
    """Heralded channel: k uniformly random positions act, the rest are replaced.

    Replacement at position i is the constant channel onto sigma_i (maximally
    mixed by default).
    """
    sigmas = _resolve_sigmas(phis, sigma)
    thetas = [trivial_channel(phi.in_shape, s) for phi, s in zip(phis, sigmas)]
    return flagged_switch_channel(
        phis, thetas, k, name=f"heralded(n={len(phis)},k={k})"
    )


def product_channel(channels: Sequence[KrausChannel], name: str = "") -> KrausChannel:
    """Tensor product in canonical form: quantum outputs first, flags merged last.

    Sector labels of the product are tuples holding one label per flagged
    constituent, in constituent order.
    """
    channels = list(channels)
    if not channels:
        raise ValueError("need at least one channel")
    in_shape = SpaceShape(tuple(d for c in channels for d in c.in_shape.dims))
    qdims = tuple(d for c in channels for d in c.quantum_out_shape.dims)
    flagged = [c for c in channels if c.flag_sectors is not None]
    if not flagged:
        kraus = _position_product([c.kraus for c in channels])
        return KrausChannel(in_shape, SpaceShape(qdims), kraus, name=name)
    sector_lists = [
        c.flag_sectors if c.flag_sectors is not None
        else (FlagSector("_", 1.0, c.kraus, active_kraus=c.kraus),)
        for c in channels
    ]
    nsec = math.prod(len(s) for s in sector_lists)
    if math.prod(qdims) * nsec > HERALDED_DIM_GUARD:
        raise GuardExceeded(
            f"output dimension {math.prod(qdims) * nsec} exceeds guard {HERALDED_DIM_GUARD}"
        )
    sectors = []
    for combo in itertools.product(*sector_lists):
        label = tuple(
            s.label for s, c in zip(combo, channels) if c.flag_sectors is not None
        )
        weight = math.prod(s.weight for s in combo)
        active = None
        cspec = None
        if all(s.active_kraus is not None for s in combo):
            active = _position_product([s.active_kraus for s in combo])
            parts = [s.constant_spectrum for s in combo if s.constant_spectrum is not None]
            if parts:
                cspec = np.ones(1)
                for p in parts:
                    cspec = np.kron(cspec, p)
        sectors.append(
            FlagSector(label, weight, _position_product([s.kraus for s in combo]),
                       active_kraus=active, constant_spectrum=cspec)
        )
    return channel_from_sectors(in_shape, SpaceShape(qdims), sectors, name=name)


def tensor_channels(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """Binary product; see product_channel for the flag-merging convention."""
    return product_channel([a, b])


def choi_matrix(channel: KrausChannel) -> DensityOperator:
    """Normalized Choi state on input factors + output factors."""
    din, dout = channel.in_shape.dim, channel.out_shape.dim
    if din * dout > CHOI_DIM_GUARD:
        raise GuardExceeded(f"Choi dimension {din * dout} exceeds guard {CHOI_DIM_GUARD}")
    w = np.stack([k.T.reshape(-1) for k in channel.kraus]) / math.sqrt(din)
    j = w.T @ w.conj()
    shape = SpaceShape(channel.in_shape.dims + channel.out_shape.dims)
    return DensityOperator(shape, j)


def choi_distance(a: KrausChannel, b: KrausChannel) -> float:
    """Trace-norm distance between Choi states; <= 1e-10 counts as equality."""
    if a.in_shape.dims != b.in_shape.dims or a.out_shape.dims != b.out_shape.dims:
        raise ValueError("channels must share input and output factor shapes")
    return trace_norm(choi_matrix(a).matrix - choi_matrix(b).matrix)


def random_channel(in_dim: int, out_dim: int, kraus_rank: int, seed=0) -> KrausChannel:
    """Haar-random Stinespring isometry sliced into kraus_rank operators."""
    if kraus_rank < 1 or out_dim * kraus_rank < in_dim:
        raise ValueError("environment too small for an isometry")
    rng = as_rng(seed)
    g = rng.standard_normal((out_dim * kraus_rank, in_dim)) + 1j * rng.standard_normal(
        (out_dim * kraus_rank, in_dim)
    )
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))[None, :]
    kraus = tuple(q[i * out_dim : (i + 1) * out_dim, :] for i in range(kraus_rank))
    return KrausChannel(as_shape(in_dim), as_shape(out_dim), kraus, name="random")


def binomial_mixture_check(
    phis: Sequence[KrausChannel],
    lam: float,
    sigma=None,
    weights: Sequence[float] | None = None,
) -> dict:
    """Compare the tensor of erasures against the binomial mixture of heralded channels.

    Both sides are compared as Choi states after embedding every heralded flag
    register into the product's (success/failure)^n register. `weights`
    overrides the binomial coefficients (used by the harness self-test) and
    must sum to 1.
    """
    n = len(phis)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"success weight {lam} outside [0, 1]")
    sigmas = _resolve_sigmas(phis, sigma)
    erasures = [erasure_channel(phi, lam, s) for phi, s in zip(phis, sigmas)]
    lhs_channel = product_channel(erasures, name=f"erasure-product(n={n})")
    lhs = choi_matrix(lhs_channel)
    labels = [s.label for s in lhs_channel.flag_sectors]
    nflag = len(labels)
    rest = lhs.dim // nflag

    if weights is None:
        w = [math.comb(n, k) * lam**k * (1.0 - lam) ** (n - k) for k in range(n + 1)]
    else:
        w = [float(x) for x in weights]
        if len(w) != n + 1:
            raise ValueError(f"{len(w)} weights for {n + 1} subset sizes")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {sum(w)!r}, expected 1")

    mixture = np.zeros((rest, nflag, rest, nflag), dtype=complex)
    for k in range(n + 1):
        hk = heralded_channel(phis, k, sigmas)
        jk = choi_matrix(hk)
        subsets = [s.label for s in hk.flag_sectors]
        targets = np.array(
            [
                labels.index(tuple("success" if i in r else "failure" for i in range(n)))
                for r in subsets
            ]
        )
        j4 = jk.matrix.reshape(rest, len(subsets), rest, len(subsets))
        mixture[np.ix_(np.arange(rest), targets, np.arange(rest), targets)] += w[k] * j4

    d = rest * nflag
    distance = trace_norm(lhs.matrix - mixture.reshape(d, d))
    return {
        "n": n,
        "lam": lam,
        "weights": w,
        "distance": distance,
        "choi_dim": d,
    }


_NAME_RE = re.compile(r"\s*([a-zA-Z_][a-zA-Z_0-9]*)\s*\(")


def parse_channel_expr(text: str) -> KrausChannel:
    """Parse expressions like erasure(depolarizing(2,0.1),0.3) into channels."""
    channel, rest = _parse_expr(text)
    if rest.strip():
        raise ValueError(f"trailing input {rest!r} in channel expression")
    return channel


def _parse_expr(text: str):
    m = _NAME_RE.match(text)
    if not m:
        raise ValueError(f"expected name( in channel expression at {text!r}")
    name = m.group(1)
    rest = text[m.end():]
    args = []
    while True:
        rest = rest.lstrip()
        if rest.startswith(")"):
            rest = rest[1:]
            break
        if _NAME_RE.match(rest):
            sub, rest = _parse_expr(rest)
            args.append(sub)
        else:
            m2 = re.match(r"\s*([-+0-9.eE]+)", rest)
            if not m2:
                raise ValueError(f"expected number or channel at {rest!r}")
            tok = m2.group(1)
            args.append(int(tok) if re.fullmatch(r"[-+]?\d+", tok) else float(tok))
            rest = rest[m2.end():]
        rest = rest.lstrip()
        if rest.startswith(","):
            rest = rest[1:]
    return _build_named(name, args), rest


def _build_named(name: str, args: list) -> KrausChannel:
    builders = {
        "identity": lambda d: identity_channel(d),
        "depolarizing": lambda d, p: depolarizing_channel(d, p),
        "dephasing": lambda p: dephasing_channel(p),
        "trivial": lambda d: trivial_channel(d),
        "erasure": lambda inner, lam: erasure_channel(inner, lam),
    }
    if name not in builders:
        raise ValueError(f"unknown channel constructor {name!r}")
    try:
        return builders[name](*args)
    except TypeError as exc:
        raise ValueError(f"bad arguments for {name}: {args!r}") from exc


def channel_to_dict(channel: KrausChannel) -> dict:
    return {
        "name": channel.name,
        "in_dims": list(channel.in_shape.dims),
        "out_dims": list(channel.out_shape.dims),
        "kraus": [matrix_to_literal(k) for k in channel.kraus],
        "meta": dict(channel.meta),
    }


def channel_from_dict(data: dict) -> KrausChannel:
    for key in ("in_dims", "out_dims", "kraus"):
        if key not in data:
            raise ValueError(f"channel record missing field {key!r}")
    kraus = tuple(matrix_from_literal(k) for k in data["kraus"])
    return KrausChannel(
        as_shape(data["in_dims"]),
        as_shape(data["out_dims"]),
        kraus,
        name=str(data.get("name", "")),
        meta=dict(data.get("meta", {})),
    )


def load_channel(path) -> KrausChannel:
    with open(path, "r", encoding="utf-8") as fh:
        return channel_from_dict(json.load(fh))


def save_channel(channel: KrausChannel, path) -> None:
    Path(path).write_text(
        json.dumps(channel_to_dict(channel), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def resolve_channel(spec) -> KrausChannel:
    """Accept a KrausChannel, a named expression, a file path, or a dict."""
    if isinstance(spec, KrausChannel):
        return spec
    if isinstance(spec, dict):
        return channel_from_dict(spec)
    if isinstance(spec, (str, Path)):
        text = str(spec)
        if _NAME_RE.match(text) and not Path(text).exists():
            return parse_channel_expr(text)
        return load_channel(text)
    raise TypeError(f"cannot resolve channel from {type(spec).__name__}")
