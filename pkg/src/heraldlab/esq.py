"""Certified upper bounds on squashed entanglement via explicit extensions.

An extension of rho^{AB} is any rho^{ABC} with the right marginal; half its
conditional mutual information I(A;B|C) upper-bounds the squashed
entanglement of the A:B cut.  Every extension here is produced as an isometry
acting on the reference of one fixed purification, so validity holds by
construction and every iterate of the search certifies a bound.  Distances
are normalized trace distances (half the trace norm).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .bounds import BoundReport
from .channels import KrausChannel, apply, heralded_channel, product_channel
from .entropy import entropy_raw, entropy_raw_many, mutual_information, von_neumann_entropy
from .holevo import channel_fingerprint
from .qcore import (
    basis_ket,
    bell_state,
    content_fingerprint,
    DensityOperator,
    eig_hermitian,
    ghz_state,
    GuardExceeded,
    matrix_from_literal,
    max_mixed,
    partial_trace,
    partial_trace_raw,
    permute_factors,
    product_state,
    PureState,
    SpaceShape,
    tensor,
    werner_state,
)

ESQ_DIM_GUARD = 64
SEP_DIM_GUARD = 36
RANK_CUTOFF = 1e-12
MARGINAL_ATOL = 1e-8


@dataclass(frozen=True, eq=False)
class EsqOpts:
    """Budget for the extension search.

    ext_dim is the conditioning dimension |C| (defaults to |A||B|),
    kraus_rank the environment dimension of the squashing isometry.
    restarts = 0 evaluates the closed-form candidate extensions only.
    """

    ext_dim: int | None = None
    kraus_rank: int = 2
    restarts: int = 6
    tol: float = 1e-7
    max_iters: int = 50
    seed: int = 0
    grad_eps: float = 1e-5


@dataclass(frozen=True, eq=False)
class ExtensionAnsatz:
    """Squashing isometry acting on the reference of a fixed purification.

    psi_matrix holds the purification columns (sqrt-eigenvalue-scaled
    eigenvectors of the target), isometry maps the reference into
    conditioning x environment; its columns are orthonormal, which is exactly
    CPTP for the induced reference channel.
    """

    psi_matrix: np.ndarray  # (dA*dB, r)
    isometry: np.ndarray  # (ext_dim*kraus_rank, r)
    ext_dim: int
    kraus_rank: int

    def __post_init__(self):
        v = np.asarray(self.isometry, dtype=complex)
        dev = np.abs(v.conj().T @ v - np.eye(v.shape[1])).max()
        if dev > 1e-10:
            raise ValueError(f"isometry columns deviate from orthonormal by {dev:.3e}")

    def kraus(self) -> tuple[np.ndarray, ...]:
        """Kraus operators of the reference -> conditioning channel."""
        v = self.isometry.reshape(self.ext_dim, self.kraus_rank, -1)
        return tuple(v[:, j, :] for j in range(self.kraus_rank))


@dataclass(frozen=True, eq=False)
class EsqUpperBound:
    """One certified bound: value = half the best conditional mutual information."""

    value: float
    baseline: float  # half the plain mutual information (trivial extension)
    extension: DensityOperator  # three factors A, B, C achieving the value
    ansatz: ExtensionAnsatz | None
    trace: dict
    seed: int


@dataclass(frozen=True, eq=False)
class SeparableApprox:
    """Explicit separable decomposition and its distance to the target."""

    weights: np.ndarray  # (r,)
    a_vectors: np.ndarray  # (r, dA), unit rows
    b_vectors: np.ndarray  # (r, dB), unit rows
    distance: float
    trace: dict
    seed: int

    def state(self) -> DensityOperator:
        dA = self.a_vectors.shape[1]
        dB = self.b_vectors.shape[1]
        prod = np.einsum("ra,rb->rab", self.a_vectors, self.b_vectors)
        prod = prod.reshape(-1, dA * dB)
        sig = np.einsum("r,rp,rq->pq", self.weights, prod, prod.conj())
        return DensityOperator(SpaceShape((dA, dB)), sig)


# --- grouping and CMI evaluation ---------------------------------------------

def _grouped(
    rho: DensityOperator, a_factors, b_factors
) -> tuple[np.ndarray, int, int]:
    """Trace out everything else and order the factors as (A..., B...)."""
    a = tuple(int(i) for i in a_factors)
    b = tuple(int(i) for i in b_factors)
    if not a or not b:
        raise ValueError("both subsystem groups must be nonempty")
    if set(a) & set(b):
        raise ValueError(f"subsystem groups overlap: {a} vs {b}")
    n = len(rho.shape.dims)
    if not all(0 <= i < n for i in a + b):
        raise ValueError(f"factor indices {a + b} out of range for {n} factors")
    keep = sorted(a + b)
    if len(keep) < n:
        rho = partial_trace(rho, keep)
        remap = {old: new for new, old in enumerate(keep)}
        a = tuple(remap[i] for i in a)
        b = tuple(remap[i] for i in b)
    order = a + b
    if order != tuple(range(len(order))):
        rho = permute_factors(rho, order)
    dims = rho.shape.dims
    dA = math.prod(dims[: len(a)])
    dB = math.prod(dims[len(a):])
    return rho.matrix, dA, dB


def _purification_matrix(mat: np.ndarray) -> np.ndarray:
    """Columns sqrt(w_i) v_i over the support; reference dimension = rank."""
    w, v = eig_hermitian(mat)
    keep = w > RANK_CUTOFF
    if not keep.any():
        raise ValueError("state has no support")
    return v[:, keep] * np.sqrt(w[keep])[None, :]


def _cmi_state(ext: DensityOperator) -> float:
    """I(A;B|C) of an explicit three-factor extension."""
    m, dims = ext.matrix, ext.shape.dims
    if len(dims) != 3:
        raise ValueError(f"extension must have three factors, got {dims}")
    return (
        entropy_raw(partial_trace_raw(m, dims, (0, 2)))
        + entropy_raw(partial_trace_raw(m, dims, (1, 2)))
        - entropy_raw(partial_trace_raw(m, dims, (2,)))
        - entropy_raw(m)
    )


class _SquashSearch:
    """Batched CMI of isometry candidates over one fixed purification.

    The global state on A,B,C and the environment F is pure, so
    I(A;B|C) = S(AF) + S(BF) - S(C) - S(F) needs only small marginals.
    """

    def __init__(self, psi_mat: np.ndarray, dA: int, dB: int, dC: int, dF: int):
        self.psi_mat = psi_mat
        self.dA, self.dB, self.dC, self.dF = dA, dB, dC, dF
        self.rank = psi_mat.shape[1]

    def cmi(self, vs: np.ndarray) -> np.ndarray:
        k = vs.shape[0]
        w = np.einsum("pr,kqr->kpq", self.psi_mat, vs, optimize=True)
        w = w.reshape(k, self.dA, self.dB, self.dC, self.dF)
        wc = w.conj()
        af = np.einsum("kabcf,kxbcg->kafxg", w, wc, optimize=True)
        bf = np.einsum("kabcf,kaxcg->kbfxg", w, wc, optimize=True)
        c = np.einsum("kabcf,kabxf->kcx", w, wc, optimize=True)
        f = np.einsum("kabcf,kabcg->kfg", w, wc, optimize=True)
        da, db, df = self.dA, self.dB, self.dF
        return (
            entropy_raw_many(af.reshape(k, da * df, da * df))
            + entropy_raw_many(bf.reshape(k, db * df, db * df))
            - entropy_raw_many(c)
            - entropy_raw_many(f)
        )

    def extension_state(self, v: np.ndarray) -> DensityOperator:
        w = (self.psi_mat @ v.T).reshape(self.dA, self.dB, self.dC, self.dF)
        ext = np.einsum("abcf,xyzf->abcxyz", w, w.conj(), optimize=True)
        d = self.dA * self.dB * self.dC
        return DensityOperator(
            SpaceShape((self.dA, self.dB, self.dC)), ext.reshape(d, d)
        )


def _qr_fix(ms: np.ndarray) -> np.ndarray:
    """Batched retraction onto isometries; phases fixed so seeds reproduce."""
    q, r = np.linalg.qr(ms)
    diag = np.einsum("...ii->...i", r)
    ph = diag / np.where(np.abs(diag) > 1e-300, np.abs(diag), 1.0)
    return q * ph.conj()[..., None, :]


def _optimize_isometry(
    search: _SquashSearch, v0: np.ndarray, opts: EsqOpts
) -> tuple[np.ndarray, float, int]:
    v = _qr_fix(v0[None])[0]
    val = float(search.cmi(v[None])[0])
    rows, r = v.shape
    m = rows * r
    shifts = (np.eye(m) * opts.grad_eps).reshape(m, rows, r)
    alpha = 0.25
    stall = 0
    it = 0
    for it in range(1, opts.max_iters + 1):
        cands = np.concatenate(
            [v + shifts, v - shifts, v + 1j * shifts, v - 1j * shifts]
        )
        vals = search.cmi(_qr_fix(cands))
        grad = (vals[:m] - vals[m : 2 * m]) + 1j * (vals[2 * m : 3 * m] - vals[3 * m :])
        g = (grad / (2.0 * opts.grad_eps)).reshape(rows, r)
        gn = np.linalg.norm(g)
        if gn < 1e-12:
            break
        scales = alpha * 0.5 ** np.arange(6)
        trials = _qr_fix(v[None] - scales[:, None, None] * (g[None] / gn))
        tvals = search.cmi(trials)
        j = int(np.argmin(tvals))
        if tvals[j] < val - opts.tol:
            v, val = trials[j], float(tvals[j])
            alpha = min(scales[j] * 2.0, 1.0)
            stall = 0
        else:
            alpha = max(alpha * 0.125, 1e-4)
            stall += 1
            if stall >= 2:
                break
    return v, val, it


# --- the bound ----------------------------------------------------------------

def esq_upper(
    rho: DensityOperator,
    a_factors,
    b_factors,
    opts: EsqOpts | None = None,
    seed_extensions: tuple[DensityOperator, ...] = (),
) -> EsqUpperBound:
    """Best found upper bound on the squashed entanglement of the A:B cut.

    Candidates: the trivial extension (baseline half mutual information), the
    eigenbasis-copy extension (kills the CMI of classically correlated
    states), any explicitly supplied extensions, and isometry-search restarts.
    The winner's marginal constraint is re-checked, not assumed.
    """
    opts = opts or EsqOpts()
    mat, dA, dB = _grouped(rho, a_factors, b_factors)
    if dA * dB > ESQ_DIM_GUARD:
        raise GuardExceeded(f"joint dimension {dA * dB} exceeds guard {ESQ_DIM_GUARD}")
    if opts.ext_dim is not None and opts.ext_dim < 1:
        raise ValueError(f"extension dimension {opts.ext_dim} below 1")

    grouped = DensityOperator(SpaceShape((dA, dB)), mat)
    baseline = 0.5 * mutual_information(grouped, [0], [1])
    candidates: list[tuple[float, str, DensityOperator, ExtensionAnsatz | None]] = []

    trivial = DensityOperator(SpaceShape((dA, dB, 1)), mat)
    candidates.append((baseline, "trivial", trivial, None))

    w, v = eig_hermitian(mat)
    keep = w > RANK_CUTOFF
    wk, vk = w[keep], v[:, keep]
    rank = int(keep.sum())
    cols = vk.T.reshape(rank, dA, dB)
    schmidt = np.linalg.svd(cols, compute_uv=False) ** 2
    ent = np.where(schmidt > 0, -schmidt * np.log2(np.where(schmidt > 0, schmidt, 1.0)), 0.0)
    copy_val = float(wk @ ent.sum(axis=1))
    copy_ext = np.zeros((dA * dB, rank, dA * dB, rank), dtype=complex)
    for i in range(rank):
        copy_ext[:, i, :, i] = wk[i] * np.outer(vk[:, i], vk[:, i].conj())
    copy_state = DensityOperator(
        SpaceShape((dA, dB, rank)),
        copy_ext.reshape(dA * dB * rank, dA * dB * rank),
    )
    candidates.append((copy_val, "eigenbasis-copy", copy_state, None))

    for idx, ext in enumerate(seed_extensions):
        dims = ext.shape.dims
        if len(dims) != 3 or dims[0] != dA or dims[1] != dB:
            raise ValueError(
                f"seed extension factors {dims} do not extend ({dA}, {dB})"
            )
        marg = partial_trace_raw(ext.matrix, dims, (0, 1))
        if np.abs(marg - mat).max() > MARGINAL_ATOL:
            raise ValueError(f"seed extension {idx} does not have the right marginal")
        candidates.append((0.5 * _cmi_state(ext), f"seed-{idx}", ext, None))

    psi_mat = _purification_matrix(mat)
    dC = opts.ext_dim if opts.ext_dim is not None else dA * dB
    dF = opts.kraus_rank
    restart_vals = []
    if opts.restarts > 0:
        if dC * dF < psi_mat.shape[1]:
            raise ValueError(
                f"conditioning budget {dC}x{dF} below the purification rank "
                f"{psi_mat.shape[1]}"
            )
        search = _SquashSearch(psi_mat, dA, dB, dC, dF)
        for t in range(opts.restarts):
            rng = np.random.default_rng(np.random.SeedSequence([opts.seed, t]))
            m0 = rng.standard_normal((dC * dF, search.rank)) + 1j * rng.standard_normal(
                (dC * dF, search.rank)
            )
            vt, cmi_t, iters = _optimize_isometry(search, m0, opts)
            restart_vals.append(cmi_t / 2.0)
            ansatz = ExtensionAnsatz(psi_mat, vt, dC, dF)
            candidates.append(
                (cmi_t / 2.0, f"search-{t}", search.extension_state(vt), ansatz)
            )

    value, winner, extension, ansatz = min(candidates, key=lambda c: c[0])
    if value < -1e-9:
        raise RuntimeError(f"conditional mutual information fell to {value}")
    value = max(float(value), 0.0)
    marg = partial_trace_raw(extension.matrix, extension.shape.dims, (0, 1))
    dev = float(np.abs(marg - mat).max())
    if dev > MARGINAL_ATOL:
        raise RuntimeError(f"winning extension violates the marginal by {dev:.3e}")
    return EsqUpperBound(
        value=float(value),
        baseline=float(baseline),
        extension=extension,
        ansatz=ansatz,
        trace={
            "winner": winner,
            "candidates": {name: float(val) for val, name, _, _ in candidates},
            "restart_values": restart_vals,
            "marginal_deviation": dev,
        },
        seed=opts.seed,
    )


def transfer_extension(bound: EsqUpperBound, channel: KrausChannel) -> DensityOperator:
    """Push a local channel on the B factor through the stored extension.

    The result extends (id_A (x) channel)(rho), so feeding it back through
    seed_extensions certifies that the bound after local processing does not
    exceed the bound before.
    """
    ext = bound.extension
    dA, dB, dC = ext.shape.dims
    if channel.in_shape.dim != dB:
        raise ValueError(
            f"channel input dimension {channel.in_shape.dim} does not match B={dB}"
        )
    expanded = DensityOperator(SpaceShape((dA,) + channel.in_shape.dims + (dC,)), ext.matrix)
    moved = apply(channel, expanded, acting_on=range(1, 1 + len(channel.in_shape.dims)))
    dB_new = math.prod(moved.shape.dims[1:-1])
    return DensityOperator(SpaceShape((dA, dB_new, dC)), moved.matrix)


# --- channel outputs ----------------------------------------------------------

def _flag_copy_extension(out: DensityOperator, n_b0: int) -> DensityOperator:
    """Extension conditioning on a copy of the trailing flag register."""
    dims = out.shape.dims
    dA = math.prod(dims[:n_b0])
    ns = dims[-1]
    dBq = math.prod(dims[n_b0:-1])
    t = out.matrix.reshape(dA, dBq, ns, dA, dBq, ns)
    ext = np.zeros((dA, dBq, ns, ns, dA, dBq, ns, ns), dtype=complex)
    for y in range(ns):
        ext[:, :, y, y, :, :, y, y] = t[:, :, y, :, :, y]
    d = dA * dBq * ns * ns
    return DensityOperator(SpaceShape((dA, dBq * ns, ns)), ext.reshape(d, d))


def esq_upper_through_channel(
    rho: DensityOperator, channel: KrausChannel, opts: EsqOpts | None = None
) -> EsqUpperBound:
    """Bound between the leading bystander factors and the full channel output.

    The channel consumes the trailing factors of rho.  For flagged channels
    the extension copying the flag register is always offered as a candidate,
    so conditioning on the herald is available to the optimizer from the
    start.
    """
    dims = rho.shape.dims
    cdims = channel.in_shape.dims
    if len(dims) <= len(cdims) or dims[len(dims) - len(cdims):] != cdims:
        raise ValueError(
            f"state factors {dims} must end with the channel input {cdims} "
            "and keep at least one bystander factor"
        )
    n_b0 = len(dims) - len(cdims)
    out = apply(channel, rho, acting_on=range(n_b0, len(dims)))
    seeds: tuple[DensityOperator, ...] = ()
    if channel.flag_sectors is not None:
        seeds = (_flag_copy_extension(out, n_b0),)
    a = tuple(range(n_b0))
    b = tuple(range(n_b0, len(out.shape.dims)))
    return esq_upper(out, a, b, opts, seed_extensions=seeds)


def heralded_averaging_check(
    phis, k, input_family, opts: EsqOpts | None = None
) -> BoundReport:
    """Certify esq_upper_through_channel <= S(bystander) / L on each input.

    phis/k describe one heralded group (k an int) or a family of groups
    (k a sequence, phis a matching sequence of channel lists); L is the
    smallest floor(n_i / k_i).  Negative slack means the certified upper
    bound was not driven low enough -- it is never a counterexample, which is
    why the failure verdict stays INCONCLUSIVE.
    """
    opts = opts or EsqOpts(restarts=0)
    if isinstance(k, (int, np.integer)):
        blocks = [(list(phis), int(k))]
    else:
        blocks = [(list(ps), int(kk)) for ps, kk in zip(phis, k)]
    for ps, kk in blocks:
        if not 1 <= kk <= len(ps):
            raise ValueError(f"herald count {kk} outside [1, {len(ps)}]")
    L = min(len(ps) // kk for ps, kk in blocks)
    parts = [heralded_channel(ps, kk) for ps, kk in blocks]
    channel = parts[0] if len(parts) == 1 else product_channel(parts)

    states = []
    for entry in input_family:
        if isinstance(entry, DensityOperator):
            states.append((f"state-{len(states)}", entry))
        else:
            name, state = entry
            states.append((str(name), state))

    per_state = []
    worst = None
    for name, state in states:
        n_b0 = len(state.shape.dims) - len(channel.in_shape.dims)
        if n_b0 < 1:
            raise ValueError(f"input {name!r} carries no bystander factor")
        s_b0 = von_neumann_entropy(partial_trace(state, range(n_b0)))
        ub = esq_upper_through_channel(state, channel, opts)
        bound = s_b0 / L
        slack = bound - ub.value
        per_state.append(
            {
                "name": name,
                "esq_upper": ub.value,
                "entropy_bystander": s_b0,
                "bound": bound,
                "slack": slack,
                "winner": ub.trace["winner"],
            }
        )
        if worst is None or slack < worst[0]:
            worst = (slack, ub.value, bound)

    slack, lhs, rhs = worst
    verdict = "PASS" if slack >= -1e-4 else "INCONCLUSIVE(optimization budget)"
    return BoundReport(
        bound_id="heralded-averaging",
        lhs=float(lhs),
        lhs_provenance="certified upper bound",
        rhs=float(rhs),
        rhs_breakdown={"entropy_over_L": float(rhs), "L": float(L)},
        slack=float(slack),
        verdict=verdict,
        fingerprint=content_fingerprint(
            "heralded-averaging",
            channel_fingerprint(channel),
            L,
            *[s.matrix for _, s in states],
        ),
        seed=opts.seed,
        details={
            "per_state": per_state,
            "note": "negative slack flags an insufficiently tightened upper "
            "bound, never a counterexample",
        },
    )


# --- separable approximation ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class SepOpts:
    cardinality: int | None = None  # defaults to (|A||B|)^2
    restarts: int = 4
    tol: float = 1e-9
    max_sweeps: int = 30
    seed: int = 0
    grad_eps: float = 1e-5


class _SepSearch:
    """Batched normalized trace distance between the target and mixtures of
    pure product states."""

    def __init__(self, target: np.ndarray, dA: int, dB: int):
        self.target = target
        self.dA, self.dB = dA, dB

    def assemble(self, logits, avecs, bvecs):
        q = np.exp(logits - logits.max(axis=-1, keepdims=True))
        q = q / q.sum(axis=-1, keepdims=True)
        an = avecs / np.linalg.norm(avecs, axis=-1, keepdims=True)
        bn = bvecs / np.linalg.norm(bvecs, axis=-1, keepdims=True)
        prod = np.einsum("...ra,...rb->...rab", an, bn)
        prod = prod.reshape(prod.shape[:-2] + (self.dA * self.dB,))
        sig = np.einsum("...r,...rp,...rq->...pq", q, prod, prod.conj(), optimize=True)
        return q, an, bn, sig

    def distance(self, logits, avecs, bvecs) -> np.ndarray:
        _, _, _, sig = self.assemble(logits, avecs, bvecs)
        wdiff = np.linalg.eigvalsh(sig - self.target)
        return 0.5 * np.abs(wdiff).sum(axis=-1)


def _pad_product_seed(logits, avecs, bvecs, r, dA, dB, seed):
    """Pad a deterministic seed to cardinality r with negligible-weight rows."""
    extra = r - logits.size
    if extra <= 0:
        return logits[:r], avecs[:r], bvecs[:r]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 10**6]))
    return (
        np.concatenate([logits, np.full(extra, -30.0)]),
        np.concatenate(
            [avecs, rng.standard_normal((extra, dA)) + 1j * rng.standard_normal((extra, dA))]
        ),
        np.concatenate(
            [bvecs, rng.standard_normal((extra, dB)) + 1j * rng.standard_normal((extra, dB))]
        ),
    )


def _sep_marginal_seed(mat, dA, dB, r, seed):
    """Products of the marginal eigenbases, weighted by eigenvalue products."""
    wa, va = eig_hermitian(partial_trace_raw(mat, (dA, dB), (0,)))
    wb, vb = eig_hermitian(partial_trace_raw(mat, (dA, dB), (1,)))
    pairs = list(itertools.product(range(dA), range(dB)))
    logits = np.log(np.array([max(wa[i] * wb[j], 1e-12) for i, j in pairs]))
    avecs = np.stack([va[:, i] for i, _ in pairs]).astype(complex)
    bvecs = np.stack([vb[:, j] for _, j in pairs]).astype(complex)
    return _pad_product_seed(logits, avecs, bvecs, r, dA, dB, seed)


def _sep_schmidt_seed(mat, dA, dB, r, seed):
    """Dominant Schmidt product of each eigenvector; exact for mixtures whose
    eigenvectors are already product."""
    w, v = eig_hermitian(mat)
    keep = w > RANK_CUTOFF
    wk = w[keep]
    cols = v[:, keep].T.reshape(-1, dA, dB)
    u, _, vh = np.linalg.svd(cols)
    logits = np.log(np.maximum(wk, 1e-12))
    return _pad_product_seed(logits, u[:, :, 0], vh[:, 0, :], r, dA, dB, seed)


def _sep_block_step(search, params, block, val, alpha, eps, tol):
    """One numerical-gradient descent step on a single parameter block."""
    logits, avecs, bvecs = params
    cur = params[block]
    flat = cur.reshape(-1)
    m = flat.size
    cplx = np.iscomplexobj(cur)
    reps = 4 * m if cplx else 2 * m
    stacked = np.repeat(flat[None, :], reps, axis=0)
    idx = np.arange(m)
    stacked[idx, idx] += eps
    stacked[m + idx, idx] -= eps
    if cplx:
        stacked[2 * m + idx, idx] += 1j * eps
        stacked[3 * m + idx, idx] -= 1j * eps

    def batch_eval(block_vals):
        k = block_vals.shape[0]
        args = [
            np.broadcast_to(p, (k,) + p.shape) if i != block
            else block_vals.reshape((k,) + cur.shape)
            for i, p in enumerate(params)
        ]
        return search.distance(*args)

    vals = batch_eval(stacked)
    grad = (vals[:m] - vals[m : 2 * m]) / (2 * eps)
    if cplx:
        grad = grad + 1j * (vals[2 * m : 3 * m] - vals[3 * m :]) / (2 * eps)
    gn = np.linalg.norm(grad)
    if gn < 1e-13:
        return params, val, alpha, False
    scales = alpha * 0.5 ** np.arange(6)
    trials = flat[None, :] - scales[:, None] * (grad / gn)[None, :]
    tvals = batch_eval(trials)
    j = int(np.argmin(tvals))
    if tvals[j] < val - tol:
        new = list(params)
        new[block] = trials[j].reshape(cur.shape)
        return tuple(new), float(tvals[j]), min(scales[j] * 2.0, 1.0), True
    return params, val, max(alpha * 0.125, 1e-4), False


def separable_approx(
    rho: DensityOperator, a_factors, b_factors, opts: SepOpts | None = None
) -> SeparableApprox:
    """Best-found separable state near rho across the A:B cut.

    The achieved distance upper-bounds the true distance to the separable
    set.  Restart 0 is seeded from the product of the marginal eigenbases;
    the rest are random.  The stored distance is recomputed from the final
    decomposition, so it reproduces exactly.
    """
    opts = opts or SepOpts()
    mat, dA, dB = _grouped(rho, a_factors, b_factors)
    if dA * dB > SEP_DIM_GUARD:
        raise GuardExceeded(f"joint dimension {dA * dB} exceeds guard {SEP_DIM_GUARD}")
    r = opts.cardinality if opts.cardinality is not None else (dA * dB) ** 2
    if r < 1:
        raise ValueError(f"cardinality {r} below 1")
    search = _SepSearch(mat, dA, dB)

    starts = [
        _sep_marginal_seed(mat, dA, dB, r, opts.seed),
        _sep_schmidt_seed(mat, dA, dB, r, opts.seed),
    ]
    for t in range(opts.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([opts.seed, t]))
        starts.append(
            (
                rng.standard_normal(r),
                rng.standard_normal((r, dA)) + 1j * rng.standard_normal((r, dA)),
                rng.standard_normal((r, dB)) + 1j * rng.standard_normal((r, dB)),
            )
        )
    best = None
    for t, params in enumerate(starts):
        val = float(search.distance(*params))
        alphas = [0.5, 0.25, 0.25]
        for _ in range(opts.max_sweeps):
            improved = False
            for block in range(3):
                params, val, alphas[block], moved = _sep_block_step(
                    search, params, block, val, alphas[block], opts.grad_eps, opts.tol
                )
                improved = improved or moved
            if not improved:
                break
        if best is None or val < best[0]:
            best = (val, params, t)

    _, (logits, avecs, bvecs), t_best = best
    q, an, bn, _ = search.assemble(logits, avecs, bvecs)
    final = float(search.distance(logits, avecs, bvecs))
    return SeparableApprox(
        weights=q,
        a_vectors=an,
        b_vectors=bn,
        distance=final,
        trace={"best_restart": t_best, "cardinality": r},
        seed=opts.seed,
    )


def ppt_distance_lower(rho: DensityOperator, a_factors, b_factors) -> float:
    """Witness lower bound on the normalized distance to the separable set.

    Built from the negative part of the partial transpose; valid in any
    dimension (separable states stay positive under partial transposition),
    tight enough to sandwich the true distance only on 2x2 and 2x3 systems.
    """
    mat, dA, dB = _grouped(rho, a_factors, b_factors)
    pt = mat.reshape(dA, dB, dA, dB).transpose(0, 3, 2, 1).reshape(dA * dB, dA * dB)
    w, v = np.linalg.eigh(pt)
    neg = w < 0.0
    if not neg.any():
        return 0.0
    nu = float(-w[neg].sum())
    proj = v[:, neg] @ v[:, neg].conj().T
    projg = proj.reshape(dA, dB, dA, dB).transpose(0, 3, 2, 1).reshape(dA * dB, dA * dB)
    opnorm = float(np.abs(np.linalg.eigvalsh(projg)).max())
    return 0.5 * nu / opnorm


def faithfulness_consistency(
    rho: DensityOperator,
    a_factors,
    b_factors,
    opts: EsqOpts | None = None,
    sep_opts: SepOpts | None = None,
) -> BoundReport:
    """Check the separable-distance estimate against 3.1 |A| (esq bound)^(1/4).

    Both sides are one-sided surrogates (distance overestimated, squashed
    entanglement overestimated on the favorable side), so a shortfall is
    reported as inconclusive, never as a violation.
    """
    opts = opts or EsqOpts()
    _, dA, _ = _grouped(rho, a_factors, b_factors)
    sep = separable_approx(rho, a_factors, b_factors, sep_opts)
    esq = esq_upper(rho, a_factors, b_factors, opts)
    rhs = 3.1 * dA * esq.value**0.25
    slack = rhs - sep.distance
    return BoundReport(
        bound_id="faithfulness",
        lhs=float(sep.distance),
        lhs_provenance="separable-approximation upper bound",
        rhs=float(rhs),
        rhs_breakdown={"esq_upper": esq.value, "dim_a": float(dA)},
        slack=float(slack),
        verdict="PASS" if slack >= -1e-6 else "INCONCLUSIVE(optimization budget)",
        fingerprint=content_fingerprint(
            "faithfulness", rho.matrix, tuple(a_factors), tuple(b_factors), opts.seed
        ),
        seed=opts.seed,
        details={"ppt_lower": ppt_distance_lower(rho, a_factors, b_factors)},
    )


# --- monogamy suite -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MonogamyCase:
    """Factor 0 is the shared system; analytic holds E_sq(B; B_j) per partner."""

    name: str
    rho: DensityOperator
    analytic: tuple[float, ...]
    note: str = ""


def default_monogamy_suite() -> tuple[MonogamyCase, ...]:
    zero = DensityOperator(SpaceShape((2,)), np.diag([1.0, 0.0]))
    return (
        MonogamyCase(
            "ghz",
            ghz_state(3),
            (0.0, 0.0),
            "pairwise marginals are classically correlated",
        ),
        MonogamyCase(
            "bell-spectator",
            tensor(bell_state(), max_mixed(2)),
            (1.0, 0.0),
            "monogamy tight: the Bell partner uses the whole budget",
        ),
        MonogamyCase("product", product_state(zero, max_mixed(2), max_mixed(2)), (0.0, 0.0)),
    )


def monogamy_harness(
    suite: tuple[MonogamyCase, ...] | None = None, opts: EsqOpts | None = None
) -> list[BoundReport]:
    """Check sum_j E_sq(B;B_j) <= S(B) on declared-value states.

    The sum uses the declared analytic values; esq_upper must reproduce each
    within 5e-3 or the case is marked inconclusive.
    """
    opts = opts or EsqOpts()
    suite = suite if suite is not None else default_monogamy_suite()
    reports = []
    for case in suite:
        n = len(case.rho.shape.dims)
        if len(case.analytic) != n - 1:
            raise ValueError(
                f"case {case.name!r}: {len(case.analytic)} analytic values "
                f"for {n - 1} partners"
            )
        s_b = von_neumann_entropy(partial_trace(case.rho, [0]))
        lhs = float(sum(case.analytic))
        pair_checks = []
        reproduced = True
        sound = True
        for j in range(1, n):
            ub = esq_upper(case.rho, [0], [j], opts)
            dev = ub.value - case.analytic[j - 1]
            pair_checks.append(
                {"partner": j, "esq_upper": ub.value, "analytic": case.analytic[j - 1],
                 "deviation": dev}
            )
            if dev > 5e-3:
                reproduced = False
            if dev < -5e-3:
                sound = False
        slack = s_b - lhs
        if not sound:
            verdict = "INCONCLUSIVE(upper bound fell below the declared analytic value)"
        elif not reproduced:
            verdict = "INCONCLUSIVE(optimization budget)"
        elif slack >= -1e-9:
            verdict = "PASS"
        else:
            verdict = "INCONCLUSIVE(declared values exceed the entropy budget)"
        reports.append(
            BoundReport(
                bound_id=f"monogamy:{case.name}",
                lhs=lhs,
                lhs_provenance="declared analytic values",
                rhs=float(s_b),
                rhs_breakdown={"entropy_shared": float(s_b)},
                slack=float(slack),
                verdict=verdict,
                fingerprint=content_fingerprint(
                    "monogamy", case.name, case.rho.matrix, opts.seed
                ),
                seed=opts.seed,
                details={"pairs": pair_checks, "note": case.note},
            )
        )
    return reports


# --- state suite files -----------------------------------------------------------

def parse_state_expr(text: str) -> DensityOperator:
    """Named state constructors: bell, ghz(n), werner(p), mixed(d), basis(d, i),
    product(expr, ...)."""
    text = text.strip()
    if "(" not in text:
        name, args = text, []
    else:
        if not text.endswith(")"):
            raise ValueError(f"unbalanced state expression {text!r}")
        name, body = text.split("(", 1)
        name = name.strip()
        args = _split_args(body[:-1])
    if name == "bell":
        return bell_state()
    if name == "ghz":
        return ghz_state(int(args[0])) if args else ghz_state()
    if name == "werner":
        return werner_state(float(args[0]))
    if name == "mixed":
        return max_mixed(int(args[0]))
    if name == "basis":
        d, i = int(args[0]), int(args[1])
        return PureState(SpaceShape((d,)), basis_ket(d, i)).density()
    if name == "product":
        return product_state(*[parse_state_expr(a) for a in args])
    raise ValueError(f"unknown state constructor {name!r}")


def _split_args(body: str) -> list[str]:
    args, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            args.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        args.append(tail)
    return [a.strip() for a in args]


def load_state_suite(path) -> list[dict]:
    """Read suite entries {name, dims, state or matrix, analytic_esq, analytic_note}."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    out = []
    for entry in raw:
        if "state" in entry:
            rho = parse_state_expr(entry["state"])
            if "dims" in entry and tuple(entry["dims"]) != rho.shape.dims:
                rho = DensityOperator(SpaceShape(tuple(entry["dims"])), rho.matrix)
        else:
            rho = DensityOperator(
                SpaceShape(tuple(entry["dims"])), matrix_from_literal(entry["matrix"])
            )
        out.append(
            {
                "name": entry["name"],
                "rho": rho,
                "analytic_esq": entry.get("analytic_esq"),
                "analytic_note": entry.get("analytic_note", ""),
            }
        )
    return out
