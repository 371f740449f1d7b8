"""Holevo information of a channel by alternating ensemble optimization.

Two evaluation paths share one ascent loop: the naive path diagonalizes full
channel outputs, the flagged path works sector by sector on the classical
blocks and is the one to use for erasure, heralded and switch channels. Both
compute the same objective; only the spectra are organized differently.

The ascent alternates per-state gradient steps (numerically differentiated,
with step halving) with a multiplicative probability update
p(x) <- p(x) * 2^{D(Phi(rho_x) || Phi(rho_bar))}, iterated to tolerance.
Restart r draws from SeedSequence([seed, r]); results are deterministic
functions of the options.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channels import KrausChannel, apply_raw, product_channel, sector_apply_raw
from .entropy import entropy_raw_many
from .qcore import (
    content_fingerprint,
    DensityOperator,
    GuardExceeded,
    random_pure_vector,
    SpaceShape,
)

DIM_GUARD = 64
VALUE_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class CQEnsemble:
    """Classical-quantum ensemble: probabilities and matching input states."""

    probs: np.ndarray
    states: tuple[DensityOperator, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        states = tuple(self.states)
        if len(states) == 0 or p.size != len(states):
            raise ValueError(f"{p.size} probabilities for {len(states)} states")
        if p.min() < -1e-12:
            raise ValueError(f"negative probability {p.min()}")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"probabilities sum to {total!r}")
        p = np.clip(p, 0.0, None) / total
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "states", states)
        dims = {s.shape.dims for s in states}
        if len(dims) != 1:
            raise ValueError(f"ensemble states live on different shapes: {dims}")

    @property
    def shape(self) -> SpaceShape:
        return self.states[0].shape


def ensemble_from_vectors(shape, probs, vectors) -> CQEnsemble:
    shape = shape if isinstance(shape, SpaceShape) else SpaceShape(tuple(shape))
    states = []
    for v in vectors:
        v = np.asarray(v, dtype=complex).reshape(-1)
        states.append(DensityOperator(shape, np.outer(v, v.conj())))
    return CQEnsemble(np.asarray(probs, dtype=float), tuple(states))


@dataclass(frozen=True)
class HolevoOpts:
    """Optimizer budget; defaults follow the desk-scale contract."""

    ensemble_size: int | None = None
    restarts: int = 32
    tol: float = 1e-6
    max_iters: int = 500
    seed: int = 0
    prob_tol: float = 1e-8
    grad_eps: float = 1e-5
    basis_seed: bool = True
    init_ensembles: tuple = ()

    def to_dict(self) -> dict:
        return {
            "ensemble_size": self.ensemble_size,
            "restarts": self.restarts,
            "tol": self.tol,
            "max_iters": self.max_iters,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class HolevoEstimate:
    """Best ensemble found, its Holevo information, and the optimizer trace."""

    value: float
    ensemble: CQEnsemble
    trace: dict
    channel_fingerprint: str
    seed: int
    state_vectors: tuple[np.ndarray, ...] | None = None


def channel_fingerprint(channel: KrausChannel) -> str:
    return content_fingerprint(
        channel.in_shape.dims, channel.out_shape.dims, list(channel.kraus)
    )


class _Evaluator:
    """Batched output construction and entropies for one channel and path."""

    def __init__(self, channel: KrausChannel, flagged: bool):
        self.channel = channel
        self.flagged = flagged
        self.din = channel.in_shape.dim
        if flagged:
            if channel.flag_sectors is None:
                raise ValueError("flagged path requires flag_sectors")
            self.nsec = len(channel.flag_sectors)
            self.dq = channel.quantum_out_shape.dim
            # Active parts carry every state-dependent spectral feature of the
            # blocks; the dropped constant factors shift all entropies by the
            # same amount, which cancels in the objective and in the
            # multiplicative update.
            ops = channel.active_superops
            if ops is None:
                ops = channel.sector_superops
            self._sector_ops = None
            if ops is not None:
                w = channel.sector_weights()
                self._sector_ops = ops * w[:, None, None]
                self.dq = math.isqrt(ops.shape[1])
        else:
            self._superop = channel.superoperator

    def apply_states(self, mats: np.ndarray) -> np.ndarray:
        """(B, din, din) -> (B, dout, dout) or (B, nsec, dq, dq)."""
        b = mats.shape[0]
        vecs = mats.reshape(b, self.din * self.din)
        if self.flagged:
            if self._sector_ops is not None:
                out = np.einsum("soi,bi->bso", self._sector_ops, vecs)
                return out.reshape(b, self.nsec, self.dq, self.dq)
            return np.stack([sector_apply_raw(self.channel, m) for m in mats])
        if self._superop is not None:
            dout = self.channel.out_shape.dim
            out = vecs @ self._superop.T
            return out.reshape(b, dout, dout)
        return np.stack([apply_raw(self.channel, m) for m in mats])

    def entropies(self, outs: np.ndarray) -> np.ndarray:
        """Von Neumann entropy per batch entry, summing classical blocks."""
        if self.flagged:
            return entropy_raw_many(outs).sum(axis=-1)
        return entropy_raw_many(outs)

    def holevo(self, probs: np.ndarray, outs: np.ndarray, svals: np.ndarray,
               mean: np.ndarray | None = None) -> float:
        if mean is None:
            mean = self.mean(probs, outs)
        s_mean = float(self.entropies(mean[None, ...])[0])
        return s_mean - float(probs @ svals)

    def mean(self, probs: np.ndarray, outs: np.ndarray) -> np.ndarray:
        b = outs.shape[0]
        return (probs @ outs.reshape(b, -1)).reshape(outs.shape[1:])

    def relative_entropies(self, outs: np.ndarray, mean: np.ndarray, svals: np.ndarray) -> np.ndarray:
        """D(out_x || mean) in bits for every ensemble member."""
        b = outs.shape[0]
        if self.flagged:
            lmat = _log2_psd(mean)
            cross = outs.reshape(b, -1) @ lmat.transpose(0, 2, 1).reshape(-1)
        else:
            lmat = _log2_psd(mean[None, ...])[0]
            cross = outs.reshape(b, -1) @ lmat.T.reshape(-1)
        return -svals - cross.real


_SUPPORT_CUTOFF = 1e-14


def _masked_log2(w: np.ndarray) -> np.ndarray:
    return np.where(w > _SUPPORT_CUTOFF, np.log2(np.where(w > _SUPPORT_CUTOFF, w, 1.0)), 0.0)


def _log2_psd(mats: np.ndarray) -> np.ndarray:
    """Base-2 matrix log of stacked PSD blocks, zero outside the support.

    Qubit blocks avoid the eigensolver: with eigenvalues m +- r the log is
    s*M + (c - s*m)*I for s = (log w+ - log w-)/2r and c the mean log, and the
    masked-log convention carries over unchanged.
    """
    if mats.shape[-1] == 2:
        a = mats[..., 0, 0].real
        d = mats[..., 1, 1].real
        m = 0.5 * (a + d)
        gap = 0.5 * (a - d)
        r = np.sqrt(gap * gap + np.abs(mats[..., 0, 1]) ** 2)
        lp = _masked_log2(m + r)
        lm = _masked_log2(m - r)
        s = np.where(r > 1e-18, (lp - lm) / (2.0 * np.where(r > 1e-18, r, 1.0)), 0.0)
        c = 0.5 * (lp + lm)
        out = s[..., None, None] * mats
        shift = c - s * m
        out[..., 0, 0] += shift
        out[..., 1, 1] += shift
        return out
    w, v = np.linalg.eigh(mats)
    logw = _masked_log2(w)
    return (v * logw[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def _pure_mats(vectors: np.ndarray) -> np.ndarray:
    return vectors[:, :, None] * vectors.conj()[:, None, :]


def _seed_plans(opts: HolevoOpts, d: int, m: int) -> list:
    plans = [("init", e) for e in opts.init_ensembles]
    if opts.basis_seed:
        plans.append(("basis", None))
    while len(plans) < max(opts.restarts, 1):
        plans.append(("haar", None))
    return plans


def _init_vectors(kind, payload, rng, d: int, m: int):
    if kind == "basis":
        probs = np.full(d, 1.0 / d)
        vecs = np.eye(d, dtype=complex)
        return probs, vecs
    if kind == "init":
        if isinstance(payload, CQEnsemble):
            probs = payload.probs.copy()
            vecs = []
            for s in payload.states:
                w, v = np.linalg.eigh(s.matrix)
                if w[-1] < 1.0 - 1e-8:
                    raise ValueError("init ensembles must be pure for seeding")
                vecs.append(v[:, -1])
            return probs, np.stack(vecs)
        probs, vecs = payload
        return np.asarray(probs, dtype=float).copy(), np.stack(
            [np.asarray(v, dtype=complex) for v in vecs]
        )
    probs = np.full(m, 1.0 / m)
    vecs = np.stack([random_pure_vector(d, rng) for _ in range(m)])
    return probs, vecs


def _ascend(ev: _Evaluator, probs, vecs, opts: HolevoOpts):
    m, d = vecs.shape
    outs = ev.apply_states(_pure_mats(vecs))
    svals = ev.entropies(outs)
    mean = ev.mean(probs, outs)
    value = ev.holevo(probs, outs, svals, mean)
    history = [value]
    alphas = np.full(m, 0.25)
    h = opts.grad_eps
    sweeps = 0
    for sweep in range(opts.max_iters):
        sweeps = sweep + 1
        for x in range(m):
            if probs[x] <= 1e-12:
                continue
            value = _state_step(ev, probs, vecs, outs, svals, value, x, alphas, h, mean)
        probs, value, mean = _prob_step(ev, probs, outs, svals, opts)
        history.append(value)
        if history[-1] - history[-2] < opts.tol:
            break
    return value, probs, vecs, history, sweeps


def _state_step(ev, probs, vecs, outs, svals, value, x, alphas, h, mean):
    d = vecs.shape[1]
    v = vecs[x]
    px = probs[x]
    # forward/backward perturbations of the 2d real coordinates
    deltas = np.zeros((4 * d, d), dtype=complex)
    eye = np.eye(d)
    deltas[0::4] = h * eye
    deltas[1::4] = -h * eye
    deltas[2::4] = 1j * h * eye
    deltas[3::4] = -1j * h * eye
    pert = v[None, :] + deltas
    pert /= np.linalg.norm(pert, axis=1)[:, None]
    pouts = ev.apply_states(_pure_mats(pert))
    s_pout = ev.entropies(pouts)
    means_b = mean[None, ...] + px * (pouts - outs[x][None, ...])
    s_mean_b = ev.entropies(means_b)
    f = s_mean_b - px * s_pout  # objective up to a per-call constant
    grad = np.empty(2 * d)
    grad[:d] = (f[0::4] - f[1::4]) / (2 * h)
    grad[d:] = (f[2::4] - f[3::4]) / (2 * h)
    gnorm = float(np.linalg.norm(grad))
    if gnorm < 1e-12:
        return value
    direction = grad[:d] + 1j * grad[d:]
    rest = float(probs @ svals) - px * svals[x]
    scales = alphas[x] * 0.5 ** np.arange(8)
    cands = v[None, :] + scales[:, None] * direction[None, :]
    cands /= np.linalg.norm(cands, axis=1)[:, None]
    couts = ev.apply_states(_pure_mats(cands))
    s_c = ev.entropies(couts)
    cand_means = mean[None, ...] + px * (couts - outs[x][None, ...])
    cand_vals = ev.entropies(cand_means) - rest - px * s_c
    j = int(np.argmax(cand_vals))
    if cand_vals[j] > value + 1e-14:
        vecs[x] = cands[j]
        mean += px * (couts[j] - outs[x])
        outs[x] = couts[j]
        svals[x] = s_c[j]
        alphas[x] = min(scales[j] * 1.5, 2.0)
        return float(cand_vals[j])
    alphas[x] = max(alphas[x] * 0.5 ** 8, 1e-6)
    return value


def _prob_step(ev, probs, outs, svals, opts: HolevoOpts):
    b = outs.shape[0]
    flat = outs.reshape(b, -1)
    p = probs.copy()
    mean = ev.mean(p, outs)
    for _ in range(300):
        dvals = ev.relative_entropies(outs, mean, svals)
        shifted = dvals - dvals.max()
        scaled = p * np.exp2(shifted)
        total = scaled.sum()
        if total <= 0.0:
            break
        pnew = scaled / total
        done = np.abs(pnew - p).sum() < opts.prob_tol
        p = pnew
        mean = (p @ flat).reshape(outs.shape[1:])
        if done:
            break
    value = ev.holevo(p, outs, svals, mean)
    probs[:] = p
    return probs, value, mean


def _maximize(channel: KrausChannel, opts: HolevoOpts, flagged: bool) -> HolevoEstimate:
    d = channel.in_shape.dim
    if d > DIM_GUARD:
        raise GuardExceeded(f"input dimension {d} exceeds guard {DIM_GUARD}")
    ev = _Evaluator(channel, flagged)
    m = opts.ensemble_size if opts.ensemble_size is not None else d * d
    best = None
    per_restart = []
    for r, (kind, payload) in enumerate(_seed_plans(opts, d, m)):
        rng = np.random.default_rng(np.random.SeedSequence([opts.seed, r]))
        probs, vecs = _init_vectors(kind, payload, rng, d, m)
        value, probs, vecs, history, sweeps = _ascend(ev, probs.copy(), vecs.copy(), opts)
        per_restart.append(
            {"restart": r, "kind": kind, "value": value, "sweeps": sweeps,
             "history": [float(h) for h in history]}
        )
        if best is None or value > best[0]:
            best = (value, probs, vecs, r)
    value, probs, vecs, r_best = best
    value = max(value, 0.0)
    limit = math.log2(channel.quantum_out_shape.dim)
    if value > limit + VALUE_SLACK:
        raise RuntimeError(
            f"estimate {value} exceeds log2 of the quantum output dimension {limit}"
        )
    keep = probs > 1e-12
    ensemble = ensemble_from_vectors(channel.in_shape, probs[keep] / probs[keep].sum(),
                                     vecs[keep])
    return HolevoEstimate(
        value=float(value),
        ensemble=ensemble,
        trace={
            "path": "flagged" if flagged else "naive",
            "restarts_used": len(per_restart),
            "best_restart": r_best,
            "per_restart": per_restart,
            "opts": opts.to_dict(),
        },
        channel_fingerprint=channel_fingerprint(channel),
        seed=opts.seed,
        state_vectors=tuple(vecs[keep]),
    )


def holevo_of_ensemble(channel: KrausChannel, ensemble: CQEnsemble) -> float:
    """I(X;B) of the classical-quantum output of the given ensemble."""
    if ensemble.shape.dims != channel.in_shape.dims:
        raise ValueError(
            f"ensemble on {ensemble.shape.dims}, channel expects {channel.in_shape.dims}"
        )
    ev = _Evaluator(channel, flagged=channel.flag_sectors is not None)
    mats = np.stack([s.matrix for s in ensemble.states])
    outs = ev.apply_states(mats)
    svals = ev.entropies(outs)
    return max(0.0, ev.holevo(ensemble.probs, outs, svals))


def maximize_holevo(channel: KrausChannel, opts: HolevoOpts | None = None) -> HolevoEstimate:
    """Estimate the Holevo information on the full output space (naive path)."""
    return _maximize(channel, opts or HolevoOpts(), flagged=False)


def maximize_holevo_flagged(channel: KrausChannel, opts: HolevoOpts | None = None) -> HolevoEstimate:
    """Estimate the Holevo information sector by sector; needs flag_sectors."""
    if channel.flag_sectors is None:
        raise ValueError("flagged path requires flag_sectors")
    return _maximize(channel, opts or HolevoOpts(), flagged=True)


def maximize_holevo_auto(channel: KrausChannel, opts: HolevoOpts | None = None) -> HolevoEstimate:
    if channel.flag_sectors is not None:
        return maximize_holevo_flagged(channel, opts)
    return maximize_holevo(channel, opts)


@dataclass(frozen=True)
class ChiPotSpec:
    """How to resolve the potential (assisted) Holevo information of a channel.

    mode 'declared' echoes a trusted value, 'strongly_additive' evaluates the
    plain Holevo estimate (exact for strongly additive channels), and
    'assisted_search' maximizes chi(Phi (x) Psi) - chi(Psi) over a declared
    assistant family, which certifies a lower bound only.
    """

    mode: str
    value: float | None = None
    assistants: tuple[KrausChannel, ...] = ()

    def __post_init__(self):
        if self.mode not in ("declared", "strongly_additive", "assisted_search"):
            raise ValueError(f"unknown chi_pot mode {self.mode!r}")
        if self.mode == "declared" and self.value is None:
            raise ValueError("declared mode needs a value")


@dataclass(frozen=True)
class ChiPotEstimate:
    value: float
    provenance: str  # declared | additive | assisted-lower-bound
    details: dict = field(default_factory=dict)


def chi_pot_spec_from_meta(channel: KrausChannel) -> ChiPotSpec:
    meta = channel.meta or {}
    if meta.get("declared_chi_pot") is not None:
        return ChiPotSpec("declared", value=float(meta["declared_chi_pot"]))
    if meta.get("strongly_additive"):
        return ChiPotSpec("strongly_additive")
    raise ValueError(
        f"chi_pot unresolvable for channel {channel.name or '<unnamed>'}: "
        "no declaration and no additivity statement"
    )


def chi_pot(
    channel: KrausChannel,
    spec: ChiPotSpec | None = None,
    opts: HolevoOpts | None = None,
) -> ChiPotEstimate:
    """Potential Holevo information under the declared resolution strategy."""
    spec = spec or chi_pot_spec_from_meta(channel)
    opts = opts or HolevoOpts()
    if spec.mode == "declared":
        return ChiPotEstimate(float(spec.value), "declared")
    if spec.mode == "strongly_additive":
        est = maximize_holevo_auto(channel, opts)
        return ChiPotEstimate(est.value, "additive", {"chi": est.value})
    base = maximize_holevo_auto(channel, opts)
    best = base.value
    details = {"base_chi": base.value, "assistants": []}
    for psi in spec.assistants:
        joint = product_channel([channel, psi])
        if joint.in_shape.dim > DIM_GUARD:
            raise ValueError("assistant pushes the joint input beyond the guard")
        est_psi = maximize_holevo_auto(psi, opts)
        seed = _product_seed(base, est_psi)
        joint_opts = replace(opts, init_ensembles=(seed,) + opts.init_ensembles)
        est_joint = maximize_holevo_auto(joint, joint_opts)
        gain = est_joint.value - est_psi.value
        details["assistants"].append(
            {"assistant": psi.name, "chi_joint": est_joint.value,
             "chi_assistant": est_psi.value, "gain": gain}
        )
        best = max(best, gain)
    return ChiPotEstimate(best, "assisted-lower-bound", details)


def _product_seed(a: HolevoEstimate, b: HolevoEstimate):
    if a.state_vectors is None or b.state_vectors is None:
        raise ValueError("estimates lack state vectors for seeding")
    probs = np.outer(a.ensemble.probs, b.ensemble.probs).reshape(-1)
    vecs = [np.kron(u, v) for u in a.state_vectors for v in b.state_vectors]
    return probs, vecs


def regularization_probe(
    channel: KrausChannel, opts: HolevoOpts | None = None, copies: int = 2
) -> dict:
    """Per-copy Holevo rates chi(Phi^(x)m)/m for m = 1..copies.

    The m-th stage is seeded with the product of the best (m-1)-ensemble and
    the best single-copy ensemble, so the reported gap is bounded below by the
    numerical tolerance.
    """
    opts = opts or HolevoOpts()
    if channel.in_shape.dim**copies > DIM_GUARD:
        raise GuardExceeded(
            f"input dimension {channel.in_shape.dim**copies} exceeds guard {DIM_GUARD}"
        )
    single = maximize_holevo_auto(channel, opts)
    rates = {1: single.value}
    prev = single
    current = channel
    for m in range(2, copies + 1):
        current = product_channel([current, channel])
        seed = _product_seed(prev, single)
        stage_opts = replace(opts, init_ensembles=(seed,) + opts.init_ensembles)
        est = maximize_holevo_auto(current, stage_opts)
        rates[m] = est.value / m
        prev = est
    gaps = {m: rates[m] - rates[1] for m in rates if m > 1}
    return {
        "per_copy_rate": rates,
        "gap_vs_single": gaps,
        "channel_fingerprint": channel_fingerprint(channel),
    }
