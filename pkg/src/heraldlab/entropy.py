"""Entropic quantities in bits, plus the continuity bounds used by the harnesses.

Subsystem arguments are tuples of factor indices into the state's shape;
reductions take the canonical (sorted) order, which leaves every quantity
here unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qcore import (
    DensityOperator,
    clamp_spectrum,
    content_fingerprint,
    partial_trace_raw,
)

LOG2 = math.log(2.0)


def entropy_of_spectrum(w: np.ndarray) -> float:
    w = clamp_spectrum(np.asarray(w, dtype=float))
    pos = w[w > 0.0]
    return float(-(pos * np.log2(pos)).sum())


def entropy_raw(m: np.ndarray) -> float:
    """Von Neumann entropy of a raw Hermitian matrix, in bits."""
    return entropy_of_spectrum(np.linalg.eigvalsh(m))


def entropy_raw_many(mats: np.ndarray) -> np.ndarray:
    """Entropies of a stacked (..., d, d) batch; closed-form spectra for qubit blocks."""
    mats = np.asarray(mats)
    if mats.shape[-1] == 2:
        half = 0.5 * (mats[..., 0, 0].real + mats[..., 1, 1].real)
        gap = 0.5 * (mats[..., 0, 0].real - mats[..., 1, 1].real)
        r = np.sqrt(gap * gap + np.abs(mats[..., 0, 1]) ** 2)
        w = np.stack([half + r, half - r], axis=-1)
    else:
        w = np.linalg.eigvalsh(mats)
    w = clamp_spectrum(w)
    out = np.where(w > 0.0, -w * np.log2(np.where(w > 0.0, w, 1.0)), 0.0)
    return out.sum(axis=-1)


def von_neumann_entropy(rho: DensityOperator) -> float:
    return entropy_raw(rho.matrix)


def _reduced(rho: DensityOperator, groups: Sequence[Sequence[int]]) -> np.ndarray:
    merged = sorted({int(i) for g in groups for i in g})
    return partial_trace_raw(rho.matrix, rho.shape.dims, merged)


def _check_disjoint(*groups: Sequence[int]):
    seen: set[int] = set()
    for g in groups:
        for i in g:
            if i in seen:
                raise ValueError(f"subsystem groups overlap at factor {i}")
            seen.add(int(i))


def conditional_entropy(rho: DensityOperator, a: Sequence[int], b: Sequence[int]) -> float:
    """S(A|B) = S(AB) - S(B)."""
    _check_disjoint(a, b)
    s_ab = entropy_raw(_reduced(rho, [a, b]))
    s_b = entropy_raw(_reduced(rho, [b])) if b else 0.0
    return s_ab - s_b


def mutual_information(rho: DensityOperator, a: Sequence[int], b: Sequence[int]) -> float:
    """I(A;B) = S(A) + S(B) - S(AB)."""
    _check_disjoint(a, b)
    s_a = entropy_raw(_reduced(rho, [a]))
    s_b = entropy_raw(_reduced(rho, [b]))
    s_ab = entropy_raw(_reduced(rho, [a, b]))
    return s_a + s_b - s_ab


def conditional_mutual_information(
    rho: DensityOperator, a: Sequence[int], b: Sequence[int], c: Sequence[int]
) -> float:
    """I(A;B|C) = S(AC) + S(BC) - S(ABC) - S(C).

    With empty C this reduces to I(A;B).
    """
    _check_disjoint(a, b, c)
    if not c:
        return mutual_information(rho, a, b)
    s_ac = entropy_raw(_reduced(rho, [a, c]))
    s_bc = entropy_raw(_reduced(rho, [b, c]))
    s_abc = entropy_raw(_reduced(rho, [a, b, c]))
    s_c = entropy_raw(_reduced(rho, [c]))
    return s_ac + s_bc - s_abc - s_c


def binary_entropy(p: float) -> float:
    """h(p) in bits with h(0) = h(1) = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def alicki_fannes_bound(delta: float, dim_a: int, variant: str = "refined") -> float:
    """Continuity bound for |S(A|B)_rho - S(A|B)_sigma| at trace distance delta.

    refined: 2*delta*log2|A| + (1+delta)*h(delta/(1+delta))
    weak:    2*delta*log2(2|A|/delta), with the delta -> 0 limit pinned to 0
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"trace distance {delta} outside [0, 1]")
    if dim_a < 1:
        raise ValueError(f"dimension {dim_a} must be positive")
    if variant == "refined":
        return 2.0 * delta * math.log2(dim_a) + (1.0 + delta) * binary_entropy(
            delta / (1.0 + delta)
        )
    if variant == "weak":
        if delta == 0.0:
            return 0.0
        return 2.0 * delta * math.log2(2.0 * dim_a / delta)
    raise ValueError(f"unknown variant {variant!r}")


def relative_entropy_raw(rho: np.ndarray, sigma: np.ndarray, support_atol: float = 1e-12) -> float:
    """D(rho || sigma) in bits; +inf when rho has mass outside supp(sigma)."""
    wr = clamp_spectrum(np.linalg.eigvalsh(rho))
    ws, vs = np.linalg.eigh(sigma)
    ws = clamp_spectrum(ws)
    neg_s_rho = float((wr[wr > 0.0] * np.log2(wr[wr > 0.0])).sum())
    diag = np.einsum("ij,jk,ki->i", vs.conj().T, rho, vs).real
    outside = float(diag[ws <= support_atol].sum())
    if outside > support_atol * 10:
        return math.inf
    inside = ws > support_atol
    cross = float((diag[inside] * np.log2(ws[inside])).sum())
    return max(0.0, neg_s_rho - cross)


@dataclass(frozen=True)
class EntropyReport:
    """Serializable record of one entropic evaluation."""

    quantity: str
    value: float
    subsystems: tuple[tuple[int, ...], ...]
    state_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "value": self.value,
            "subsystems": [list(g) for g in self.subsystems],
            "state_fingerprint": self.state_fingerprint,
        }


def entropy_report(rho: DensityOperator, quantity: str, *groups: Sequence[int]) -> EntropyReport:
    """Evaluate one of S, S(A|B), I(A;B), I(A;B|C) and wrap it as a record."""
    kinds = {
        "entropy": (0, lambda: von_neumann_entropy(rho)),
        "conditional": (2, lambda: conditional_entropy(rho, *groups)),
        "mutual": (2, lambda: mutual_information(rho, *groups)),
        "cmi": (3, lambda: conditional_mutual_information(rho, *groups)),
    }
    if quantity not in kinds:
        raise ValueError(f"unknown quantity {quantity!r}, expected one of {sorted(kinds)}")
    arity, fn = kinds[quantity]
    if len(groups) != arity:
        raise ValueError(f"{quantity} takes {arity} subsystem groups, got {len(groups)}")
    return EntropyReport(
        quantity=quantity,
        value=fn(),
        subsystems=tuple(tuple(int(i) for i in g) for g in groups),
        state_fingerprint=content_fingerprint(rho.matrix, rho.shape.dims),
    )
