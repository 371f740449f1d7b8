"""Bipartite nonlocal games: exact classical values and see-saw lower bounds.

Entangled values are certified from below only: every reported strategy is a
valid POVM family on an explicit state, and the see-saw is seeded from the
best classical strategy, so the quantum report never falls below the
classical value.  In the multi-Bob referee model a uniformly random game is
played, Alice's measurements are shared across games (question alphabets are
disjointly unioned), and each Bob sees only their own game.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .qcore import content_fingerprint, GuardExceeded

CLASSICAL_GUARD = 10**7
SEESAW_GUARD = 36
MULTIBOB_GUARD = 64


@dataclass(frozen=True, eq=False)
class Game:
    """Two-player referee game: question weights pi, win predicate v.

    pi_exact keeps the rational question distribution when one was supplied,
    making the classical value exact; otherwise classical_value warns once.
    """

    n_x: int
    n_y: int
    n_a: int
    n_b: int
    pi: np.ndarray  # (nX, nY) floats
    v: np.ndarray  # (nX, nY, nA, nB) 0/1
    name: str = ""
    pi_exact: tuple | None = None  # nested tuples of Fraction

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        v = np.asarray(self.v)
        if pi.shape != (self.n_x, self.n_y):
            raise ValueError(f"pi shape {pi.shape}, expected {(self.n_x, self.n_y)}")
        if v.shape != (self.n_x, self.n_y, self.n_a, self.n_b):
            raise ValueError(f"v shape {v.shape} does not match the alphabets")
        if pi.min() < 0 or abs(pi.sum() - 1.0) > 1e-9:
            raise ValueError("pi must be a probability matrix")
        if not np.isin(v, (0, 1)).all():
            raise ValueError("v entries must be 0 or 1")
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)
        vi = v.astype(np.int64)
        vi.flags.writeable = False
        object.__setattr__(self, "v", vi)

    def fingerprint(self) -> str:
        return content_fingerprint("game", self.name, self.pi, self.v.astype(float))


def make_game(pi, v, name: str = "") -> Game:
    """Build a Game, keeping rational pi entries exact.

    Entries may be Fractions, ints, strings like "3/8", or floats; a float
    anywhere drops exactness (with a warning at classical evaluation).
    """
    rows = [list(r) for r in pi]
    n_x = len(rows)
    n_y = len(rows[0])
    exact = True
    float_rows = []
    frac_rows = []
    for r in rows:
        fr, fl = [], []
        for entry in r:
            if isinstance(entry, float) and not entry.is_integer():
                exact = False
                fr.append(None)
                fl.append(entry)
            else:
                f = Fraction(str(entry)) if isinstance(entry, str) else Fraction(entry)
                fr.append(f)
                fl.append(float(f))
        frac_rows.append(fr)
        float_rows.append(fl)
    pi_exact = tuple(tuple(r) for r in frac_rows) if exact else None
    pi_float = np.array(float_rows, dtype=float)
    v = np.asarray(v)
    n_a, n_b = v.shape[2], v.shape[3]
    return Game(n_x, n_y, n_a, n_b, pi_float, v, name=name, pi_exact=pi_exact)


def chsh_game() -> Game:
    v = np.zeros((2, 2, 2, 2), dtype=int)
    for x, y, a, b in itertools.product(range(2), repeat=4):
        v[x, y, a, b] = 1 if (a ^ b) == (x & y) else 0
    pi = [[Fraction(1, 4)] * 2] * 2
    return make_game(pi, v, name="chsh")


BUILTIN_GAMES = {"chsh": chsh_game}


# --- classical value ----------------------------------------------------------

def _best_classical(game: Game) -> tuple[float, Fraction | None, tuple, tuple]:
    """Exact optimum over deterministic strategies, plus one maximizer."""
    size = game.n_a**game.n_x * game.n_b**game.n_y
    if size > CLASSICAL_GUARD:
        raise GuardExceeded(f"strategy count {size} exceeds guard {CLASSICAL_GUARD}")
    if game.pi_exact is not None:
        denom = math.lcm(*[f.denominator for row in game.pi_exact for f in row])
        weights = np.array(
            [[int(f * denom) for f in row] for row in game.pi_exact], dtype=np.int64
        )
    else:
        warnings.warn(
            "game probabilities are floats; classical value is not exact",
            stacklevel=3,
        )
        denom = None
        weights = game.pi
    # scores[x, a, y, b] = pi[x, y] * v[x, y, a, b]
    scores = np.einsum("xy,xyab->xayb", weights, game.v)
    best = None
    for astrat in itertools.product(range(game.n_a), repeat=game.n_x):
        per_y = scores[np.arange(game.n_x), astrat].sum(axis=0)  # (nY, nB)
        bstrat = per_y.argmax(axis=1)
        total = per_y.max(axis=1).sum()
        if best is None or total > best[0]:
            best = (total, astrat, tuple(int(b) for b in bstrat))
    total, astrat, bstrat = best
    if denom is not None:
        frac = Fraction(int(total), denom)
        return float(frac), frac, astrat, bstrat
    return float(total), None, astrat, bstrat


def classical_value(game: Game) -> float:
    """Exact maximum winning probability over deterministic strategy pairs."""
    return _best_classical(game)[0]


# --- quantum strategies ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuantumStrategy:
    """Pure shared state plus POVM families for Alice and every Bob.

    alice[q] is the POVM for (disjoint-union) question q; bobs[i][y] the POVM
    of Bob i at question y.
    """

    state: np.ndarray  # vector on prod(dims)
    dims: tuple[int, ...]  # (dA, dB_1, ..., dB_n)
    alice: tuple[tuple[np.ndarray, ...], ...]
    bobs: tuple[tuple[tuple[np.ndarray, ...], ...], ...]

    def validate(self, atol: float = 1e-10) -> None:
        if abs(np.linalg.norm(self.state) - 1.0) > atol * 10:
            raise ValueError("strategy state is not normalized")
        for label, fams in (("alice", (self.alice,)), ("bob", self.bobs)):
            for fam in fams:
                for povm in fam:
                    total = sum(povm)
                    d = total.shape[0]
                    if np.abs(total - np.eye(d)).max() > atol:
                        raise ValueError(f"{label} POVM does not sum to identity")
                    for el in povm:
                        if np.linalg.eigvalsh((el + el.conj().T) / 2).min() < -atol:
                            raise ValueError(f"{label} POVM element not PSD")


@dataclass(frozen=True, eq=False)
class GameValueReport:
    classical: float
    entangled_lower: float
    strategy: QuantumStrategy | None
    trace: dict
    monogamy_bound: float | None = None
    classical_exact: str = ""
    details: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class GameOpts:
    restarts: int = 4
    max_sweeps: int = 200
    tol: float = 1e-7
    inner_iters: int = 3
    grad_eps: float = 1e-5
    seed: int = 0


def monogamy_game_bound(n: int, d: int) -> float:
    """Average quantum advantage budget n^(-1/4) d (log2 d)^(1/4)."""
    if n < 1:
        raise ValueError(f"game count {n} below 1")
    if d < 2:
        raise ValueError(f"Alice dimension {d} below 2")
    return n**-0.25 * d * math.log2(d) ** 0.25


# --- see-saw engine ---------------------------------------------------------------

def _povm_from_roots(ms: np.ndarray) -> np.ndarray:
    """POVM from square roots: E^a = T^(-1/2) M_a^dag M_a T^(-1/2), T = sum.

    Batched over leading axes; identity mass on any null space of T is
    assigned to answer 0 so completeness holds exactly.
    """
    gram = np.einsum("...aij,...aik->...jk", ms.conj(), ms)
    w, u = np.linalg.eigh(gram)
    good = w > 1e-12
    inv = np.where(good, 1.0 / np.sqrt(np.where(good, w, 1.0)), 0.0)
    tinv = np.einsum("...ij,...j,...kj->...ik", u, inv, u.conj())
    half = np.einsum("...aij,...jk->...aik", ms, tinv)
    es = np.einsum("...aji,...ajk->...aik", half.conj(), half)
    null = np.einsum("...ij,...j,...kj->...ik", u, (~good).astype(float), u.conj())
    es[..., 0, :, :] += null
    return es


def _measure_step(ms, rewards, inner_iters, grad_eps, tol):
    """Ascend sum_a tr(E^a(M) R^a) by numerical gradient on the roots M."""

    def objective(cand):
        es = _povm_from_roots(cand)
        return np.einsum("...aij,aji->...", es, rewards).real

    val = float(objective(ms))
    shape = ms.shape
    flat = ms.reshape(-1)
    m = flat.size
    alpha = 0.5
    for _ in range(inner_iters):
        stacked = np.repeat(flat[None, :], 4 * m, axis=0)
        idx = np.arange(m)
        stacked[idx, idx] += grad_eps
        stacked[m + idx, idx] -= grad_eps
        stacked[2 * m + idx, idx] += 1j * grad_eps
        stacked[3 * m + idx, idx] -= 1j * grad_eps
        vals = objective(stacked.reshape(-1, *shape))
        grad = (vals[:m] - vals[m : 2 * m]) + 1j * (vals[2 * m : 3 * m] - vals[3 * m :])
        gn = np.linalg.norm(grad)
        if gn < 1e-13:
            break
        scales = alpha * 0.5 ** np.arange(6)
        trials = flat[None, :] + scales[:, None] * (grad / gn)[None, :]
        tvals = objective(trials.reshape(-1, *shape))
        j = int(np.argmax(tvals))
        if tvals[j] > val + tol * 0.01:
            flat = trials[j]
            val = float(tvals[j])
            alpha = min(scales[j] * 2.0, 1.0)
        else:
            alpha *= 0.125
            if alpha < 1e-4:
                break
    return flat.reshape(shape), val


def _embed_pair(op: np.ndarray, dims: tuple[int, ...], second: int) -> np.ndarray:
    """Lift an operator on (factor 0, factor `second`) to the full space."""
    n = len(dims)
    rest = [j for j in range(n) if j not in (0, second)]
    drest = math.prod(dims[j] for j in rest) if rest else 1
    full = np.kron(op, np.eye(drest, dtype=complex))
    layout = [0, second] + rest
    perm = [layout.index(j) for j in range(n)]
    t = full.reshape([dims[j] for j in layout] * 2)
    d = math.prod(dims)
    return t.transpose(perm + [p + n for p in perm]).reshape(d, d)


class _SeeSaw:
    """Alternating ascent over one joint state, shared Alice POVMs, and
    per-Bob POVMs, for a uniformly averaged family of games."""

    def __init__(self, games, dA, dBs):
        self.games = list(games)
        self.n = len(self.games)
        self.dA = dA
        self.dBs = tuple(dBs)
        self.dims = (dA,) + self.dBs
        self.dim = math.prod(self.dims)
        # Alice's disjoint-union question alphabet
        self.union = [(i, x) for i, g in enumerate(self.games) for x in range(g.n_x)]
        self.coefs = [g.pi[:, :, None, None] * g.v / self.n for g in self.games]

    def pair_density(self, psi, i):
        t = psi.reshape(self.dims)
        moved = np.moveaxis(t, (0, i + 1), (0, 1))
        moved = moved.reshape(self.dA, self.dBs[i], -1)
        rho = np.einsum("abr,cdr->abcd", moved, moved.conj())
        return rho  # (dA, dBi, dA, dBi)

    def value(self, psi, alice, bobs):
        total = 0.0
        for i, g in enumerate(self.games):
            rho = self.pair_density(psi, i)
            for x in range(g.n_x):
                e = alice[self.union.index((i, x))]
                for y in range(g.n_y):
                    f = bobs[i][y]
                    for a in range(g.n_a):
                        for b in range(g.n_b):
                            c = self.coefs[i][x, y, a, b]
                            if c == 0.0:
                                continue
                            total += c * np.einsum(
                                "kjlm,lk,mj->", rho, e[a], f[b]
                            ).real
        return total

    def game_operator(self, alice, bobs):
        r = np.zeros((self.dim, self.dim), dtype=complex)
        for i, g in enumerate(self.games):
            op = np.zeros((self.dA * self.dBs[i],) * 2, dtype=complex)
            for x, y, a, b in itertools.product(
                range(g.n_x), range(g.n_y), range(g.n_a), range(g.n_b)
            ):
                c = self.coefs[i][x, y, a, b]
                if c:
                    e = alice[self.union.index((i, x))][a]
                    op += c * np.kron(e, bobs[i][y][b])
            r += _embed_pair(op, self.dims, i + 1)
        return r

    def alice_rewards(self, psi, bobs, q):
        i, x = self.union[q]
        g = self.games[i]
        rho = self.pair_density(psi, i)
        rewards = np.zeros((g.n_a, self.dA, self.dA), dtype=complex)
        for y in range(g.n_y):
            for b in range(g.n_b):
                contr = np.einsum("kjlm,mj->kl", rho, bobs[i][y][b])
                for a in range(g.n_a):
                    rewards[a] += self.coefs[i][x, y, a, b] * contr
        return rewards

    def bob_rewards(self, psi, alice, i, y):
        g = self.games[i]
        rho = self.pair_density(psi, i)
        rewards = np.zeros((g.n_b, self.dBs[i], self.dBs[i]), dtype=complex)
        for x in range(g.n_x):
            e = alice[self.union.index((i, x))]
            for a in range(g.n_a):
                contr = np.einsum("kjlm,lk->jm", rho, e[a])
                for b in range(g.n_b):
                    rewards[b] += self.coefs[i][x, y, a, b] * contr
        return rewards


def _classical_roots(n_ans: int, d: int, winner: int) -> np.ndarray:
    ms = np.zeros((n_ans, d, d), dtype=complex)
    ms[winner] = np.eye(d)
    return ms


def _random_roots(n_ans: int, d: int, rng) -> np.ndarray:
    return rng.standard_normal((n_ans, d, d)) + 1j * rng.standard_normal((n_ans, d, d))


def _seesaw_run(engine: _SeeSaw, roots_a, roots_b, psi, opts) -> tuple:
    alice = [_povm_from_roots(m) for m in roots_a]
    bobs = [[_povm_from_roots(m) for m in fam] for fam in roots_b]
    val = engine.value(psi, alice, bobs)
    history = [val]
    for _ in range(opts.max_sweeps):
        before = val
        r = engine.game_operator(alice, bobs)
        _, u = np.linalg.eigh(r)
        cand = u[:, -1]
        cval = engine.value(cand, alice, bobs)
        if cval > val:
            psi, val = cand, cval
        for q in range(len(engine.union)):
            rewards = engine.alice_rewards(psi, bobs, q)
            roots_a[q], _ = _measure_step(
                roots_a[q], rewards, opts.inner_iters, opts.grad_eps, opts.tol
            )
            alice[q] = _povm_from_roots(roots_a[q])
        for i, g in enumerate(engine.games):
            for y in range(g.n_y):
                rewards = engine.bob_rewards(psi, alice, i, y)
                roots_b[i][y], _ = _measure_step(
                    roots_b[i][y], rewards, opts.inner_iters, opts.grad_eps, opts.tol
                )
                bobs[i][y] = _povm_from_roots(roots_b[i][y])
        val = engine.value(psi, alice, bobs)
        history.append(val)
        if val - before < opts.tol:
            break
    return val, psi, alice, bobs, history


def _seesaw_best(games, dA, dBs, opts) -> tuple:
    engine = _SeeSaw(games, dA, dBs)
    classicals = [_best_classical(g) for g in games]

    starts = []
    # classical embedding: product |0...0> state, deterministic projector POVMs
    psi0 = np.zeros(engine.dim, dtype=complex)
    psi0[0] = 1.0
    roots_a = [
        _classical_roots(games[i].n_a, dA, classicals[i][2][x])
        for i, x in engine.union
    ]
    roots_b = [
        [_classical_roots(g.n_b, dBs[i], classicals[i][3][y]) for y in range(g.n_y)]
        for i, g in enumerate(games)
    ]
    starts.append((psi0, roots_a, roots_b))
    for t in range(opts.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([opts.seed, t]))
        vec = rng.standard_normal(engine.dim) + 1j * rng.standard_normal(engine.dim)
        starts.append(
            (
                vec / np.linalg.norm(vec),
                [_random_roots(games[i].n_a, dA, rng) for i, _ in engine.union],
                [
                    [_random_roots(g.n_b, dBs[i], rng) for _ in range(g.n_y)]
                    for i, g in enumerate(games)
                ],
            )
        )

    best = None
    restart_vals = []
    for idx, (psi, ra, rb) in enumerate(starts):
        val, psi_f, alice, bobs, history = _seesaw_run(
            engine, [m.copy() for m in ra],
            [[m.copy() for m in fam] for fam in rb], psi.copy(), opts
        )
        restart_vals.append(val)
        if best is None or val > best[0]:
            best = (val, psi_f, alice, bobs, idx, history)
    val, psi_f, alice, bobs, idx, history = best

    strategy = QuantumStrategy(
        state=psi_f,
        dims=engine.dims,
        alice=tuple(tuple(povm) for povm in alice),
        bobs=tuple(tuple(tuple(povm) for povm in fam) for fam in bobs),
    )
    strategy.validate(atol=1e-8)
    trace = {
        "restart_values": restart_vals,
        "best_start": idx,
        "sweeps": len(history) - 1,
        "history": history,
        "union_questions": engine.union,
    }
    return val, strategy, trace, classicals


def entangled_value_lower(
    game: Game, dA: int, dB: int, opts: GameOpts | None = None
) -> GameValueReport:
    """See-saw lower bound on the entangled value at fixed local dimensions.

    The classical-embedding start pins the report at or above the exact
    classical value; random restarts let the ascent leave deterministic
    corners (which are see-saw fixed points).
    """
    opts = opts or GameOpts()
    if dA * dB > SEESAW_GUARD:
        raise GuardExceeded(f"joint dimension {dA * dB} exceeds guard {SEESAW_GUARD}")
    val, strategy, trace, classicals = _seesaw_best([game], dA, [dB], opts)
    cval, cfrac, _, _ = classicals[0]
    val = max(val, cval)  # the classical start certifies this floor
    return GameValueReport(
        classical=cval,
        entangled_lower=float(val),
        strategy=strategy,
        trace=trace,
        classical_exact=str(cfrac) if cfrac is not None else "",
        details={"dA": dA, "dB": dB, "lower_bound_only": True},
    )


def multi_bob_values(
    games: list[Game], dA: int, dBs, opts: GameOpts | None = None
) -> GameValueReport:
    """Average classical value (exact) and a see-saw lower bound on the
    shared-Alice entangled average, with the monogamy budget attached."""
    opts = opts or GameOpts()
    games = list(games)
    dBs = list(dBs)
    if len(dBs) != len(games):
        raise ValueError(f"{len(dBs)} Bob dimensions for {len(games)} games")
    if dA * math.prod(dBs) > MULTIBOB_GUARD:
        raise GuardExceeded(
            f"joint dimension {dA * math.prod(dBs)} exceeds guard {MULTIBOB_GUARD}"
        )
    val, strategy, trace, classicals = _seesaw_best(games, dA, dBs, opts)
    avg_exact = None
    if all(c[1] is not None for c in classicals):
        avg_exact = sum(c[1] for c in classicals) / len(games)
        aval = float(avg_exact)
    else:
        aval = sum(c[0] for c in classicals) / len(games)
    val = max(val, aval)
    bound = monogamy_game_bound(len(games), dA)
    return GameValueReport(
        classical=aval,
        entangled_lower=float(val),
        strategy=strategy,
        trace=trace,
        monogamy_bound=bound,
        classical_exact=str(avg_exact) if avg_exact is not None else "",
        details={
            "dA": dA,
            "dBs": tuple(dBs),
            "gap": float(val) - aval,
            "per_game_classical": [c[0] for c in classicals],
            "lower_bound_only": True,
        },
    )


# --- game files ------------------------------------------------------------------

def game_from_dict(data: dict) -> Game:
    game = make_game(data["pi"], np.asarray(data["v"]), name=data.get("name", ""))
    declared = {"nX": game.n_x, "nY": game.n_y, "nA": game.n_a, "nB": game.n_b}
    for key, actual in declared.items():
        if key in data and int(data[key]) != actual:
            raise ValueError(f"{key}={data[key]} disagrees with array shape {actual}")
    return game


def load_game(path) -> Game:
    with open(path, encoding="utf-8") as fh:
        return game_from_dict(json.load(fh))


def save_game(game: Game, path) -> None:
    if game.pi_exact is not None:
        pi = [[str(f) for f in row] for row in game.pi_exact]
    else:
        pi = game.pi.tolist()
    data = {
        "name": game.name,
        "nX": game.n_x,
        "nY": game.n_y,
        "nA": game.n_a,
        "nB": game.n_b,
        "pi": pi,
        "v": game.v.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def resolve_game(spec: str) -> Game:
    """A builtin name or a path to a game file."""
    if spec in BUILTIN_GAMES:
        return BUILTIN_GAMES[spec]()
    return load_game(spec)
