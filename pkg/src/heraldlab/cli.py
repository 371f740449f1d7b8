"""Command-line front end.

Exit codes: 0 success, 2 configuration/usage error, 3 desk-scale guard
exceeded, 4 all requested verdicts INCONCLUSIVE (honest but unresolved).
The cache directory defaults to .cache under the working directory; the
HERALDLAB_CACHE_DIR environment variable overrides the default and the
--cache-dir flag overrides both.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bounds import (
    HeraldBlock,
    HeraldSpec,
    blocksize_bound,
    cor42_bound,
    cor43_bound,
    cor53_bound,
    post_selected_capacity,
    thm41_bound,
    thm51_compare,
)
from .channels import choi_matrix, resolve_channel
from .esq import EsqOpts, esq_upper, esq_upper_through_channel, load_state_suite, parse_state_expr
from .experiments import EXPERIMENTS, load_config, run as run_experiment
from .games import GameOpts, classical_value, entangled_value_lower, multi_bob_values, resolve_game
from .holevo import HolevoOpts, maximize_holevo, maximize_holevo_auto, maximize_holevo_flagged
from .qcore import GuardExceeded

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_INCONCLUSIVE = 4


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_or_none(value):
    return None if value is None else float(value)


def _add_globals(parser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d if suppress else 0,
                        help="base RNG seed")
    parser.add_argument("--jobs", type=int, default=d if suppress else 1,
                        help="concurrent grid points for run")
    parser.add_argument("--cache-dir", default=d, help="result cache directory")
    parser.add_argument("--out", default=d, help="output directory or file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heraldlab",
        description="Heralded-channel capacity bounds, squashed entanglement, and nonlocal games.",
    )
    _add_globals(parser, suppress=False)
    # the same flags are accepted after the subcommand; SUPPRESS keeps the
    # subparser from clobbering values parsed before it
    globals_parent = argparse.ArgumentParser(add_help=False)
    _add_globals(globals_parent, suppress=True)
    parents = {"parents": [globals_parent]}
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("channel", help="inspect and validate a channel", **parents)
    p.add_argument("spec", help="channel expression (e.g. erasure(identity(2),0.3)) or file")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("holevo", help="optimize Holevo information of a channel", **parents)
    p.add_argument("spec")
    p.add_argument("--mode", choices=("auto", "flagged", "naive"), default="auto")
    _add_holevo_opts(p)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("esq", help="squashed-entanglement upper bound of a state", **parents)
    p.add_argument("state", help="state expression (e.g. bell()) or suite file")
    p.add_argument("--a", type=_int_list, default=[0], help="comma-separated A factors")
    p.add_argument("--b", type=_int_list, default=None, help="comma-separated B factors")
    p.add_argument("--through", default=None, help="send B through this channel first")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--ext-dim", type=int, default=None)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("game", help="nonlocal game values")
    gs = p.add_subparsers(dest="game_command", required=True)
    pv = gs.add_parser("value", help="classical or see-saw value of one game", **parents)
    pv.add_argument("--game", required=True, help="builtin name (chsh) or game file")
    pv.add_argument("--mode", choices=("classical", "seesaw"), default="classical")
    pv.add_argument("--dA", type=int, default=2)
    pv.add_argument("--dB", type=int, default=2)
    pv.add_argument("--restarts", type=int, default=None)
    pv.add_argument("--json", action="store_true")
    pm = gs.add_parser("multibob", help="shared-Alice values for a game family", **parents)
    pm.add_argument("--games", required=True, help="comma-separated names/files")
    pm.add_argument("--dA", type=int, default=2)
    pm.add_argument("--dB", type=_int_list, default=None, help="per-Bob dims, default 2 each")
    pm.add_argument("--restarts", type=int, default=None)
    pm.add_argument("--json", action="store_true")

    p = sub.add_parser("bounds", help="run one inequality harness", **parents)
    p.add_argument(
        "--bound",
        required=True,
        choices=(
            "erasure-capacity",
            "post-selected-capacity",
            "erasure-vs-herald",
            "heralded-capacity",
            "joint-capacity",
            "additivity-defect",
            "blocksize",
        ),
    )
    p.add_argument("--channel", default="identity(2)")
    p.add_argument("--bystander", default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--count", type=int, default=2)
    _add_holevo_opts(p)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("run", help="run experiment configs with caching", **parents)
    p.add_argument("configs", nargs="+", help="experiment config files (JSON)")

    p = sub.add_parser("render", help="re-render the SVG for a stored result record", **parents)
    p.add_argument("record", help="result record JSON (emitted or cached)")

    return parser


def _add_holevo_opts(p) -> None:
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--ensemble-size", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)


def _holevo_opts(args) -> HolevoOpts:
    kwargs = {"seed": args.seed}
    for attr, key in (
        ("restarts", "restarts"),
        ("ensemble_size", "ensemble_size"),
        ("max_iters", "max_iters"),
        ("tol", "tol"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            kwargs[key] = value
    return HolevoOpts(**kwargs)


def _emit(args, payload: dict, lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        for line in lines:
            print(line)


def _cache_dir(args) -> str:
    if args.cache_dir is not None:
        return args.cache_dir
    return os.environ.get("HERALDLAB_CACHE_DIR", ".cache")


# --- subcommand bodies ---------------------------------------------------------


def _cmd_channel(args) -> int:
    channel = resolve_channel(args.spec)
    sectors = [
        {"label": str(s.label), "weight": s.weight, "kraus_count": len(s.kraus)}
        for s in (channel.flag_sectors or ())
    ]
    choi_ok = True
    try:
        choi_matrix(channel)
    except GuardExceeded:
        choi_ok = False  # too large to tabulate; construction already validated CPTP
    payload = {
        "name": channel.name or args.spec,
        "in_dims": list(channel.in_shape.dims),
        "out_dims": list(channel.out_shape.dims),
        "quantum_out_dims": list(channel.quantum_out_shape.dims),
        "kraus_count": len(channel.kraus),
        "flagged": channel.flag_sectors is not None,
        "flag_sectors": sectors,
        "choi_within_guard": choi_ok,
        "meta": dict(channel.meta),
    }
    lines = [
        f"channel {payload['name']}: {payload['in_dims']} -> {payload['out_dims']}",
        f"  kraus operators: {payload['kraus_count']}, flagged: {payload['flagged']}",
        "  completeness: valid (checked at construction)",
        f"  meta: {payload['meta']}",
    ]
    for s in sectors:
        lines.append(
            f"  sector {s['label']}: weight {s['weight']:.6g}, "
            f"{s['kraus_count']} kraus terms"
        )
    _emit(args, payload, lines)
    return EXIT_OK


def _cmd_holevo(args) -> int:
    channel = resolve_channel(args.spec)
    opts = _holevo_opts(args)
    fn = {
        "auto": maximize_holevo_auto,
        "flagged": maximize_holevo_flagged,
        "naive": maximize_holevo,
    }[args.mode]
    est = fn(channel, opts)
    payload = {
        "value_bits": est.value,
        "mode": args.mode,
        "restarts_used": est.trace.get("restarts_used"),
        "ensemble_size": len(est.ensemble.probs),
        "seed": opts.seed,
    }
    _emit(args, payload, [
        f"holevo estimate: {est.value:.9f} bits "
        f"(mode {args.mode}, restarts {payload['restarts_used']}, seed {opts.seed})"
    ])
    return EXIT_OK


def _cmd_esq(args) -> int:
    opts_kwargs = {"seed": args.seed}
    if args.restarts is not None:
        opts_kwargs["restarts"] = args.restarts
    if args.ext_dim is not None:
        opts_kwargs["ext_dim"] = args.ext_dim
    opts = EsqOpts(**opts_kwargs)

    if Path(args.state).exists():
        entries = load_state_suite(args.state)
        rows = []
        for entry in entries:
            rho = entry["rho"]
            n = len(rho.shape.dims)
            a = args.a
            b = args.b if args.b is not None else [i for i in range(n) if i not in a]
            bound = esq_upper(rho, a, b, opts)
            rows.append({
                "name": entry["name"],
                "value": bound.value,
                "baseline": bound.baseline,
                "analytic": entry.get("analytic_esq"),
            })
        _emit(args, {"suite": rows}, [
            f"{r['name']}: esq <= {r['value']:.6f} (baseline {r['baseline']:.6f}"
            + (f", analytic {r['analytic']}" if r["analytic"] is not None else "")
            + ")"
            for r in rows
        ])
        return EXIT_OK

    rho = parse_state_expr(args.state)
    n = len(rho.shape.dims)
    a = args.a
    b = args.b if args.b is not None else [i for i in range(n) if i not in a]
    if args.through is not None:
        channel = resolve_channel(args.through)
        bound = esq_upper_through_channel(rho, channel, opts)
    else:
        bound = esq_upper(rho, a, b, opts)
    payload = {
        "value": bound.value,
        "baseline": bound.baseline,
        "winner": bound.trace.get("winner"),
        "a_factors": a,
        "b_factors": b,
        "seed": args.seed,
    }
    _emit(args, payload, [
        f"esq upper bound: {bound.value:.9f} (baseline {bound.baseline:.9f}, "
        f"winner {payload['winner']})"
    ])
    return EXIT_OK


def _game_opts(args) -> GameOpts:
    kwargs = {"seed": args.seed}
    if args.restarts is not None:
        kwargs["restarts"] = args.restarts
    return GameOpts(**kwargs)


def _cmd_game(args) -> int:
    if args.game_command == "value":
        game = resolve_game(args.game)
        if args.mode == "classical":
            value = classical_value(game)
            _emit(args, {"game": game.name, "classical": value},
                  [f"classical value: {value!r}"])
            return EXIT_OK
        rep = entangled_value_lower(game, args.dA, args.dB, _game_opts(args))
        payload = {
            "game": game.name,
            "classical": rep.classical,
            "classical_exact": rep.classical_exact,
            "entangled_lower": rep.entangled_lower,
            "sweeps": rep.trace["sweeps"],
            "dA": args.dA,
            "dB": args.dB,
        }
        _emit(args, payload, [
            f"classical value: {rep.classical!r}"
            + (f" (= {rep.classical_exact})" if rep.classical_exact else ""),
            f"see-saw lower bound at dA={args.dA}, dB={args.dB}: "
            f"{rep.entangled_lower:.9f}",
        ])
        return EXIT_OK

    games = [resolve_game(tok) for tok in args.games.split(",") if tok.strip()]
    d_bs = args.dB if args.dB is not None else [2] * len(games)
    rep = multi_bob_values(games, args.dA, d_bs, _game_opts(args))
    payload = {
        "games": [g.name for g in games],
        "classical_average": rep.classical,
        "entangled_lower": rep.entangled_lower,
        "gap": rep.details["gap"],
        "monogamy_bound": rep.monogamy_bound,
        "dA": args.dA,
        "dBs": list(d_bs),
    }
    _emit(args, payload, [
        f"average classical value: {rep.classical!r}",
        f"shared-Alice see-saw lower bound: {rep.entangled_lower:.9f}",
        f"gap {rep.details['gap']:.9f} <= monogamy budget {rep.monogamy_bound:.9f}",
    ])
    return EXIT_OK


def _cmd_bounds(args) -> int:
    channel = resolve_channel(args.channel)
    opts = _holevo_opts(args)
    lam = _float_or_none(args.lam)

    def need_lam():
        if lam is None:
            raise ValueError(f"--lam is required for {args.bound}")
        return lam

    if args.bound == "erasure-capacity":
        report = cor53_bound(channel, need_lam(), opts)
    elif args.bound == "post-selected-capacity":
        report = post_selected_capacity(channel, need_lam(), opts)
    elif args.bound == "erasure-vs-herald":
        report = thm51_compare(channel, args.n, need_lam(), opts)
    elif args.bound == "blocksize":
        report = blocksize_bound([channel] * args.count, need_lam(), opts=opts)
    else:
        spec = HeraldSpec((HeraldBlock(tuple([channel] * args.n), args.k),))
        if args.bound == "heralded-capacity":
            report = cor42_bound(spec, opts)
        else:
            bystander = resolve_channel(args.bystander or "identity(2)")
            if args.bound == "joint-capacity":
                report = cor43_bound(bystander, spec, opts)
            else:
                report = thm41_bound(bystander, spec, opts)

    payload = {
        "bound": report.bound_id,
        "lhs": report.lhs,
        "lhs_provenance": report.lhs_provenance,
        "rhs": report.rhs,
        "rhs_breakdown": report.rhs_breakdown,
        "slack": report.slack,
        "verdict": report.verdict,
        "details": report.details,
        "seed": report.seed,
    }
    _emit(args, payload, [
        f"{report.bound_id}: lhs={report.lhs:.6f} rhs={report.rhs:.6f} "
        f"slack={report.slack:.6f} verdict={report.verdict}"
    ])
    return EXIT_OK if report.passed() else EXIT_INCONCLUSIVE


def _cmd_run(args) -> int:
    cache_dir = _cache_dir(args)
    verdicts: list[str] = []
    for path in args.configs:
        config = load_config(path)
        if args.out is not None:
            config = type(config)(
                experiment=config.experiment,
                inputs=config.inputs,
                grid=config.grid,
                opts=config.opts,
                seed=config.seed,
                out_dir=args.out,
                out_files=config.out_files,
                name=config.name,
            )
        record = run_experiment(config, cache_dir=cache_dir, jobs=args.jobs)
        row_verdicts = [r.get("verdict", "PASS") for r in record.rows]
        verdicts.extend(row_verdicts)
        if config.out_dir:
            where = config.out_dir
        elif config.out_files:
            where = ", ".join(str(p) for p in config.out_files.values())
        else:
            where = "(record cached only)"
        print(
            f"{record.experiment}: {len(record.rows)} rows, "
            f"cached={record.cached}, fingerprint={record.fingerprint[:12]} -> {where}"
        )
        for row in record.rows:
            print("  " + ", ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
    if verdicts and all(v.startswith("INCONCLUSIVE") for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _cmd_render(args) -> int:
    from .render import render_svg, write_atomic

    with open(args.record, encoding="utf-8") as fh:
        stored = json.load(fh)
    stored.pop("checksum", None)
    experiment = stored.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ValueError(f"record names unknown experiment {experiment!r}")
    _, svg_fn = EXPERIMENTS[experiment]
    series, style = svg_fn(list(stored["rows"]))
    out = Path(args.out) if args.out else Path(args.record).with_suffix(".svg")
    write_atomic(out, render_svg(series, style))
    print(f"wrote {out}")
    return EXIT_OK


_COMMANDS = {
    "channel": _cmd_channel,
    "holevo": _cmd_holevo,
    "esq": _cmd_esq,
    "game": _cmd_game,
    "bounds": _cmd_bounds,
    "run": _cmd_run,
    "render": _cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GuardExceeded as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
