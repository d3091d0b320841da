"""Command-line front end for the cascade advisory pipeline.

Subcommands: simulate, pool, train, evaluate, rank, whatif, serve.
Exit codes: 0 success, 2 usage error (argparse), 3 operational failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from ..cascade import Policy, concat_traces, run_cascade, run_with_wind_reduction
from ..influence import (
    LinkFailureIM,
    estimate_transitions,
    load_model,
    save_model,
    train_link_model,
    train_load_model,
)
from ..metrics import criticality, error_rates, loss_report, resilience_for_pair
from ..netcase import (
    CaseError,
    NetworkCase,
    ScenarioProfile,
    load_bundled_case,
    load_priority_overrides,
    parse_case_file,
)
from ..sampler import PoolConfig, SamplePool, generate_pool, load_pool, pool_statistics, save_pool

__all__ = ["main", "build_parser"]


class CliError(Exception):
    """Operational failure; reported on stderr with exit code 3."""


def _load_case(spec: str, priorities: str | None = None) -> NetworkCase:
    try:
        if spec in ("ieee30",):
            case = load_bundled_case(spec)
        else:
            with open(spec) as fh:
                case = parse_case_file(fh.read())
    except (OSError, CaseError) as exc:
        raise CliError(f"cannot load case {spec!r}: {exc}")
    if priorities:
        try:
            with open(priorities) as fh:
                case = load_priority_overrides(case, fh.read())
        except (OSError, CaseError) as exc:
            raise CliError(f"cannot apply priorities {priorities!r}: {exc}")
    return case


def _parse_lines(text: str) -> frozenset[int]:
    try:
        ids = frozenset(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise CliError(f"bad --lines value {text!r}")
    if not ids:
        raise CliError("--lines must name at least one branch")
    return ids


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise CliError(f"bad numeric list {text!r}")


def _profile(args, lines) -> ScenarioProfile:
    try:
        return ScenarioProfile(
            loading_multiplier=args.c,
            wind_fraction=args.w,
            initial_contingencies=lines,
            wind_reduction=args.dw,
        )
    except ValueError as exc:
        raise CliError(str(exc))


def _emit(doc, args, csv_rows=None):
    """Write JSON (default) or CSV to --out or stdout."""
    if getattr(args, "format", "json") == "csv" and csv_rows is not None:
        buf = io.StringIO()
        writer = csv.writer(buf)
        for row in csv_rows:
            writer.writerow(row)
        text = buf.getvalue()
    else:
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    case = _load_case(args.case, args.priorities)
    lines = _parse_lines(args.lines)
    profile = _profile(args, lines)
    policy = Policy(args.policy)
    try:
        profile.validate(case)
        if profile.wind_reduction > 0:
            pre, post = run_with_wind_reduction(case, profile, policy)
            trace = concat_traces(pre, post)
        else:
            trace = run_cascade(case, profile, policy)
    except (ValueError, CaseError) as exc:
        raise CliError(str(exc))
    config = PoolConfig(
        n_samples=1,
        loading_multipliers=(args.c,),
        wind_fraction=args.w,
        wind_reductions=(args.dw,) if args.dw > 0 else (),
        policy=policy,
        seed=args.seed,
    )
    pool = SamplePool(config=config, traces=[trace], train_idx=[0], test_idx=[])
    if args.out:
        save_pool(pool, args.out)
    else:
        _emit(trace.to_dict(), args)
    rep = loss_report(trace, case)
    print(
        f"steps={trace.n_steps} failed={int((trace.final_state == 0).sum())} "
        f"G={rep.grid_loss:.4f} L={rep.consumer_loss:.4f}",
        file=sys.stderr,
    )
    return 0


def cmd_pool(args) -> int:
    case = _load_case(args.case, args.priorities)
    try:
        config = PoolConfig(
            n_samples=args.samples,
            loading_multipliers=_parse_floats(args.loadings),
            wind_fraction=args.w,
            wind_reductions=_parse_floats(args.reductions) if args.reductions else (),
            policy=Policy(args.policy),
            seed=args.seed,
            train_fraction=args.train_fraction,
            distinct_pairs=args.distinct_pairs,
        ).validate()
        pool = generate_pool(case, config)
    except ValueError as exc:
        raise CliError(str(exc))
    save_pool(pool, args.out)
    stats = pool_statistics(pool)
    print(
        f"wrote {len(pool.traces)} traces to {args.out} "
        f"(mean length {stats['mean_trace_length']:.2f})",
        file=sys.stderr,
    )
    return 0


def _read_pool(path: str) -> SamplePool:
    try:
        return load_pool(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read pool {path!r}: {exc}")


def cmd_train(args) -> int:
    pool = _read_pool(args.pool)
    try:
        transitions = estimate_transitions(pool)
        if args.target == "link":
            model = train_link_model(pool, transitions)
        else:
            model = train_load_model(pool, transitions)
    except ValueError as exc:
        raise CliError(str(exc))
    save_model(model, args.out)
    summary = {k: v for k, v in model.meta.items() if "error" in k or "converged" in k}
    print(f"trained {args.target} model -> {args.out} {json.dumps(summary)}", file=sys.stderr)
    return 0


def _read_model(path: str):
    try:
        return load_model(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read model {path!r}: {exc}")


def cmd_evaluate(args) -> int:
    pool = _read_pool(args.pool)
    model_link = _read_model(args.link_model)
    model_load = _read_model(args.load_model)
    try:
        rep = error_rates(model_link, model_load, pool)
    except ValueError as exc:
        raise CliError(str(exc))
    doc = {"link": rep.link, "load": rep.load}
    rows = [["target", "method", "error"]]
    rows += [["link", m, f"{v:.6f}"] for m, v in sorted(rep.link.items())]
    rows += [["load", m, f"{v:.6f}"] for m, v in sorted(rep.load.items())]
    _emit(doc, args, csv_rows=rows)
    return 0


def cmd_rank(args) -> int:
    model_link = _read_model(args.link_model)
    model_load = _read_model(args.load_model)
    if not isinstance(model_link, LinkFailureIM):
        raise CliError("--link-model does not contain a link model")
    try:
        rep = criticality(model_link, model_load)
    except ValueError as exc:
        raise CliError(str(exc))
    doc = {"ranking": rep.ranking, "c_d": rep.c_d.tolist(), "c_e": rep.c_e.tolist()}
    rows = [["rank", "branch", "c_d", "c_e"]]
    for rank, bid in enumerate(rep.ranking, start=1):
        rows.append([rank, bid, f"{rep.c_d[bid - 1]:.6f}", f"{rep.c_e[bid - 1]:.6f}"])
    _emit(doc, args, csv_rows=rows)
    return 0


def cmd_whatif(args) -> int:
    case = _load_case(args.case, args.priorities)
    lines = _parse_lines(args.lines)
    grid = _parse_floats(args.grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise CliError("--grid must be strictly increasing")
    curves = {}
    for name in args.policies.split(","):
        policy = Policy(name.strip())
        points = []
        for dw in grid:
            profile = ScenarioProfile(
                loading_multiplier=args.c,
                wind_fraction=args.w,
                initial_contingencies=lines,
                wind_reduction=dw,
            )
            try:
                profile.validate(case)
                pre, post = run_with_wind_reduction(case, profile, policy)
            except (ValueError, CaseError) as exc:
                raise CliError(str(exc))
            rep = resilience_for_pair(pre, post, case, dw)
            points.append({"delta_w": dw, "r": rep.r, "r_grid": rep.r_grid, "r_consumer": rep.r_consumer})
        curves[policy.value] = points
    rows = [["policy", "delta_w", "r", "r_grid", "r_consumer"]]
    for pol, points in sorted(curves.items()):
        for pt in points:
            rows.append([pol, pt["delta_w"], f"{pt['r']:.6f}", f"{pt['r_grid']:.6f}", f"{pt['r_consumer']:.6f}"])
    _emit({"grid": list(grid), "curves": curves}, args, csv_rows=rows)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import AdvisorService, create_app
    from .store import ArtifactStore

    store = ArtifactStore(args.data_dir) if args.data_dir else ArtifactStore()
    app = create_app(AdvisorService(store=store))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p, fmt=False):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    if fmt:
        p.add_argument("--format", choices=("json", "csv"), default="json")


def _add_scenario(p):
    p.add_argument("--case", default="ieee30", help="bundled case name or file path")
    p.add_argument("--c", type=float, default=1.0, help="loading multiplier")
    p.add_argument("--w", type=float, default=0.0, help="wind fraction of base load")
    p.add_argument("--dw", type=float, default=0.0, help="wind reduction fraction")
    p.add_argument("--priorities", default=None, help="CSV bus_id,priority overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcascade",
        description="Failure-cascade simulation, influence-model training, and advisory queries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one cascade scenario")
    _add_scenario(p)
    p.add_argument("--lines", required=True, help="comma-separated initial branch ids")
    p.add_argument("--policy", choices=[pol.value for pol in Policy], default="exp1")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pool", help="generate a seeded sample pool")
    p.add_argument("--case", default="ieee30")
    p.add_argument("--priorities", default=None)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--loadings", required=True, help="comma-separated multipliers")
    p.add_argument("--w", type=float, default=0.0)
    p.add_argument("--reductions", default=None, help="comma-separated Δw values")
    p.add_argument("--policy", choices=[pol.value for pol in Policy], default="exp1")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--distinct-pairs", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("train", help="fit an influence model from a pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--target", choices=("link", "load"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="test-split error rates vs. baselines")
    p.add_argument("--pool", required=True)
    p.add_argument("--link-model", required=True)
    p.add_argument("--load-model", required=True)
    _add_common(p, fmt=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="criticality ranking from trained models")
    p.add_argument("--link-model", required=True)
    p.add_argument("--load-model", required=True)
    _add_common(p, fmt=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("whatif", help="wind-reduction resilience sweep")
    _add_scenario(p)
    p.add_argument("--lines", required=True)
    p.add_argument("--policies", default="exp1,exp3")
    p.add_argument("--grid", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7")
    _add_common(p, fmt=True)
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("serve", help="run the HTTP advisory service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8030)
    p.add_argument("--data-dir", default=None, help="artifact store directory")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        return 130


def entrypoint():  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
