"""Command line: ``tianji run | play | solve | report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from tianji.agents import AGENT_KINDS, AgentSpec
from tianji.analysis import DEFAULT_ETA
from tianji.game import HorseSet
from tianji.harness import (
    InteractiveAborted,
    RunConfig,
    load_config,
    play_interactive,
    recompute_report,
    run_round_robin,
)
from tianji.solver import NAMED_POLICIES, BestResponseSolver, exploitability


def _roster(text: str) -> list[AgentSpec]:
    specs = []
    for kind in text.split(","):
        kind = kind.strip()
        if kind in ("llm", "human"):
            raise argparse.ArgumentTypeError(f"'{kind}' agents need a --config file")
        if ":" in kind:
            # best-response:<target policy>
            kind, target = kind.split(":", 1)
            specs.append(AgentSpec(f"{kind}.{target}", kind, {"target": target}))
        else:
            specs.append(AgentSpec(kind, kind))
    return specs


def cmd_run(args) -> int:
    overrides = dict(n_horses=args.n, tournaments_k=args.k, master_seed=args.seed,
                     prompt_variant=args.prompt_variant, eta=args.eta, output_dir=args.out)
    if args.config:
        config = load_config(args.config, **overrides)
    else:
        config = RunConfig(agents=args.agents or _roster("uniform,fastest-first,best-response"),
                           **{k: v for k, v in overrides.items() if v is not None})
    if config.output_dir is None:
        config.output_dir = Path("runs") / f"seed{config.master_seed}"
    result = run_round_robin(config)
    print("W (column wins minus row wins):")
    print(result.w.to_csv(), end="")
    print("B (column agent's mean log Bayes factor, nats):")
    print(result.b.to_csv(), end="")
    for pid in result.failed:
        print(f"FAILED pairing: {pid}", file=sys.stderr)
    print(f"outputs written to {config.output_dir}")
    return 1 if result.failed else 0


def cmd_play(args) -> int:
    params = {"target": args.target} if args.target else {}
    opponent = AgentSpec(args.opponent, args.opponent, params)
    config = RunConfig(agents=[opponent], n_horses=args.n, master_seed=args.seed, eta=args.eta)
    try:
        play_interactive(config, opponent)
    except InteractiveAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_solve(args) -> int:
    policy = NAMED_POLICIES[args.policy]()
    ns = range(1, args.n + 1) if args.all else [args.n]
    for n in ns:
        print(f"n={n}: exploitability({args.policy}) = {exploitability(policy, n):.12g}")
    full = HorseSet.full(args.n)
    solver = BestResponseSolver(policy)
    q = solver.q_values(full, full)
    print(f"first-round Q-values of the best responder at n={args.n}:")
    for a, v in q.items():
        print(f"  play {a}: {v:+.12g}")
    print(f"best-response opening move: {solver.best_action(full, full)}")
    print(f"states evaluated: {len(solver.values)}")
    return 0


def cmd_report(args) -> int:
    w, b = recompute_report(args.run_dir, exclude_fallbacks=args.exclude_fallbacks,
                            eta=args.eta, out=args.out or args.run_dir)
    print("W:")
    print(w.to_csv(), end="")
    print("B:")
    print(b.to_csv(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tianji", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="round-robin tournament over a roster")
    run.add_argument("--config", type=Path)
    run.add_argument("--agents", type=_roster,
                     help="comma-separated scripted kinds, used when no --config is given; "
                          "'best-response:fastest-first' sets the best responder's target")
    run.add_argument("--prompt-variant", choices=["framed", "neutral", "hinted"])
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path)
    run.add_argument("--k", type=int)
    run.add_argument("--n", type=int)
    run.add_argument("--eta", type=float)
    run.set_defaults(func=cmd_run)

    play = sub.add_parser("play", help="play one tournament at the terminal")
    play.add_argument("--opponent", default="uniform",
                      choices=sorted(AGENT_KINDS - {"llm", "human"}))
    play.add_argument("--target", choices=sorted(NAMED_POLICIES),
                      help="policy a best-response opponent is tuned against")
    play.add_argument("--n", type=int, default=7)
    play.add_argument("--seed", type=int, default=0)
    play.add_argument("--eta", type=float, default=DEFAULT_ETA)
    play.set_defaults(func=cmd_play)

    solve = sub.add_parser("solve", help="best-response values against a fixed policy")
    solve.add_argument("--policy", default="uniform", choices=sorted(NAMED_POLICIES))
    solve.add_argument("--n", type=int, default=7)
    solve.add_argument("--all", action="store_true", help="report every n from 1 to --n")
    solve.set_defaults(func=cmd_solve)

    report = sub.add_parser("report", help="recompute matrices from a run's transcripts")
    report.add_argument("run_dir", type=Path)
    report.add_argument("--exclude-fallbacks", action="store_true")
    report.add_argument("--eta", type=float)
    report.add_argument("--out", type=Path)
    report.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"tianji: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
