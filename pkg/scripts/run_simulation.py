"""Run the continuous diagnosis workload and report the learning curve.

Example:
    python scripts/run_simulation.py --sessions 500 --recurrence 0.5 \
        --csv curve.csv --traces traces.jsonl
"""

import argparse
import json

from kubediag.simulate import SimulationConfig, run_continuous, write_curve_csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sessions", type=int, default=500, help="stream length")
    parser.add_argument("--recurrence", type=float, default=0.3,
                        help="probability that a slot replays a seen scenario")
    parser.add_argument("--window", type=int, default=50, help="learning-curve window")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--corpus", type=int, default=120, help="distinct scenarios")
    parser.add_argument("--no-memory", action="store_true", help="disable the memory system")
    parser.add_argument("--csv", help="write per-window stats to this CSV")
    parser.add_argument("--traces", help="write one session trace per line (JSONL)")
    args = parser.parse_args()

    cfg = SimulationConfig(
        total_sessions=args.sessions,
        recurrence=args.recurrence,
        window=args.window,
        seed=args.seed,
        corpus_size=args.corpus,
        memory_enabled=not args.no_memory,
    )
    cfg.validate()
    result, engine = run_continuous(cfg)

    if args.csv:
        write_curve_csv(result, args.csv)
    if args.traces:
        with open(args.traces, "w", encoding="utf-8") as fh:
            for session in engine.sessions.values():
                fh.write(json.dumps(session.to_trace(), sort_keys=True) + "\n")

    print(f"sessions        {result.sessions}")
    print(f"accuracy        {result.accuracy:.4f}")
    print(f"intuitive rate  {result.intuitive_rate:.4f}")
    print(f"mean latency    {result.mean_latency_units:.4f} units")
    print(f"no evidence     {result.no_evidence}")
    print(f"final tau       {engine.controller.state.tau:.4f}")
    print("window  sessions  accuracy  intuitive  latency")
    for w in result.windows:
        print(
            f"{w.index:>6}  {w.sessions:>8}  {w.accuracy:>8.4f}  "
            f"{w.intuitive_rate:>9.4f}  {w.mean_latency_units:>7.4f}"
        )


if __name__ == "__main__":
    main()
