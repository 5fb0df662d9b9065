"""Compare the full engine against a memory-ablated twin on the same stream.

Both engines see an identical scenario sequence; the ablated one retrieves
nothing and therefore routes every query down the deliberate pathway.

Example:
    python scripts/run_ablation.py --sessions 500 --recurrence 0.5 --json
"""

import argparse
import json

from kubediag.simulate import SimulationConfig, evaluate_ablation


def summarize(result) -> dict:
    return {
        "sessions": result.sessions,
        "accuracy": round(result.accuracy, 6),
        "intuitive_rate": round(result.intuitive_rate, 6),
        "mean_latency_units": round(result.mean_latency_units, 6),
        "no_evidence": result.no_evidence,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sessions", type=int, default=500)
    parser.add_argument("--recurrence", type=float, default=0.5)
    parser.add_argument("--window", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--corpus", type=int, default=120)
    parser.add_argument("--json", action="store_true", dest="as_json")
    args = parser.parse_args()

    cfg = SimulationConfig(
        total_sessions=args.sessions,
        recurrence=args.recurrence,
        window=args.window,
        seed=args.seed,
        corpus_size=args.corpus,
    )
    cfg.validate()
    ab = evaluate_ablation(cfg)
    base = ab.without_memory.accuracy
    gain = (ab.with_memory.accuracy - base) / base if base else float("inf")
    latency_delta = ab.with_memory.mean_latency_units - ab.without_memory.mean_latency_units

    if args.as_json:
        print(
            json.dumps(
                {
                    "with_memory": summarize(ab.with_memory),
                    "without_memory": summarize(ab.without_memory),
                    "relative_accuracy_gain": round(gain, 6),
                    "latency_delta_units": round(latency_delta, 6),
                },
                sort_keys=True,
            )
        )
        return

    print(f"{'':<16}{'with memory':>12}{'without':>12}")
    print(f"{'accuracy':<16}{ab.with_memory.accuracy:>12.4f}{ab.without_memory.accuracy:>12.4f}")
    print(
        f"{'intuitive rate':<16}{ab.with_memory.intuitive_rate:>12.4f}"
        f"{ab.without_memory.intuitive_rate:>12.4f}"
    )
    print(
        f"{'mean latency':<16}{ab.with_memory.mean_latency_units:>12.4f}"
        f"{ab.without_memory.mean_latency_units:>12.4f}"
    )
    print(
        f"{'no evidence':<16}{ab.with_memory.no_evidence:>12}{ab.without_memory.no_evidence:>12}"
    )
    print(f"relative accuracy gain  {gain:+.4f}")
    print(f"latency delta           {latency_delta:+.4f} units")


if __name__ == "__main__":
    main()
