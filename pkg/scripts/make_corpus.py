"""Generate a fault-scenario corpus and its curated causal graph.

Writes scenarios as JSONL (one per line, reloadable with load_scenarios) and
the graph as JSON, ready for the ``kubediag diagnose --graph`` flow or custom
experiments.

Example:
    python scripts/make_corpus.py --total 120 --seed 0 \
        --scenarios-out corpus.jsonl --graph-out graph.json
"""

import argparse
from collections import Counter

from kubediag.scenarios import DEFAULT_MIX, FAULT_CATEGORIES, build_world, save_scenarios


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--total", type=int, default=120, help="number of scenarios")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--mix",
        type=float,
        nargs=len(DEFAULT_MIX),
        default=list(DEFAULT_MIX),
        metavar="SHARE",
        help="per-category shares (resource network scheduling image configuration system)",
    )
    parser.add_argument("--scenarios-out", default="corpus.jsonl")
    parser.add_argument("--graph-out", help="also write the curated causal graph")
    args = parser.parse_args()

    scenarios, graph = build_world(seed=args.seed, total=args.total, mix=tuple(args.mix))
    save_scenarios(args.scenarios_out, scenarios)
    if args.graph_out:
        graph.save(args.graph_out)

    counts = Counter(sc.category for sc in scenarios)
    print(f"wrote {len(scenarios)} scenarios to {args.scenarios_out}")
    if args.graph_out:
        print(f"wrote graph ({len(graph.nodes)} nodes, {len(graph.edges)} edges) to {args.graph_out}")
    for category in FAULT_CATEGORIES:
        print(f"  {category.value:<22} {counts.get(category, 0)}")


if __name__ == "__main__":
    main()
