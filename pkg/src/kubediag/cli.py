"""Command line entry points: one-shot diagnosis, document ingest, simulation.

Exit codes: 0 on success, 1 on any diagnostic/configuration error, 2 when a
query yields no usable evidence.  All options can also be supplied through
``KUBEDIAG_*`` environment variables.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import click

from .controller import MetaController
from .embedding import HashingEmbedder
from .engine import DiagnosticQuery, Engine, Feedback
from .errors import ConfigError, KubeDiagError, NoEvidence
from .graph import (
    Category,
    GraphEdge,
    GraphNode,
    KnowledgeGraph,
    NodeType,
    Relation,
    SearchConfig,
    classify_document,
)
from .memory import MemoryConfig, MemoryPool, Outcome
from .scenarios import build_world
from .simulate import (
    SimulationConfig,
    TickClock,
    build_stream,
    make_engine,
    run_stream,
    write_curve_csv,
)
from .synthesizer import SynthConfig, TemplateStubClient


def _replace_fields(cfg, overrides: dict, section: str):
    valid = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    unknown = sorted(set(overrides) - set(valid))
    if unknown:
        raise ConfigError(f"unknown {section} config keys: {', '.join(unknown)}")
    coerced = {
        k: tuple(v) if isinstance(valid[k], tuple) and isinstance(v, list) else v
        for k, v in overrides.items()
    }
    return dataclasses.replace(cfg, **coerced)


def _load_config(path: str | None) -> dict:
    """Optional JSON config with ``memory``, ``search``, ``synth`` and ``tau``
    sections layered over the defaults."""
    memory, search, synth = MemoryConfig(), SearchConfig(), SynthConfig()
    tau = None
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = sorted(set(raw) - {"memory", "search", "synth", "tau"})
        if unknown:
            raise ConfigError(f"unknown config sections: {', '.join(unknown)}")
        memory = _replace_fields(memory, raw.get("memory", {}), "memory")
        search = _replace_fields(search, raw.get("search", {}), "search")
        synth = _replace_fields(synth, raw.get("synth", {}), "synth")
        tau = raw.get("tau")
    memory.validate()
    search.validate()
    return {"memory": memory, "search": search, "synth": synth, "tau": tau}


def _guard(fn):
    try:
        fn()
    except NoEvidence as exc:
        click.echo(f"no evidence: {exc}", err=True)
        sys.exit(2)
    except KubeDiagError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@click.group(context_settings={"auto_envvar_prefix": "KUBEDIAG"})
def main() -> None:
    """Experience-guided fault diagnosis for Kubernetes clusters."""


@main.command()
@click.argument("symptoms", nargs=-1, required=True)
@click.option("--context", "contexts", multiple=True, help="context label, repeatable")
@click.option("--logs", "logs_path", type=click.Path(exists=True, dir_okay=False),
              help="file with log excerpts")
@click.option("--memory", "memory_path", type=click.Path(), help="episode store (JSONL)")
@click.option("--graph", "graph_path", type=click.Path(), help="knowledge graph (JSON)")
@click.option("--controller", "controller_path", type=click.Path(),
              help="routing controller checkpoint (JSON)")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--now", type=float, default=None,
              help="synthetic timestamp; defaults to wall clock")
@click.option("--feedback", "feedback_outcome",
              type=click.Choice([o.value for o in Outcome]), default=None,
              help="record this outcome for the session")
@click.option("--learn", is_flag=True, help="persist updated stores (needs --feedback)")
@click.option("--trace", "trace_path", type=click.Path(), help="write the session trace JSON")
@click.option("--json", "as_json", is_flag=True, help="machine readable output")
def diagnose(symptoms, contexts, logs_path, memory_path, graph_path, controller_path,
             config_path, now, feedback_outcome, learn, trace_path, as_json) -> None:
    """Diagnose one incident described by SYMPTOMS."""

    def run() -> None:
        if learn and not feedback_outcome:
            raise ConfigError("--learn requires --feedback")
        if learn and not memory_path:
            raise ConfigError("--learn requires --memory to persist episodes")
        cfg = _load_config(config_path)

        pool = MemoryPool(cfg["memory"])
        if memory_path and os.path.exists(memory_path):
            pool.load_episodes(memory_path)
            snap = memory_path + ".patterns.json"
            if os.path.exists(snap):
                pool.load_pattern_snapshot(snap)
        graph = (
            KnowledgeGraph.load(graph_path)
            if graph_path and os.path.exists(graph_path)
            else KnowledgeGraph()
        )
        controller = (
            MetaController.load(controller_path)
            if controller_path and os.path.exists(controller_path)
            else MetaController()
        )
        if cfg["tau"] is not None:
            controller.state.tau = float(cfg["tau"])

        engine = Engine(
            pool=pool,
            graph=graph,
            controller=controller,
            client=TemplateStubClient(),
            embedder=HashingEmbedder(cfg["memory"].embedding_dim),
            search_config=cfg["search"],
            synth_config=cfg["synth"],
            clock=(lambda: now) if now is not None else time.time,
        )
        logs = Path(logs_path).read_text(encoding="utf-8") if logs_path else ""
        query = DiagnosticQuery(
            id="cli", symptoms=list(symptoms), context=set(contexts), logs=logs
        )
        session = engine.diagnose(query)

        if trace_path:
            Path(trace_path).write_text(
                json.dumps(session.to_trace(), sort_keys=True, indent=2) + "\n",
                encoding="utf-8",
            )
        if as_json:
            click.echo(json.dumps(session.to_trace(), sort_keys=True))
        else:
            sol = session.solution
            click.echo(f"pathway     {session.decision.pathway.value}")
            click.echo(
                f"confidence  {sol.confidence:.4f}  "
                f"(c_max {session.decision.c_max:.4f}, tau {session.decision.tau_snapshot:.4f})"
            )
            click.echo(f"root cause  {sol.root_cause}")
            click.echo("steps:")
            for i, step in enumerate(sol.steps, 1):
                click.echo(f"  {i}. {step}")
            if sol.reasoning:
                click.echo("reasoning:")
                for line in sol.reasoning:
                    click.echo(f"  - {line}")
            if sol.sources:
                click.echo(f"sources     {', '.join(sol.sources)}")

        if feedback_outcome:
            report = engine.feedback(
                Feedback(session_id=session.id, outcome=Outcome(feedback_outcome))
            )
            if learn:
                pool.save_episodes(memory_path)
                pool.save_pattern_snapshot(memory_path + ".patterns.json")
                if controller_path:
                    controller.save(controller_path)
                if graph_path:
                    engine.graph.save(graph_path)
            if not as_json:
                click.echo(
                    f"recorded    {feedback_outcome} as {report.episode_id or 'no episode'}"
                    f" (tau {report.tau_before:.4f} -> {report.tau_after:.4f})"
                )

    _guard(run)


@main.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_path", type=click.Path(), help="knowledge graph to update")
@click.option("--docs-out", "docs_out", type=click.Path(), help="write cleaned documents (JSONL)")
@click.option("--json", "as_json", is_flag=True)
def ingest(inputs, graph_path, docs_out, as_json) -> None:
    """Classify troubleshooting documents and fold explicit triples into the graph.

    Inputs are ``.jsonl`` files (objects with ``id``, ``text`` and an optional
    ``triples`` list), plain text files (one document per file), or
    directories scanned for the same.  An empty directory yields a zero-count
    report.
    """

    def run() -> None:
        graph = (
            KnowledgeGraph.load(graph_path)
            if graph_path and os.path.exists(graph_path)
            else KnowledgeGraph()
        )
        docs, failures = [], 0
        counts: dict[str, int] = {c.value: 0 for c in Category}
        triples_added = 0

        def one(doc_id: str, text: str, source: str, triples: list) -> None:
            nonlocal triples_added, failures
            try:
                doc = classify_document(doc_id, text, source=source)
                for t in triples:
                    src = GraphNode(str(t["src"]["id"]), NodeType(t["src"]["type"]),
                                    str(t["src"].get("label", "")), category=doc.category)
                    dst = GraphNode(str(t["dst"]["id"]), NodeType(t["dst"]["type"]),
                                    str(t["dst"].get("label", "")), category=doc.category)
                    graph.add_triple(
                        src,
                        GraphEdge(src.id, dst.id, Relation(t["relation"]),
                                  float(t.get("weight", 0.5))),
                        dst,
                    )
                    triples_added += 1
            except (KubeDiagError, KeyError, TypeError, ValueError) as exc:
                failures += 1
                click.echo(f"skipped {doc_id!r}: {exc}", err=True)
                return
            counts[doc.category.value] += 1
            docs.append(doc)

        expanded: list[Path] = []
        explicit_dir = False
        for path in inputs:
            p = Path(path)
            if p.is_dir():
                explicit_dir = True
                expanded.extend(sorted(c for c in p.iterdir() if c.is_file()))
            else:
                expanded.append(p)

        for p in expanded:
            if p.suffix == ".jsonl":
                for line_no, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
                    if not line.strip():
                        continue
                    try:
                        raw = json.loads(line)
                        doc_id = str(raw["id"])
                        text = str(raw["text"])
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        failures += 1
                        click.echo(f"skipped {p.name}:{line_no}: {exc}", err=True)
                        continue
                    one(doc_id, text, f"{p.name}:{line_no}", list(raw.get("triples", [])))
            else:
                one(p.stem, p.read_text(encoding="utf-8"), p.name, [])

        if docs_out:
            with open(docs_out, "w", encoding="utf-8") as fh:
                for doc in docs:
                    fh.write(
                        json.dumps(
                            {
                                "id": doc.id,
                                "category": doc.category.value,
                                "cleaned_text": doc.cleaned_text,
                                "metadata": doc.metadata,
                            },
                            sort_keys=True,
                        )
                        + "\n"
                    )
        if graph_path:
            graph.save(graph_path)

        if as_json:
            click.echo(json.dumps(
                {"documents": len(docs), "failures": failures, "triples": triples_added,
                 "by_category": counts},
                sort_keys=True,
            ))
        else:
            click.echo(f"documents   {len(docs)} ingested, {failures} skipped")
            click.echo(f"triples     {triples_added}")
            for name in sorted(counts):
                if counts[name]:
                    click.echo(f"  {name:<22} {counts[name]}")
        if not docs and not explicit_dir:
            raise ConfigError("no documents ingested")

    _guard(run)


@main.command()
@click.option("--sessions", default=500, show_default=True, help="stream length")
@click.option("--recurrence", default=0.3, show_default=True,
              help="replay probability per slot")
@click.option("--window", default=50, show_default=True, help="learning-curve window size")
@click.option("--seed", default=0, show_default=True)
@click.option("--corpus", default=120, show_default=True, help="distinct scenarios")
@click.option("--no-memory", is_flag=True, help="disable the memory system")
@click.option("--ablation", is_flag=True, help="run paired with/without-memory engines")
@click.option("--csv", "csv_path", type=click.Path(), help="write the learning-curve CSV")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def simulate(sessions, recurrence, window, seed, corpus, no_memory, ablation,
             csv_path, config_path, as_json) -> None:
    """Stream generated fault scenarios through a fresh engine."""

    def run() -> None:
        cfg = _load_config(config_path)
        sim = SimulationConfig(
            total_sessions=sessions, recurrence=recurrence, window=window,
            seed=seed, corpus_size=corpus, memory_enabled=not no_memory,
        )
        sim.validate()
        scenarios, graph = build_world(sim.seed, sim.corpus_size)
        stream = build_stream(scenarios, sim)

        def fresh(memory_enabled: bool) -> Engine:
            return make_engine(
                graph, clock=TickClock(), memory_enabled=memory_enabled,
                memory_config=cfg["memory"], search_config=cfg["search"],
            )

        def summary(tag: str, res) -> None:
            click.echo(f"{tag}sessions      {res.sessions}")
            click.echo(f"{tag}accuracy      {res.accuracy:.4f}")
            click.echo(f"{tag}intuitive     {res.intuitive_rate:.4f}")
            click.echo(f"{tag}mean latency  {res.mean_latency_units:.4f}")
            click.echo(f"{tag}no evidence   {res.no_evidence}")

        def as_dict(res) -> dict:
            return {
                "sessions": res.sessions,
                "accuracy": round(res.accuracy, 6),
                "intuitive_rate": round(res.intuitive_rate, 6),
                "mean_latency_units": round(res.mean_latency_units, 6),
                "no_evidence": res.no_evidence,
                "per_category": {k: list(v) for k, v in sorted(res.per_category.items())},
            }

        if ablation:
            with_memory = run_stream(fresh(True), stream, sim.window)
            without = run_stream(fresh(False), stream, sim.window)
            base = without.accuracy
            gain = (with_memory.accuracy - base) / base if base else float("inf")
            if csv_path:
                write_curve_csv(with_memory, csv_path)
            if as_json:
                click.echo(json.dumps(
                    {"with_memory": as_dict(with_memory), "without_memory": as_dict(without),
                     "relative_accuracy_gain": round(gain, 6)},
                    sort_keys=True,
                ))
            else:
                click.echo("with memory:")
                summary("  ", with_memory)
                click.echo("without memory:")
                summary("  ", without)
                click.echo(f"relative accuracy gain  {gain:.4f}")
                click.echo(
                    "latency delta           "
                    f"{with_memory.mean_latency_units - without.mean_latency_units:+.4f}"
                )
            return

        res = run_stream(fresh(not no_memory), stream, sim.window)
        if csv_path:
            write_curve_csv(res, csv_path)
        if as_json:
            click.echo(json.dumps(as_dict(res), sort_keys=True))
        else:
            summary("", res)
            click.echo("per category:")
            for name, (correct, seen) in sorted(res.per_category.items()):
                click.echo(f"  {name:<22} {correct}/{seen}")

    _guard(run)


if __name__ == "__main__":
    main()
