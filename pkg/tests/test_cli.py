import json

import pytest
from click.testing import CliRunner

from helpers import NOW, mk_episode
from kubediag.cli import main
from kubediag.embedding import HashingEmbedder
from kubediag.graph import GraphEdge, GraphNode, KnowledgeGraph, NodeType, Relation
from kubediag.memory import MemoryConfig, MemoryPool

SYMPTOM = "pod oomkilled repeatedly"
EMB = HashingEmbedder(MemoryConfig().embedding_dim)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def stores(tmp_path):
    """A memory file with one strong episode and a matching two-hop graph."""
    g = KnowledgeGraph()
    entry = GraphNode("g-entry", NodeType.POD, SYMPTOM)
    mid = GraphNode("g-mid", NodeType.EVENT, "memory limit hit")
    rc = GraphNode("g-rc", NodeType.ROOT_CAUSE, "container memory limit too low")
    g.add_triple(entry, GraphEdge("g-entry", "g-mid", Relation.CAUSES, 0.9), mid)
    g.add_triple(mid, GraphEdge("g-mid", "g-rc", Relation.CAUSES, 0.9), rc)
    graph_path = tmp_path / "graph.json"
    g.save(str(graph_path))

    pool = MemoryPool(MemoryConfig())
    pool.insert_episode(
        mk_episode(
            "e1",
            EMB.embed(SYMPTOM),
            ts=NOW,
            path=["g-mid", "g-rc"],
            symptoms=(SYMPTOM,),
            actions=("raise the memory limit", "redeploy"),
            trials=8,
            successes=8,
        )
    )
    memory_path = tmp_path / "episodes.jsonl"
    pool.save_episodes(str(memory_path))
    return {"memory": str(memory_path), "graph": str(graph_path), "dir": tmp_path}


def seeded_diagnose_args(stores, *extra):
    return [
        "diagnose",
        SYMPTOM,
        "--memory",
        stores["memory"],
        "--graph",
        stores["graph"],
        "--now",
        str(NOW),
        *extra,
    ]


# ---------------------------------------------------------------------------
# diagnose


def test_diagnose_without_evidence_exits_2(runner):
    result = runner.invoke(main, ["diagnose", "entirely unknown misbehavior"])
    assert result.exit_code == 2


def test_diagnose_seeded_intuitive_json(runner, stores):
    result = runner.invoke(main, seeded_diagnose_args(stores, "--json"))
    assert result.exit_code == 0
    trace = json.loads(result.output)
    assert trace["decision"]["pathway"] == "intuitive"
    assert trace["solution"]["steps"] == ["raise the memory limit", "redeploy"]
    assert trace["solution"]["root_cause"] == "container memory limit too low"


def test_diagnose_graph_only_analytical(runner, stores):
    result = runner.invoke(main, ["diagnose", SYMPTOM, "--graph", stores["graph"]])
    assert result.exit_code == 0
    assert "pathway     analytical" in result.output
    assert "root cause  container memory limit too low" in result.output
    assert "causal step" in result.output


def test_diagnose_trace_file_matches_json_output(runner, stores):
    trace_path = stores["dir"] / "trace.json"
    result = runner.invoke(
        main, seeded_diagnose_args(stores, "--json", "--trace", str(trace_path))
    )
    assert result.exit_code == 0
    assert json.loads(trace_path.read_text()) == json.loads(result.output)


def test_diagnose_feedback_learn_persists_episode(runner, stores):
    result = runner.invoke(
        main, seeded_diagnose_args(stores, "--feedback", "success", "--learn")
    )
    assert result.exit_code == 0
    assert "recorded    success as ep-000001" in result.output
    pool = MemoryPool(MemoryConfig())
    pool.load_episodes(stores["memory"])
    assert set(pool.episodes) == {"e1", "ep-000001"}
    assert pool.episode("e1").memory_value == pytest.approx(1.1)


def test_learn_requires_feedback(runner, stores):
    result = runner.invoke(main, seeded_diagnose_args(stores, "--learn"))
    assert result.exit_code == 1


def test_learn_requires_memory_store(runner):
    result = runner.invoke(
        main, ["diagnose", SYMPTOM, "--feedback", "success", "--learn"]
    )
    assert result.exit_code == 1


def test_config_tau_override_flips_routing(runner, stores):
    cfg_path = stores["dir"] / "config.json"
    cfg_path.write_text('{"tau": 0.95}')
    result = runner.invoke(
        main, seeded_diagnose_args(stores, "--config", str(cfg_path))
    )
    assert result.exit_code == 0
    assert "pathway     analytical" in result.output  # 0.9 no longer clears tau


@pytest.mark.parametrize(
    "payload",
    ['{"search": {"bogus": 1}}', '{"mystery_section": {}}', "[1, 2]"],
)
def test_config_rejects_unknown_content(runner, stores, payload):
    cfg_path = stores["dir"] / "bad.json"
    cfg_path.write_text(payload)
    result = runner.invoke(
        main, seeded_diagnose_args(stores, "--config", str(cfg_path))
    )
    assert result.exit_code == 1


# ---------------------------------------------------------------------------
# ingest


def test_ingest_empty_directory_reports_zero(runner, tmp_path):
    empty = tmp_path / "docs"
    empty.mkdir()
    result = runner.invoke(main, ["ingest", str(empty)])
    assert result.exit_code == 0
    assert "documents   0 ingested, 0 skipped" in result.output


def test_ingest_classifies_text_file(runner, tmp_path):
    doc = tmp_path / "incident.txt"
    doc.write_text("pods stuck in ImagePullBackOff after registry authentication expired")
    result = runner.invoke(main, ["ingest", str(doc), "--json"])
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["documents"] == 1
    assert report["failures"] == 0
    assert report["by_category"]["ImageErrors"] == 1


def test_ingest_jsonl_triples_update_graph(runner, tmp_path):
    lines = [
        json.dumps(
            {
                "id": "doc-1",
                "text": "OOMKilled containers after the memory leak regression",
                "triples": [
                    {
                        "src": {"id": "t-src", "type": "Event", "label": "memory leak"},
                        "dst": {"id": "t-dst", "type": "RootCause", "label": "bad release"},
                        "relation": "causes",
                        "weight": 0.8,
                    }
                ],
            }
        ),
        json.dumps({"id": "doc-2", "text": "dns resolution failed for the payments service"}),
    ]
    src = tmp_path / "docs.jsonl"
    src.write_text("\n".join(lines) + "\n")
    graph_path = tmp_path / "graph.json"
    result = runner.invoke(
        main, ["ingest", str(src), "--graph", str(graph_path), "--json"]
    )
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["documents"] == 2
    assert report["triples"] == 1
    assert report["by_category"]["ResourceErrors"] == 1
    assert report["by_category"]["NetworkErrors"] == 1
    g = KnowledgeGraph.load(str(graph_path))
    assert g.edges[("t-src", "causes", "t-dst")].weight == 0.8


def test_ingest_docs_out_is_deterministic(runner, tmp_path):
    doc = tmp_path / "incident.txt"
    doc.write_text("kubelet flapping after certificate rotation")
    outs = []
    for name in ("a.jsonl", "b.jsonl"):
        out = tmp_path / name
        result = runner.invoke(main, ["ingest", str(doc), "--docs-out", str(out)])
        assert result.exit_code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    record = json.loads(outs[0].decode())
    assert record["id"] == "incident"
    assert record["category"] == "SystemErrors"


def test_ingest_skips_bad_lines_but_keeps_good_ones(runner, tmp_path):
    src = tmp_path / "docs.jsonl"
    src.write_text(
        json.dumps({"id": "ok", "text": "node taint prevents scheduling"})
        + "\nnot json\n"
    )
    result = runner.invoke(main, ["ingest", str(src), "--json"])
    assert result.exit_code == 0
    assert "skipped" in result.output  # diagnostics for the bad line
    report = json.loads(result.output.splitlines()[-1])
    assert (report["documents"], report["failures"]) == (1, 1)


def test_ingest_all_bad_file_exits_1(runner, tmp_path):
    src = tmp_path / "docs.jsonl"
    src.write_text("garbage\n")
    assert runner.invoke(main, ["ingest", str(src)]).exit_code == 1


def test_ingest_missing_path_is_usage_error(runner, tmp_path):
    result = runner.invoke(main, ["ingest", str(tmp_path / "absent.txt")])
    assert result.exit_code == 2
    assert "does not exist" in result.output + (result.stderr or "")


# ---------------------------------------------------------------------------
# simulate

SIM_ARGS = ["simulate", "--sessions", "30", "--corpus", "24", "--window", "10", "--seed", "4"]


def test_simulate_json_is_deterministic(runner):
    first = runner.invoke(main, [*SIM_ARGS, "--json"])
    second = runner.invoke(main, [*SIM_ARGS, "--json"])
    assert first.exit_code == second.exit_code == 0
    assert first.output == second.output
    report = json.loads(first.output)
    assert report["sessions"] == 30
    assert 0.0 <= report["accuracy"] <= 1.0


def test_simulate_csv_reruns_identically(runner, tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert runner.invoke(main, [*SIM_ARGS, "--csv", str(p)]).exit_code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    header = paths[0].read_text().splitlines()[0]
    assert header.startswith("window_index,sessions,accuracy")


def test_simulate_no_memory_never_goes_intuitive(runner):
    result = runner.invoke(main, [*SIM_ARGS, "--no-memory", "--json"])
    assert result.exit_code == 0
    assert json.loads(result.output)["intuitive_rate"] == 0.0


def test_simulate_ablation_reports_both_arms(runner):
    result = runner.invoke(
        main, [*SIM_ARGS, "--recurrence", "0.5", "--ablation", "--json"]
    )
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert set(report) == {"with_memory", "without_memory", "relative_accuracy_gain"}
    assert report["without_memory"]["intuitive_rate"] == 0.0
    assert report["with_memory"]["sessions"] == report["without_memory"]["sessions"] == 30


def test_simulate_env_var_overrides_option(runner):
    result = runner.invoke(
        main,
        ["simulate", "--corpus", "24", "--window", "6", "--json"],
        env={"KUBEDIAG_SIMULATE_SESSIONS": "12"},
    )
    assert result.exit_code == 0
    assert json.loads(result.output)["sessions"] == 12


def test_simulate_rejects_invalid_settings(runner):
    assert runner.invoke(main, ["simulate", "--sessions", "-5"]).exit_code == 1
