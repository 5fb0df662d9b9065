"""Causal knowledge graph over cluster entities and root causes.

Nodes are typed cluster objects (pods, services, volumes, ...) plus explicit
root-cause nodes; weighted directed edges carry one of eight causal/structural
relations.  Documents are sorted into seven troubleshooting categories by a
rule-based keyword classifier before their triples enter the graph.  Search is
best-first over simple paths from query-matched seed nodes, ranked by a blend
of memory prior, edge strength and per-path node freshness.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .embedding import Embedder
from .errors import (
    ClassificationError,
    InvalidArgument,
    InvalidPath,
    NotFound,
    SchemaViolation,
)


class NodeType(str, Enum):
    POD = "Pod"
    SERVICE = "Service"
    NODE = "Node"
    DEPLOYMENT = "Deployment"
    CONTAINER = "Container"
    VOLUME = "Volume"
    CONFIG_MAP = "ConfigMap"
    SECRET = "Secret"
    INGRESS = "Ingress"
    NAMESPACE = "Namespace"
    EVENT = "Event"
    ROOT_CAUSE = "RootCause"


class Relation(str, Enum):
    DEPENDS_ON = "depends_on"
    MANAGES = "manages"
    CAUSES = "causes"
    MOUNTS = "mounts"
    SCHEDULES_ON = "schedules_on"
    EXPOSES = "exposes"
    CONFIGURES = "configures"
    EVICTS = "evicts"


class Category(str, Enum):
    EXPLANATIONS = "Explanations"
    RESOURCE = "ResourceErrors"
    NETWORK = "NetworkErrors"
    SCHEDULING = "SchedulingErrors"
    IMAGE = "ImageErrors"
    CONFIGURATION = "ConfigurationErrors"
    SYSTEM = "SystemErrors"


#: Six fault categories (everything except general explanations).
FAULT_CATEGORIES = (
    Category.RESOURCE,
    Category.NETWORK,
    Category.SCHEDULING,
    Category.IMAGE,
    Category.CONFIGURATION,
    Category.SYSTEM,
)

# keyword tables for the rule-based classifier, one focus-area list per category
_CATEGORY_KEYWORDS: dict[Category, tuple[str, ...]] = {
    Category.RESOURCE: (
        "oomkilled", "out of memory", "cpu throttling", "resource quota",
        "persistentvolumeclaim", "pvc", "memory leak", "autoscaler", "evicted",
    ),
    Category.NETWORK: (
        "service discovery", "dns", "network policy", "ingress", "load balancer",
        "cni", "connection refused", "connection timeout",
    ),
    Category.SCHEDULING: (
        "node affinity", "taint", "toleration", "insufficient resources",
        "pod priority", "preemption", "daemonset", "unschedulable",
    ),
    Category.IMAGE: (
        "imagepullbackoff", "errimagepull", "registry authentication", "rate limiting",
        "private registry", "multi-arch", "image layer", "manifest unknown",
    ),
    Category.CONFIGURATION: (
        "configmap", "secret mounting", "rbac", "admission webhook",
        "environment variable", "helm", "operator misconfiguration",
        "createcontainerconfigerror",
    ),
    Category.SYSTEM: (
        "container runtime", "containerd", "kubelet", "etcd", "certificate",
        "kernel", "filesystem corruption", "systemd",
    ),
}

_BOILERPLATE_RE = re.compile(
    r"^\s*(nav:|advertisement|sponsored|cookie notice|subscribe |share this|comments?:)",
    re.IGNORECASE,
)
_HTML_TAG_RE = re.compile(r"<[^>]+>")


@dataclass(eq=False)
class GraphNode:
    id: str
    node_type: NodeType
    label: str
    attributes: dict = field(default_factory=dict)
    category: Category | None = None


@dataclass(eq=False)
class GraphEdge:
    src: str
    dst: str
    relation: Relation
    weight: float

    def validate(self) -> None:
        if not 0.0 < self.weight <= 1.0:
            raise InvalidArgument(f"edge weight must be in (0, 1], got {self.weight}")
        if self.src == self.dst:
            raise InvalidArgument(f"self-loop on {self.src!r} not allowed")


@dataclass(eq=False)
class Document:
    id: str
    raw_text: str
    cleaned_text: str
    category: Category
    metadata: dict = field(default_factory=dict)  # source, timestamp, confidence


@dataclass(eq=False)
class CausalChain:
    """A simple path ending at a root-cause node."""

    steps: list[tuple[str, Relation | None]]  # (node id, relation taken to reach it)
    score: float        # overall priority
    prior: float
    path_score: float = 0.0

    @property
    def hop_count(self) -> int:
        return len(self.steps) - 1

    @property
    def node_ids(self) -> list[str]:
        return [n for n, _ in self.steps]


@dataclass
class SearchConfig:
    alphas: tuple[float, float, float] = (0.5, 0.3, 0.2)  # prior, path score, novelty
    max_hops: int = 3
    beam: int = 32
    n_chains: int = 5
    seed_threshold: float = 0.5

    def validate(self) -> None:
        if abs(sum(self.alphas) - 1.0) > 1e-9:
            raise InvalidArgument(f"alphas must sum to 1, got {self.alphas}")
        if self.max_hops < 1 or self.beam < 1 or self.n_chains < 1:
            raise InvalidArgument("max_hops, beam and n_chains must be >= 1")


# ---------------------------------------------------------------------------
# document cleaning and classification


def clean_text(raw: str) -> str:
    """Strip markup and boilerplate lines; falls back to the raw text if empty."""
    stripped = _HTML_TAG_RE.sub(" ", raw)
    lines = [ln for ln in stripped.splitlines() if ln.strip() and not _BOILERPLATE_RE.match(ln)]
    cleaned = re.sub(r"\s+", " ", " ".join(lines)).strip()
    return cleaned if cleaned else raw.strip()


def keyword_classifier(text: str) -> tuple[Category, float]:
    """Count focus-area keyword hits per category; no hits falls back to Explanations."""
    low = text.lower()
    hits = {
        cat: sum(low.count(kw) for kw in kws) for cat, kws in _CATEGORY_KEYWORDS.items()
    }
    total = sum(hits.values())
    if total == 0:
        return Category.EXPLANATIONS, 0.5
    best = max(_CATEGORY_KEYWORDS, key=lambda c: (hits[c], -list(_CATEGORY_KEYWORDS).index(c)))
    return best, hits[best] / total


def classify_document(
    doc_id: str,
    raw_text: str,
    classifier: Callable[[str], tuple[Category, float]] | None = None,
    source: str = "",
    timestamp: float = 0.0,
) -> Document:
    """Clean and categorize one document for corpus construction."""
    if not raw_text.strip():
        raise InvalidArgument(f"document {doc_id!r} is empty")
    cleaned = clean_text(raw_text)
    classifier = classifier or keyword_classifier
    try:
        category, conf = classifier(cleaned)
    except Exception as exc:  # pluggable classifiers may fail arbitrarily
        raise ClassificationError(doc_id, f"classifier raised for {doc_id!r}: {exc}") from exc
    if not isinstance(category, Category):
        raise ClassificationError(doc_id, f"classifier returned non-category {category!r}")
    return Document(
        id=doc_id,
        raw_text=raw_text,
        cleaned_text=cleaned,
        category=category,
        metadata={"source": source, "timestamp": timestamp, "confidence": float(conf)},
    )


# ---------------------------------------------------------------------------
# the graph store


class KnowledgeGraph:
    """Directed typed multigraph keyed by (src, relation, dst) with max-weight dedup."""

    def __init__(self) -> None:
        self.nodes: dict[str, GraphNode] = {}
        self.edges: dict[tuple[str, str, str], GraphEdge] = {}  # (src, relation, dst)
        self._out: dict[str, list[tuple[str, str]]] = {}        # src -> [(relation, dst)]
        self._label_vecs: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def copy(self) -> "KnowledgeGraph":
        """Independent copy: mutating it never touches this graph's records."""
        g = KnowledgeGraph()
        g.nodes = {
            nid: GraphNode(n.id, n.node_type, n.label, dict(n.attributes), n.category)
            for nid, n in self.nodes.items()
        }
        g.edges = {
            key: GraphEdge(e.src, e.dst, e.relation, e.weight) for key, e in self.edges.items()
        }
        g._out = {k: list(v) for k, v in self._out.items()}
        g._label_vecs = dict(self._label_vecs)
        return g

    def upsert_node(self, node: GraphNode) -> None:
        existing = self.nodes.get(node.id)
        if existing is not None:
            if existing.node_type is not node.node_type:
                raise SchemaViolation(
                    f"node {node.id!r} redefined from {existing.node_type.value}"
                    f" to {node.node_type.value}"
                )
            existing.label = node.label or existing.label
            existing.attributes.update(node.attributes)
            if node.category is not None:
                existing.category = node.category
            self._label_vecs.pop(node.id, None)
        else:
            self.nodes[node.id] = node

    def add_triple(self, src: GraphNode, edge: GraphEdge, dst: GraphNode) -> None:
        """Upsert both endpoints and the edge; duplicate triples keep the max weight."""
        if edge.src != src.id or edge.dst != dst.id:
            raise InvalidArgument("edge endpoints do not match the provided nodes")
        edge.validate()
        self.upsert_node(src)
        self.upsert_node(dst)
        key = (edge.src, edge.relation.value, edge.dst)
        prior = self.edges.get(key)
        if prior is None:
            self.edges[key] = edge
            self._out.setdefault(edge.src, []).append((edge.relation.value, edge.dst))
        elif edge.weight > prior.weight:
            prior.weight = edge.weight

    def confirm_relation(self, src: GraphNode, relation: Relation, dst: GraphNode) -> float:
        """Feedback rule: new edges enter at 0.5; each reconfirmation adds 0.1, capped at 1."""
        key = (src.id, relation.value, dst.id)
        prior = self.edges.get(key)
        if prior is None:
            self.add_triple(src, GraphEdge(src.id, dst.id, relation, 0.5), dst)
            return 0.5
        self.upsert_node(src)
        self.upsert_node(dst)
        prior.weight = min(1.0, prior.weight + 0.1)
        return prior.weight

    def edge_weight(self, src: str, relation: Relation, dst: str) -> float:
        key = (src, relation.value, dst)
        if key not in self.edges:
            raise NotFound(f"no edge {src!r} -{relation.value}-> {dst!r}")
        return self.edges[key].weight

    def out_edges(self, src: str) -> list[tuple[Relation, str, float]]:
        out = []
        for rel, dst in self._out.get(src, ()):
            out.append((Relation(rel), dst, self.edges[(src, rel, dst)].weight))
        out.sort(key=lambda t: (t[0].value, t[1]))
        return out

    def _label_vec(self, node_id: str, embedder: Embedder) -> np.ndarray:
        vec = self._label_vecs.get(node_id)
        if vec is None:
            label = self.nodes[node_id].label or node_id
            vec = embedder.embed(label)
            self._label_vecs[node_id] = vec
        return vec

    def seed_nodes(self, q_embedding: np.ndarray, embedder: Embedder,
                   threshold: float = 0.5) -> list[str]:
        """Nodes whose label embedding is close to the query, best first."""
        hits = []
        for nid in self.nodes:
            sim = float(np.dot(self._label_vec(nid, embedder), q_embedding))
            if sim >= threshold:
                hits.append((-sim, nid))
        return [nid for _, nid in sorted(hits)]

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {
                    "id": n.id,
                    "node_type": n.node_type.value,
                    "label": n.label,
                    "attributes": n.attributes,
                    "category": n.category.value if n.category else None,
                }
                for _, n in sorted(self.nodes.items())
            ],
            "edges": [
                {"src": e.src, "dst": e.dst, "relation": e.relation.value, "weight": e.weight}
                for _, e in sorted(self.edges.items())
            ],
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, payload: dict) -> "KnowledgeGraph":
        g = cls()
        try:
            for raw in payload["nodes"]:
                g.upsert_node(
                    GraphNode(
                        id=str(raw["id"]),
                        node_type=NodeType(raw["node_type"]),
                        label=str(raw.get("label", "")),
                        attributes=dict(raw.get("attributes", {})),
                        category=Category(raw["category"]) if raw.get("category") else None,
                    )
                )
            for raw in payload["edges"]:
                src, dst = g.nodes[str(raw["src"])], g.nodes[str(raw["dst"])]
                g.add_triple(
                    src,
                    GraphEdge(src.id, dst.id, Relation(raw["relation"]), float(raw["weight"])),
                    dst,
                )
        except (KeyError, TypeError) as exc:
            raise SchemaViolation(f"bad graph payload: {exc}") from exc
        except ValueError as exc:
            raise SchemaViolation(f"unknown enum value in graph payload: {exc}") from exc
        return g

    @classmethod
    def load(cls, path: str) -> "KnowledgeGraph":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# path scoring and search


def _path_edges(node_ids: Sequence[str]) -> set[tuple[str, str]]:
    return {(node_ids[i], node_ids[i + 1]) for i in range(len(node_ids) - 1)}


def path_prior(node_ids: Sequence[str], memory_paths: Sequence[Sequence[str]]) -> float:
    """Best edge overlap between the candidate path and any remembered path."""
    own = _path_edges(node_ids)
    if not own or not memory_paths:
        return 0.0
    best = 0.0
    for mp in memory_paths:
        remembered = _path_edges(mp)
        if remembered:
            best = max(best, len(own & remembered) / len(own))
    return best


def path_score(node_ids: Sequence[str], graph: KnowledgeGraph,
               relations: Sequence[Relation] | None = None) -> float:
    """Geometric mean of edge weights along the path (1.0 for a single node)."""
    if len(node_ids) < 2:
        return 1.0
    weights = []
    for i in range(len(node_ids) - 1):
        src, dst = node_ids[i], node_ids[i + 1]
        if relations is not None:
            w = graph.edge_weight(src, relations[i], dst)
        else:
            found = [e.weight for (s, _, d), e in graph.edges.items() if s == src and d == dst]
            if not found:
                raise InvalidPath(f"no edge between {src!r} and {dst!r}")
            w = max(found)
        weights.append(w)
    return math.exp(sum(math.log(w) for w in weights) / len(weights))


def path_novelty(node_ids: Sequence[str], visited: Iterable[str]) -> float:
    """Fraction of the path's nodes not yet visited."""
    if not node_ids:
        raise InvalidArgument("path must contain at least one node")
    seen = set(visited)
    return sum(1 for n in node_ids if n not in seen) / len(node_ids)


def priority(node_ids: Sequence[str], memory_paths: Sequence[Sequence[str]],
             visited: Iterable[str], graph: KnowledgeGraph, cfg: SearchConfig,
             relations: Sequence[Relation] | None = None) -> float:
    a1, a2, a3 = cfg.alphas
    return (
        a1 * path_prior(node_ids, memory_paths)
        + a2 * path_score(node_ids, graph, relations)
        + a3 * path_novelty(node_ids, visited)
    )


def explore(
    graph: KnowledgeGraph,
    q_embedding: np.ndarray,
    memory_paths: Sequence[Sequence[str]],
    cfg: SearchConfig,
    embedder: Embedder,
    extra_seeds: Iterable[str] = (),
) -> list[CausalChain]:
    """Best-first beam search for root-cause chains.

    Candidates are simple paths from seed nodes; a path's priority treats its
    own prefix as the visited set, which keeps ranking a pure function of the
    path and makes the search directly comparable against exhaustive
    enumeration.  Root-cause nodes terminate a path and are never expanded.
    Returns up to ``n_chains`` chains sorted by priority, then raw path score,
    then node-id sequence.
    """
    cfg.validate()
    seeds = graph.seed_nodes(q_embedding, embedder, cfg.seed_threshold)
    for nid in sorted(set(extra_seeds)):
        if nid in graph.nodes and nid not in seeds:
            seeds.append(nid)
    seeds = seeds[: cfg.beam]

    def rank_key(entry: tuple[float, float, list[tuple[str, Relation | None]]]):
        pri, ps, steps = entry
        return (-pri, -ps, tuple(n for n, _ in steps))

    frontier: list[list[tuple[str, Relation | None]]] = [
        [(nid, None)]
        for nid in seeds
        if graph.nodes[nid].node_type is not NodeType.ROOT_CAUSE
    ]
    chains: list[tuple[float, float, list[tuple[str, Relation | None]]]] = []

    for _ in range(cfg.max_hops):
        scored: list[tuple[float, float, list[tuple[str, Relation | None]]]] = []
        for path in frontier:
            nodes_in_path = {n for n, _ in path}
            tail = path[-1][0]
            for rel, dst, _w in graph.out_edges(tail):
                if dst in nodes_in_path:
                    continue  # simple paths only
                steps = path + [(dst, rel)]
                node_ids = [n for n, _ in steps]
                rels = [r for _, r in steps[1:]]
                ps = path_score(node_ids, graph, rels)
                pri = priority(node_ids, memory_paths, node_ids[:-1], graph, cfg, rels)
                scored.append((pri, ps, steps))
        scored.sort(key=rank_key)
        next_frontier = []
        for pri, ps, steps in scored:
            if graph.nodes[steps[-1][0]].node_type is NodeType.ROOT_CAUSE:
                chains.append((pri, ps, steps))
            else:
                next_frontier.append(steps)
        frontier = next_frontier[: cfg.beam]
        if not frontier:
            break

    chains.sort(key=rank_key)
    return [
        CausalChain(steps=steps, score=pri, prior=path_prior([n for n, _ in steps], memory_paths),
                    path_score=ps)
        for pri, ps, steps in chains[: cfg.n_chains]
    ]
