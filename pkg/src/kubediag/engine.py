"""Dual-path diagnosis engine: retrieval, routing, synthesis and feedback.

A diagnosis either takes the fast path (memory retrieval straight into
synthesis) or the deliberate path (retrieval, exploration hints, causal graph
search, then synthesis).  Confirmed outcomes feed back into every store: a
new episode is written, source memories are revalued, the controller replays
its history, and confirmed causal relations strengthen the graph.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .controller import (
    MetaController,
    Pathway,
    RoutingDecision,
    SessionRecord,
    aggregate_confidence,
    meta_signal,
)
from .embedding import Embedder, HashingEmbedder
from .errors import AlreadyRecorded, KubeDiagError, NoEvidence, NotFound, StageFailure
from .graph import CausalChain, GraphNode, KnowledgeGraph, Relation, SearchConfig, explore
from .memory import (
    Episode,
    MemoryConfig,
    MemoryPool,
    Outcome,
    Pattern,
    Query,
    RetrievalResult,
    complexity,
    make_query,
)
from .synthesizer import (
    ChainCard,
    MemoryCard,
    PromptContext,
    Solution,
    SynthConfig,
    SynthesisClient,
    TemplateStubClient,
    build_context,
    synthesize,
)
from .text import token_overlap

MATCH_THRESHOLD = 0.6  # token overlap treated as "same root cause"
TRACE_SCHEMA_VERSION = 1


@dataclass
class DiagnosticQuery:
    id: str
    symptoms: list[str]
    context: set[str] = field(default_factory=set)
    logs: str = ""


@dataclass(eq=False)
class DiagnosisSession:
    id: str
    query: DiagnosticQuery
    retrieval: RetrievalResult
    decision: RoutingDecision
    chains: list[CausalChain] | None   # None on the fast path
    solution: Solution
    context: PromptContext
    latency_units: float
    wall_latency_s: float
    created: float
    query_embedding: object = None     # reused by feedback; not serialized

    def to_trace(self) -> dict:
        return {
            "schema_version": TRACE_SCHEMA_VERSION,
            "session_id": self.id,
            "query": {
                "id": self.query.id,
                "symptoms": list(self.query.symptoms),
                "context": sorted(self.query.context),
            },
            "retrieval": {
                "memories": [
                    {"ref": m.ref, "kind": m.kind, "score": m.score, "confidence": m.confidence}
                    for m in self.retrieval.memories
                ],
                "c_max": self.retrieval.c_max,
                "psi": self.retrieval.psi,
                "novelty": self.retrieval.novelty,
                "complexity": self.retrieval.complexity,
            },
            "decision": {
                "pathway": self.decision.pathway.value,
                "c_max": self.decision.c_max,
                "tau_snapshot": self.decision.tau_snapshot,
                "coverage": self.decision.signal.coverage,
            },
            "chains": None
            if self.chains is None
            else [[n for n in c.node_ids] for c in self.chains],
            "solution": {
                "root_cause": self.solution.root_cause,
                "steps": self.solution.steps,
                "reasoning": self.solution.reasoning,
                "confidence": self.solution.confidence,
                "sources": self.solution.sources,
            },
            "latency_units": self.latency_units,
            "created": self.created,
        }


@dataclass
class Feedback:
    session_id: str
    outcome: Outcome
    confirmed_root_cause: str = ""
    discovered_relations: list[tuple[GraphNode, Relation, GraphNode]] = field(default_factory=list)


@dataclass
class LearningReport:
    session_id: str
    episode_id: str | None
    value_updates: dict[str, float]
    tau_before: float
    tau_after: float
    weights_before: tuple[float, ...]
    weights_after: tuple[float, ...]
    edges_confirmed: list[str]
    patterns_touched: list[str]
    history_len: int


class Engine:
    """Owns the stores and runs the diagnose/feedback cycle."""

    def __init__(
        self,
        pool: MemoryPool | None = None,
        graph: KnowledgeGraph | None = None,
        controller: MetaController | None = None,
        client: SynthesisClient | None = None,
        embedder: Embedder | None = None,
        search_config: SearchConfig | None = None,
        synth_config: SynthConfig | None = None,
        clock: Callable[[], float] = time.time,
        memory_enabled: bool = True,
    ) -> None:
        # explicit "is None" checks: an empty pool or graph is falsy but still
        # a deliberately provided store that must not be swapped for a default
        self.pool = pool if pool is not None else MemoryPool(MemoryConfig())
        self.graph = graph if graph is not None else KnowledgeGraph()
        self.controller = controller if controller is not None else MetaController()
        self.client = client if client is not None else TemplateStubClient()
        self.embedder = (
            embedder if embedder is not None else HashingEmbedder(self.pool.config.embedding_dim)
        )
        self.search_config = search_config if search_config is not None else SearchConfig()
        self.synth_config = synth_config if synth_config is not None else SynthConfig()
        self.clock = clock
        self.memory_enabled = memory_enabled
        self.sessions: dict[str, DiagnosisSession] = {}
        self._fed: set[str] = set()
        self._session_seq = 0
        self._episode_seq = 0

    # -- diagnosis ----------------------------------------------------------

    def _stage(self, name: str, fn: Callable):
        try:
            return fn()
        except NoEvidence:
            raise
        except KubeDiagError as exc:
            raise StageFailure(name, exc) from exc
        except Exception as exc:  # pragma: no cover - defensive
            raise StageFailure(name, exc) from exc

    def _memory_cards(self, result: RetrievalResult) -> list[MemoryCard]:
        cards = []
        for m in result.memories:
            mem = self.pool.get_memory(m.ref)
            if isinstance(mem, Episode):
                actions, path = mem.actions, mem.resolution_path
            else:
                actions, path = mem.strategy.actions, mem.strategy.resolution_path
            hint = ""
            if path and path[-1] in self.graph.nodes:
                hint = self.graph.nodes[path[-1]].label
            cards.append(
                MemoryCard(
                    id=m.ref,
                    score=m.score,
                    confidence=m.confidence,
                    actions=list(actions),
                    resolution_path=list(path),
                    root_cause_hint=hint,
                )
            )
        return cards

    def _chain_cards(self, chains: Sequence[CausalChain]) -> list[ChainCard]:
        cards = []
        for i, chain in enumerate(chains):
            hops = []
            for (src, _), (dst, rel) in zip(chain.steps, chain.steps[1:]):
                src_label = self.graph.nodes[src].label or src
                dst_label = self.graph.nodes[dst].label or dst
                hops.append(f"{src_label} -({rel.value})-> {dst_label}")
            terminal = chain.steps[-1][0]
            cards.append(
                ChainCard(
                    id=f"chain-{i}",
                    hops=hops,
                    terminal_label=self.graph.nodes[terminal].label or terminal,
                    priority=chain.score,
                    prior=chain.prior,
                )
            )
        return cards

    def diagnose(
        self, query: DiagnosticQuery, force_pathway: Pathway | None = None
    ) -> DiagnosisSession:
        """Run one diagnosis; read-only with respect to every store.

        ``force_pathway`` bypasses routing (used by invariant tests); normal
        callers leave it unset.
        """
        t0 = time.perf_counter()
        now = self.clock()
        weights = self.controller.factor_weights

        def _retrieve() -> tuple[Query, RetrievalResult]:
            q = make_query(self.embedder, query.symptoms, query.context)
            if not self.memory_enabled:
                return q, RetrievalResult(
                    memories=[], c_max=0.0, psi=0.5, novelty=1.0,
                    complexity=complexity(q.symptoms),
                )
            return q, self.pool.retrieve(q, weights, now)

        q, result = self._stage("retrieve", _retrieve)

        def _route() -> RoutingDecision:
            decision = self.controller.route(aggregate_confidence(result), meta_signal(result, q))
            if force_pathway is not None and force_pathway is not decision.pathway:
                decision = RoutingDecision(
                    pathway=force_pathway,
                    c_max=decision.c_max,
                    tau_snapshot=decision.tau_snapshot,
                    signal=decision.signal,
                )
            return decision

        decision = self._stage("route", _route)
        cards = self._stage("context", lambda: self._memory_cards(result))

        chains: list[CausalChain] | None
        if decision.pathway is Pathway.INTUITIVE:
            chains = None
            ctx = self._stage(
                "context",
                lambda: build_context(
                    query.symptoms, sorted(query.context), query.logs,
                    cards, [], "intuitive", self.synth_config.token_budget,
                ),
            )
        else:
            def _explore() -> list[CausalChain]:
                hint_nodes: set[str] = set()
                if self.memory_enabled and len(self.pool):
                    hint_nodes = self.pool.hints(q, weights, now)
                return explore(
                    self.graph, q.embedding, self.pool.memory_paths(result),
                    self.search_config, self.embedder, extra_seeds=hint_nodes,
                )

            chains = self._stage("explore", _explore)
            if not chains and not cards:
                raise NoEvidence(f"no memories and no causal chains for query {query.id!r}")
            chain_cards = self._chain_cards(chains)
            mode = "analytical" if chains else "intuitive"  # degraded: memory-only evidence
            ctx = self._stage(
                "context",
                lambda: build_context(
                    query.symptoms, sorted(query.context), query.logs,
                    cards, chain_cards, mode, self.synth_config.token_budget,
                ),
            )

        solution = self._stage(
            "synthesize", lambda: synthesize(ctx, self.client, self.synth_config.max_retries)
        )

        # reported confidence stays consistent with the routing signal
        if decision.pathway is Pathway.INTUITIVE:
            reported = min(solution.confidence, decision.c_max)
        else:
            reported = max(solution.confidence, decision.c_max)
        solution.confidence = min(1.0, max(0.0, reported))

        self._session_seq += 1
        opt = self.controller.state.opt
        session = DiagnosisSession(
            id=f"s{self._session_seq:06d}",
            query=query,
            retrieval=result,
            decision=decision,
            chains=chains,
            solution=solution,
            context=ctx,
            latency_units=1.0 if decision.pathway is Pathway.INTUITIVE else opt.analytic_cost,
            wall_latency_s=time.perf_counter() - t0,
            created=now,
            query_embedding=q.embedding,
        )
        self.sessions[session.id] = session
        return session

    # -- feedback -----------------------------------------------------------

    def _resolution_path_for(self, session: DiagnosisSession) -> list[str]:
        if session.chains:
            return list(session.chains[0].node_ids)
        for ref in session.solution.sources:
            if ref.startswith("chain-"):
                continue
            try:
                mem = self.pool.get_memory(ref)
            except NotFound:
                continue
            return list(
                mem.resolution_path if isinstance(mem, Episode) else mem.strategy.resolution_path
            )
        return []

    def _fast_sufficient(self, session: DiagnosisSession, outcome: Outcome) -> bool:
        if session.decision.pathway is Pathway.INTUITIVE:
            return outcome is Outcome.SUCCESS
        if not session.retrieval.memories:
            return False
        top = max(session.retrieval.memories, key=lambda m: (m.confidence, m.score, m.ref))
        mem = self.pool.get_memory(top.ref)
        path = mem.resolution_path if isinstance(mem, Episode) else mem.strategy.resolution_path
        if not path or path[-1] not in self.graph.nodes:
            return False
        hint = self.graph.nodes[path[-1]].label
        return token_overlap(hint, session.solution.root_cause) >= MATCH_THRESHOLD

    def feedback(self, fb: Feedback) -> LearningReport:
        """Fold a confirmed outcome back into memory, controller and graph."""
        session = self.sessions.get(fb.session_id)
        if session is None:
            raise NotFound(f"unknown session {fb.session_id!r}")
        if fb.session_id in self._fed:
            raise AlreadyRecorded(f"session {fb.session_id!r} already has feedback")
        self._fed.add(fb.session_id)

        now = self.clock()
        success = fb.outcome is Outcome.SUCCESS
        value_updates: dict[str, float] = {}
        patterns_touched: list[str] = []
        episode_id: str | None = None

        if self.memory_enabled:
            self._episode_seq += 1
            episode_id = f"ep-{self._episode_seq:06d}"
            episode = Episode(
                id=episode_id,
                symptoms=list(session.query.symptoms),
                context=set(session.query.context),
                actions=list(session.solution.steps),
                outcome=fb.outcome,
                timestamp=now,
                memory_value=1.0,
                embedding=session.query_embedding,
                # a failed diagnosis has no trajectory worth recommending
                resolution_path=[] if fb.outcome is Outcome.FAILURE
                else self._resolution_path_for(session),
                trials=1,
                successes=1 if success else 0,
            )
            self.pool.insert_episode(episode)

            for ref in session.solution.sources:
                if ref.startswith("chain-"):
                    continue
                try:
                    mem = self.pool.get_memory(ref)
                except NotFound:
                    continue
                target = mem.id if isinstance(mem, Episode) else mem.strategy.source_episode_id
                try:
                    self.pool.update_outcome(target, fb.outcome, success)
                    value_updates[target] = self.pool.episode(target).memory_value
                except NotFound:
                    continue

            patterns_touched = self.pool.form_patterns_incremental(episode_id, now)

        best = max(
            session.retrieval.memories, key=lambda m: m.confidence, default=None
        )
        record = SessionRecord(
            query_id=session.query.id or session.id,
            c_max=session.decision.c_max,
            factors=best.factors if best else (1e-7, 1e-7, 1e-7, 1e-7),
            pathway=session.decision.pathway,
            fast_sufficient=self._fast_sufficient(session, fb.outcome),
            latency_units=session.latency_units,
            outcome=fb.outcome.value,
        )
        self.controller.record(record)
        tau_before, tau_after = self.controller.adapt_threshold()
        weights_before, weights_after = self.controller.update_factor_weights()

        edges_confirmed: list[str] = []
        if fb.discovered_relations:
            # mutate a copy, then swap atomically so readers never see partial edits
            g2 = self.graph.copy()
            for src, rel, dst in fb.discovered_relations:
                w = g2.confirm_relation(src, rel, dst)
                edges_confirmed.append(f"{src.id} -({rel.value})-> {dst.id} @ {w:.1f}")
            self.graph = g2

        return LearningReport(
            session_id=fb.session_id,
            episode_id=episode_id,
            value_updates=value_updates,
            tau_before=tau_before,
            tau_after=tau_after,
            weights_before=weights_before,
            weights_after=weights_after,
            edges_confirmed=edges_confirmed,
            patterns_touched=patterns_touched,
            history_len=len(self.controller.state.history),
        )
