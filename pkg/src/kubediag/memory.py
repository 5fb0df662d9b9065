"""Episodic and pattern memory for diagnostic experience.

The pool stores concrete diagnostic trajectories (episodes) and abstracted
recurring structures (patterns).  Retrieval blends embedding similarity with
recency, splits attention between the two tiers with a novelty/complexity
mixing weight, and attaches a multi-factor confidence to every returned
memory.  A two-tier index (pattern tier first, episodes restricted to the
most promising clusters plus all unclustered ones) keeps retrieval cheap on
well-clustered pools while remaining exactly equivalent to a full linear
scan; an exhaustive mode is kept for oracle tests.

Scalar math along the scoring path deliberately avoids vectorized shortcuts:
reference implementations and the index must order candidates identically,
so both use the same per-candidate arithmetic.
"""

from __future__ import annotations

import json
import math
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .embedding import DEFAULT_DIM, Embedder
from .errors import DuplicateId, InvalidArgument, InvalidQuery, NotFound, SchemaViolation
from .text import tokenize

SECONDS_PER_DAY = 86_400.0

#: Order of the confidence factors everywhere in the package.
FACTOR_NAMES = ("similarity", "temporal", "success", "context")

_FACTOR_FLOOR = 1e-7  # avoids log(0) downstream when weights are fitted


class Outcome(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    PARTIAL = "partial"


@dataclass
class MemoryConfig:
    """Tunables for storage, scoring and pattern formation."""

    pattern_sim_threshold: float = 0.85   # cosine floor for joining a neighborhood
    pattern_min_members: int = 3          # neighborhood size needed to form a pattern
    retrieval_k: int = 10
    similarity_weight: float = 0.7        # balance between similarity and recency
    recency_tau_s: float = 30.0 * SECONDS_PER_DAY
    sim_scale: float = 1.0                # distance scale in the similarity factor
    temporal_tau_s: float = 30.0 * SECONDS_PER_DAY
    hint_k: int = 5
    hint_min_confidence: float = 0.1      # relevance gate for exported paths/hints
    mix_weights: tuple[float, float] = (1.0, 1.0)  # (novelty, complexity)
    mix_bias: float = 0.0
    embedding_dim: int = DEFAULT_DIM
    capacity: int = 5000
    outcome_delta: float = 0.1            # memory value multiplier step on feedback
    index_probe_patterns: int = 8         # clusters opened eagerly per retrieval

    def validate(self) -> None:
        if not 0.0 < self.pattern_sim_threshold < 1.0:
            raise InvalidArgument("pattern_sim_threshold must be in (0, 1)")
        if self.pattern_min_members < 2:
            raise InvalidArgument("pattern_min_members must be >= 2")
        if not 0.0 <= self.similarity_weight <= 1.0:
            raise InvalidArgument("similarity_weight must be in [0, 1]")
        if self.recency_tau_s <= 0 or self.temporal_tau_s <= 0 or self.sim_scale <= 0:
            raise InvalidArgument("time constants and sim_scale must be positive")
        if self.retrieval_k < 1 or self.hint_k < 1 or self.capacity < 1:
            raise InvalidArgument("retrieval_k, hint_k and capacity must be >= 1")
        if not 0.0 <= self.hint_min_confidence <= 1.0:
            raise InvalidArgument("hint_min_confidence must be in [0, 1]")


@dataclass
class Query:
    """A diagnostic query: symptom text, context labels, and its embedding."""

    symptoms: tuple[str, ...]
    context: frozenset[str]
    embedding: np.ndarray


def make_query(embedder: Embedder, symptoms: Sequence[str], context: Iterable[str] = ()) -> Query:
    symptoms = tuple(symptoms)
    if not symptoms or not any(s.strip() for s in symptoms):
        raise InvalidQuery("query symptoms must be non-empty")
    return Query(
        symptoms=symptoms,
        context=frozenset(context),
        embedding=embedder.embed(" ".join(symptoms)),
    )


@dataclass(eq=False)
class Episode:
    """One concrete diagnostic trajectory."""

    id: str
    symptoms: list[str]
    context: set[str]
    actions: list[str]
    outcome: Outcome
    timestamp: float
    memory_value: float
    embedding: np.ndarray
    resolution_path: list[str]
    trials: int = 0      # feedback updates received
    successes: int = 0   # ... of which were successes

    def validate(self) -> None:
        if not self.id:
            raise InvalidArgument("episode id must be non-empty")
        norm = float(np.linalg.norm(self.embedding))
        if abs(norm - 1.0) > 1e-6:
            raise InvalidArgument(f"episode {self.id}: embedding norm {norm:.8f} != 1")
        if self.memory_value < 0:
            raise InvalidArgument(f"episode {self.id}: memory_value must be >= 0")
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise InvalidArgument(f"episode {self.id}: timestamp must be finite and >= 0")

    @property
    def symptom_tokens(self) -> frozenset[str]:
        return frozenset(t for s in self.symptoms for t in tokenize(s))


@dataclass
class Strategy:
    """Resolution recipe carried by a pattern (donated by its best member)."""

    actions: list[str]
    resolution_path: list[str]
    source_episode_id: str


@dataclass(eq=False)
class Pattern:
    """Abstraction over a neighborhood of mutually similar episodes."""

    id: str
    centroid: np.ndarray
    spread: np.ndarray              # per-dimension variance of member embeddings
    strategy: Strategy
    reliability: float              # member success fraction
    member_count: int
    member_ids: set[str]
    last_updated: float
    seed_id: str                    # episode whose neighborhood formed the pattern
    symptom_tokens: frozenset[str] = frozenset()
    context_labels: frozenset[str] = frozenset()
    # conservative per-cluster bounds used by the retrieval index
    max_member_angle: float = 0.0
    max_member_ts: float = 0.0
    success_members: int = 0


@dataclass(eq=False)
class ScoredMemory:
    """One retrieval hit: reference, tier, scaled score and confidence."""

    ref: str
    kind: str                      # "episode" | "pattern"
    score: float
    confidence: float
    factors: tuple[float, float, float, float]
    symptom_tokens: frozenset[str] = frozenset()


@dataclass(eq=False)
class RetrievalResult:
    memories: list[ScoredMemory]
    c_max: float
    psi: float
    novelty: float
    complexity: float

    def to_json(self) -> str:
        payload = {
            "memories": [
                {
                    "ref": m.ref,
                    "kind": m.kind,
                    "score": m.score,
                    "confidence": m.confidence,
                    "factors": list(m.factors),
                    "symptom_tokens": sorted(m.symptom_tokens),
                }
                for m in self.memories
            ],
            "c_max": self.c_max,
            "psi": self.psi,
            "novelty": self.novelty,
            "complexity": self.complexity,
        }
        return json.dumps(payload, sort_keys=True)


# ---------------------------------------------------------------------------
# scoring primitives


def recency(delta_t: float, tau: float) -> float:
    """Exponential freshness decay exp(-dt/tau) for dt >= 0."""
    if delta_t < 0:
        raise InvalidArgument(f"delta_t must be >= 0, got {delta_t}")
    if tau <= 0:
        raise InvalidArgument(f"tau must be > 0, got {tau}")
    return math.exp(-delta_t / tau)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    # unit vectors by construction; plain dot, scalar on purpose
    return float(np.dot(a, b))


def raw_score(vec: np.ndarray, ts: float, q: Query, now: float, cfg: MemoryConfig) -> float:
    """Similarity/recency blend for a single memory, before tier scaling."""
    lam = cfg.similarity_weight
    dt = max(0.0, now - ts)
    return lam * _cos(vec, q.embedding) + (1.0 - lam) * recency(dt, cfg.recency_tau_s)


def complexity(symptoms: Sequence[str]) -> float:
    """Token-entropy of the symptom text, normalized to [0, 1]."""
    tokens = [t for s in symptoms for t in tokenize(s)]
    if not tokens:
        raise InvalidQuery("cannot measure complexity of empty symptoms")
    counts = Counter(tokens)
    if len(counts) == 1:
        return 0.0
    total = len(tokens)
    h = -sum((c / total) * math.log(c / total) for c in counts.values())
    return h / math.log(len(counts))


def confidence_value(factors: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted factor product: prod_j f_j ** zeta_j."""
    if len(factors) != len(weights):
        raise InvalidArgument("factor/weight length mismatch")
    out = 1.0
    for f, z in zip(factors, weights):
        if z < 0:
            raise InvalidArgument(f"factor weights must be >= 0, got {z}")
        out *= max(0.0, f) ** z
    return out


def context_overlap(a: Iterable[str], b: Iterable[str]) -> float:
    """Jaccard overlap of two label sets; two empty sets count as a full match."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    union = sa | sb
    return len(sa & sb) / len(union)


def _success_factor(successes: float, trials: float) -> float:
    # Laplace smoothing: an untried memory sits at 0.5
    return (successes + 1.0) / (trials + 2.0)


def compute_factors(
    memory: Episode | Pattern, q: Query, now: float, cfg: MemoryConfig
) -> tuple[float, float, float, float]:
    """The (similarity, temporal, success, context) confidence factors."""
    if isinstance(memory, Episode):
        vec, ts = memory.embedding, memory.timestamp
        f_succ = _success_factor(memory.successes, memory.trials)
        labels: Iterable[str] = memory.context
    else:
        vec, ts = memory.centroid, memory.last_updated
        f_succ = _success_factor(memory.success_members, memory.member_count)
        labels = memory.context_labels
    f_sim = math.exp(-(1.0 - _cos(vec, q.embedding)) / cfg.sim_scale)
    f_temp = math.exp(-max(0.0, now - ts) / cfg.temporal_tau_s)
    f_ctx = context_overlap(labels, q.context)
    return (f_sim, f_temp, f_succ, f_ctx)


# ---------------------------------------------------------------------------
# the pool


class MemoryPool:
    """Bounded store of episodes and patterns with indexed retrieval.

    Writers take an internal lock; readers work off immutable id tuples that
    are swapped atomically, so concurrent lookups never see a half-applied
    mutation.
    """

    def __init__(self, config: MemoryConfig | None = None) -> None:
        self.config = config or MemoryConfig()
        self.config.validate()
        self._episodes: dict[str, Episode] = {}
        self._patterns: dict[str, Pattern] = {}
        self._tombstones: dict[str, Outcome] = {}  # evicted id -> final outcome
        self._order: tuple[str, ...] = ()          # episode insertion order
        self._unclustered: tuple[str, ...] | None = None
        self._pattern_seq = 0
        self._lock = threading.RLock()

    # -- basic introspection ------------------------------------------------

    def __len__(self) -> int:
        return len(self._episodes) + len(self._patterns)

    @property
    def episodes(self) -> dict[str, Episode]:
        return self._episodes

    @property
    def patterns(self) -> dict[str, Pattern]:
        return self._patterns

    def episode(self, episode_id: str) -> Episode:
        try:
            return self._episodes[episode_id]
        except KeyError:
            raise NotFound(f"unknown episode id {episode_id!r}") from None

    def get_memory(self, ref: str) -> Episode | Pattern:
        if ref in self._episodes:
            return self._episodes[ref]
        if ref in self._patterns:
            return self._patterns[ref]
        raise NotFound(f"unknown memory ref {ref!r}")

    # -- mutation -----------------------------------------------------------

    def insert_episode(self, episode: Episode) -> None:
        with self._lock:
            if episode.id in self._episodes or episode.id in self._tombstones:
                raise DuplicateId(f"episode id {episode.id!r} already used")
            episode.validate()
            if len(episode.embedding) != self.config.embedding_dim:
                raise InvalidArgument(
                    f"episode {episode.id}: embedding dim {len(episode.embedding)}"
                    f" != {self.config.embedding_dim}"
                )
            self._episodes[episode.id] = episode
            self._order = self._order + (episode.id,)
            self._unclustered = None
            while len(self._episodes) > self.config.capacity:
                self._evict_one()

    def _evict_one(self) -> None:
        victim = min(
            self._episodes.values(), key=lambda e: (e.memory_value, e.timestamp, e.id)
        )
        self._tombstones[victim.id] = victim.outcome
        del self._episodes[victim.id]
        self._order = tuple(i for i in self._order if i != victim.id)
        self._unclustered = None

    def update_outcome(self, episode_id: str, outcome: Outcome, success: bool) -> None:
        """Record a feedback trial and scale the episode's retention value."""
        with self._lock:
            ep = self.episode(episode_id)
            ep.outcome = outcome
            ep.trials += 1
            ep.successes += int(success)
            delta = self.config.outcome_delta
            factor = (1.0 + delta) if success else (1.0 - delta)
            ep.memory_value = max(0.0, ep.memory_value * factor)
            for pat in self._patterns.values():
                if episode_id in pat.member_ids:
                    self._recount_reliability(pat)

    def _recount_reliability(self, pat: Pattern) -> None:
        wins = 0
        for mid in pat.member_ids:
            if mid in self._episodes:
                wins += int(self._episodes[mid].outcome is Outcome.SUCCESS)
            elif mid in self._tombstones:
                wins += int(self._tombstones[mid] is Outcome.SUCCESS)
        pat.success_members = wins
        pat.reliability = wins / len(pat.member_ids) if pat.member_ids else 0.0

    # -- pattern formation --------------------------------------------------

    def form_patterns(self, now: float | None = None) -> list[str]:
        """Full clustering pass; returns ids of patterns created or updated.

        Re-running on an unchanged pool is a no-op apart from refreshing the
        same pattern contents (idempotent end state).
        """
        with self._lock:
            return self._form_for_seeds(sorted(self._episodes), now)

    def form_patterns_incremental(self, new_episode_id: str, now: float | None = None) -> list[str]:
        """Re-cluster only the neighborhoods affected by one new episode."""
        with self._lock:
            ep = self.episode(new_episode_id)
            seeds = {new_episode_id}
            for other in self._episodes.values():
                if other.id != ep.id and _cos(ep.embedding, other.embedding) > self.config.pattern_sim_threshold:
                    seeds.add(other.id)
            return self._form_for_seeds(sorted(seeds), now)

    def _neighborhood(self, seed: Episode) -> set[str]:
        th = self.config.pattern_sim_threshold
        return {
            other.id
            for other in self._episodes.values()
            if _cos(seed.embedding, other.embedding) > th
        }

    def _form_for_seeds(self, seed_ids: Sequence[str], now: float | None) -> list[str]:
        touched: dict[str, None] = {}  # insertion-ordered de-dup
        for sid in seed_ids:
            seed = self._episodes.get(sid)
            if seed is None:
                continue
            members = self._neighborhood(seed)
            if len(members) < self.config.pattern_min_members:
                continue
            target = self._best_overlap(members)
            if target is None:
                self._pattern_seq += 1
                target = Pattern(
                    id=f"pat-{self._pattern_seq:06d}",
                    centroid=np.zeros(self.config.embedding_dim),
                    spread=np.zeros(self.config.embedding_dim),
                    strategy=Strategy([], [], ""),
                    reliability=0.0,
                    member_count=0,
                    member_ids=set(),
                    last_updated=0.0,
                    seed_id=sid,
                )
                self._patterns[target.id] = target
                changed = True
            else:
                changed = members != target.member_ids
            if changed:
                self._refresh_pattern(target, members, sid)
                touched[target.id] = None
                self._unclustered = None
        return list(touched)

    def _best_overlap(self, members: set[str]) -> Pattern | None:
        best: Pattern | None = None
        best_frac = 0.5  # strict majority overlap required to merge
        for pat in sorted(self._patterns.values(), key=lambda p: p.id):
            frac = len(members & pat.member_ids) / max(len(members), len(pat.member_ids))
            if frac > best_frac:
                best, best_frac = pat, frac
        return best

    def _refresh_pattern(self, pat: Pattern, members: set[str], seed_id: str) -> None:
        rows = np.stack([self._episodes[m].embedding for m in sorted(members)])
        centroid = rows.mean(axis=0)
        norm = float(np.linalg.norm(centroid))
        if norm == 0.0:
            centroid = rows[0].copy()
            norm = 1.0
        centroid = centroid / norm
        cosines = np.clip(rows @ centroid, -1.0, 1.0)
        eps = [self._episodes[m] for m in sorted(members)]
        donor = max(eps, key=lambda e: (e.memory_value, e.id))
        pat.centroid = centroid
        pat.spread = rows.var(axis=0)
        pat.strategy = Strategy(
            actions=list(donor.actions),
            resolution_path=list(donor.resolution_path),
            source_episode_id=donor.id,
        )
        pat.member_ids = set(members)
        pat.member_count = len(members)
        pat.seed_id = seed_id
        pat.last_updated = max(e.timestamp for e in eps)
        pat.max_member_ts = pat.last_updated
        pat.max_member_angle = float(np.max(np.arccos(cosines)))
        pat.symptom_tokens = frozenset().union(*(e.symptom_tokens for e in eps))
        ctx_sets = [set(e.context) for e in eps]
        pat.context_labels = frozenset(set.intersection(*ctx_sets)) if ctx_sets else frozenset()
        pat.success_members = sum(e.outcome is Outcome.SUCCESS for e in eps)
        pat.reliability = pat.success_members / pat.member_count

    # -- retrieval ----------------------------------------------------------

    def novelty(self, q: Query) -> float:
        """Minimum cosine distance from the query to any stored memory; 1.0 when empty."""
        best = None
        for ep in self._episodes.values():
            d = 1.0 - _cos(ep.embedding, q.embedding)
            if best is None or d < best:
                best = d
        for pat in self._patterns.values():
            d = 1.0 - _cos(pat.centroid, q.embedding)
            if best is None or d < best:
                best = d
        return 1.0 if best is None else max(0.0, best)

    def mixing(self, q: Query) -> tuple[float, float, float]:
        """Pattern-vs-episode attention split; returns (psi, novelty, complexity)."""
        nov = self.novelty(q)
        comp = complexity(q.symptoms)
        w1, w2 = self.config.mix_weights
        psi = _sigmoid(w1 * nov + w2 * comp + self.config.mix_bias)
        return psi, nov, comp

    def _scored(self, ref: str, kind: str, mem: Episode | Pattern, scale: float,
                q: Query, now: float, weights: Sequence[float]) -> ScoredMemory:
        if isinstance(mem, Episode):
            s = raw_score(mem.embedding, mem.timestamp, q, now, self.config)
            toks = mem.symptom_tokens
        else:
            s = raw_score(mem.centroid, mem.last_updated, q, now, self.config)
            toks = mem.symptom_tokens
        factors = compute_factors(mem, q, now, self.config)
        return ScoredMemory(
            ref=ref,
            kind=kind,
            score=scale * s,
            confidence=confidence_value(factors, weights),
            factors=factors,
            symptom_tokens=toks,
        )

    def retrieve(
        self,
        q: Query,
        weights: Sequence[float],
        now: float,
        k: int | None = None,
        exhaustive: bool = False,
    ) -> RetrievalResult:
        """Top-k memories by tier-scaled score; ties by confidence, then id."""
        k = self.config.retrieval_k if k is None else k
        if k < 1:
            raise InvalidArgument(f"k must be >= 1, got {k}")
        psi, nov, comp = self.mixing(q)
        ep_scale, pat_scale = (1.0 - psi), psi

        candidates: list[ScoredMemory] = [
            self._scored(pid, "pattern", pat, pat_scale, q, now, weights)
            for pid, pat in sorted(self._patterns.items())
        ]
        if exhaustive or not self._patterns:
            for eid in self._order:
                candidates.append(
                    self._scored(eid, "episode", self._episodes[eid], ep_scale, q, now, weights)
                )
        else:
            candidates.extend(self._indexed_episode_candidates(q, now, weights, ep_scale, k))

        candidates.sort(key=lambda m: (-m.score, -m.confidence, m.ref))
        top = candidates[:k]
        c_max = max((m.confidence for m in top), default=0.0)
        return RetrievalResult(memories=top, c_max=c_max, psi=psi, novelty=nov, complexity=comp)

    def _unclustered_ids(self) -> tuple[str, ...]:
        if self._unclustered is None:
            clustered: set[str] = set()
            for pat in self._patterns.values():
                clustered |= pat.member_ids
            self._unclustered = tuple(i for i in self._order if i not in clustered)
        return self._unclustered

    def _cluster_bound(self, pat: Pattern, q: Query, now: float, ep_scale: float) -> float:
        """Sound upper bound on any live member's scaled score (with float slack)."""
        cos_qc = max(-1.0, min(1.0, _cos(pat.centroid, q.embedding)))
        theta_q = math.acos(cos_qc)
        cos_ub = 1.0 if theta_q <= pat.max_member_angle else math.cos(theta_q - pat.max_member_angle)
        rec_ub = math.exp(-max(0.0, now - pat.max_member_ts) / self.config.recency_tau_s)
        lam = self.config.similarity_weight
        return ep_scale * (lam * min(1.0, cos_ub) + (1.0 - lam) * rec_ub) + 1e-6

    def _indexed_episode_candidates(
        self, q: Query, now: float, weights: Sequence[float], ep_scale: float, k: int
    ) -> list[ScoredMemory]:
        pats = sorted(self._patterns.values(), key=lambda p: p.id)
        bounds = {p.id: self._cluster_bound(p, q, now, ep_scale) for p in pats}
        by_promise = sorted(pats, key=lambda p: (-bounds[p.id], p.id))

        chosen: set[str] = set(self._unclustered_ids())
        opened = 0
        for pat in by_promise[: self.config.index_probe_patterns]:
            chosen |= {m for m in pat.member_ids if m in self._episodes}
            opened += 1

        scored: dict[str, ScoredMemory] = {
            eid: self._scored(eid, "episode", self._episodes[eid], ep_scale, q, now, weights)
            for eid in chosen
        }

        def kth_score() -> float:
            if len(scored) < k:
                return -math.inf
            vals = sorted((m.score for m in scored.values()), reverse=True)
            return vals[k - 1]

        # open further clusters only while they could still beat the current top-k
        cutoff = kth_score()
        for pat in by_promise[opened:]:
            if bounds[pat.id] < cutoff - 1e-9:
                break
            for m in pat.member_ids:
                if m in self._episodes and m not in scored:
                    scored[m] = self._scored(m, "episode", self._episodes[m], ep_scale, q, now, weights)
            cutoff = kth_score()
        return list(scored.values())

    def hints(self, q: Query, weights: Sequence[float], now: float) -> set[str]:
        """Union of resolution-path node ids over the top hint_k retrieved
        memories.

        Hits below ``hint_min_confidence`` contribute nothing: an off-topic
        memory (zero context overlap in particular) must not steer graph
        exploration just because the pool holds nothing better.  Set the gate
        to 0 to recover the ungated union.
        """
        result = self.retrieve(q, weights, now, k=self.config.hint_k)
        nodes: set[str] = set()
        for m in result.memories:
            if m.confidence < self.config.hint_min_confidence:
                continue
            mem = self.get_memory(m.ref)
            path = mem.resolution_path if isinstance(mem, Episode) else mem.strategy.resolution_path
            nodes.update(path)
        return nodes

    def memory_paths(self, result: RetrievalResult) -> list[list[str]]:
        """Resolution paths of confidently retrieved memories, in retrieval
        order; gated like :meth:`hints` so weak hits cannot bias search."""
        paths = []
        for m in result.memories:
            if m.confidence < self.config.hint_min_confidence:
                continue
            mem = self.get_memory(m.ref)
            path = mem.resolution_path if isinstance(mem, Episode) else mem.strategy.resolution_path
            paths.append(list(path))
        return paths

    # -- persistence --------------------------------------------------------

    def save_episodes(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for eid in self._order:
                fh.write(json.dumps(_episode_to_dict(self._episodes[eid]), sort_keys=True) + "\n")

    def load_episodes(self, path: str) -> int:
        """Load an episode JSONL file; raises on the first invalid line."""
        n = 0
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    self.insert_episode(episode_from_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError, InvalidArgument) as exc:
                    raise SchemaViolation(f"line {line_no}: {exc}") from exc
                n += 1
        return n

    def save_pattern_snapshot(self, path: str) -> None:
        payload = {
            "patterns": [_pattern_to_dict(p) for _, p in sorted(self._patterns.items())],
            "config": _config_to_dict(self.config),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)

    def load_pattern_snapshot(self, path: str) -> int:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        try:
            for raw in payload["patterns"]:
                pat = _pattern_from_dict(raw)
                self._patterns[pat.id] = pat
                seq = int(pat.id.rsplit("-", 1)[-1]) if pat.id.startswith("pat-") else 0
                self._pattern_seq = max(self._pattern_seq, seq)
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaViolation(f"bad pattern snapshot: {exc}") from exc
        self._unclustered = None
        return len(payload["patterns"])


# ---------------------------------------------------------------------------
# serialization helpers


def _episode_to_dict(ep: Episode) -> dict:
    return {
        "id": ep.id,
        "symptoms": list(ep.symptoms),
        "context": sorted(ep.context),
        "actions": list(ep.actions),
        "outcome": ep.outcome.value,
        "timestamp": ep.timestamp,
        "memory_value": ep.memory_value,
        "embedding": [float(x) for x in ep.embedding],
        "resolution_path": list(ep.resolution_path),
        "trials": ep.trials,
        "successes": ep.successes,
    }


def episode_from_dict(raw: dict) -> Episode:
    return Episode(
        id=str(raw["id"]),
        symptoms=[str(s) for s in raw["symptoms"]],
        context=set(str(c) for c in raw["context"]),
        actions=[str(a) for a in raw["actions"]],
        outcome=Outcome(raw["outcome"]),
        timestamp=float(raw["timestamp"]),
        memory_value=float(raw["memory_value"]),
        embedding=np.asarray(raw["embedding"], dtype=np.float64),
        resolution_path=[str(p) for p in raw["resolution_path"]],
        trials=int(raw.get("trials", 0)),
        successes=int(raw.get("successes", 0)),
    )


def _pattern_to_dict(p: Pattern) -> dict:
    return {
        "id": p.id,
        "centroid": [float(x) for x in p.centroid],
        "spread": [float(x) for x in p.spread],
        "strategy": {
            "actions": list(p.strategy.actions),
            "resolution_path": list(p.strategy.resolution_path),
            "source_episode_id": p.strategy.source_episode_id,
        },
        "reliability": p.reliability,
        "member_count": p.member_count,
        "member_ids": sorted(p.member_ids),
        "last_updated": p.last_updated,
        "seed_id": p.seed_id,
        "symptom_tokens": sorted(p.symptom_tokens),
        "context_labels": sorted(p.context_labels),
        "max_member_angle": p.max_member_angle,
        "max_member_ts": p.max_member_ts,
        "success_members": p.success_members,
    }


def _pattern_from_dict(raw: dict) -> Pattern:
    return Pattern(
        id=str(raw["id"]),
        centroid=np.asarray(raw["centroid"], dtype=np.float64),
        spread=np.asarray(raw["spread"], dtype=np.float64),
        strategy=Strategy(
            actions=[str(a) for a in raw["strategy"]["actions"]],
            resolution_path=[str(p) for p in raw["strategy"]["resolution_path"]],
            source_episode_id=str(raw["strategy"]["source_episode_id"]),
        ),
        reliability=float(raw["reliability"]),
        member_count=int(raw["member_count"]),
        member_ids=set(str(m) for m in raw["member_ids"]),
        last_updated=float(raw["last_updated"]),
        seed_id=str(raw["seed_id"]),
        symptom_tokens=frozenset(raw.get("symptom_tokens", ())),
        context_labels=frozenset(raw.get("context_labels", ())),
        max_member_angle=float(raw.get("max_member_angle", math.pi)),
        max_member_ts=float(raw.get("max_member_ts", raw["last_updated"])),
        success_members=int(raw.get("success_members", 0)),
    )


def _config_to_dict(cfg: MemoryConfig) -> dict:
    return {
        "pattern_sim_threshold": cfg.pattern_sim_threshold,
        "pattern_min_members": cfg.pattern_min_members,
        "retrieval_k": cfg.retrieval_k,
        "similarity_weight": cfg.similarity_weight,
        "recency_tau_s": cfg.recency_tau_s,
        "sim_scale": cfg.sim_scale,
        "temporal_tau_s": cfg.temporal_tau_s,
        "hint_k": cfg.hint_k,
        "mix_weights": list(cfg.mix_weights),
        "mix_bias": cfg.mix_bias,
        "embedding_dim": cfg.embedding_dim,
        "capacity": cfg.capacity,
        "outcome_delta": cfg.outcome_delta,
        "index_probe_patterns": cfg.index_probe_patterns,
    }
