"""Conversation topic modeling: embed each group's chat, cluster with
K-means++ and Lloyd refinement, summarize clusters, and deduplicate summaries
into a stable registry.

Re-clustering runs on a session-time cadence rather than per message, which
bounds gateway traffic and keeps topic assignments stable between passes.
Given a fixed rng seed and the stub gateway, the whole pipeline is
bit-deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .clustering import kmeanspp_seed, lloyd_cluster
from .gateway import GatewayUnavailable, LLMGateway
from .metrics import NO_CONVERSATION, SnapshotFrame


@dataclass(frozen=True)
class ConversationEmbedding:
    """A group's conversation embedded at a known message count; stale entries
    (older counts) are re-embedded on the next pass."""

    group_id: str
    vector: np.ndarray
    message_count_at_embed: int

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.vector)):
            raise ValueError(f"non-finite embedding for group {self.group_id}")


@dataclass(frozen=True)
class TopicRecord:
    topic_id: str
    summary: str
    centroid_embedding: np.ndarray


@dataclass
class TopicRegistry:
    """Registered topics, in registration order. A registered (id, summary)
    pair never changes; new near-duplicate summaries fold into the old id."""

    topics: dict[str, TopicRecord] = field(default_factory=dict)
    members: dict[str, set[str]] = field(default_factory=dict)

    def summary_of(self, topic_id: str) -> str:
        if topic_id == NO_CONVERSATION:
            return NO_CONVERSATION
        return self.topics[topic_id].summary

    def ordered_ids(self) -> list[str]:
        return list(self.topics)

    def register(self, summary: str, embedding: np.ndarray) -> str:
        topic_id = f"t{len(self.topics) + 1}"
        self.topics[topic_id] = TopicRecord(topic_id, summary, embedding)
        self.members[topic_id] = set()
        return topic_id


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def match_or_register_topic(
    new_summary: str,
    registry: TopicRegistry,
    gateway: LLMGateway,
    threshold: float = 0.85,
) -> str:
    """Return the id of an existing topic whose summary embedding is within
    ``threshold`` cosine similarity, or register the summary as a new topic."""
    embedding = gateway.embed(new_summary)
    best_id: Optional[str] = None
    best_sim = -1.0
    for record in registry.topics.values():
        sim = cosine_similarity(embedding, record.centroid_embedding)
        if sim > best_sim:
            best_sim, best_id = sim, record.topic_id
    if best_id is not None and best_sim >= threshold:
        return best_id
    return registry.register(new_summary, embedding)


def summarize_cluster(conversations: list[str], gateway: LLMGateway) -> str:
    """Concise title for a cluster's messages; the sentinel for silence is
    produced by the caller, never the gateway."""
    if not conversations:
        raise ValueError("summarize_cluster requires at least one message")
    return gateway.summarize_conversation(conversations)


class TopicPipeline:
    """Timer-driven re-clustering over all groups with at least one message."""

    def __init__(
        self,
        gateway: LLMGateway,
        seed: int = 0,
        k_max: int = 6,
        interval_s: float = 10.0,
        dedup_threshold: float = 0.85,
    ):
        self.gateway = gateway
        self.seed = seed
        self.k_max = k_max
        self.interval_s = interval_s
        self.dedup_threshold = dedup_threshold
        self.registry = TopicRegistry()
        self.assignments: dict[str, str] = {}
        self._embed_cache: dict[str, ConversationEmbedding] = {}
        self._runs = 0
        self._next_due = interval_s

    def due(self, now_s: float) -> bool:
        return now_s >= self._next_due

    def recluster(self, frame: SnapshotFrame) -> Optional[dict[str, str]]:
        """One clustering pass over the frame; returns new group->topic
        assignments, or None when the gateway is unavailable (previous topics
        are kept)."""
        while self._next_due <= frame.time_s:
            self._next_due += self.interval_s
        conversations: dict[str, list[str]] = {}
        for gid in sorted(frame.groups):
            texts = [
                m.text
                for sid in frame.groups[gid].member_ids
                for m in frame.students[sid].message_log
            ]
            if texts:
                conversations[gid] = texts
        if not conversations:
            return {}
        try:
            points = np.stack(
                [self._conversation_embedding(gid, texts) for gid, texts in conversations.items()]
            )
            group_ids = list(conversations)
            k = min(self.k_max, len(group_ids))
            rng = np.random.default_rng([self.seed, self._runs])
            self._runs += 1
            result = lloyd_cluster(points, kmeanspp_seed(points, k, rng))
            assignments: dict[str, str] = {}
            for cluster in range(result.k):
                cluster_groups = [
                    gid
                    for gid, a in zip(group_ids, result.assignments)
                    if a == cluster
                ]
                if not cluster_groups:
                    continue
                texts = [t for gid in cluster_groups for t in conversations[gid]]
                summary = summarize_cluster(texts, self.gateway)
                topic_id = match_or_register_topic(
                    summary, self.registry, self.gateway, self.dedup_threshold
                )
                for gid in cluster_groups:
                    assignments[gid] = topic_id
        except GatewayUnavailable:
            return None
        for gid, topic_id in assignments.items():
            old = self.assignments.get(gid)
            if old is not None and old != topic_id and old in self.registry.members:
                self.registry.members[old].discard(gid)
            self.registry.members[topic_id].add(gid)
            self.assignments[gid] = topic_id
        return assignments

    def _conversation_embedding(self, group_id: str, texts: list[str]) -> np.ndarray:
        cached = self._embed_cache.get(group_id)
        if cached is not None and cached.message_count_at_embed == len(texts):
            return cached.vector
        embedding = ConversationEmbedding(
            group_id=group_id,
            vector=self.gateway.embed("\n".join(texts)),
            message_count_at_embed=len(texts),
        )
        self._embed_cache[group_id] = embedding
        return embedding.vector
