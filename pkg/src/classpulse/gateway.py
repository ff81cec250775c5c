"""Uniform client for chat-completion and embedding backends.

Two backends share one contract: ``remote`` speaks OpenAI-style HTTP endpoints,
``stub`` is a fully deterministic, network-free implementation used for tests
and offline replay. Structured completions are schema-validated gateway-side,
with bounded repair retries, so callers never see a non-conforming document.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

import httpx
import jsonschema
import numpy as np

from .events import CATEGORY_LABELS, MessageCategory


class GatewayError(Exception):
    pass


class GatewayUnavailable(GatewayError):
    pass


class GatewayTimeout(GatewayError):
    pass


class BackendError(GatewayError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"backend returned status {status}: {detail}")
        self.status = status


class SchemaInvalidAfterRetries(GatewayError):
    pass


@dataclass
class GatewayConfig:
    backend: str = "stub"  # "stub" | "remote"
    seed: int = 0
    embedding_dim: int = 64
    timeout_s: float = 30.0
    max_retries: int = 2
    chat_url: str = ""
    embed_url: str = ""
    chat_model: str = ""
    embed_model: str = ""
    api_key_env: str = "LLM_API_KEY"
    max_concurrency: int = 2

    @classmethod
    def from_env(cls, environ: Mapping[str, str] = os.environ) -> "GatewayConfig":
        cfg = cls(
            backend=environ.get("LLM_BACKEND", "stub"),
            seed=int(environ.get("LLM_SEED", "0")),
            timeout_s=float(environ.get("LLM_TIMEOUT_S", "30")),
            chat_url=environ.get("LLM_CHAT_URL", ""),
            embed_url=environ.get("LLM_EMBED_URL", ""),
            chat_model=environ.get("LLM_CHAT_MODEL", ""),
            embed_model=environ.get("LLM_EMBED_MODEL", ""),
        )
        if cfg.backend == "remote":
            cfg.embedding_dim = 0  # backend-defined
        return cfg


@dataclass(frozen=True)
class StructuredRequest:
    """A structured-output completion: the schema's ``title`` names the task."""

    system_prompt: str
    user_payload: Any
    output_schema: dict


MESSAGE_TAG_SCHEMA = {
    "title": "MessageTag",
    "type": "object",
    "properties": {"category": {"type": "string", "enum": [c.value for c in MessageCategory]}},
    "required": ["category"],
    "additionalProperties": False,
}

CLUSTER_SUMMARY_SCHEMA = {
    "title": "ClusterSummary",
    "type": "object",
    "properties": {"summary": {"type": "string", "minLength": 1}},
    "required": ["summary"],
    "additionalProperties": False,
}

MESSAGE_TAG_PROMPT = (
    "You tag one chat message from a collaborative programming session with "
    "exactly one category: HelpGiving, HelpSeeking, ExchangingInfoFeedback, "
    "JointReflection, MutualEncouragement, or NotClassRelated. "
    'Respond as JSON: {"category": "..."}'
)

CLUSTER_SUMMARY_PROMPT = (
    "You write a concise title (at most 8 words, Title Case) capturing the "
    "essence of the following group chat excerpts. "
    'Respond as JSON: {"summary": "..."}'
)

_GREETINGS = {
    "hi", "hello", "hey", "yo", "wassup", "sup", "lol", "lmao", "haha",
    "bye", "hru", "wyd", "bruh", "omg", "same", "nothing", "idk",
}
_EXPLAIN_VERBS = {
    "initialize", "initializes", "means", "use", "try", "should", "need",
    "needs", "start", "set", "sets", "define", "defines", "return",
    "returns", "fix", "add", "remove", "check", "declare", "works",
    "increment", "counts",
}
_HELP_WORDS = {"help", "stuck", "confused", "how", "what", "why", "where", "when"}

# Keyword table for stub topic titles; first match with the most hits wins.
_TOPIC_KEYWORDS: list[tuple[frozenset[str], str]] = [
    (frozenset({"count", "counting", "counter"}), "Correcting Function Implementation for Counting"),
    (frozenset({"syntax", "logic", "logical", "error", "errors"}), "Correcting Function Logic and Syntax Errors"),
    (frozenset({"eof", "traceback", "crash", "crashes"}), "Troubleshooting Code and EOF Errors"),
    (frozenset({"hi", "hello", "hey", "wassup", "sup"}), "Repeated Greetings and Minimal Progress"),
    (frozenset({"list", "loop", "index", "range", "iterate"}), "Iterating Over the Input List"),
    (frozenset({"return", "returns", "output", "value"}), "Clarifying Return Values and Outputs"),
    (frozenset({"test", "tests", "pass", "passing", "failing"}), "Debugging Failing Unit Tests"),
]

GROUP_ASPECTS = [
    "pass rate",
    "amount of related messages in the conversation",
    "topic of conversation",
    "member's participation in discussion",
]
STUDENT_ASPECTS = [
    "pass rate",
    "amount of related messages in the conversation",
    "topic of conversation",
    "code issue",
]

_NOT_RELATED_LABEL = CATEGORY_LABELS[MessageCategory.NOT_CLASS_RELATED]


def tokenize(text: str) -> list[str]:
    out: list[str] = []
    word = []
    for ch in text.lower():
        if ch.isalnum():
            word.append(ch)
        elif word:
            out.append("".join(word))
            word = []
    if word:
        out.append("".join(word))
    return out


class LLMGateway:
    """Thread-safe gateway; in-flight requests are capped per instance."""

    def __init__(self, config: Optional[GatewayConfig] = None, transport: Optional[httpx.BaseTransport] = None):
        self.config = config or GatewayConfig()
        self._sem = threading.Semaphore(self.config.max_concurrency)
        self._client: Optional[httpx.Client] = None
        if self.config.backend == "remote":
            self._client = httpx.Client(
                timeout=self.config.timeout_s, transport=transport
            )

    # -- public operations ---------------------------------------------------

    def complete_structured(self, req: StructuredRequest) -> dict:
        """Return a document conforming to ``req.output_schema``.

        Validation failures are retried up to ``max_retries`` times with the
        validation error appended to the prompt, then raised as
        :class:`SchemaInvalidAfterRetries`.
        """
        with self._sem:
            if self.config.backend == "stub":
                doc = self._stub_complete(req)
                jsonschema.validate(doc, req.output_schema)
                return doc
            return self._remote_complete(req)

    def embed(self, text: str) -> np.ndarray:
        """Embed text into a unit-norm vector of ``embedding_dim`` numbers."""
        if not text:
            raise ValueError("cannot embed empty text")
        with self._sem:
            if self.config.backend == "stub":
                return self._stub_embed(text)
            return self._remote_embed(text)

    def tag_message(self, text: str, context: Sequence[str] = ()) -> MessageCategory:
        """Classify one chat message into the six activity categories."""
        doc = self.complete_structured(
            StructuredRequest(
                system_prompt=MESSAGE_TAG_PROMPT,
                user_payload={"message": text, "context": list(context)},
                output_schema=MESSAGE_TAG_SCHEMA,
            )
        )
        return MessageCategory(doc["category"])

    def summarize_conversation(self, texts: Sequence[str]) -> str:
        """Short title-case summary (<= 8 words) of a set of chat messages."""
        if not texts:
            raise ValueError("cannot summarize an empty conversation")
        doc = self.complete_structured(
            StructuredRequest(
                system_prompt=CLUSTER_SUMMARY_PROMPT,
                user_payload={"conversations": list(texts)},
                output_schema=CLUSTER_SUMMARY_SCHEMA,
            )
        )
        words = doc["summary"].split()
        return " ".join(words[:8])

    # -- stub backend ----------------------------------------------------------

    def _stub_embed(self, text: str) -> np.ndarray:
        dim = self.config.embedding_dim
        vec = np.zeros(dim, dtype=float)
        for token, count in Counter(tokenize(text)).items():
            digest = hashlib.sha256(f"{self.config.seed}|{token}".encode()).digest()
            bucket = int.from_bytes(digest[:8], "big") % dim
            vec[bucket] += count
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm

    def _stub_complete(self, req: StructuredRequest) -> dict:
        title = req.output_schema.get("title", "")
        if title == "MessageTag":
            return {"category": self._stub_tag(req.user_payload["message"]).value}
        if title == "ClusterSummary":
            return {"summary": self._stub_summary(req.user_payload["conversations"])}
        if title == "RankedGroupList":
            return self._stub_rank_groups(req.user_payload)
        if title == "RankedStudentList":
            return self._stub_rank_students(req.user_payload)
        if title == "IssueSummary":
            return self._stub_issue_summary(req.user_payload)
        raise GatewayError(f"stub has no handler for schema {title!r}")

    @staticmethod
    def _stub_tag(text: str) -> MessageCategory:
        tokens = tokenize(text)
        if not tokens:
            return MessageCategory.NOT_CLASS_RELATED
        if len(tokens) <= 3 and all(t in _GREETINGS for t in tokens):
            return MessageCategory.NOT_CLASS_RELATED
        if "?" in text or tokens[0] in _HELP_WORDS or "help" in tokens:
            return MessageCategory.HELP_SEEKING
        if any(t in _EXPLAIN_VERBS for t in tokens):
            return MessageCategory.HELP_GIVING
        return MessageCategory.EXCHANGING_INFO_FEEDBACK

    @staticmethod
    def _stub_summary(texts: Sequence[str]) -> str:
        counts = Counter(t for text in texts for t in tokenize(text))
        best_title = None
        best_hits = 0
        for keywords, title in _TOPIC_KEYWORDS:
            hits = sum(counts[t] for t in keywords)
            if hits > best_hits:
                best_hits, best_title = hits, title
        if best_title is not None:
            return best_title
        if not counts:
            return "Quiet Group Conversation"
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        return f"Discussing {top.title()}"

    @staticmethod
    def _related_messages(history: list[dict]) -> int:
        return sum(1 for m in history if m.get("activity") != _NOT_RELATED_LABEL)

    def _stub_rank_groups(self, payload: dict) -> dict:
        entries = []
        for gid, g in payload["groupHistory"].items():
            status = g["currentStatus"]
            msgs = g.get("messageHistory", [])
            subs = g.get("submissionHistory", [])
            related = self._related_messages(msgs)
            participated = status.get("membersParticipatedNum", 0)
            dims = {
                "pass rate": status.get("groupPassRate", 0.0) / 100.0,
                "amount of related messages in the conversation": min(related, 5) / 5.0,
                "topic of conversation": (related / len(msgs)) if msgs else 1.0,
                "member's participation in discussion": participated / 3.0,
            }
            aspect = min(GROUP_ASPECTS, key=lambda a: dims[a])
            if not msgs and subs:
                aspect = "amount of related messages in the conversation"
                issue = "No active conversation despite submission attempts."
            elif aspect == "pass rate":
                issue = "Low pass rate with limited progress across submissions."
            elif aspect == "amount of related messages in the conversation":
                issue = "Little class-related conversation in the group."
            elif aspect == "topic of conversation":
                issue = "Conversation is drifting away from the task."
            else:
                issue = "Members were asking for help but the conversation lacks depth in problem-solving."
            score = status.get("groupPassRate", 0.0) + 15.0 * related + 10.0 * participated
            entries.append((score, gid, aspect, issue))
        entries.sort(key=lambda e: (e[0], e[1]))
        return {
            "rankedGroupList": [
                {"rank": i + 1, "id": gid, "aspect": aspect, "issue": issue}
                for i, (_, gid, aspect, issue) in enumerate(entries)
            ]
        }

    def _stub_rank_students(self, payload: dict) -> dict:
        entries = []
        for sid, s in payload["studentHistory"].items():
            status = s["currentStatus"]
            msgs = s.get("messageHistory", [])
            subs = s.get("submissionHistory", [])
            related = self._related_messages(msgs)
            pass_rate = status.get("passRate", 0.0)
            repeated_error = (
                len(subs) >= 2
                and subs[-1].get("errorType") == subs[-2].get("errorType")
                and pass_rate < 100.0
            )
            if repeated_error:
                aspect = "code issue"
                issue = f"Repeated {subs[-1].get('errorType')} issues across submissions."
            elif not related:
                aspect = "amount of related messages in the conversation"
                issue = "No class-related messages despite ongoing work."
            elif pass_rate < 50.0:
                aspect = "pass rate"
                issue = "Low pass rate despite participating in the discussion."
            else:
                aspect = "topic of conversation"
                issue = "Progressing, but the discussion rarely touches the task."
            score = pass_rate + 15.0 * related
            entries.append((score, sid, aspect, issue))
        entries.sort(key=lambda e: (e[0], e[1]))
        return {
            "rankedStudentList": [
                {"rank": i + 1, "id": sid, "aspect": aspect, "issue": issue}
                for i, (_, sid, aspect, issue) in enumerate(entries)
            ]
        }

    @staticmethod
    def _stub_issue_summary(payload: dict) -> dict:
        key = "groupIssueList" if "groupIssueList" in payload else "studentIssueList"
        issues = payload[key]
        vocab = GROUP_ASPECTS if key == "groupIssueList" else STUDENT_ASPECTS
        counts = Counter(item["aspect"] for item in issues)
        aspects = sorted(
            counts, key=lambda a: (-counts[a], vocab.index(a) if a in vocab else 99)
        )
        summary = "Common issues involve " + " and ".join(aspects) + "."
        return {"summary": {"issueSummary": summary, "aspectList": aspects}}

    # -- remote backend --------------------------------------------------------

    def _remote_headers(self) -> dict:
        key = os.environ.get(self.config.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _remote_complete(self, req: StructuredRequest) -> dict:
        if not self.config.chat_url:
            raise GatewayUnavailable("no chat endpoint configured")
        system = req.system_prompt
        user = json.dumps(req.user_payload, ensure_ascii=False)
        last_error = ""
        for _attempt in range(self.config.max_retries + 1):
            prompt = system if not last_error else (
                f"{system}\n\nYour previous answer failed validation: "
                f"{last_error}\nReturn only JSON conforming to the schema."
            )
            body = {
                "model": self.config.chat_model,
                "messages": [
                    {"role": "system", "content": prompt},
                    {"role": "user", "content": user},
                ],
                "temperature": 0,
                "response_format": {"type": "json_object"},
            }
            try:
                resp = self._client.post(
                    self.config.chat_url, json=body, headers=self._remote_headers()
                )
            except httpx.TimeoutException as exc:
                raise GatewayTimeout(str(exc)) from exc
            except httpx.HTTPError as exc:
                raise GatewayUnavailable(str(exc)) from exc
            if resp.status_code != 200:
                raise BackendError(resp.status_code, resp.text[:200])
            try:
                content = resp.json()["choices"][0]["message"]["content"]
                doc = json.loads(content)
                jsonschema.validate(doc, req.output_schema)
                return doc
            except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
                last_error = f"unparseable output: {exc}"
            except jsonschema.ValidationError as exc:
                last_error = exc.message
        raise SchemaInvalidAfterRetries(last_error)

    def _remote_embed(self, text: str) -> np.ndarray:
        if not self.config.embed_url:
            raise GatewayUnavailable("no embedding endpoint configured")
        body = {"model": self.config.embed_model, "input": text}
        try:
            resp = self._client.post(
                self.config.embed_url, json=body, headers=self._remote_headers()
            )
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise GatewayUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise BackendError(resp.status_code, resp.text[:200])
        return np.asarray(resp.json()["data"][0]["embedding"], dtype=float)
