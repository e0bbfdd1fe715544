"""Prompt assembly, chat providers, and the context-order experiment.

Prompt assembly is a pure function over context texts and the query; the
exact byte layout of both prompt strings is pinned by golden tests.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import GlossaryEntry, segment_sentences, word_tokens
from .embedding import EmbeddingProvider, cosine
from .errors import (
    ContextOverflow,
    EmptyContext,
    EmptyInput,
    ProviderUnavailable,
    TooManyPermutations,
)

SYSTEM_PROMPT = (
    "Answer the questions based on the paragraphs provided here. "
    "DO NOT use any other information except that in the paragraphs. "
    "Keep the answers as short as possible. JUST GIVE THE ANSWER. "
    "NO PREAMBLE REQUIRED."
)

PARAGRAPHS_PREFIX = "PARAGRAPHS : "
QUESTIONS_PREFIX = "QUESTIONS: "

# Multiple context paragraphs are joined with a single newline.
CONTEXT_JOIN = "\n"

# Tokens that carry no content when deciding whether an answer merely
# restates an abbreviation and its expansion.
_GLUE_TOKENS = frozenset(
    {
        "a", "an", "the", "is", "are", "was", "were", "be", "been", "it", "its",
        "this", "that", "these", "those", "stands", "stand", "stood", "short",
        "for", "of", "to", "as", "in", "on", "or", "and", "also", "means",
        "mean", "meant", "refers", "refer", "referred", "called", "known",
        "abbreviation", "abbreviated", "abbreviates", "acronym", "expansion",
        "expands", "expanded", "full", "form", "name", "term", "which", "what",
    }
)


@dataclass(frozen=True)
class PromptPair:
    system: str
    user: str


@dataclass(frozen=True)
class GenerationRecord:
    prompt: PromptPair
    context_order: tuple[str, ...]
    response: str
    model_id: str
    latency_ms: float


@dataclass(frozen=True)
class PermutationRun:
    order: tuple[int, ...]
    response: str
    similarity_to_first: float
    exact_match: bool


def build_prompt(context_texts: Sequence[str], query: str) -> PromptPair:
    """Assemble the generator prompt byte-exactly from contexts and query."""
    if not context_texts:
        raise EmptyContext("at least one context text is required")
    if not query or not query.strip():
        raise EmptyInput("query is empty")
    user = PARAGRAPHS_PREFIX + CONTEXT_JOIN.join(context_texts) + QUESTIONS_PREFIX + query
    return PromptPair(system=SYSTEM_PROMPT, user=user)


def split_prompt(user: str) -> tuple[list[str], str]:
    """Recover (context_texts, query) from an assembled user prompt.

    Stub providers use this to answer from the wire-visible prompt alone.
    """
    if not user.startswith(PARAGRAPHS_PREFIX):
        raise ValueError("user prompt does not start with the paragraphs prefix")
    body = user[len(PARAGRAPHS_PREFIX) :]
    context_blob, _, query = body.rpartition(QUESTIONS_PREFIX)
    return context_blob.split(CONTEXT_JOIN), query


class ChatProvider:
    """Chat completion provider interface."""

    model_id: str = "chat"

    def complete(self, system: str, user: str) -> str:
        raise NotImplementedError


class EchoChatProvider(ChatProvider):
    """Offline stub that echoes the first sentence of one context paragraph.

    With ``order_invariant=True`` the echoed paragraph is the
    lexicographically smallest context, so the response does not depend on
    context order; otherwise the first context is echoed.
    """

    def __init__(self, order_invariant: bool = True):
        self.order_invariant = order_invariant
        self.model_id = "stub-echo-invariant" if order_invariant else "stub-echo-first"

    def complete(self, system: str, user: str) -> str:
        contexts, _ = split_prompt(user)
        target = min(contexts) if self.order_invariant else contexts[0]
        sentences = segment_sentences(target)
        return sentences[0][0] if sentences else target


class CannedChatProvider(ChatProvider):
    """Offline stub returning canned answers keyed by the query text.

    Unknown queries fall through to ``fallback`` when given, else to an
    empty string.
    """

    model_id = "stub-canned"

    def __init__(self, answers: Mapping[str, str], fallback: ChatProvider | None = None):
        self.answers = dict(answers)
        self.fallback = fallback

    def complete(self, system: str, user: str) -> str:
        _, query = split_prompt(user)
        if query in self.answers:
            return self.answers[query]
        if self.fallback is not None:
            return self.fallback.complete(system, user)
        return ""


class RemoteChatClient(ChatProvider):
    """HTTP chat-completions client.

    Wire shape: POST ``{"model", "messages": [{"role", "content"}, ...],
    "temperature"}`` returning ``choices[0].message.content``.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.0,
        timeout: float = 60.0,
        retries: int = 2,
        session=None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.model_id = model
        self.temperature = temperature
        self.timeout = timeout
        self.retries = retries
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def complete(self, system: str, user: str) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.temperature,
        }
        last_error = ""
        for attempt in range(self.retries + 1):
            try:
                response = self._session.post(self.endpoint, json=payload, timeout=self.timeout)
                if response.status_code >= 500:
                    last_error = f"HTTP {response.status_code}"
                    continue
                if response.status_code != 200:
                    text = response.text[:500]
                    if "context" in text.lower() or "token" in text.lower():
                        # Rough size estimate: one token per four characters.
                        raise ContextOverflow(
                            f"chat service rejected the prompt: {text}",
                            token_estimate=(len(system) + len(user)) // 4,
                        )
                    raise ProviderUnavailable(
                        f"chat service returned HTTP {response.status_code}",
                        attempts=attempt + 1,
                        last_error=text,
                    )
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except (ContextOverflow, ProviderUnavailable):
                raise
            except Exception as exc:
                last_error = str(exc)
        raise ProviderUnavailable(
            f"chat service unreachable after {self.retries + 1} attempts",
            attempts=self.retries + 1,
            last_error=last_error,
        )


def generate(
    llm: ChatProvider,
    prompt: PromptPair,
    context_order: Sequence[str] = (),
) -> GenerationRecord:
    """Call the chat provider and record the verbatim response with metadata."""
    started = time.perf_counter()
    response = llm.complete(prompt.system, prompt.user)
    latency_ms = (time.perf_counter() - started) * 1000.0
    return GenerationRecord(
        prompt=prompt,
        context_order=tuple(context_order),
        response=response,
        model_id=llm.model_id,
        latency_ms=latency_ms,
    )


def permutation_experiment(
    llm: ChatProvider,
    embedder: EmbeddingProvider,
    context_texts: Sequence[str],
    query: str,
    max_permutations: int = 24,
) -> list[PermutationRun]:
    """Generate under every context ordering and score each response against
    the identity-order response.

    Orderings are enumerated lexicographically, identity first. Similarity is
    the cosine of response embeddings; byte-equal responses score exactly 1.0
    and are also reported via ``exact_match``.
    """
    n = len(context_texts)
    if not 2 <= n <= 5:
        raise TooManyPermutations(f"need between 2 and 5 contexts, got {n}")
    limit = min(math.factorial(n), max_permutations)
    runs: list[PermutationRun] = []
    reference_response: str | None = None
    reference_vector = None
    for order in itertools.islice(itertools.permutations(range(n)), limit):
        prompt = build_prompt([context_texts[i] for i in order], query)
        record = generate(llm, prompt)
        if reference_response is None:
            reference_response = record.response
            similarity = 1.0
        elif record.response == reference_response:
            similarity = 1.0
        else:
            if reference_vector is None:
                reference_vector = embedder.embed(reference_response)
            similarity = cosine(embedder.embed(record.response), reference_vector)
        runs.append(
            PermutationRun(
                order=order,
                response=record.response,
                similarity_to_first=similarity,
                exact_match=record.response == reference_response,
            )
        )
    return runs


def acronym_expansion_flag(response: str, entry: GlossaryEntry) -> bool:
    """True when the response merely restates the entry's acronym/expansion.

    Every content token of the response must come from the term side of the
    entry and none from the definition-only vocabulary; glue words such as
    "stands for" are ignored.
    """
    if not entry.contains_acronym:
        raise ValueError(f"entry {entry.entry_id!r} has no acronym")
    term_tokens = set(word_tokens(entry.term))
    definition_only = set(word_tokens(entry.definition)) - term_tokens - _GLUE_TOKENS
    content = [t for t in word_tokens(response) if t not in _GLUE_TOKENS]
    if not content:
        return False
    return all(t in term_tokens for t in content) and not any(t in definition_only for t in content)
