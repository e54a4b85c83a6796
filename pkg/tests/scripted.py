"""A canned stand-in for LLMClient, matching prompts by substring rules."""

from __future__ import annotations

from annoforge.llm import ChatResponse, GenerationParams, LLMError


class ScriptedClient:
    """Replies from an ordered rule list; first matching rule wins.

    A rule's needle is a substring (or tuple of substrings, all required)
    of the rendered prompt. Unmatched prompts raise, which keeps tests
    honest about exactly which calls a scenario makes.
    """

    backend = "scripted"

    def __init__(self, params: GenerationParams | None = None):
        self.params = params or GenerationParams()
        self.rules: list[tuple[tuple[str, ...], ChatResponse]] = []
        self.calls: list[str] = []

    def add(self, needle, text: str, finish_reason: str = "stop"):
        needles = (needle,) if isinstance(needle, str) else tuple(needle)
        self.rules.append((needles, ChatResponse(text=text,
                                                 finish_reason=finish_reason)))
        return self

    def complete(self, request) -> ChatResponse:
        prompt = request.messages[-1].content
        self.calls.append(prompt)
        for needles, response in self.rules:
            if all(n in prompt for n in needles):
                return response
        raise LLMError(f"no scripted response matches: {prompt[:120]!r}")


SUMMARIZE = "You are preparing a document"
STRUCTURE = "You are organizing the contents"
GUIDELINES = "You are writing annotation guidelines"
INSTANCES = "You are annotating a document by instantiating"
REPAIR = "could not be used"
