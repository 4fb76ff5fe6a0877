"""Language-model bridge: mission translation and attribute-level guidance.

Every request goes through a ``Transport``. ``ReplayTransport`` answers from
a transcript and refuses any prompt whose hash differs from the recorded
one, so tests and benchmarks run offline and byte-for-byte reproducibly.
``RecordTransport`` wraps a live transport and captures a transcript.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .automaton import Dfa
from .heuristics import Call, LlmGuidance, remaining_mission
from .ltl import Formula, LtlError, check_cosafe, parse_prefix, print_prefix
from .scene import FLOOR, SceneGraph

log = logging.getLogger(__name__)

TRANSCRIPT_FORMAT = "sgplan-transcript"
TRANSCRIPT_VERSION = 1
PROMPT_VERSION = "v1"

ENV_URL = "SGPLAN_LLM_URL"
ENV_KEY = "SGPLAN_LLM_KEY"
ENV_MODEL = "SGPLAN_LLM_MODEL"


class TransportError(RuntimeError):
    pass


class ReplayMismatch(TransportError):
    pass


def prompt_hash(prompt: str) -> str:
    """64-bit hex digest of the prompt bytes."""
    return hashlib.blake2b(prompt.encode("utf-8"), digest_size=8).hexdigest()


@dataclass
class Exchange:
    hash: str
    prompt: str
    response: str


@dataclass
class Transcript:
    exchanges: list[Exchange] = field(default_factory=list)

    def append(self, prompt: str, response: str) -> None:
        self.exchanges.append(Exchange(prompt_hash(prompt), prompt, response))

    def to_json(self) -> dict:
        return {"format": TRANSCRIPT_FORMAT, "version": TRANSCRIPT_VERSION,
                "exchanges": [{"hash": e.hash, "prompt": e.prompt, "response": e.response}
                              for e in self.exchanges]}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Transcript":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise TransportError(f"cannot read transcript {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise TransportError(f"transcript {path} is not valid JSON: {exc}") from exc
        if doc.get("format") != TRANSCRIPT_FORMAT:
            raise TransportError(f"{path} is not a transcript")
        return cls([Exchange(e["hash"], e["prompt"], e["response"]) for e in doc["exchanges"]])


class Transport(Protocol):
    def send(self, prompt: str, session_id: str = "") -> str:
        ...


class ReplayTransport:
    """Serve recorded responses in order; any prompt drift raises."""

    def __init__(self, transcript: Transcript | str | os.PathLike):
        self.transcript = transcript if isinstance(transcript, Transcript) else Transcript.load(transcript)
        self.cursor = 0

    def send(self, prompt: str, session_id: str = "") -> str:
        if self.cursor >= len(self.transcript.exchanges):
            raise ReplayMismatch(f"transcript exhausted after {self.cursor} exchanges")
        ex = self.transcript.exchanges[self.cursor]
        h = prompt_hash(prompt)
        if h != ex.hash:
            raise ReplayMismatch(f"prompt {self.cursor} hash {h} does not match recorded {ex.hash}")
        self.cursor += 1
        log.debug("replay prompt %s:\n%s\nresponse:\n%s", h, prompt, ex.response)
        return ex.response


class LiveTransport:
    """Chat-completion HTTP client configured from the environment."""

    def __init__(self, url: str | None = None, key: str | None = None, model: str | None = None,
                 temperature: float = 0.0, max_tokens: int = 512, min_interval: float = 1.0,
                 timeout: float = 60.0):
        self.url = url or os.environ.get(ENV_URL)
        self.key = key or os.environ.get(ENV_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        if not self.url:
            raise TransportError(f"no endpoint configured (set {ENV_URL})")
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.min_interval = min_interval
        self.timeout = timeout
        self._last = 0.0
        self._lock = threading.Lock()

    def send(self, prompt: str, session_id: str = "") -> str:
        body = json.dumps({"model": self.model, "temperature": self.temperature,
                           "max_tokens": self.max_tokens,
                           "messages": [{"role": "user", "content": prompt}]}).encode()
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json",
                                              "Authorization": f"Bearer {self.key}"})
        with self._lock:
            wait = self._last + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last = time.monotonic()
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.load(resp)
            text = doc["choices"][0]["message"]["content"]
        except (urllib.error.URLError, OSError, KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"chat completion failed: {exc}") from exc
        log.debug("live prompt:\n%s\nresponse:\n%s", prompt, text)
        return text


class ScriptedTransport:
    """Answer from a fixed list of responses, ignoring the prompts."""

    def __init__(self, responses: Sequence[str]):
        self.responses = list(responses)
        self.prompts: list[str] = []

    def send(self, prompt: str, session_id: str = "") -> str:
        if len(self.prompts) >= len(self.responses):
            raise TransportError("scripted transport ran out of responses")
        self.prompts.append(prompt)
        return self.responses[len(self.prompts) - 1]


class RecordTransport:
    """Forward to another transport and keep every exchange."""

    def __init__(self, inner: Transport, path=None):
        self.inner = inner
        self.path = path
        self.transcript = Transcript()

    def send(self, prompt: str, session_id: str = "") -> str:
        response = self.inner.send(prompt, session_id)
        self.transcript.append(prompt, response)
        if self.path is not None:
            self.transcript.save(self.path)
        return response


# ------------------------------------------------------------------ prompts

UNIQUE_TEMPLATE = """\
You are given the attribute hierarchy of a building. Floors contain rooms, \
rooms list the rooms they connect to in brackets, and rooms contain objects. \
Every entity has a unique ID in parentheses.

{hierarchy}
Rewrite the mission below so that every floor, room or object it mentions is \
written as name_ID using the IDs above (spaces in names become underscores). \
Keep the rest of the wording. Reply with the rewritten mission only.

Mission: {mission}
"""

FEW_SHOT = (
    ("eventually reach the chair_5",
     "F chair_5"),
    ("visit the kitchen_3 and then reach the sink_12",
     "F & kitchen_3 F sink_12"),
    ("avoid the bathroom_4 until you reach the bed_10, and do not start in the tv_9",
     "& U ! bathroom_4 bed_10 ! tv_9"),
)

TRANSLATE_TEMPLATE = """\
Translate the mission into a co-safe linear temporal logic formula written in \
prefix notation. Operators: ! (not), & (and), | (or), => (implies), \
X (next), U (until), F (eventually). Do not use G (always). Each operator \
comes before its operands, so a & b is written & a b. Use only the entity \
names listed below as atomic propositions.

{examples}
Mission: {mission}
Entities: {entities}
Reply with the formula only.
"""

CORRECTION_TEMPLATE = """\
{previous}
Your answer was:
{answer}
It was rejected by the formula checker: {diagnostic}
Reply with a corrected formula only.
"""

GUIDANCE_TEMPLATE = """\
The building is organized as follows.
{description}
You guide a robot with these functions:
{motions}
Each call is written as <call fn="NAME" from="ID" to="ID"/>.

Example: a robot in the living room 1 has to reach the couch 8. Answer:
<plan>
<call fn="reach" from="1" to="8"/>
</plan>

The robot is {location}. The remaining mission is to {remaining}. \
Reply with a plan of function calls in the format above and nothing else.
"""

DEFAULT_MOTIONS = (
    ("move", "move(a, b) moves from room a to room b"),
    ("reach", "reach(a, b) reaches object b located in room a"),
)


def _examples_block() -> str:
    return "".join(f"Mission: {m}\nFormula: {f}\n\n" for m, f in FEW_SHOT)


def build_translation_prompts(hierarchy: str, mission: str, mu_unique: str | None = None,
                              mu_regex: Sequence[str] | None = None) -> dict[str, str]:
    """Prompt (a) always; prompt (c) once the unique-id mission is known."""
    out = {"unique": UNIQUE_TEMPLATE.format(hierarchy=hierarchy, mission=mission)}
    if mu_unique is not None:
        out["translate"] = TRANSLATE_TEMPLATE.format(
            examples=_examples_block(), mission=mu_unique, entities=", ".join(mu_regex or ()))
    return out


def correction_prompt(previous: str, answer: str, diagnostic: str) -> str:
    return CORRECTION_TEMPLATE.format(previous=previous.rstrip("\n"), answer=answer.strip(),
                                      diagnostic=diagnostic)


def extract_entities(text: str, scene: SceneGraph) -> tuple[list[str], list[str]]:
    """(known propositions, unknown tokens) mentioned as ``name_id`` or ``(id)``."""
    by_prop = {a.prop: a for a in scene.attributes.values()}
    found: list[str] = []
    unknown: list[str] = []

    def add(prop: str | None, raw: str):
        if prop is None:
            if raw not in unknown:
                unknown.append(raw)
        elif prop not in found:
            found.append(prop)

    pattern = re.compile(r"\b([A-Za-z][A-Za-z0-9_]*?)_(\d+)\b|\((\d+)\)")
    for m in pattern.finditer(text):
        if m.group(3) is not None:
            a = scene.attributes.get(int(m.group(3)))
            add(a.prop if a else None, m.group(0))
        else:
            raw = m.group(0).lower()
            a = scene.attributes.get(int(m.group(2)))
            add(raw if raw in by_prop else None, m.group(0))
    return found, unknown


def _formula_text(response: str) -> str:
    lines = [l.strip().strip("`") for l in response.strip().splitlines() if l.strip().strip("`")]
    if not lines:
        return ""
    text = lines[-1]
    for prefix in ("Formula:", "formula:", "LTL:"):
        if text.startswith(prefix):
            text = text[len(prefix):].strip()
    return text


# -------------------------------------------------------------- translation

OK = "ok"
NEEDS_HUMAN_REPHRASE = "needs_human_rephrase"


@dataclass
class TranslationSession:
    mission: str
    hierarchy: str
    mu_unique: str = ""
    mu_regex: list[str] = field(default_factory=list)
    unknown_entities: list[str] = field(default_factory=list)
    formula: Formula | None = None
    formula_text: str = ""
    attempts: int = 0
    transcript: list[tuple[str, str]] = field(default_factory=list)
    outcome: str = ""
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome == OK


def _check(text: str, scene: SceneGraph) -> tuple[Formula | None, str]:
    alphabet = [a.prop for a in scene.attributes.values()]
    try:
        phi = parse_prefix(text, alphabet)
    except LtlError as exc:
        return None, f"syntax error: {exc}"
    verdict = check_cosafe(phi)
    if not verdict.is_cosafe:
        return None, f"not co-safe: {verdict.describe()}"
    return phi, ""


def translate(mission: str, scene: SceneGraph, transport: Transport, max_attempts: int = 3,
              session_id: str = "") -> TranslationSession:
    """Natural-language mission to a checked co-safe formula."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    hierarchy = scene.attribute_hierarchy()
    s = TranslationSession(mission=mission, hierarchy=hierarchy)

    def ask(prompt: str) -> str:
        response = transport.send(prompt, session_id)
        s.transcript.append((prompt, response))
        return response

    s.mu_unique = ask(build_translation_prompts(hierarchy, mission)["unique"]).strip()
    s.mu_regex, s.unknown_entities = extract_entities(s.mu_unique, scene)
    prompt = build_translation_prompts(hierarchy, mission, s.mu_unique, s.mu_regex)["translate"]
    while True:
        s.attempts += 1
        answer = ask(prompt)
        s.formula_text = _formula_text(answer)
        phi, diag = _check(s.formula_text, scene)
        if phi is not None:
            s.formula = phi
            s.outcome = OK
            s.diagnostic = ""
            return s
        if s.unknown_entities:
            diag += f" (unresolved entities in the mission: {', '.join(s.unknown_entities)})"
        s.diagnostic = diag
        if s.attempts >= max_attempts:
            s.outcome = NEEDS_HUMAN_REPHRASE
            return s
        prompt = correction_prompt(prompt, answer, diag)


# ----------------------------------------------------------------- guidance

_CALL = re.compile(r"<call\b([^>]*)/?>")
_ATTR = re.compile(r'(\w+)\s*=\s*"([^"]*)"')


def describe_scene(scene: SceneGraph) -> str:
    """Plain sentences about which rooms connect and what they contain."""
    lines = []
    for a in sorted(scene.attributes.values(), key=lambda a: a.id):
        if a.kind == "room":
            conn = ", ".join(f"{scene.attributes[c].name} {c}" for c in sorted(a.connections))
            objs = [o for o in scene.attributes.values() if o.kind == "object" and o.parent == a.id]
            text = f"The {a.name} {a.id}"
            text += f" connects to {conn}" if conn else " has no connections"
            if objs:
                text += " and contains " + ", ".join(f"{o.name} {o.id}" for o in sorted(objs, key=lambda o: o.id))
            lines.append(text + ".")
    return "\n".join(lines)


def guidance_prompt(scene: SceneGraph, attr_id: int, remaining: str,
                    motions: Sequence[tuple[str, str]] = DEFAULT_MOTIONS) -> str:
    a = scene.attributes[attr_id]
    where = f"on the {a.name} {a.id}" if a.kind == FLOOR else f"in the {a.name} {a.id}"
    return GUIDANCE_TEMPLATE.format(
        description=describe_scene(scene),
        motions="\n".join(f"- {desc}" for _, desc in motions),
        location=where, remaining=remaining)


def parse_calls(text: str, motions: Sequence[str]) -> tuple[list[Call], int]:
    """Well-formed calls and the number of malformed ones dropped."""
    calls, dropped = [], 0
    for m in _CALL.finditer(text):
        attrs = dict(_ATTR.findall(m.group(1)))
        try:
            fn = attrs["fn"]
            src, dst = int(attrs["from"]), int(attrs["to"])
        except (KeyError, ValueError):
            dropped += 1
            continue
        if fn not in motions:
            dropped += 1
            continue
        calls.append(Call(fn, src, dst))
    return calls, dropped


def fetch_guidance(scene: SceneGraph, dfa: Dfa, states: Sequence[tuple[int, int]], transport: Transport,
                   motions: Sequence[tuple[str, str]] = DEFAULT_MOTIONS, cache=None,
                   session_id: str = "") -> LlmGuidance:
    """One prompt per (context attribute, q) that still has work to do."""
    names = [m for m, _ in motions]
    plans = {}
    for attr_id, q in states:
        if q in dfa.accepting:
            plans[attr_id, q] = []
            continue
        prompt = guidance_prompt(scene, attr_id, remaining_mission(dfa, q, scene), motions)
        response = transport.send(prompt, session_id)
        calls, dropped = parse_calls(response, names)
        if dropped:
            log.warning("dropped %d malformed call(s) for attribute %s, q=%s", dropped, attr_id, q)
        bad = [c for c in calls if c.src not in scene.attributes or c.dst not in scene.attributes]
        if bad:
            log.warning("plan for attribute %s, q=%s references unknown attributes; rejected", attr_id, q)
            continue
        plans[attr_id, q] = calls
    guidance = LlmGuidance(plans)
    if cache is not None:
        guidance.save(cache)
    return guidance


def formula_file_text(phi: Formula) -> str:
    return print_prefix(phi, short_ids=True) + "\n"
