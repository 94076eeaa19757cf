"""LLM-backed plot extraction from book chunks and profile aggregation.

Chunks within one book form a chain: plots truncated at a chunk boundary are
carried into the next chunk's prompt and must be extended there. Distinct
books can be processed in parallel.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Optional, Sequence

from ..errors import ExtractionError, ProfileError, UnbalancedDelimiter
from ..gateway import Backend, ChatRequest, DEFAULT_MANAGER_TEMPERATURE
from ..jsontools import first_json_object
from ..message import parse_message
from ..model import RoleProfile, canonicalize_role_name
from .chunking import Chunk

log = logging.getLogger(__name__)

SCHEMA_RETRIES = 2

PLOT_STATES = ("finished", "truncated")


@dataclass(frozen=True)
class PlotCharacter:
    name: str
    description: str = ""
    experience: str = ""


@dataclass(frozen=True)
class ConversationCharacter:
    name: str
    motivation: str = ""


@dataclass(frozen=True)
class DialogueLine:
    character: str
    message: str


@dataclass(frozen=True)
class PlotConversation:
    scenario: str
    topic: str
    key_characters: tuple[ConversationCharacter, ...]
    dialogues: tuple[DialogueLine, ...]


@dataclass(frozen=True)
class ExtractedPlot:
    """One coherent narrative unit extracted from a chunk."""

    chapter_title: str
    first_sentence: str
    last_sentence: str
    prominence: str
    summary: str
    key_characters: tuple[PlotCharacter, ...]
    conversations: tuple[PlotConversation, ...]
    state: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.state not in PLOT_STATES:
            raise ValueError(f"plot state must be one of {PLOT_STATES}, got {self.state!r}")


def plot_to_dict(plot: ExtractedPlot) -> dict[str, Any]:
    return {
        "chapter_title": plot.chapter_title,
        "first_sentence": plot.first_sentence,
        "last_sentence": plot.last_sentence,
        "prominence": plot.prominence,
        "summary": plot.summary,
        "key_characters": [
            {"name": c.name, "description": c.description, "experience": c.experience}
            for c in plot.key_characters
        ],
        "conversation": [
            {
                "scenario": conv.scenario,
                "topic": conv.topic,
                "key_characters": [
                    {"name": c.name, "motivation": c.motivation} for c in conv.key_characters
                ],
                "dialogues": [
                    {"character": d.character, "message": d.message} for d in conv.dialogues
                ],
            }
            for conv in plot.conversations
        ],
        "state": plot.state,
    }


def plot_from_dict(data: Mapping[str, Any]) -> ExtractedPlot:
    conversations = []
    for conv in data.get("conversation", data.get("conversations", [])):
        conversations.append(
            PlotConversation(
                scenario=str(conv.get("scenario", "")),
                topic=str(conv.get("topic", "")),
                key_characters=tuple(
                    ConversationCharacter(str(c["name"]), str(c.get("motivation", "")))
                    for c in conv.get("key_characters", [])
                ),
                dialogues=tuple(
                    DialogueLine(str(d["character"]), str(d["message"]))
                    for d in conv.get("dialogues", [])
                ),
            )
        )
    return ExtractedPlot(
        chapter_title=str(data.get("chapter_title", "")),
        first_sentence=str(data["first_sentence"]),
        last_sentence=str(data["last_sentence"]),
        prominence=str(data.get("prominence", "")),
        summary=str(data.get("summary", "")),
        key_characters=tuple(
            PlotCharacter(
                str(c["name"]), str(c.get("description", "")), str(c.get("experience", ""))
            )
            for c in data.get("key_characters", [])
        ),
        conversations=tuple(conversations),
        state=str(data["state"]),
    )


_EXTRACTION_TASK = """Based on the provided book chunk, complete the following tasks:
1. Recognize chapter beginnings if they exist in the chunk. Prefer chapter titles or explicit section headers as the beginning; if no clear title exists, use the first meaningful fragment.
2. Identify the important plots in this chunk. Identify the beginning and ending sentence of each plot. Set "state" as "truncated" if the plot is truncated in this chunk, otherwise "finished". You will be provided with the truncated plots from the previous chunk, and you **must** extend the conversations of those plots with the content of this chunk.
3. Summarize each important plot. For each plot, generate its summary, score its prominence, and list the key characters with their roles in the plot and their experiences.
4. Extract conversations for each plot.
    First, state the **scenario** (the static context *before* the conversation starts). **Do NOT** include dynamic events that happen *during* the conversation.
    Then, list the key characters with their names and motivations.
    Finally, extract the conversations among them based on the following requirements:
    i) Ensure the conversations are faithful to the plot and characters.
    ii) The conversations should be complete, covering the key dialogues of the plot.
    iii) [CRITICAL] Message Structure & Definitions:
        Each "message" must be a single string mixing the following elements. **Strictly distinguish between Action and Environment**:
        - **Thoughts []**: Internal thoughts NOT visible to others.
            *   **PERSPECTIVE**: **MUST be written in the First-Person Perspective ("I", "me", "my")**.
            *   **CONTENT**: Interpret the subtext as a specific, detailed inner monologue.
        - **Speech**: The spoken words (no double quotes needed).
        - **Actions ()**: **ANYTHING** stemming from the character.
            *   **RICHNESS REQUIREMENT**: **Do NOT simplify actions into 1-2 words**. You **MUST** preserve the narrative detail (e.g., `(flings himself onto the divan...)`).
        - **Environmental Info <>**: **ONLY** external, non-character events or sensory details. **CRITICAL FOR IMMERSION**.
            *   **Requirement**: Actively extract descriptions of the setting, light, sound found in the narrative surrounding the dialogue.
            *   **Content**: Weather, background noises, changes in lighting, or atmospheric moods.
        iv) [CRITICAL] Source Fidelity & Immersion Strategy:
            - **Narrative Distribution**: If the text contains descriptive paragraphs between lines of dialogue, **you must incorporate these details** into the adjacent "Action" or "Environment" tags. Do not ignore them.
            - **Richness**: Avoid dry logs. If the text says "The bees were buzzing...", include `<Bees buzz...>`.
5. Identify the optimal starting point for the subsequent chunk. If the last storyline has been extracted as a truncated plot, choose a sentence near the end that restarts cleanly."""

_EXTRACTION_FORMAT = """===Output Format===
Please provide the output in the following JSON format:
{
    "chapter_beginnings": [
        {
            "beginning_sentence": "..."
        }
    ],
    "plots": [
        {
            "chapter_title": "...",
            "first_sentence": "...",
            "last_sentence": "...",
            "prominence": "...",
            "summary": "...",
            "key_characters": [
                {
                    "name": "...",
                    "description": "...",
                    "experience": "..."
                }
            ],
            "conversation": [{
                "scenario": "...",
                "topic": "...",
                "key_characters": [
                    {
                        "name": "...",
                        "motivation": "..."
                    }
                ],
                "dialogues": [
                    {
                        "character": "...",
                        "message": "..."
                    }
                ]
            }],
            "state": "finished" or "truncated"
        }
    ],
    "next_chunk_start": "..."
}
===Requirements===
1. Adhere strictly to the specified output JSON format.
2. [IMPORTANT] Ensure all DOUBLE QUOTES within all STRINGS are properly ESCAPED, especially when extracting from the text.
3. In the OUTPUT, use characters' full names, omitting any titles.
4. Maintain Story Fidelity: The plot must accurately reflect the book's content. Avoid introducing plots that are out of context. If the plot contains multiple conversations, prioritize the original dialogue from the book. In the absence of explicit conversations, create dialogue that aligns closely with the plot details.
5. [CRITICAL] For "chapter_beginnings.beginning_sentence" and "next_chunk_start", you MUST copy the sentence **verbatim from the given chunk**, without adding, deleting, or modifying any characters (no paraphrasing, no added quotes, no extra spaces)."""


def build_extraction_prompt(
    book_title: str,
    author: str,
    chunk_text: str,
    truncated_plots: Sequence[ExtractedPlot] = (),
) -> str:
    carried = (
        json.dumps([plot_to_dict(p) for p in truncated_plots], ensure_ascii=False, indent=2)
        if truncated_plots
        else "None"
    )
    return (
        f"{_EXTRACTION_TASK}\n"
        f"{_EXTRACTION_FORMAT}\n"
        "===Input===\n"
        "==Book title==\n"
        f"{book_title}\n"
        "==Author==\n"
        f"{author}\n"
        "==Chunk of Book Content==\n"
        f"{chunk_text}\n"
        "==Truncated plot from previous chunk (to be finished)==\n"
        f"{carried}"
    )


@dataclass(frozen=True)
class ExtractionResult:
    finished: tuple[ExtractedPlot, ...]
    truncated: tuple[ExtractedPlot, ...]
    next_chunk_start: str
    warnings: tuple[str, ...] = ()

    @property
    def plots(self) -> tuple[ExtractedPlot, ...]:
        return self.finished + self.truncated


def _advisory_warnings(plot: ExtractedPlot, chunk_text: str) -> tuple[str, ...]:
    warnings: list[str] = []
    if plot.first_sentence and plot.first_sentence not in chunk_text:
        warnings.append("first_sentence not found verbatim in chunk")
    if plot.last_sentence and plot.last_sentence not in chunk_text:
        warnings.append("last_sentence not found verbatim in chunk")
    for conv in plot.conversations:
        for line in conv.dialogues:
            try:
                parse_message(line.message)
            except UnbalancedDelimiter as exc:
                warnings.append(f"dialogue by {line.character!r} does not parse: {exc}")
    return tuple(warnings)


def extract_chunk(
    chunk: Chunk,
    carried_truncated: Sequence[ExtractedPlot],
    backend: Backend,
    *,
    book_title: str = "",
    author: str = "",
    retries: int = SCHEMA_RETRIES,
) -> ExtractionResult:
    """Run the extraction prompt over one chunk and schema-check the payload.

    Verbatim-anchor failures (first/last sentence, next_chunk_start) are kept
    as warnings, not errors; persistent schema failures raise ExtractionError.
    """
    prompt = build_extraction_prompt(book_title, author, chunk.text, carried_truncated)
    request = ChatRequest(system=prompt, temperature=DEFAULT_MANAGER_TEMPERATURE)
    last_cause = "no attempt"
    for _ in range(retries + 1):
        raw = backend.complete(request)
        payload = first_json_object(raw, require_key="plots")
        if payload is None:
            last_cause = "no plots object in output"
            continue
        try:
            plots = [plot_from_dict(p) for p in payload["plots"]]
            next_start = str(payload.get("next_chunk_start", ""))
        except (KeyError, TypeError, ValueError) as exc:
            last_cause = f"schema mismatch: {exc}"
            continue
        warnings: list[str] = []
        checked: list[ExtractedPlot] = []
        for plot in plots:
            plot_warnings = _advisory_warnings(plot, chunk.text)
            checked.append(replace(plot, warnings=plot.warnings + plot_warnings))
        if next_start and next_start not in chunk.text:
            warnings.append("next_chunk_start not found verbatim in chunk")
        return ExtractionResult(
            finished=tuple(p for p in checked if p.state == "finished"),
            truncated=tuple(p for p in checked if p.state == "truncated"),
            next_chunk_start=next_start,
            warnings=tuple(warnings),
        )
    raise ExtractionError(f"chunk {chunk.book_id}#{chunk.index}: {last_cause}")


def extract_book(
    chunks: Sequence[Chunk],
    backend: Backend,
    *,
    book_title: str = "",
    author: str = "",
) -> list[ExtractedPlot]:
    """Chain extract_chunk over a book, carrying truncated plots forward."""
    finished: list[ExtractedPlot] = []
    carried: tuple[ExtractedPlot, ...] = ()
    for chunk in chunks:
        result = extract_chunk(
            chunk, carried, backend, book_title=book_title, author=author
        )
        finished.extend(result.finished)
        carried = result.truncated
    finished.extend(carried)  # end of book: whatever is still open is kept
    return finished


_PROFILE_PROMPT_HEAD = """Please generate a structured character profile for {character_name} from "{book_title}" in JSON format.

**IMPORTANT CONSTRAINT**: If this character is not a major character, you must avoid hallucination at all costs. Even if some fields remain empty strings, do not fabricate or infer any information that is not clearly supported by the available evidence.

You will be provided with summaries and dialogues of some key plots in the book as reference:
{character_data}

The profile must be output as a valid JSON object with the following fields (all fields should be in English):

1. **name**: The character's name.
2. **short_description**: A concise, condensed summary of the character.
3. **identity_appearance**: Name, age, gender, occupation, and key physical traits (Requirement: 1-several complete natural-language sentences with both density and vivid imagery).
4. **personality_psychology**: Personality traits, behavioral style, emotional reaction patterns (Requirement: Highlight traits that show up in dialogue).
5. **speaking_style**: Rhythm, tone, and lexical habits (Requirement: Provide 2-4 specific, actionable descriptions).
6. **abilities_interests_achievements**: Hard/soft skills, hobbies, representative accomplishments (Requirement: These should matter in the plot).
7. **social_historical_context**: Social environment, era, family, cultural or class positioning (Requirement: Emphasize factors relevant to this character's story).
8. **personal_history_arc**: Important past experiences and the current stage of the character's development.
9. **relationships**: Natural-language description of relations with other characters.

Output format example:
{
  "name": "Character Name",
  "short_description": "...",
  "identity_appearance": "...",
  "personality_psychology": "...",
  "speaking_style": "...",
  "abilities_interests_achievements": "...",
  "social_historical_context": "...",
  "personal_history_arc": "...",
  "relationships": "..."
}

Output only a valid JSON object, with no additional text before or after the JSON."""


@dataclass
class CharacterEvidence:
    """Everything observed about one character across a book's plots."""

    name: str
    plot_summaries: list[str] = field(default_factory=list)
    experiences: list[str] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)

    def render(self) -> str:
        sections: list[str] = []
        for summary in self.plot_summaries:
            sections.append(f"Plot summary: {summary}")
        for experience in self.experiences:
            if experience:
                sections.append(f"Experience: {experience}")
        if self.messages:
            sections.append("Messages:\n" + "\n".join(f"- {m}" for m in self.messages))
        return "\n".join(sections)


def collect_character_evidence(plots: Iterable[ExtractedPlot]) -> dict[str, CharacterEvidence]:
    evidence: dict[str, CharacterEvidence] = {}

    def of(name: str) -> CharacterEvidence:
        return evidence.setdefault(name, CharacterEvidence(name=name))

    for plot in plots:
        seen_in_plot: set[str] = set()
        for kc in plot.key_characters:
            of(kc.name).experiences.append(kc.experience)
            seen_in_plot.add(kc.name)
        for conv in plot.conversations:
            for line in conv.dialogues:
                of(line.character).messages.append(line.message)
                seen_in_plot.add(line.character)
        for name in seen_in_plot:
            of(name).plot_summaries.append(plot.summary)
    return evidence


def build_profile_prompt(character: str, book_title: str, data: str) -> str:
    return (
        _PROFILE_PROMPT_HEAD.replace("{character_name}", character)
        .replace("{book_title}", book_title)
        .replace("{character_data}", data)
    )


_PROFILE_FIELDS = (
    "identity_appearance",
    "personality_psychology",
    "speaking_style",
    "abilities_interests_achievements",
    "social_historical_context",
    "personal_history_arc",
    "relationships",
)


def build_profiles(
    plots: Sequence[ExtractedPlot],
    backend: Backend,
    *,
    book_title: str = "",
    retries: int = SCHEMA_RETRIES,
) -> list[RoleProfile]:
    """Aggregate per-character evidence and synthesize one profile each.

    Empty profile fields are accepted; characters whose payload never parses
    raise ProfileError.
    """
    evidence = collect_character_evidence(plots)
    profiles: list[RoleProfile] = []
    for name in sorted(evidence):
        prompt = build_profile_prompt(name, book_title, evidence[name].render())
        request = ChatRequest(system=prompt, temperature=DEFAULT_MANAGER_TEMPERATURE)
        payload: Optional[dict[str, Any]] = None
        for _ in range(retries + 1):
            raw = backend.complete(request)
            payload = first_json_object(raw, require_key="name")
            if payload is not None:
                break
        if payload is None:
            raise ProfileError(name, "no profile object in output")
        try:
            canonical, _ = canonicalize_role_name(str(payload.get("name") or name))
            profiles.append(
                RoleProfile(
                    name=canonical,
                    short_description=str(payload.get("short_description", "")),
                    **{f: str(payload.get(f, "")) for f in _PROFILE_FIELDS},
                )
            )
        except (TypeError, ValueError) as exc:
            raise ProfileError(name, str(exc))
    return profiles
