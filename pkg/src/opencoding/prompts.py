"""Prompt templates for the four coding approaches.

Placeholders appear as ``#{Name}``, ``${Name}`` or ``{Name}``; only names in
a template's declared placeholder set are substituted, so literal braces in
the output-format instructions pass through untouched.

The verb-phrase template is derived from the item-level template by exactly
two edits: an "Always use verb phrases." sentence added to the system
instructions, and tags→interpretations / tag→phrase swapped inside the
output-format section.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

logger = logging.getLogger(__name__)

PLACEHOLDERS = {
    "ResearchQuestion",
    "CodingNotes",
    "Messages.length",
    "Documents",
    "Keywords",
    "Conversation",
}


class UnboundPlaceholderError(KeyError):
    def __init__(self, name: str):
        self.placeholder = name
        super().__init__(f"unbound placeholder: {name}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system_text: str
    user_text: str
    placeholders: frozenset[str]

    def __post_init__(self):
        undeclared = set(_find_placeholders(self.system_text + "\n" + self.user_text)) - set(
            self.placeholders
        )
        if undeclared:
            raise ValueError(f"template {self.name}: undeclared placeholders {sorted(undeclared)}")


def _find_placeholders(text: str) -> list[str]:
    found = []
    for m in re.finditer(r"[#$]?\{([A-Za-z][A-Za-z.]*)\}", text):
        if m.group(1) in PLACEHOLDERS:
            found.append(m.group(1))
    return found


def render_prompt(template: PromptTemplate, bindings: dict[str, str]) -> tuple[str, str]:
    """Substitute every placeholder; returns (system text, user text).

    Raises UnboundPlaceholderError when a placeholder in the template has no
    binding. Extra bindings are ignored with a warning.
    """
    needed = set(_find_placeholders(template.system_text + "\n" + template.user_text))
    extra = set(bindings) - needed
    if extra:
        logger.warning("template %s: ignoring extra bindings %s", template.name, sorted(extra))

    def substitute(text: str) -> str:
        def repl(m: re.Match) -> str:
            name = m.group(1)
            if name not in PLACEHOLDERS:
                return m.group(0)
            if name not in bindings:
                raise UnboundPlaceholderError(name)
            return bindings[name]

        return re.sub(r"[#$]?\{([A-Za-z][A-Za-z.]*)\}", repl, text)

    return substitute(template.system_text), substitute(template.user_text)


# --------------------------------------------------------------------------
# the four templates
# --------------------------------------------------------------------------

TOPIC_LABELING = PromptTemplate(
    name="topic-labeling",
    system_text=(
        "You are an expert in thematic analysis with grounded theory, working on "
        "open coding. You identified a topic from the input quotes. Each quote is "
        "independent from another. #{ResearchQuestion} #{CodingNotes}\n"
        "\n"
        "Always follow the output format:\n"
        "===\n"
        "Thought: {What is the most common theme among the input quotes? Do not "
        "over-interpret the data.}\n"
        "Label: {A single label that faithfully describes the topic}\n"
        "==="
    ),
    user_text="Quotes: {Documents}\nKeywords: {Keywords}",
    placeholders=frozenset({"ResearchQuestion", "CodingNotes", "Documents", "Keywords"}),
)

CHUNK_CODEBOOK = PromptTemplate(
    name="chunk-codebook",
    system_text=(
        "Hi ChatGPT, I want to analyze the following interaction in one of Physics "
        "Lab's online message groups. Please give me a codebook to analyze factors "
        "within this interaction that could contribute to the research. "
        "#{ResearchQuestion} #{CodingNotes}\n"
        "\n"
        "For each code, try to find 3 quotes. Always follow the output format:\n"
        "===\n"
        "## Label: A label of code 1\n"
        "Definition: A definition of code 1\n"
        '- "Example quote 1"\n'
        '- "Example quote 2"\n'
        "## ..."
    ),
    user_text="{Conversation}",
    placeholders=frozenset({"ResearchQuestion", "CodingNotes", "Conversation"}),
)

_ITEM_INSTRUCTIONS = (
    "You are an expert in thematic analysis with grounded theory, working on "
    "open coding. Your goal is to identify multiple low-level tags for each "
    "message. When writing tags, balance between specifics and generalizability "
    "across messages. ${ResearchQuestion} ${CodingNotes}"
)

_ITEM_OUTPUT_FORMAT = (
    "Always follow the output format:\n"
    "===\n"
    "Thoughts: {A paragraph of plans and guiding questions about analyzing the "
    "conversation from multiple theoretical angles}\n"
    "Tags for each message (${Messages.length} in total):\n"
    "1. tag 1; tag 2; tag 3...\n"
    "...\n"
    "${Messages.length}. tag 4; tag 5; tag 6...\n"
    "Summary: {A somehow detailed summary of the conversation, including "
    "previous ones}\n"
    "Notes: {Notes and hypotheses about the conversation until now}"
)

ITEM_TAGS = PromptTemplate(
    name="item-tags",
    system_text=_ITEM_INSTRUCTIONS + "\n\n" + _ITEM_OUTPUT_FORMAT,
    user_text="${Conversation}",
    placeholders=frozenset(
        {"ResearchQuestion", "CodingNotes", "Messages.length", "Conversation"}
    ),
)

VERB_PHRASE_SENTENCE = "Always use verb phrases."


def make_verb_phrase_template(base: PromptTemplate = ITEM_TAGS) -> PromptTemplate:
    """Apply the two documented edits to the item-level template."""
    instructions, output_format = base.system_text.split("\n\n", 1)
    instructions = instructions.replace(
        "across messages.", "across messages. " + VERB_PHRASE_SENTENCE, 1
    )
    output_format = output_format.replace("Tags", "Interpretations")
    output_format = output_format.replace("tags", "interpretations")
    output_format = output_format.replace("tag", "phrase")
    return PromptTemplate(
        name="verb-phrase-tags",
        system_text=instructions + "\n\n" + output_format,
        user_text=base.user_text,
        placeholders=base.placeholders,
    )


VERB_PHRASE_TAGS = make_verb_phrase_template()

TEMPLATES = {
    t.name: t for t in (TOPIC_LABELING, CHUNK_CODEBOOK, ITEM_TAGS, VERB_PHRASE_TAGS)
}
