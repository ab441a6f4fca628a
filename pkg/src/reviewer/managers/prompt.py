# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""The checklist prompt.

The review prompt wraps the code of one changed file with an eight-category defect
checklist. The checklist text ships as ``templates/checklist.txt`` and can be replaced
through configuration; the default text is pinned by the test-suite.
"""

import logging
import os

from jinja2 import Environment, FileSystemLoader

from reviewer.core.models import ChecklistCategory, ChecklistItem, ReviewRequest
from reviewer.literals import DEFAULT_MAX_PAYLOAD_CHARS, MIN_PAYLOAD_CHARS, EmptyPayloadError

logger = logging.getLogger(__name__)

TEMPLATES_DIR = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "templates"
)
CHECKLIST_FILE = "checklist.txt"
PROMPT_TEMPLATE = "review_prompt.j2"
CHECKLIST_INTRO = "Use the following checklist to guide your analysis:"
NUMBERED_LIST_INSTRUCTION = "Provide your feedback in a numbered list for each category."


def _category(index: int, title: str, *items: tuple[str, str]) -> ChecklistCategory:
    return ChecklistCategory(
        index=index,
        title=title,
        items=[
            ChecklistItem(letter=chr(ord("a") + i), name=name, instruction=instruction)
            for i, (name, instruction) in enumerate(items)
        ],
    )


CHECKLIST = [
    _category(
        1,
        "Documentation Defects",
        ("Naming", "Assess the quality of software element names."),
        ("Comment", "Analyse the quality and accuracy of code comments."),
    ),
    _category(
        2,
        "Visual Representation Defects",
        ("Bracket Usage", "Identify any issues with incorrect or missing brackets."),
        ("Indentation", "Check for incorrect indentation that affects readability."),
        ("Long Line", "Point out any long code statements that hinder readability."),
    ),
    _category(
        3,
        "Structure Defects",
        ("Dead Code", "Find any code statements that serve no meaningful purpose."),
        ("Duplication", "Identify duplicate code statements that can be refactored."),
    ),
    _category(
        4,
        "New Functionality",
        (
            "Use Standard Method",
            "Determine if a standardised approach should be used for single-purpose code statements.",
        ),
    ),
    _category(
        5,
        "Resource Defects",
        (
            "Variable Initialisation",
            "Identify variables that are uninitialised or incorrectly initialised.",
        ),
        ("Memory Management", "Evaluate the program's memory usage and management."),
    ),
    _category(
        6,
        "Check Defects",
        ("Check User Input", "Analyse the validity of user input and its handling."),
    ),
    _category(
        7,
        "Interface Defects",
        (
            "Parameter",
            "Detect incorrect or missing parameters when calling functions or libraries.",
        ),
    ),
    _category(
        8,
        "Logic Defects",
        ("Compute", "Identify incorrect logic during system execution."),
        ("Performance", "Evaluate the efficiency of the algorithm used."),
    ),
]


def render_checklist(categories: list[ChecklistCategory]) -> str:
    """Render the categories in the layout of the canonical checklist file."""
    lines = [CHECKLIST_INTRO]
    for category in categories:
        lines.append(f"{category.index}. {category.title}:")
        lines.extend(
            f"   {item.letter}. {item.name}: {item.instruction}" for item in category.items
        )
    return "\n".join(lines)


def chunk_payload(file_content: str, max_payload_chars: int) -> list[str]:
    """Split the content at line boundaries into chunks of at most max_payload_chars.

    Lines longer than the limit are cut. Joining the chunks gives back the input.
    """
    if max_payload_chars < MIN_PAYLOAD_CHARS:
        raise ValueError(f"max_payload_chars must be at least {MIN_PAYLOAD_CHARS}")

    chunks = []
    current = ""
    for line in file_content.splitlines(keepends=True):
        while len(line) > max_payload_chars:
            if current:
                chunks.append(current)
                current = ""
            chunks.append(line[:max_payload_chars])
            line = line[max_payload_chars:]
        if len(current) + len(line) > max_payload_chars:
            chunks.append(current)
            current = ""
        current += line
    if current:
        chunks.append(current)
    return chunks


class PromptBuilder:
    """Renders review prompts from the checklist template."""

    def __init__(
        self,
        checklist_path: str | None = None,
        max_payload_chars: int = DEFAULT_MAX_PAYLOAD_CHARS,
    ):
        self.max_payload_chars = max_payload_chars
        self.checklist_path = checklist_path or os.path.join(TEMPLATES_DIR, CHECKLIST_FILE)
        with open(self.checklist_path, "r", encoding="utf-8", newline="") as f:
            self.checklist = f.read()
        self._template = Environment(
            loader=FileSystemLoader(TEMPLATES_DIR), autoescape=False
        ).get_template(PROMPT_TEMPLATE)

    def build_prompt(
        self, file_path: str, code_payload: str, part: int = 1, parts: int = 1
    ) -> ReviewRequest:
        """Render the prompt for one payload.

        Raises:
            EmptyPayloadError: if there is no code to review.
        """
        if not code_payload or (parts == 1 and not code_payload.strip()):
            raise EmptyPayloadError(f"nothing to review in {file_path}")
        prompt_text = self._template.render(
            file_path=file_path,
            code_payload=code_payload,
            checklist=self.checklist,
            part=part,
            parts=parts,
        )
        return ReviewRequest(
            file_path=file_path,
            code_payload=code_payload,
            prompt_text=prompt_text,
            part=part,
            parts=parts,
        )

    def build_prompts(self, file_path: str, file_content: str) -> list[ReviewRequest]:
        """Chunk a file and render one prompt per chunk."""
        chunks = chunk_payload(file_content, self.max_payload_chars)
        if not chunks:
            raise EmptyPayloadError(f"nothing to review in {file_path}")
        logger.debug(f"{file_path}: {len(file_content)} chars in {len(chunks)} prompt(s)")
        return [
            self.build_prompt(file_path, chunk, part=i, parts=len(chunks))
            for i, chunk in enumerate(chunks, start=1)
        ]


def build_prompt(file_path: str, code_payload: str) -> ReviewRequest:
    """Render the prompt with the shipped checklist."""
    return PromptBuilder().build_prompt(file_path, code_payload)
