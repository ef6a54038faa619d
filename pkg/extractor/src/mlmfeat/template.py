"""Cloze templates: a pattern with one mask slot and one input slot."""

from __future__ import annotations

from dataclasses import dataclass

MASK_PLACEHOLDER = "[MASK]"
INPUT_PLACEHOLDER = "[input]"


@dataclass(frozen=True)
class Template:
    """A cloze pattern, e.g. "It was [MASK] . [input]".

    The pattern must contain the mask placeholder and the input placeholder
    exactly once each.
    """

    pattern: str

    def __post_init__(self) -> None:
        for placeholder in (MASK_PLACEHOLDER, INPUT_PLACEHOLDER):
            count = self.pattern.count(placeholder)
            if count != 1:
                raise ValueError(
                    f"template must contain {placeholder} exactly once, found {count}"
                )


def templify(text: str, template: Template, mask_token: str = MASK_PLACEHOLDER) -> str:
    """Substitute text and the model's mask syntax into the template.

    The input text is inserted verbatim: placeholder-like substrings inside
    it are never re-expanded, and the mask substitution only touches the
    pattern itself.
    """
    before, after = template.pattern.split(INPUT_PLACEHOLDER)
    return (
        before.replace(MASK_PLACEHOLDER, mask_token)
        + text
        + after.replace(MASK_PLACEHOLDER, mask_token)
    )
