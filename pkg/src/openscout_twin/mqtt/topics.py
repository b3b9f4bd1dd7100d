"""Topic-name validation and wildcard filter matching.

Filters follow the standard rules: ``+`` matches exactly one level,
``#`` matches any remaining suffix (including zero levels) and may only
appear as the final level.  Topics beginning with ``$`` get no special
treatment here.
"""

from __future__ import annotations

from dataclasses import dataclass


class InvalidFilterError(ValueError):
    """The string is not a legal topic filter."""


class InvalidTopicError(ValueError):
    """The string is not a legal topic name."""


@dataclass(frozen=True)
class TopicFilter:
    segments: tuple[str, ...]

    def __str__(self) -> str:
        return "/".join(self.segments)


def validate_filter(s: str) -> TopicFilter:
    """Parse ``s`` into a :class:`TopicFilter`, raising on any rule violation."""
    if not s:
        raise InvalidFilterError("filter must not be empty")
    if "\x00" in s:
        raise InvalidFilterError("filter contains U+0000")
    segments = s.split("/")
    last = len(segments) - 1
    for i, segment in enumerate(segments):
        if segment == "#":
            if i != last:
                raise InvalidFilterError(f"'#' must be the final level in {s!r}")
        elif "#" in segment:
            raise InvalidFilterError(f"'#' must occupy a whole level in {s!r}")
        elif segment != "+" and "+" in segment:
            raise InvalidFilterError(f"'+' must occupy a whole level in {s!r}")
    return TopicFilter(tuple(segments))


def validate_topic(name: str) -> None:
    """Check a publish topic name: non-empty, no wildcards, no U+0000."""
    if not name:
        raise InvalidTopicError("topic name must not be empty")
    if "+" in name or "#" in name:
        raise InvalidTopicError(f"topic name {name!r} contains wildcard characters")
    if "\x00" in name:
        raise InvalidTopicError("topic name contains U+0000")


def topic_matches(topic_filter: TopicFilter, topic: str) -> bool:
    """True iff ``topic`` matches ``topic_filter`` segment-wise."""
    levels = topic.split("/")
    segments = topic_filter.segments
    for i, segment in enumerate(segments):
        if segment == "#":
            return True
        if i >= len(levels):
            return False
        if segment != "+" and segment != levels[i]:
            return False
    return len(levels) == len(segments)
