"""Timestamps and durations.

Timestamps are plain UTC epoch seconds (int) everywhere inside the
engine; text forms are parsed on the way in and rendered canonically
(``YYYY-MM-DDTHH:MM:SSZ``) on the way out. ``YYYY/MM/DD`` and bare
``YYYY-MM-DD`` inputs are accepted as midnight UTC.

Durations keep their original text so configured values like "56 days"
round-trip byte-identically into provenance.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timezone

from chronoforge.errors import ConfigError

CANONICAL_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

_INPUT_FORMATS = (
    "%Y-%m-%dT%H:%M:%SZ",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d",
    "%Y/%m/%d",
)

UNIT_SECONDS = {
    "seconds": 1,
    "minutes": 60,
    "hours": 3600,
    "days": 86400,
    "weeks": 7 * 86400,
    "years": 365 * 86400,  # fixed-length years, no months unit
}

_DURATION_RE = re.compile(r"^(\d+) (seconds|minutes|hours|days|weeks|years)$")


class TimestampParseError(ConfigError):
    def __init__(self, text: str) -> None:
        self.text = text
        super().__init__(f"unparseable timestamp {text!r}")


class DurationParseError(ConfigError):
    def __init__(self, text: str) -> None:
        self.text = text
        super().__init__(
            f"unparseable duration {text!r}: expected '<integer> "
            f"<seconds|minutes|hours|days|weeks|years>'"
        )


def parse_timestamp(text: str) -> int:
    """Parse a timestamp string to UTC epoch seconds."""
    if not isinstance(text, str):
        raise TimestampParseError(str(text))
    stripped = text.strip()
    for fmt in _INPUT_FORMATS:
        try:
            dt = datetime.strptime(stripped, fmt)
        except ValueError:
            continue
        return int(dt.replace(tzinfo=timezone.utc).timestamp())
    raise TimestampParseError(text)


def render_timestamp(epoch: int | float) -> str:
    """Render epoch seconds in the canonical UTC form."""
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime(CANONICAL_FORMAT)


@dataclass(frozen=True)
class Duration:
    """A signed count of seconds plus the text it was parsed from."""

    seconds: int
    text: str

    def render(self) -> str:
        return self.text

    def __bool__(self) -> bool:
        return self.seconds != 0


ZERO = Duration(0, "0 seconds")


def parse_duration(text: str) -> Duration:
    """Parse '<non-negative integer> <unit>' into a Duration.

    Rendering the result reproduces the input exactly.
    """
    if not isinstance(text, str):
        raise DurationParseError(str(text))
    m = _DURATION_RE.match(text)
    if m is None:
        raise DurationParseError(text)
    count, unit = int(m.group(1)), m.group(2)
    return Duration(count * UNIT_SECONDS[unit], text)
