from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from chronoforge.timeutil import (
    Duration,
    DurationParseError,
    TimestampParseError,
    UNIT_SECONDS,
    parse_duration,
    parse_timestamp,
    render_timestamp,
)


def test_canonical_timestamp_round_trip():
    epoch = parse_timestamp("2014-01-05T12:34:56Z")
    assert render_timestamp(epoch) == "2014-01-05T12:34:56Z"


def test_slash_date_is_midnight_utc():
    assert parse_timestamp("2014/01/05") == parse_timestamp("2014-01-05T00:00:00Z")


def test_bare_date_is_midnight_utc():
    assert parse_timestamp("2014-01-05") == parse_timestamp("2014-01-05T00:00:00Z")


def test_unparseable_timestamp():
    with pytest.raises(TimestampParseError):
        parse_timestamp("not-a-date")


def test_duration_units():
    assert parse_duration("56 days").seconds == 56 * 86400
    assert parse_duration("2 years").seconds == 2 * 365 * 86400
    assert parse_duration("3 weeks").seconds == 3 * 7 * 86400
    assert parse_duration("90 seconds").seconds == 90


def test_duration_rejects_bad_grammar():
    for text in ("56days", "days 56", "-3 days", "3 months", "3.5 days", ""):
        with pytest.raises(DurationParseError):
            parse_duration(text)


@given(
    st.integers(min_value=0, max_value=10**6),
    st.sampled_from(sorted(UNIT_SECONDS)),
)
def test_duration_round_trip(count, unit):
    text = f"{count} {unit}"
    assert parse_duration(text).render() == text


def test_duration_equality_and_truthiness():
    assert parse_duration("1 days") == Duration(86400, "1 days")
    assert not parse_duration("0 seconds")
    assert parse_duration("1 seconds")
