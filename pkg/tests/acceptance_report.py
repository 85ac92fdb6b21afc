"""Shared registry for the acceptance gate's one-line verdicts.

test_acceptance.py records a PASS or FAIL line per criterion; the conftest
terminal-summary hook replays them at the end of the run so they are visible
even when pytest captures stdout.
"""

RESULTS: list[str] = []


def record(line: str) -> None:
    RESULTS.append(line)
    print(line)
