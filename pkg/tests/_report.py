"""Shared sink for the acceptance gate's per-criterion result lines."""

lines = []


def record(line):
    lines.append(line)
