"""Lines collected by the acceptance tests and printed in the terminal summary."""

LINES: list[str] = []
