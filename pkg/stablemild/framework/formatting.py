import re
from typing import List, Optional

GREEDY_WHITESPACE_RE = re.compile("[ ]+")

# Formatting guides
_FIRST_COLUMN_LEN = 30
_SECOND_COLUMN_LEN = 56

# 32 - 4 (spacing) - 2 (leading space)
_MAX_FIRST_COLUMN_LEN = 26
_MAX_LINE_LEN = 88
_MAX_SECOND_COLUMN_LINES = 4


def _sanitize(input_value: str) -> str:
    return str(input_value).strip().replace("\n", " ")


def _sanitize_split(input_value: str) -> List[str]:
    return [word for word in GREEDY_WHITESPACE_RE.split(_sanitize(input_value)) if word]


def format_one_column_output(first: str) -> str:
    lines: List[str] = []

    buf = ""
    for word in _sanitize_split(first):
        if len(buf) + len(word) > _MAX_LINE_LEN:
            lines.append(buf)
            buf = word
        else:
            buf = word if len(buf) == 0 else "{} {}".format(buf, word)

    if len(buf) > 0:
        lines.append(buf)

    return "\n".join(lines)


def format_two_column_output(first: str, second: Optional[str]) -> str:
    first_output = "  {}".format(_sanitize(first))
    if len(first_output) > _MAX_FIRST_COLUMN_LEN:
        first_output = "  {}...".format(_sanitize(first)[: _MAX_FIRST_COLUMN_LEN - 3])

    padding = " " * _FIRST_COLUMN_LEN
    second_lines: List[str] = []
    if second is not None:
        buf = ""
        for word in _sanitize_split(second):
            if len(buf) + len(word) > _SECOND_COLUMN_LEN:
                second_lines.append(buf)
                buf = word

                # Truncate overly long help
                if len(second_lines) + 1 >= _MAX_SECOND_COLUMN_LINES:
                    buf = "{}...".format(buf)
                    break
            else:
                buf = word if len(buf) == 0 else "{} {}".format(buf, word)

        if len(buf) > 0:
            second_lines.append(buf)

    output = first_output + " " * max(1, _FIRST_COLUMN_LEN - len(first_output))
    output += "\n{}".format(padding).join(second_lines)
    return output + ("\n" if len(second_lines) > 1 else "")


def format_summary(passed: bool, name: str, detail: str) -> str:
    """One line per study: PASS name (detail)."""
    return "{} {} ({})".format("PASS" if passed else "FAIL", name, detail)
