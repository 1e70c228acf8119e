"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

LINES: dict[int, str] = {}


def record(number: int, name: str, ok: bool, detail: str) -> None:
    LINES[number] = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(LINES[number])


def skipped(number: int, name: str, why: str) -> None:
    LINES.setdefault(number, f"criterion {number:2d} [SKIP] {name}: {why}")
