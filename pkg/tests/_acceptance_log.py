"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
LINES = []


def record(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    return ok
