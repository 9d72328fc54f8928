import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, checks: dict):
        # each check is a bool, (value, limit) meaning value < limit, or (value, limit, "<=")
        parts, failed = [], []
        for name, check in checks.items():
            if isinstance(check, bool):
                ok = check
                parts.append(f"{name}={'yes' if ok else 'no'}")
            else:
                value, limit, *op = check
                op = op[0] if op else "<"
                ok = value <= limit if op == "<=" else value < limit
                parts.append(f"{name}={value:.3e} ({op} {limit:.3g})")
            if not ok:
                failed.append(name)
        line = f"[{'FAIL' if failed else 'PASS'}] criterion {number:2d} {title}: " + "; ".join(parts)
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert not failed, f"criterion {number} failed on {failed}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
