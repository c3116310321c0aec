RESULTS = []


def record(criterion: str, ok: bool, detail: str) -> None:
    RESULTS.append((criterion, ok, detail))
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} — {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in RESULTS:
        terminalreporter.write_line(
            f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} — {detail}"
        )
