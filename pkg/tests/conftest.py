def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            label = dict(rep.user_properties).get("criterion")
            if label:
                lines.append((rep.nodeid, f"{'PASS' if outcome == 'passed' else 'FAIL'}  {label}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
