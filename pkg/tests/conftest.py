def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    rows = {}
    for status, word in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            if word == "FAIL" or name not in rows:
                rows[name] = word
    skipped = terminalreporter.stats.get("skipped", [])
    for rep in skipped:
        nodeid = getattr(rep, "nodeid", "")
        if "test_acceptance.py" in nodeid:
            rows.setdefault(nodeid.split("::")[-1], "SKIP")
    if rows:
        terminalreporter.section("acceptance criteria")
        for name in sorted(rows):
            terminalreporter.write_line(f"{rows[name]} {name}")
