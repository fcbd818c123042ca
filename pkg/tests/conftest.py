def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance-criterion verdict lines after the test summary."""
    try:
        from acceptance_report import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
