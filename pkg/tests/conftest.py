def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERIA, RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        if num in RESULTS:
            ok, detail = RESULTS[num]
            terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}: {CRITERIA[num]} ({detail})")
