import sys


def pytest_terminal_summary(terminalreporter):
    mod = next((m for n, m in sys.modules.items() if n.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in results:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
