import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one pass/fail line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    name = item.originalname or item.name
    label = name.removeprefix("test_")
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[ACCEPTANCE] {label}: {status}")
