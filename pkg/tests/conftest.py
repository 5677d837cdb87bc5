import pytest

ACCEPTANCE_COUNT = 12


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(k, title): acceptance criterion k")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    k, title = mark.args
    results = item.config._acceptance
    ok = rep.passed if rep.when == "call" else not rep.failed
    details = [v for name, v in item.user_properties if name == "detail"]
    prev = results.get(k, (True, title, []))
    results[k] = (prev[0] and ok, title, details or prev[2])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, ACCEPTANCE_COUNT + 1):
        if k not in results:
            terminalreporter.write_line(f"ACCEPTANCE {k} NOT RUN")
            continue
        ok, title, details = results[k]
        line = f"ACCEPTANCE {k} {'PASS' if ok else 'FAIL'}  {title}"
        if details:
            line += f"  [{'; '.join(details)}]"
        terminalreporter.write_line(line)
