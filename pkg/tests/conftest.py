"""Collects acceptance-criterion outcomes and prints one line per criterion."""

_ACCEPTANCE: dict[str, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    key = report.nodeid
    if report.failed or report.when == "call" or key not in _ACCEPTANCE:
        outcome = "PASS" if report.passed else "FAIL"
        if report.when != "call" and report.passed:
            return
        _ACCEPTANCE[key] = (props["criterion"], outcome, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, outcome, detail in sorted(_ACCEPTANCE.values(), key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"criterion {crit}: {outcome}  {detail}")
