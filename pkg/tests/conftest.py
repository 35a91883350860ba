import pytest

#: (criterion number, title, passed, detail) recorded by the acceptance suite
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status} [{number}] {title}: {detail}")


@pytest.fixture
def record():
    def _record(number, title, passed, detail):
        ACCEPTANCE.append((number, title, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} [{number}] {title}: {detail}")
        assert passed, detail

    return _record
