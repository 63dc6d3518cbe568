import pytest

from isopart import constructions as C

# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def standard_partitions():
    return {
        "lens": C.make_lens(1.0),
        "peanut_equal": C.make_peanut(1.0, 1.0),
        "peanut_unequal": C.make_peanut(1.0, 2.0),
        "reuleaux": C.make_reuleaux(1.0),
        "double_bubble_equal": C.make_double_bubble(1.0, 1.0),
        "double_bubble_unequal": C.make_double_bubble(1.0, 2.0),
        "halfplane": C.make_cone("halfplane"),
        "triple_junction": C.make_cone("triple_junction"),
    }


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
