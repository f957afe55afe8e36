import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gmeasure import available_backends, make_builtin  # noqa: E402
from gmeasure import gfunction, measure, transfer  # noqa: E402

GUIDES = ("tm", "tent", "sqrt")
BUILTINS = ("tm", "tent", "sqrt", "half", "coshift")


@pytest.fixture(params=BUILTINS)
def builtin(request):
    return make_builtin(request.param)


@pytest.fixture(params=GUIDES)
def guide(request):
    return make_builtin(request.param)


@pytest.fixture(params=sorted(available_backends()))
def backend(request, monkeypatch):
    """Run the test once per kernel backend by swapping the module-level handle."""
    mod = available_backends()[request.param]
    for m in (gfunction, transfer, measure):
        monkeypatch.setattr(m, "kernels", mod)
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
