import pytest


@pytest.fixture
def report(capsys, request):
    """Print one PASS/FAIL line outside pytest's capture, then assert."""

    def _report(name: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n[acceptance] {name}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip())
        assert ok, f"{name}: {detail}"

    return _report
