import pytest

from lmulkit import _pykernels, kernels


@pytest.fixture(params=["compiled", "python"])
def backend(request, monkeypatch):
    """Run a test against each kernel backend available."""
    if request.param == "compiled":
        if kernels.BACKEND != "cython":
            pytest.skip("compiled kernels not built")
        return kernels
    monkeypatch.setattr(kernels, "xorshift64star_fill", _pykernels.xorshift64star_fill)
    monkeypatch.setattr(kernels, "lmul_bits_batch", _pykernels.lmul_bits_batch)
    return _pykernels


_CRITERIA: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record an acceptance check; one summary line per criterion is printed at the end."""

    def record(number: int, ok: bool, detail: str):
        _CRITERIA.setdefault(number, []).append((ok, detail))
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        checks = _CRITERIA[number]
        ok = all(c[0] for c in checks)
        failed = [d for good, d in checks if not good]
        detail = "; ".join(failed) if failed else "; ".join(d for _, d in checks)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
