import numpy as np
import pytest

from nsminimax import LipschitzFunctional, SplitSpace

ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def _abs_grad(x):
    return None if x[0] == 0 else np.sign(x)


def suite():
    """Test functionals: name -> LipschitzFunctional (finite-difference gradients)."""
    return {
        "abs": LipschitzFunctional(lambda x: abs(x[0]), 1, smooth=False, name="abs"),
        "square": LipschitzFunctional(lambda x: x[0] ** 2, 1, name="square"),
        "abs_plus_square": LipschitzFunctional(lambda x: abs(x[0]) + x[1] ** 2, 2, smooth=False,
                                               name="abs_plus_square"),
        "piecewise_quadratic": LipschitzFunctional(lambda x: max(x[0] ** 2, 1 - (x[0] - 1) ** 2), 1,
                                                   smooth=False, name="piecewise_quadratic"),
    }


@pytest.fixture
def test_suite():
    return suite()


@pytest.fixture
def plane():
    return SplitSpace.coordinate(1, 1)
