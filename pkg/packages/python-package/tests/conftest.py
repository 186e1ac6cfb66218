from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _check_eigensolver(monkeypatch: pytest.MonkeyPatch) -> None:
    """Verify the eigensolver residual contract on every call made by a test."""

    monkeypatch.setenv("TORUS_LAB_CHECK_EIG", "1")


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
