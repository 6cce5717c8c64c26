import pytest

from model_server import ModelEngine, load_config


@pytest.fixture(scope="session")
def engine() -> ModelEngine:
    """One shared tiny engine; tests that train reset from initial weights."""
    return ModelEngine(load_config("tiny"))


@pytest.fixture()
def pairs() -> list[tuple[str, str]]:
    return [
        (f"article {i} covers item {i % 3} in depth and detail", f"item {i % 3}")
        for i in range(10)
    ]
