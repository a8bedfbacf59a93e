import random

import pytest
from hypothesis import settings

from ktsharp.harness import corpus_dir, corpus_entry

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus():
    return corpus_dir()


@pytest.fixture(scope="session")
def dyck():
    return corpus_entry("dyck1.kt").obj


@pytest.fixture(scope="session")
def dyck_program():
    return corpus_entry("dyck1.crasp").obj


@pytest.fixture(scope="session")
def dyck_lm():
    return corpus_entry("dyck1.lm").obj


@pytest.fixture
def rng():
    return random.Random(1234)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for result in sorted(results, key=lambda r: r.number):
            terminalreporter.write_line(result.line())
