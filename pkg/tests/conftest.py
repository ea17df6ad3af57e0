import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pdcfa import corpus


@pytest.fixture(scope="session")
def toy():
    return corpus.toy_program()


@pytest.fixture(scope="session")
def bench():
    return corpus.corpus_programs()


IDENTITY_SRC = "(let ((id (lambda (x) x))) (id id))"


@pytest.fixture(scope="session")
def identity():
    from pdcfa.syntax import parse_program
    return parse_program(IDENTITY_SRC)
