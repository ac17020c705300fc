import random

import pytest


@pytest.fixture
def rng():
    return random.Random(0xBEEF)


@pytest.fixture
def random_dna(rng):
    def make(n, alphabet="ACGT"):
        return "".join(rng.choice(alphabet) for _ in range(n))

    return make
