import os
import random

import pytest

from groundkernel.lang import parse_base

BASE_TEXT = """
(base (constants c)
  (relations (P 1) (Q 0) (R 0))
  (rules (rule (premises) (conclusion (P c)))
         (rule (premises (P x)) (conclusion Q))
         (rule (premises (P x) Q) (conclusion R)))
  (deltas (delta dPc (infer (P c)))
          (delta dQ (infer Q (infer (P c))))
          (delta dR (infer R (infer (P c)) (infer Q (infer (P c)))))))
"""


@pytest.fixture(scope="session")
def base():
    return parse_base(BASE_TEXT)


@pytest.fixture(scope="session")
def seed():
    return int(os.environ.get("GROUND_KERNEL_SEED", "20240811"))


@pytest.fixture()
def rng(seed):
    return random.Random(seed)
