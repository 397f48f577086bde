from typing import Generator

import numpy as np
import pytest
from sqlalchemy.engine import Engine

from thetapress.battery import doubling_system, fixed_point_system
from thetapress.database import MEMORY_URL, get_engine, reset_db
from thetapress.nds import NdsSystem


@pytest.fixture()
def new_db() -> Generator[Engine, None, None]:
    engine = reset_db(get_engine(MEMORY_URL))
    yield engine
    reset_db(engine)


@pytest.fixture()
def doubling8() -> NdsSystem:
    return doubling_system(8)


@pytest.fixture()
def weighted_doubling8() -> NdsSystem:
    return doubling_system(8, 0.5 * np.cos(2 * np.pi * np.arange(8) / 8))


@pytest.fixture()
def fixed_point() -> NdsSystem:
    return fixed_point_system(0.3)
