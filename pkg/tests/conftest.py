from __future__ import annotations

import pytest

from vizplan import datagen
from vizplan.costmodel import DEFAULT_CALIBRATION, measure_base_calibration
from vizplan.deployment import default_deployment
from vizplan.relation import dataset_stats


@pytest.fixture(scope="session")
def congress_env():
    db, spec = datagen.gen_congress(7)
    return db, spec, dataset_stats(db)


@pytest.fixture(scope="session")
def filter_env():
    db, spec = datagen.gen_filter(11)
    return db, spec, dataset_stats(db)


@pytest.fixture(scope="session")
def cube_env():
    db, spec = datagen.gen_cube(13)
    return db, spec, dataset_stats(db)


@pytest.fixture(scope="session")
def join_env():
    db, spec = datagen.gen_join(17, max_fanout=1)
    return db, spec, dataset_stats(db)


@pytest.fixture(scope="session")
def dm():
    return default_deployment()


@pytest.fixture(scope="session")
def base_cal():
    return DEFAULT_CALIBRATION


@pytest.fixture(scope="session")
def measured_cal():
    # one measured calibration shared by the wall-clock comparison tests
    return measure_base_calibration(runs=3)
