import numpy as np
import pytest

from myodecode import simdev
from myodecode.decoder import (
    GbdtParams,
    apply_normalizer,
    assemble,
    fit_normalizer,
    train_gbdt,
)
from myodecode.kinematics import GuideTiming, default_catalog

MOVEMENTS = ["thumb", "index", "grasp"]


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def sim_model():
    return simdev.one_hot_model(MOVEMENTS, snr=6.0, seed=11)


@pytest.fixture(scope="session")
def short_recording(sim_model):
    """12 s per movement: quick, and the last 20% spans both label classes."""
    return simdev.scripted_session(sim_model, MOVEMENTS, GuideTiming(), duration_s=12.0)


@pytest.fixture(scope="session")
def small_trained(short_recording):
    """Dataset + normalizer + 80-round model: cheap but already separable."""
    ds = assemble(short_recording, short_recording.catalog())
    norm = fit_normalizer(ds)
    Xn = apply_normalizer(norm, ds.X)
    model = train_gbdt(Xn[ds.train_idx], ds.y[ds.train_idx], ds.n_classes,
                       GbdtParams(n_rounds=80))
    model.class_names = ds.class_names
    return ds, norm, Xn, model


def random_frame(rng: np.random.Generator, seq: int = 0, t_us: int | None = None):
    from myodecode.proto import EmgFrame

    samples = rng.integers(-32768, 32767, size=(32, 18), dtype=np.int16)
    return EmgFrame(seq=seq, t_us=t_us if t_us is not None else seq * 9000,
                    samples=samples)
