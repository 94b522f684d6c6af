import numpy as np
import pytest

from planck2d.physics import CalibrationParams, ReceiverConfig
from planck2d.simulate import NoiseConfig, plan_sweep, simulate_dataset

# reference truth used by most simulations
REF_KAPPA = 1.15
REF_N_H = 6.83
REF_LOSS_DB = 2.79
DATASHEET_LOSS_DB = 2.18


@pytest.fixture
def cfg():
    return ReceiverConfig(f0=5.5e9, B=400e3, Z0=50.0, t_int=1.0)


@pytest.fixture
def truth():
    return CalibrationParams.from_loss_db(REF_KAPPA, REF_N_H, REF_LOSS_DB)


@pytest.fixture
def plan():
    return plan_sweep()


@pytest.fixture
def noiseless_ds(truth, plan, cfg):
    return simulate_dataset(truth, plan, cfg, NoiseConfig(mode="noiseless"))


@pytest.fixture
def noisy_ds(truth, plan, cfg):
    return simulate_dataset(truth, plan, cfg, NoiseConfig(mode="radiometer", rng_seed=11))


def with_radiometer_sigma(ds):
    """Noiseless dataset whose sigmas are set to the radiometer level."""
    cfg = ds.receiver
    for c in ds.curves:
        c.sigma_P = c.P / np.sqrt(cfg.B * cfg.t_int)
    return ds
