import numpy as np
import pytest

from adaptsim.config import RunConfig
from adaptsim.heuristics import HeuristicConfig
from adaptsim.manet import ModelConfig


def make_config(num_lps=3, mode="static", num_mh=300, steps=40, seed=7,
                profile=None, **heur):
    cfg = RunConfig(
        model=ModelConfig(num_mh=num_mh, steps=steps),
        heuristics=HeuristicConfig(mode=mode, **heur),
        num_lps=num_lps,
        seed=seed,
        profile=profile,
    )
    return cfg.validate()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def has_fast_backend():
    try:
        from adaptsim._kernels import get_backend
        get_backend("fast")
        return True
    except ImportError:
        return False


needs_fast = pytest.mark.skipif(not has_fast_backend(),
                                reason="compiled kernels not built")
