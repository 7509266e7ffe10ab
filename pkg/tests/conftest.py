import os
import sys

import pytest
import torch

sys.path.insert(0, os.path.dirname(__file__))

from stylefield.config import RunConfig
from stylefield.encoder import PerceptualEncoder


def pytest_configure(config):
    # single-threaded kernels: bit-reproducible across processes (multithreaded
    # CPU reductions vary with allocation alignment run to run)
    torch.set_num_threads(1)
    torch.manual_seed(0)


@pytest.fixture
def tiny_cfg():
    """Small everything: fast unit-test configuration."""
    return RunConfig(seed=3, grid_resolution=12, grid_rank=2, basic_channels=12,
                     samples_per_ray=12, encoder_channels=(4, 6, 8),
                     dsi_spatial_depth=1, mlcd_stage_convs=1,
                     stage0_iters=0, stage1_iters=0, stage2_iters=0)


@pytest.fixture
def tiny_encoder():
    return PerceptualEncoder.tiny_random((4, 6, 8), seed=11)
