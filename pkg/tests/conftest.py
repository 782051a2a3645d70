import numpy as np
import pytest

from src.core.kernels import KernelKind, kernel_constants
from src.core.lpr import RegressionSample
from src.simulation.designs import design_truth, get_design, sample_design


@pytest.fixture
def triangular():
    return kernel_constants(KernelKind.TRIANGULAR)


@pytest.fixture(params=[1, 2, 3, 4], ids=lambda d: f"design{d}")
def any_design(request):
    return get_design(request.param)


@pytest.fixture
def truth():
    """Population quantities by design id"""
    def _truth(design_id, kernel=KernelKind.TRIANGULAR):
        return design_truth(get_design(design_id), kernel)
    return _truth


@pytest.fixture
def design1_sample():
    return sample_design(get_design(1), 2000, seed=11)


@pytest.fixture
def step_sample():
    """Noise-free linear trend with a jump of 2 at zero"""
    x = np.linspace(-1.0, 1.0, 401)
    y = 0.5 * x + 2.0 * (x >= 0)
    return RegressionSample(x=x, y=y, c=0.0)


@pytest.fixture
def step_csv(tmp_path, step_sample):
    path = tmp_path / "step.csv"
    lines = ["y,x"] + [f"{y!r},{x!r}" for y, x in zip(step_sample.y.tolist(), step_sample.x.tolist())]
    path.write_text("\n".join(lines) + "\n")
    return path
