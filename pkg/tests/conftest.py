import numpy as np
import pytest

from pantext._backend import available_backends, backend_name, set_backend
from pantext.pipeline.image import encode_ppm
from pantext.weights import NetConfig, init_weights


@pytest.fixture(params=available_backends())
def backend(request):
    """Run the test once per available kernel backend."""
    previous = backend_name()
    set_backend(request.param)
    yield request.param
    set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def seed42_weights():
    return init_weights(NetConfig(), seed=42)


@pytest.fixture(scope="session")
def fixture_rgb():
    """64x80 noise image shared by the end-to-end tests."""
    return (np.random.default_rng(7).random((64, 80, 3)) * 255).astype(np.uint8)


@pytest.fixture
def fixture_ppm(tmp_path, fixture_rgb):
    path = tmp_path / "fixture.ppm"
    path.write_bytes(encode_ppm(fixture_rgb))
    return path
