import numpy as np
import pytest

COLOR_A = (0.4, 0.2, 0.1)
COLOR_B = (0.1, 0.2, 0.4)


def split_image(height: int, width: int, left=COLOR_A, right=COLOR_B, boundary: int | None = None) -> np.ndarray:
    """Mondrian de dos colores dividido verticalmente"""
    boundary = width // 2 if boundary is None else boundary
    img = np.empty((height, width, 3))
    img[:, :boundary] = left
    img[:, boundary:] = right
    return img


def constant_image(height: int, width: int, color=(0.3, 0.5, 0.2)) -> np.ndarray:
    return np.broadcast_to(np.asarray(color, dtype=np.float64), (height, width, 3)).copy()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def two_color():
    return split_image(8, 10)


@pytest.fixture
def smooth_shading():
    """Campo positivo suave 16×20 en [0.4, 1]"""
    ys, xs = np.mgrid[0:16, 0:20].astype(np.float64)
    return 0.7 + 0.3 * np.sin(xs / 7.0) * np.cos(ys / 9.0)
