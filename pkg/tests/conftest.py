import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from docdeteval.data_model import Polygon
from docdeteval.raster import mask_from_grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_polygon(rng, width, height, n_vertices=6):
    """Simple-ish random polygon: points around a center, sorted by angle."""
    cx = rng.uniform(width * 0.2, width * 0.8)
    cy = rng.uniform(height * 0.2, height * 0.8)
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=n_vertices))
    radii = rng.uniform(2.0, min(width, height) * 0.45, size=n_vertices)
    pts = tuple(
        (float(cx + r * np.cos(a)), float(cy + r * np.sin(a)))
        for a, r in zip(angles, radii)
    )
    return Polygon(pts)


def grid_mask(grid, class_id=1, confidence=None):
    return mask_from_grid(np.asarray(grid, dtype=bool), class_id=class_id, confidence=confidence)


def rect_mask(width, height, x0, y0, x1, y1, class_id=1, confidence=None):
    """Inclusive-box rectangle mask on a width x height grid."""
    grid = np.zeros((height, width), dtype=bool)
    grid[y0 : y1 + 1, x0 : x1 + 1] = True
    return grid_mask(grid, class_id=class_id, confidence=confidence)
