import itertools

import numpy as np
import pytest

from morreyflow import TorusGeometry, distance, dyadic_radii, make_ball_cover
from morreyflow.errors import RadiusTooSmall, ValidationError


def oracle_distance(geom, x, y):
    """Minimum over all image shifts m in {-1,0,1}^n, computed from scratch."""
    best = np.inf
    for m in itertools.product((-1, 0, 1), repeat=geom.n):
        d = np.linalg.norm((np.asarray(x) - np.asarray(y) + geom.N * np.asarray(m)) * geom.h)
        best = min(best, d)
    return best


def test_distance_identity():
    geom = TorusGeometry(n=2, L=4.0, N=16)
    assert distance(geom, (3, 7), (3, 7)) == 0.0


def test_distance_wraparound():
    # 1D analog along one axis: coordinates 0.5 and 3.5 are 1.0 apart, not 3.0
    geom = TorusGeometry(n=2, L=4.0, N=16)
    assert distance(geom, (2, 0), (14, 0)) == pytest.approx(1.0, abs=1e-14)


def test_distance_metric_properties():
    geom = TorusGeometry(n=2, L=4.0, N=16)
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 16, size=(40, 3, 2))
    for x, y, z in pts:
        dxy = distance(geom, x, y)
        assert dxy == pytest.approx(distance(geom, y, x), abs=0)
        assert dxy == pytest.approx(oracle_distance(geom, x, y), abs=1e-13)
        assert dxy <= distance(geom, x, z) + distance(geom, z, y) + 1e-12


def test_distance_metric_properties_3d():
    geom = TorusGeometry(n=3, L=4.0, N=8)
    rng = np.random.default_rng(1)
    for x, y in rng.integers(0, 8, size=(25, 2, 3)):
        assert distance(geom, x, y) == pytest.approx(oracle_distance(geom, x, y), abs=1e-13)


def test_distance_refinement_consistency():
    # points present in both grids keep their distance exactly
    coarse = TorusGeometry(n=2, L=4.0, N=16)
    fine = TorusGeometry(n=2, L=4.0, N=32)
    rng = np.random.default_rng(2)
    for x, y in rng.integers(0, 16, size=(20, 2, 2)):
        assert distance(coarse, x, y) == pytest.approx(distance(fine, 2 * x, 2 * y), abs=1e-14)


def test_cover_quarter_period():
    # R = L/4 on the 16^2 grid: exhaustive membership puts 49 cells in each
    # ball, so the volume constant is 49/16 (frozen from the loop oracle).
    geom = TorusGeometry(n=2, L=4.0, N=16)
    cover = make_ball_cover(geom, 1.0)
    assert cover.covers_grid()

    count = 0
    for idx in itertools.product(range(16), repeat=2):
        if oracle_distance(geom, idx, (0, 0)) <= 1.0 + 1e-12:
            count += 1
    assert count == 49
    assert cover.n_members == count
    assert cover.volume_constant == pytest.approx(49 / 16, rel=1e-12)


def test_cover_radius_preconditions():
    geom = TorusGeometry(n=2, L=4.0, N=16)
    make_ball_cover(geom, 2 * geom.h)  # boundary case allowed
    with pytest.raises(RadiusTooSmall):
        make_ball_cover(geom, geom.h)


def test_cover_disk_area():
    geom = TorusGeometry(n=2, L=4.0, N=64)
    cover = make_ball_cover(geom, 0.5)
    area = np.pi * 0.5**2
    assert area * 0.9 <= cover.ball_volume <= area * 1.1

    count = sum(
        1
        for idx in itertools.product(range(-8, 9), repeat=2)
        if np.linalg.norm(np.asarray(idx) * geom.h) <= 0.5 + 1e-12
    )
    assert cover.n_members == count


def test_cover_property_and_spacing():
    for n, N in [(2, 32), (3, 16)]:
        geom = TorusGeometry(n=n, L=4.0, N=N)
        for R in dyadic_radii(geom):
            cover = make_ball_cover(geom, R)
            assert cover.covers_grid(), f"gap at R={R}, n={n}"
            assert cover.stride * geom.h <= R / 2 + 1e-12


def test_volume_sandwich_single_constant():
    # one V works across every usable radius (and stays modest)
    geom = TorusGeometry(n=2, L=4.0, N=64)
    vees = [make_ball_cover(geom, R).volume_constant for R in dyadic_radii(geom)]
    V = max(vees)
    assert V >= 1.0
    assert V < 5.0
    for R in dyadic_radii(geom):
        vol = make_ball_cover(geom, R).ball_volume
        assert R**2 / V <= vol <= V * R**2


def test_geometry_validation():
    with pytest.raises(ValidationError, match="n in"):
        TorusGeometry(n=4, L=4.0, N=16)
    with pytest.raises(ValidationError, match="even"):
        TorusGeometry(n=2, L=4.0, N=17)
    with pytest.raises(ValidationError, match="L >= 4"):
        TorusGeometry(n=2, L=2.0, N=16)
    geom = TorusGeometry(n=3, L=4.0, N=16)
    assert geom.cell_volume * geom.num_points == pytest.approx(geom.L**3, rel=1e-12)


def test_dyadic_radii_floor():
    geom = TorusGeometry(n=2, L=4.0, N=16)  # 2h = 0.5
    assert dyadic_radii(geom) == [1.0, 0.5]
    geom = TorusGeometry(n=2, L=4.0, N=48)  # 2h = 1/6, appended after 0.25
    radii = dyadic_radii(geom)
    assert radii[:3] == [1.0, 0.5, 0.25]
    assert radii[-1] == pytest.approx(2 * geom.h)
