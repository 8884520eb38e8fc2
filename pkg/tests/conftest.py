import numpy as np
import pytest

from wipeplan.geometry import ObjectSpec, PointCloud, generate_object


def flat_grid(half=0.08, spacing=0.002, cloud_id="flat"):
    ticks = np.arange(-half, half + 1e-12, spacing)
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)])
    normals = np.tile([0.0, 0.0, 1.0], (len(pts), 1))
    return PointCloud(pts, normals, cloud_id)


@pytest.fixture(scope="session")
def flat_cloud():
    return flat_grid()


@pytest.fixture(scope="session")
def bowl_cloud():
    return generate_object(ObjectSpec("bowl", 0.08, 0.04, 2.0, 2000, seed=5, name="bowl"))


@pytest.fixture(scope="session")
def small_plate():
    return generate_object(ObjectSpec("plate", 0.06, 0.008, 2.0, 400, seed=2, name="plate"))


def centre_index(cloud):
    return int(np.argmin(np.linalg.norm(cloud.points[:, :2], axis=1)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
