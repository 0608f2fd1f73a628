import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sagsched.radio import LinkParams, build_energy_table
from sagsched.topology import AccessPoint, ApKind, UserNode, build_topology


def make_topology(n_uavs=1, n_bs=1, n_users=3, sat_delay=20, uav_delays=None,
                  uav_radii=None, bs_radii=None, user_spacing=300.0,
                  frame_len_s=1e-3):
    """Small synthetic world: users on a line, APs above/near the center."""
    uav_delays = uav_delays or [5] * n_uavs
    uav_radii = uav_radii or [1e6] * n_uavs
    bs_radii = bs_radii or [1e6] * n_bs
    users = [UserNode(index=u + 1,
                      position=(500.0 + u * user_spacing, 1000.0, 0.0))
             for u in range(n_users)]
    aps = [AccessPoint(0, ApKind.SATELLITE, (1000.0, 1000.0, 550_000.0),
                       1e9, sat_delay)]
    for i in range(n_uavs):
        aps.append(AccessPoint(len(aps), ApKind.UAV,
                               (700.0 + 200.0 * i, 1000.0, 400.0 + 100.0 * i),
                               uav_radii[i], uav_delays[i]))
    for i in range(n_bs):
        aps.append(AccessPoint(len(aps), ApKind.BASE_STATION,
                               (800.0 + 150.0 * i, 900.0, 25.0), bs_radii[i]))
    return build_topology(aps, users, frame_len_s)


@pytest.fixture
def topo3():
    """1 satellite (d=20), 1 UAV (d=5), 1 BS, 3 users, full coverage."""
    return make_topology()


@pytest.fixture
def link():
    return LinkParams()


@pytest.fixture
def energy3(topo3, link):
    return build_energy_table(topo3, link)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
