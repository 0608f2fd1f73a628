import math

import numpy as np
import pytest

from sagsched.errors import ConfigurationError
from sagsched.topology import (AccessPoint, ApKind, UserNode, build_topology,
                               compute_coverage, compute_delay_frames,
                               SPEED_OF_LIGHT)

from conftest import make_topology


def ap(kind, pos, radius, delay=None, index=0):
    return AccessPoint(index=index, kind=kind, position=pos, radius_m=radius,
                       delay_frames=delay)


class TestCoverage:
    def test_user_directly_below(self):
        sat = ap(ApKind.SATELLITE, (0.0, 0.0, 500e3), 1e6)
        assert compute_coverage(sat, UserNode(1, (0.0, 0.0, 0.0))) == 1

    def test_outside_radius(self):
        uav = ap(ApKind.UAV, (0.0, 0.0, 10e3), 5e3)
        assert compute_coverage(uav, UserNode(1, (6e3, 0.0, 0.0))) == 0

    def test_boundary_inclusive(self):
        uav = ap(ApKind.UAV, (0.0, 0.0, 100.0), 5e3)
        assert compute_coverage(uav, UserNode(1, (5e3, 0.0, 0.0))) == 1

    def test_altitude_ignored(self):
        # ground-plane distance only; a high AP still covers a user at its feet
        sat = ap(ApKind.SATELLITE, (100.0, 200.0, 550e3), 50.0)
        assert compute_coverage(sat, UserNode(1, (120.0, 200.0, 0.0))) == 1

    def test_satellite_row_all_ones(self, topo3):
        assert topo3.coverage[0].all()

    def test_translation_invariance(self, rng):
        # rigid ground-plane shifts leave the coverage matrix unchanged
        for _ in range(20):
            dx, dy = rng.uniform(-5e3, 5e3, 2)
            base = make_topology(n_users=4)
            shifted_aps = [AccessPoint(a.index, a.kind,
                                       (a.position[0] + dx, a.position[1] + dy,
                                        a.position[2]), a.radius_m,
                                       a.delay_frames) for a in base.aps]
            shifted_users = [UserNode(u.index, (u.position[0] + dx,
                                                u.position[1] + dy, 0.0))
                             for u in base.users]
            shifted = build_topology(shifted_aps, shifted_users, 1e-3)
            assert np.array_equal(base.coverage, shifted.coverage)

    def test_radius_monotonicity(self, rng):
        for _ in range(20):
            r1, r2 = sorted(rng.uniform(10.0, 3e3, 2))
            uav_small = ap(ApKind.UAV, (0.0, 0.0, 100.0), r1)
            uav_big = ap(ApKind.UAV, (0.0, 0.0, 100.0), r2)
            user = UserNode(1, (rng.uniform(0, 3e3), rng.uniform(0, 3e3), 0.0))
            assert compute_coverage(uav_small, user) <= compute_coverage(uav_big, user)


class TestDelay:
    def test_bs_always_zero(self):
        bs = ap(ApKind.BASE_STATION, (0.0, 0.0, 25.0), 1e4)
        assert compute_delay_frames(bs, UserNode(1, (3e3, 0.0, 0.0)), 1e-3) == 0

    def test_satellite_override(self):
        sat = ap(ApKind.SATELLITE, (0.0, 0.0, 550e3), 1e7, delay=20)
        assert compute_delay_frames(sat, UserNode(1, (0.0, 0.0, 0.0)), 1e-3) == 20

    def test_uav_override(self):
        uav = ap(ApKind.UAV, (0.0, 0.0, 500.0), 1e4, delay=5)
        assert compute_delay_frames(uav, UserNode(1, (100.0, 0.0, 0.0)), 1e-3) == 5

    def test_ceil_of_distance(self):
        # 450 km slant at c is 1.5011 ms -> 2 frames of 1 ms
        sat = ap(ApKind.SATELLITE, (0.0, 0.0, 450e3), 1e7)
        d = compute_delay_frames(sat, UserNode(1, (0.0, 0.0, 0.0)), 1e-3)
        assert d == math.ceil(450e3 / SPEED_OF_LIGHT / 1e-3) == 2

    def test_bad_frame_len(self):
        sat = ap(ApKind.SATELLITE, (0.0, 0.0, 550e3), 1e7)
        with pytest.raises(ConfigurationError):
            compute_delay_frames(sat, UserNode(1, (0.0, 0.0, 0.0)), 0.0)


class TestBuildTopology:
    def test_three_ap_structure(self, topo3):
        assert topo3.n_aps == 3 and topo3.n_users == 3
        assert (topo3.delay[2] == 0).all()          # BS row
        assert (topo3.delay[0] == 20).all()          # satellite override
        assert (topo3.delay[1][topo3.coverage[1] == 1] >= 1).all()

    def test_degenerate_satellite_only(self):
        sat = [ap(ApKind.SATELLITE, (0.0, 0.0, 550e3), 1e7, delay=20)]
        users = [UserNode(1, (0.0, 0.0, 0.0))]
        topo = build_topology(sat, users, 1e-3)
        assert topo.coverage.tolist() == [[1]]

    def test_satellite_must_cover_all(self):
        sat = [ap(ApKind.SATELLITE, (0.0, 0.0, 550e3), 10.0, delay=20)]
        users = [UserNode(1, (500.0, 0.0, 0.0))]
        with pytest.raises(ConfigurationError, match="cover all users"):
            build_topology(sat, users, 1e-3)

    def test_missing_satellite(self):
        bs = [ap(ApKind.BASE_STATION, (0.0, 0.0, 25.0), 1e4)]
        with pytest.raises(ConfigurationError, match="satellite"):
            build_topology(bs, [UserNode(1, (0.0, 0.0, 0.0))], 1e-3)

    def test_ap_order_enforced(self):
        aps = [ap(ApKind.SATELLITE, (0.0, 0.0, 550e3), 1e7, 20, index=0),
               ap(ApKind.BASE_STATION, (0.0, 0.0, 25.0), 1e4, index=1),
               ap(ApKind.UAV, (0.0, 0.0, 500.0), 1e4, 5, index=2)]
        with pytest.raises(ConfigurationError, match="order"):
            build_topology(aps, [UserNode(1, (0.0, 0.0, 0.0))], 1e-3)

    def test_zero_delay_override_on_airborne_rejected(self):
        aps = [ap(ApKind.SATELLITE, (0.0, 0.0, 550e3), 1e7, delay=0)]
        with pytest.raises(ConfigurationError, match="zero-frame delay"):
            build_topology(aps, [UserNode(1, (0.0, 0.0, 0.0))], 1e-3)

    def test_matrices_frozen(self, topo3):
        with pytest.raises(ValueError):
            topo3.coverage[0, 0] = 0
