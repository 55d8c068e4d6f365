"""Cocycle construction, stopping, the two-stop-time identity, inner flows."""

import numpy as np
import pytest

from qstop import (
    CocycleBuildError,
    HorizonError,
    SliceConfig,
    build_cocycle,
    ccr_flow,
    cocycle_continuity_probe,
    coarsen,
    convolve,
    eh_composition_defect,
    eh_flow_identity,
    eh_flow_vacuum,
    isometry_defect,
    make_deterministic,
    make_first_arrival,
    stop_cocycle,
    stopped_cocycle_identity_check,
    stopped_projection_ampliated,
    vacuum_composition_defect,
)
from qstop.cocycle import cocycle_identity_defect
from qstop.sampling import (
    random_fock_vector,
    random_smooth_unitary,
    random_stop_time,
    random_unitary,
)


@pytest.fixture
def w_haar(cfg, rng):
    return random_unitary(rng, cfg.k_ini * cfg.slot_dim)


@pytest.fixture
def identity_cocycle_family(cfg, w_haar):
    return build_cocycle(cfg, np.eye(cfg.d), w_haar)


@pytest.fixture
def vacuum_cocycle_family(cfg, w_haar):
    return build_cocycle(cfg, np.zeros((cfg.d, cfg.d)), w_haar)


class TestBuild:
    def test_trivial_generator(self, cfg):
        c = build_cocycle(cfg, np.eye(cfg.d), np.eye(cfg.k_ini * cfg.slot_dim))
        for v_t in c.v:
            assert np.array_equal(v_t.matrix, np.eye(cfg.joint_dim))

    def test_initial_space_only_generator(self, cfg, rng):
        # W = U (x) I_slot gives V_t = U^t (x) I
        u = random_unitary(rng, cfg.k_ini)
        w = np.kron(u, np.eye(cfg.slot_dim))
        c = build_cocycle(cfg, np.eye(cfg.d), w)
        for t in range(cfg.n_slots + 1):
            expected = np.kron(np.linalg.matrix_power(u, t), np.eye(cfg.fock_dim))
            assert np.allclose(c.v[t].matrix, expected, atol=1e-12)

    def test_rejects_non_unitary(self, cfg):
        with pytest.raises(CocycleBuildError, match="unitary"):
            build_cocycle(cfg, np.eye(cfg.d), 0.9 * np.eye(cfg.k_ini * cfg.slot_dim))

    def test_rejects_non_projection_tail(self, cfg, w_haar):
        with pytest.raises(CocycleBuildError, match="projection"):
            build_cocycle(cfg, 0.3 * np.eye(cfg.d), w_haar)

    def test_identity_defect_bound(self, cfg, identity_cocycle_family,
                                   vacuum_cocycle_family):
        for c in (identity_cocycle_family, vacuum_cocycle_family):
            assert cocycle_identity_defect(cfg, c.v, c.v_hat) <= 1e-10

    def test_vacuum_family_is_vacuum_supported(self, cfg, vacuum_cocycle_family):
        # V_t (I (x) E_t) = V_t
        for t in range(cfg.n_slots + 1):
            v_t = vacuum_cocycle_family.v[t].matrix
            e_t = stopped_projection_ampliated(
                cfg, make_deterministic(cfg, t)
            ).matrix if t >= 1 else np.kron(
                np.eye(cfg.k_ini), np.eye(cfg.fock_dim)[:, :1] @ np.eye(cfg.fock_dim)[:1, :]
            )
            assert np.allclose(v_t @ e_t, v_t, atol=1e-12)

    def test_general_projection_tail(self, rng):
        cfg = SliceConfig(n_slots=3, dt=0.25, d=2, cap=1, k_ini=2)
        w = random_unitary(rng, cfg.k_ini * cfg.slot_dim)
        p = np.diag([1.0, 0.0]).astype(complex)
        c = build_cocycle(cfg, p, w)
        assert not c.is_identity_adapted and not c.is_vacuum_adapted
        assert cocycle_identity_defect(cfg, c.v, c.v_hat) <= 1e-10

    def test_commutation_with_interval_mass(self, cfg, rng, identity_cocycle_family):
        # V_{s+t} S((r, s]) = Vhat_s S((r, s]) sigma~_s(V_t)
        c = identity_cocycle_family
        s_time = random_stop_time(cfg, rng, [1, 2, 3])
        for r in (0, 1):
            for s in (2, 3):
                mass = np.kron(np.eye(cfg.k_ini), s_time.interval(r, s))
                for t in range(1, cfg.n_slots - s + 1):
                    lhs = c.v[s + t].matrix @ mass
                    rhs = c.v_hat[s].matrix @ mass @ ccr_flow(cfg, s, c.v[t]).matrix
                    assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestStopCocycle:
    def test_point_mass_reduces(self, cfg, identity_cocycle_family):
        for t in range(1, cfg.n_slots + 1):
            got = stop_cocycle(identity_cocycle_family, make_deterministic(cfg, t))
            assert np.array_equal(got.v_s.matrix, identity_cocycle_family.v[t].matrix)

    def test_trivial_cocycle_stops_to_identity(self, cfg, rng):
        c = build_cocycle(cfg, np.eye(cfg.d), np.eye(cfg.k_ini * cfg.slot_dim))
        s = random_stop_time(cfg, rng, [1, 2])
        assert np.allclose(stop_cocycle(c, s).v_s.matrix, np.eye(cfg.joint_dim),
                           atol=1e-12)

    def test_contraction(self, cfg, rng, identity_cocycle_family,
                         vacuum_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        for c in (identity_cocycle_family, vacuum_cocycle_family):
            assert stop_cocycle(c, s).norm <= 1.0 + 1e-9

    def test_identity_adapted_isometry(self, cfg, rng, identity_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        assert isometry_defect(identity_cocycle_family, s) < 1e-12

    def test_vacuum_adapted_gram(self, cfg, rng, vacuum_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        assert isometry_defect(vacuum_cocycle_family, s) < 1e-12

    def test_partition_stability(self, cfg, rng, identity_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        plain = stop_cocycle(identity_cocycle_family, s)
        refined = stop_cocycle(identity_cocycle_family, s,
                               partition=range(1, cfg.n_slots + 1))
        assert np.max(np.abs(plain.v_s.matrix - refined.v_s.matrix)) <= 1e-12


class TestStoppedIdentity:
    def test_deterministic_pair(self, cfg, identity_cocycle_family):
        rep = stopped_cocycle_identity_check(
            identity_cocycle_family,
            make_deterministic(cfg, 2),
            make_deterministic(cfg, 1),
        )
        assert rep.max_entry <= 1e-12

    def test_deterministic_increment(self, cfg, rng, identity_cocycle_family,
                                     vacuum_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        for c in (identity_cocycle_family, vacuum_cocycle_family):
            for t in (1, 2, 3):
                rep = stopped_cocycle_identity_check(c, s, make_deterministic(cfg, t))
                assert rep.max_entry <= 1e-9

    def test_random_pairs_both_adaptedness(self, cfg, rng, identity_cocycle_family,
                                           vacuum_cocycle_family):
        for c in (identity_cocycle_family, vacuum_cocycle_family):
            for _ in range(3):
                s = random_stop_time(cfg, rng, [1, 2])
                t = random_stop_time(cfg, rng, [1, 2])
                rep = stopped_cocycle_identity_check(c, s, t)
                assert rep.max_entry <= 1e-9
                assert rep.op_norm <= 1e-9

    def test_first_arrival_pair(self, cfg, identity_cocycle_family):
        s = make_first_arrival(cfg, 2)
        rep = stopped_cocycle_identity_check(identity_cocycle_family, s, s)
        assert rep.max_entry <= 1e-9

    def test_horizon_guard(self, cfg, identity_cocycle_family):
        s = make_deterministic(cfg, 3)
        with pytest.raises(HorizonError):
            stopped_cocycle_identity_check(identity_cocycle_family, s, s)


class TestInnerFlows:
    def test_identity_flow_of_unit(self, cfg, rng, identity_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        v_s = stop_cocycle(identity_cocycle_family, s).v_s.matrix
        image, report = eh_flow_identity(identity_cocycle_family, s, np.eye(cfg.k_ini))
        assert np.allclose(image.matrix, v_s @ v_s.conj().T, atol=1e-12)
        assert report.worst <= 1e-12

    def test_trivial_cocycle_flow_is_ampliation(self, cfg, rng):
        c = build_cocycle(cfg, np.eye(cfg.d), np.eye(cfg.k_ini * cfg.slot_dim))
        s = random_stop_time(cfg, rng, [1, 2])
        a = rng.normal(size=(cfg.k_ini, cfg.k_ini))
        image, _ = eh_flow_identity(c, s, a)
        assert np.allclose(image.matrix, np.kron(a, np.eye(cfg.fock_dim)), atol=1e-12)

    def test_multiplicative_on_random_pair(self, cfg, rng, identity_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        ja, _ = eh_flow_identity(identity_cocycle_family, s, a)
        jb, _ = eh_flow_identity(identity_cocycle_family, s, b)
        jab, _ = eh_flow_identity(identity_cocycle_family, s, a @ b)
        assert np.allclose(ja.matrix @ jb.matrix, jab.matrix, atol=1e-12)

    def test_vacuum_flow_reports(self, cfg, rng, vacuum_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        image, report = eh_flow_vacuum(vacuum_cocycle_family, s, np.eye(cfg.k_ini))
        v_s = stop_cocycle(vacuum_cocycle_family, s).v_s.matrix
        assert report.worst <= 1e-12
        assert np.allclose(image.matrix, v_s @ v_s.conj().T, atol=1e-12)

    def test_vacuum_flow_requires_vacuum_cocycle(self, cfg, rng,
                                                 identity_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        with pytest.raises(CocycleBuildError):
            eh_flow_vacuum(identity_cocycle_family, s, np.eye(cfg.k_ini))

    def test_composition_both_kinds(self, cfg, rng, identity_cocycle_family,
                                    vacuum_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        t = random_stop_time(cfg, rng, [1, 2])
        assert eh_composition_defect(identity_cocycle_family, s, t) <= 1e-9
        assert eh_composition_defect(vacuum_cocycle_family, s, t) <= 1e-9

    def test_deterministic_composition_reduces(self, cfg, identity_cocycle_family):
        s = make_deterministic(cfg, 1)
        t = make_deterministic(cfg, 2)
        assert eh_composition_defect(identity_cocycle_family, s, t) <= 1e-12

    def test_vacuum_projection_composition(self, cfg, rng):
        s = random_stop_time(cfg, rng, [1, 2])
        t = random_stop_time(cfg, rng, [1, 2])
        assert vacuum_composition_defect(cfg, s, t) <= 1e-12


class TestContinuityProbe:
    def test_zero_for_equal_sequences(self, cfg, rng, identity_cocycle_family):
        s = random_stop_time(cfg, rng, [1, 2])
        probes = [random_fock_vector(cfg, rng, ampliated=True) for _ in range(2)]
        rows = cocycle_continuity_probe(identity_cocycle_family, [s, s], s, probes)
        assert all(v == 0.0 for row in rows for v in row)

    def test_zero_for_trivial_cocycle(self, cfg, rng):
        c = build_cocycle(cfg, np.eye(cfg.d), np.eye(cfg.k_ini * cfg.slot_dim))
        s = make_first_arrival(cfg, 4)
        probes = [random_fock_vector(cfg, rng, ampliated=True) for _ in range(2)]
        rows = cocycle_continuity_probe(
            c, [coarsen(s, [2, 4]), coarsen(s, [1, 2, 3, 4])], s, probes
        )
        assert all(v <= 1e-12 for row in rows for v in row)

    def test_refinement_non_increasing_with_smooth_steps(self, rng):
        cfg = SliceConfig(n_slots=8, dt=0.125, d=1, cap=1, k_ini=2)
        w = random_smooth_unitary(rng, cfg.k_ini * cfg.slot_dim, cfg.dt, scale=0.4)
        c = build_cocycle(cfg, np.eye(cfg.d), w)
        target = make_first_arrival(cfg, 8)
        approx = [coarsen(target, [4, 8]),
                  coarsen(target, [2, 4, 6, 8]),
                  coarsen(target, list(range(1, 9)))]
        probes = [random_fock_vector(cfg, rng, ampliated=True) for _ in range(3)]
        rows = cocycle_continuity_probe(c, approx, target, probes)
        col_max = [max(row) for row in rows]
        assert col_max[0] >= col_max[1] >= col_max[2]
        assert col_max[2] <= 1e-12  # finest level resolves the target exactly
