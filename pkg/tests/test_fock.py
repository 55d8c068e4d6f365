"""Fock-core: basis enumeration, splits, exponential vectors, ampliation."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qstop import (
    DimensionLimitError,
    FockOperator,
    FockVector,
    SliceConfig,
    StepFunction,
    ampliate,
    enumerate_basis,
    exponential_inner_oracle,
    exponential_vector,
    joint_vector,
    number_operator,
    restrict_initial,
    slot_occupations,
    slot_operator,
    tensor_join,
    tensor_split,
    vacuum_vector,
    zero_step_function,
)
from qstop.errors import AmpliationError
from qstop.fock import embed_block, fock_operator


def count_occupations(d, cap):
    """Enumeration oracle: count alpha in Z_+^d with |alpha| <= cap."""
    return sum(
        1
        for a in itertools.product(range(cap + 1), repeat=d)
        if sum(a) <= cap
    )


def series_inner(cfg, f, g):
    """Per-slot truncated exponential series, written as plain loops."""
    total = 1.0 + 0.0j
    for j in range(cfg.n_slots):
        s = 0.0 + 0.0j
        for alpha in slot_occupations(cfg):
            term = 1.0 + 0.0j
            for c, n in enumerate(alpha):
                term *= (np.conj(f.values[j, c]) * g.values[j, c] * cfg.dt) ** n
                term /= math.factorial(n)
            s += term
        total *= s
    return total


class TestBasis:
    def test_two_slots_single_channel(self):
        cfg = SliceConfig(n_slots=2, dt=1.0, d=1, cap=1)
        assert len(enumerate_basis(cfg)) == 4

    def test_one_slot_two_channels(self):
        cfg = SliceConfig(n_slots=1, dt=1.0, d=2, cap=2)
        basis = enumerate_basis(cfg)
        assert count_occupations(2, 2) == 6
        assert len(basis) == 6

    def test_three_slots_cap_two(self):
        cfg = SliceConfig(n_slots=3, dt=1.0, d=1, cap=2)
        assert count_occupations(1, 2) ** 3 == 27
        assert len(enumerate_basis(cfg)) == 27

    @given(d=st.integers(1, 3), cap=st.integers(0, 3))
    def test_slot_dim_matches_enumeration(self, d, cap):
        cfg = SliceConfig(n_slots=1, dt=1.0, d=d, cap=cap)
        assert cfg.slot_dim == count_occupations(d, cap)

    def test_ordering_little_endian(self, cfg):
        basis = enumerate_basis(cfg)
        occs = slot_occupations(cfg)
        vac = occs[0]
        assert basis[0] == (vac,) * cfg.n_slots
        # slot 0 varies fastest
        assert basis[1][0] == occs[1]
        assert basis[1][1:] == (vac,) * (cfg.n_slots - 1)
        for k, state in enumerate(basis):
            for j in range(cfg.n_slots):
                assert state[j] == occs[(k // cfg.slot_dim**j) % cfg.slot_dim]

    def test_dimension_limit(self):
        with pytest.raises(DimensionLimitError):
            SliceConfig(n_slots=13, dt=1.0, d=1, cap=1)  # 2**13 > 4096


class TestSplit:
    def test_roundtrip_bit_exact(self, cfg, rng):
        amps = rng.normal(size=cfg.fock_dim) + 1j * rng.normal(size=cfg.fock_dim)
        v = FockVector(cfg, amps)
        for t in range(cfg.n_slots + 1):
            m = tensor_split(v, t)
            back = tensor_join(cfg, m, t)
            assert np.array_equal(back.amplitudes, v.amplitudes)

    def test_frobenius_norm_preserved(self, cfg, rng):
        amps = rng.normal(size=cfg.fock_dim) + 1j * rng.normal(size=cfg.fock_dim)
        v = FockVector(cfg, amps)
        for t in range(cfg.n_slots + 1):
            assert np.linalg.norm(tensor_split(v, t)) == pytest.approx(v.norm())

    def test_vacuum_splits_as_product(self, cfg):
        m = tensor_split(vacuum_vector(cfg), 2)
        expected = np.zeros_like(m)
        expected[0, 0] = 1.0
        assert np.array_equal(m, expected)

    def test_exponential_splits_rank_one(self, cfg, rng):
        f = StepFunction(cfg, 0.4 * (rng.normal(size=(cfg.n_slots, 1))
                                     + 1j * rng.normal(size=(cfg.n_slots, 1))))
        v = exponential_vector(cfg, f)
        for t in range(cfg.n_slots + 1):
            before = StepFunction(cfg, np.where(
                np.arange(cfg.n_slots)[:, None] < t, f.values, 0))
            after_shifted = f.values.copy()
            after_shifted[:t] = 0.0
            m = tensor_split(v, t)
            # rank-1 with factors given by the split step functions
            pre = tensor_split(exponential_vector(cfg, before), t)[:, 0]
            cfg_post = SliceConfig(n_slots=cfg.n_slots - t, dt=cfg.dt, d=cfg.d,
                                   cap=cfg.cap, k_ini=cfg.k_ini) if t < cfg.n_slots else None
            if cfg_post is not None:
                post = exponential_vector(
                    cfg_post, StepFunction(cfg_post, after_shifted[t:])
                ).amplitudes
            else:
                post = np.ones(1, dtype=complex)
            assert np.allclose(m, np.outer(pre, post), atol=1e-12)

    def test_split_rejects_ampliated(self, cfg):
        v = joint_vector(cfg, [1, 0], vacuum_vector(cfg))
        with pytest.raises(AmpliationError):
            tensor_split(v, 1)


class TestExponential:
    def test_vacuum_is_unit(self, cfg):
        omega = exponential_vector(cfg, zero_step_function(cfg))
        assert omega.support_horizon == 0
        assert omega.norm() == pytest.approx(1.0)
        assert np.array_equal(omega.amplitudes, vacuum_vector(cfg).amplitudes)

    def test_single_slot_amplitudes(self):
        cfg = SliceConfig(n_slots=1, dt=0.1, d=1, cap=1)
        f = StepFunction(cfg, [[0.5]])
        v = exponential_vector(cfg, f)
        assert v.amplitudes[0] == pytest.approx(1.0)
        assert v.amplitudes[1] == pytest.approx(0.5 * math.sqrt(0.1))
        # truncated series: 1 + |c|^2 dt
        assert v.inner(v).real == pytest.approx(1.025, abs=1e-14)

    def test_inner_matches_series_oracle(self, cfg, rng):
        for _ in range(5):
            f = StepFunction(cfg, 0.5 * (rng.normal(size=(cfg.n_slots, 1))
                                         + 1j * rng.normal(size=(cfg.n_slots, 1))))
            g = StepFunction(cfg, 0.5 * (rng.normal(size=(cfg.n_slots, 1))
                                         + 1j * rng.normal(size=(cfg.n_slots, 1))))
            vf, vg = exponential_vector(cfg, f), exponential_vector(cfg, g)
            oracle = series_inner(cfg, f, g)
            assert abs(vf.inner(vg) - oracle) < 1e-12
            assert abs(exponential_inner_oracle(cfg, f, g) - oracle) < 1e-12

    def test_norm_squared_matches_oracle(self, cfg, rng):
        f = StepFunction(cfg, 0.6 * rng.normal(size=(cfg.n_slots, 1)))
        v = exponential_vector(cfg, f)
        assert abs(v.norm() ** 2 - series_inner(cfg, f, f).real) < 1e-12

    def test_truncation_error_monotone_in_cap(self):
        # fixed small f, g; kernel error decreases as the cap grows
        values_f = [[0.7], [0.5]]
        values_g = [[0.4], [0.6]]
        errors = []
        for cap in (1, 2, 3, 4):
            cfg = SliceConfig(n_slots=2, dt=0.2, d=1, cap=cap)
            f = StepFunction(cfg, values_f)
            g = StepFunction(cfg, values_g)
            kernel = exponential_inner_oracle(cfg, f, g)
            errors.append(abs(kernel - np.exp(f.inner(g))))
        assert all(b <= a for a, b in zip(errors, errors[1:]))

    def test_support_horizon(self, cfg):
        f = StepFunction(cfg, [[0.3], [0.0], [0.2], [0.0], [0.0]])
        v = exponential_vector(cfg, f)
        assert v.support_horizon == 3
        v.validate()

    def test_horizon_defect_detects_violation(self, cfg):
        amps = np.zeros(cfg.fock_dim, dtype=complex)
        amps[-1] = 1.0
        v = FockVector(cfg, amps, support_horizon=1)
        with pytest.raises(ValueError):
            v.validate()


class TestSlotOperator:
    def test_projection_second_quantises_to_projection(self, rng):
        cfg = SliceConfig(n_slots=1, dt=1.0, d=2, cap=2)
        u = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
        p = u[:, :1] @ u[:, :1].conj().T
        gp = slot_operator(cfg, p)
        assert np.allclose(gp @ gp, gp, atol=1e-12)
        assert np.allclose(gp, gp.conj().T, atol=1e-12)

    def test_multiplicative(self, rng):
        cfg = SliceConfig(n_slots=1, dt=1.0, d=2, cap=3)
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        assert np.allclose(
            slot_operator(cfg, a) @ slot_operator(cfg, b),
            slot_operator(cfg, a @ b),
            atol=1e-10,
        )

    def test_identity_and_zero(self):
        cfg = SliceConfig(n_slots=1, dt=1.0, d=2, cap=2)
        assert np.allclose(slot_operator(cfg, np.eye(2)), np.eye(cfg.slot_dim))
        gz = slot_operator(cfg, np.zeros((2, 2)))
        expected = np.zeros((cfg.slot_dim, cfg.slot_dim))
        expected[0, 0] = 1.0
        assert np.allclose(gz, expected)


class TestAmpliation:
    def test_identity(self, cfg):
        from qstop import identity_operator

        amp = ampliate(identity_operator(cfg))
        assert np.array_equal(amp.matrix, np.eye(cfg.joint_dim))

    def test_projection_stays_projection(self, cfg):
        from qstop import conditional_vacuum

        e = ampliate(conditional_vacuum(cfg, 2))
        assert np.allclose(e.matrix @ e.matrix, e.matrix, atol=1e-14)

    def test_expectation_factorises(self, cfg, rng):
        x_mat = rng.normal(size=(cfg.fock_dim, cfg.fock_dim))
        x = fock_operator(cfg, x_mat)
        u = np.array([0.6, 0.8])
        v_amps = rng.normal(size=cfg.fock_dim) + 1j * rng.normal(size=cfg.fock_dim)
        v = FockVector(cfg, v_amps)
        uv = joint_vector(cfg, u, v)
        lhs = uv.inner(ampliate(x).apply(uv))
        rhs = (u.conj() @ u) * v.inner(x.apply(v))
        assert lhs == pytest.approx(rhs)

    def test_restrict_initial_roundtrip(self, cfg, rng):
        x = fock_operator(cfg, rng.normal(size=(cfg.fock_dim, cfg.fock_dim)))
        z = ampliate(x)
        u = np.array([1.0, 0.0])
        back = restrict_initial(z, u, u)
        assert np.allclose(back.matrix, x.matrix, atol=1e-14)

    def test_double_ampliation_rejected(self, cfg):
        from qstop import identity_operator

        with pytest.raises(AmpliationError):
            ampliate(ampliate(identity_operator(cfg)))


class TestOperatorHorizon:
    def test_product_propagates_max(self, cfg):
        a = number_operator(cfg, 0)
        b = number_operator(cfg, 2)
        assert (a @ b).support_horizon == 3
        assert (a @ b).structure_defect() < 1e-14

    def test_commutes_past_horizon(self, cfg, rng):
        x = number_operator(cfg, 1)  # horizon 2
        for slot in range(x.support_horizon, cfg.n_slots):
            core = rng.normal(size=(cfg.slot_dim, cfg.slot_dim)) + 1j * rng.normal(
                size=(cfg.slot_dim, cfg.slot_dim)
            )
            local = embed_block(cfg, core, slot, 1, None, False)
            assert np.allclose(x.matrix @ local, local @ x.matrix, atol=1e-12)

    def test_fock_operator_infers_horizon(self, cfg):
        n0 = number_operator(cfg, 0)
        wrapped = fock_operator(cfg, n0.matrix)
        assert wrapped.support_horizon == 1

    def test_validate_rejects_wrong_tag(self, cfg):
        n1 = number_operator(cfg, 1)
        bad = FockOperator(cfg, n1.matrix, support_horizon=1)
        with pytest.raises(ValueError):
            bad.validate()
