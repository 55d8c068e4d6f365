"""Objects attached to a stop time: projection, shift, flow and factorisation.

For a discrete stop time the partition limits collapse to exact finite sums
over the atoms:

* ``E_S  = sum_j S({t_j}) E_{t_j}``        (an orthogonal projection),
* ``Gamma_S = sum_j S({t_j}) Gamma_{t_j}`` (isometric on vectors supported
  before slot ``n_slots - max_atom``),
* ``sigma_S(X) = sum_j sigma_{t_j}(X) S({t_j})`` (a unital *-homomorphism on
  operators whose horizon fits).

The post-S space is modelled as the admissible-horizon copy of the Fock
space (the domain of ``Gamma_S``) rather than as ``range(Gamma_S)`` with its
own basis.  The factorisation map ``j_S`` consumes pairs (x in range E_S,
y admissible) and splices, atom by atom, the pre-stop part of ``S({t_j}) x``
with the content of ``y`` shifted behind ``t_j``.  It is an isometry onto
its range; on a truncated grid that range is a proper subspace of the Fock
space unless S is deterministic, so the factorisation identities are exact
in the intertwining form ``sigma_S(X) j_S = j_S (I (x) X_compressed)`` and,
equivalently, after restriction to ``range(j_S)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import HorizonError
from .fock import (
    STRICT_TOL,
    TOL,
    FockOperator,
    FockVector,
    SliceConfig,
    ampliate,
    compress_block,
)
from .secondquant import ccr_flow, conditional_vacuum, shift
from .stoptime import DiscreteStopTime


def _interval_masses(s_time: DiscreteStopTime, partition) -> list[tuple[int, np.ndarray]]:
    """(right endpoint, interval mass) pairs for a boundary list.

    With ``partition = None`` the atom times are used, which is the exact
    (fully refined) case.  Any boundary set containing all atom times yields
    the same sums up to rounding.
    """
    if partition is None:
        return [(t, m) for t, m in s_time.atoms]
    bounds = sorted(set(int(b) for b in partition))
    out = []
    prev = 0
    for b in bounds:
        mass = s_time.interval(prev, b)
        if np.max(np.abs(mass)) > 0:
            out.append((b, mass))
        prev = b
    if np.max(np.abs(s_time.interval(prev, s_time.cfg.n_slots))) > 0:
        raise ValueError("partition must reach past the last atom")
    return out


def stopped_projection(
    cfg: SliceConfig, s_time: DiscreteStopTime, partition=None
) -> FockOperator:
    """``E_S`` as an atom-weighted sum of conditional vacuum projections."""
    mat = np.zeros((cfg.fock_dim, cfg.fock_dim), dtype=complex)
    for t, m in _interval_masses(s_time, partition):
        mat = mat + m @ conditional_vacuum(cfg, t).matrix
    h = s_time.max_atom
    tail = None if h == cfg.n_slots else np.zeros((cfg.d, cfg.d), dtype=complex)
    if h == cfg.n_slots:
        return FockOperator(cfg, mat, support_horizon=cfg.n_slots)
    return FockOperator(cfg, mat, support_horizon=h, tail=tail)


def stopped_projection_ampliated(cfg: SliceConfig, s_time: DiscreteStopTime) -> FockOperator:
    return ampliate(stopped_projection(cfg, s_time))


def stopped_shift(
    cfg: SliceConfig, s_time: DiscreteStopTime, partition=None
) -> np.ndarray:
    """``Gamma_S`` as a raw matrix; isometric on the admissible subspace.

    Vectors must have support horizon ``<= n_slots - max_atom(S)``; use
    :meth:`StoppedBundle.apply_shift` for the checked application.
    """
    mat = np.zeros((cfg.fock_dim, cfg.fock_dim), dtype=complex)
    for t, m in _interval_masses(s_time, partition):
        mat = mat + m @ shift(cfg, t).matrix
    return mat


def stopped_flow(
    cfg: SliceConfig, s_time: DiscreteStopTime, x: FockOperator, partition=None
) -> FockOperator:
    """``sigma_S(X)``; accepts plain or ampliated X, any declared tail.

    Hard error when the operator's horizon does not fit behind the last
    atom; a finite grid cannot pad the overflow.
    """
    if x.support_horizon + s_time.max_atom > cfg.n_slots:
        raise HorizonError(
            f"stopped flow needs support horizon <= "
            f"{cfg.n_slots - s_time.max_atom}, got {x.support_horizon}"
        )
    dim = cfg.dim(x.ampliated)
    mat = np.zeros((dim, dim), dtype=complex)
    for t, m in _interval_masses(s_time, partition):
        atom = np.kron(np.eye(cfg.k_ini, dtype=complex), m) if x.ampliated else m
        mat = mat + ccr_flow(cfg, t, x).matrix @ atom
    return FockOperator(
        cfg,
        mat,
        ampliated=x.ampliated,
        support_horizon=min(s_time.max_atom + x.support_horizon, cfg.n_slots),
        tail=x.tail,
    )


def stopped_flow_ampliated(
    cfg: SliceConfig, s_time: DiscreteStopTime, z: FockOperator, partition=None
) -> FockOperator:
    """id (x) sigma_S; ampliates plain operators first."""
    if not z.ampliated:
        z = ampliate(z)
    return stopped_flow(cfg, s_time, z, partition=partition)


@dataclass(frozen=True, eq=False)
class StoppedBundle:
    """All derived objects of one stop time, built once and shared.

    ``admissible_horizon = n_slots - max_atom`` bounds the support of
    vectors in the post-S model space; ``pre_basis`` is an orthonormal basis
    of ``range(E_S)`` obtained by eigendecomposition with the 0.5 eigenvalue
    cut.  ``j_map`` has one column per (pre-basis vector, admissible basis
    state) pair, ordered with the pre index slow.
    """

    cfg: SliceConfig
    stop_time: DiscreteStopTime
    projection: FockOperator
    shift_matrix: np.ndarray
    pre_basis: np.ndarray  # fock_dim x pre_rank, orthonormal columns
    j_map: np.ndarray  # fock_dim x (pre_rank * adm_dim), isometry

    @property
    def admissible_horizon(self) -> int:
        return self.cfg.n_slots - self.stop_time.max_atom

    @property
    def adm_dim(self) -> int:
        return self.cfg.pre_dim(self.admissible_horizon)

    @property
    def pre_rank(self) -> int:
        return self.pre_basis.shape[1]

    @cached_property
    def range_projection(self) -> np.ndarray:
        """Projection onto range(j_S)."""
        return self.j_map @ self.j_map.conj().T

    @cached_property
    def j_map_ampliated(self) -> np.ndarray:
        """(x in pre) (x) (u in initial) (x) (y admissible) -> u (x) j_S(x (x) y).

        Shape ``joint_dim x (pre_rank * k_ini * adm_dim)`` with the pre
        index slowest and the admissible index fastest.
        """
        cfg = self.cfg
        j3 = self.j_map.reshape(cfg.fock_dim, self.pre_rank, self.adm_dim)
        out = np.einsum(
            "uv,fxy->ufxvy", np.eye(cfg.k_ini, dtype=complex), j3, optimize=True
        )
        return out.reshape(cfg.joint_dim, self.pre_rank * cfg.k_ini * self.adm_dim)

    def apply_shift(self, v: FockVector) -> FockVector:
        """Checked application of Gamma_S."""
        if v.ampliated:
            raise ValueError("stopped shift acts on plain Fock vectors")
        if v.support_horizon > self.admissible_horizon:
            raise HorizonError(
                f"Gamma_S domain needs support horizon <= "
                f"{self.admissible_horizon}, got {v.support_horizon}"
            )
        return FockVector(self.cfg, self.shift_matrix @ v.amplitudes)

    def flow(self, x: FockOperator, partition=None) -> FockOperator:
        return stopped_flow(self.cfg, self.stop_time, x, partition=partition)

    def flow_ampliated(self, z: FockOperator, partition=None) -> FockOperator:
        return stopped_flow_ampliated(self.cfg, self.stop_time, z, partition=partition)

    def compress_admissible(self, x: FockOperator) -> np.ndarray:
        """Pull an admissible operator back to the post-S model coordinates."""
        if x.support_horizon > self.admissible_horizon:
            raise HorizonError(
                f"operator horizon {x.support_horizon} exceeds the admissible "
                f"horizon {self.admissible_horizon}"
            )
        if x.ampliated:
            raise ValueError("compress_admissible expects a plain operator")
        return x.matrix[: self.adm_dim, : self.adm_dim]

    def factor_join(self, x: np.ndarray, y: FockVector) -> FockVector:
        """j_S applied to (x in range E_S) (x) (y admissible)."""
        if y.support_horizon > self.admissible_horizon:
            raise HorizonError("second factor is not admissible")
        coeff = self.pre_basis.conj().T @ np.asarray(x, dtype=complex)
        model = np.kron(coeff, y.amplitudes[: self.adm_dim])
        return FockVector(self.cfg, self.j_map @ model)

    def embed_pre(self, a: np.ndarray) -> FockOperator:
        """``j_S (A (x) I) j_S*`` for A given in the pre-basis coordinates."""
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.pre_rank, self.pre_rank):
            raise ValueError(
                f"pre-space operator must be {self.pre_rank}x{self.pre_rank}"
            )
        mid = np.kron(a, np.eye(self.adm_dim, dtype=complex))
        return FockOperator(self.cfg, self.j_map @ mid @ self.j_map.conj().T)

    def compress_pre(self, x: np.ndarray) -> np.ndarray:
        """Restrict a Fock operator to range(E_S) in the pre-basis."""
        return self.pre_basis.conj().T @ np.asarray(x, dtype=complex) @ self.pre_basis


def build_bundle(cfg: SliceConfig, s_time: DiscreteStopTime) -> StoppedBundle:
    """Construct projection, shift, pre-basis and factorisation isometry."""
    projection = stopped_projection(cfg, s_time)
    shift_matrix = stopped_shift(cfg, s_time)
    vals, vecs = np.linalg.eigh(projection.matrix)
    pre_basis = np.ascontiguousarray(vecs[:, vals > 0.5])
    j_map = _factorisation_isometry(cfg, s_time, pre_basis)
    return StoppedBundle(
        cfg=cfg,
        stop_time=s_time,
        projection=projection,
        shift_matrix=shift_matrix,
        pre_basis=pre_basis,
        j_map=j_map,
    )


def _factorisation_isometry(
    cfg: SliceConfig, s_time: DiscreteStopTime, pre_basis: np.ndarray
) -> np.ndarray:
    """Column (x, y): sum_j splice of (S({t_j}) b_x before t_j) with (y after t_j).

    Adaptedness puts ``S({t_j}) b_x`` inside range(E_{t_j}), i.e. in the
    first ``slot_dim**t_j`` coordinates, so the splice is a kron of index
    blocks and the sum over atoms lands in mutually orthogonal subspaces.
    """
    sd = cfg.slot_dim
    adm = cfg.pre_dim(cfg.n_slots - s_time.max_atom)
    rank = pre_basis.shape[1]
    j3 = np.zeros((cfg.fock_dim, rank, adm), dtype=complex)
    for t_j, m in s_time.atoms:
        d_pre = sd**t_j
        d_post = cfg.fock_dim // d_pre
        w = (m @ pre_basis)[:d_pre, :]  # pre-stop content of each basis vector
        view = j3.reshape(d_post, d_pre, rank, adm)
        for y in range(adm):
            view[y, :, :, y] += w
    return j3.reshape(cfg.fock_dim, rank * adm)


# ---------------------------------------------------------------------------
# identity reports used by tests and the harness
# ---------------------------------------------------------------------------


def factorisation_intertwining_defect(
    bundle: StoppedBundle, x: FockOperator
) -> float:
    """Max-entry deviation of ``sigma_S(X) j_S - j_S (I (x) X_adm)``."""
    lhs = bundle.flow(x).matrix @ bundle.j_map
    rhs = bundle.j_map @ np.kron(
        np.eye(bundle.pre_rank, dtype=complex), bundle.compress_admissible(x)
    )
    return float(np.max(np.abs(lhs - rhs)))


def factorisation_conjugation_defect(bundle: StoppedBundle, x: FockOperator) -> float:
    """Deviation of the conjugated form on range(j_S):
    ``sigma_S(X) j_S j_S* - j_S (I (x) X_adm) j_S*``."""
    p_range = bundle.range_projection
    lhs = bundle.flow(x).matrix @ p_range
    mid = np.kron(np.eye(bundle.pre_rank, dtype=complex), bundle.compress_admissible(x))
    rhs = bundle.j_map @ mid @ bundle.j_map.conj().T
    return float(np.max(np.abs(lhs - rhs)))


def factorisation_ampliated_defect(bundle: StoppedBundle, z: FockOperator) -> float:
    """Ampliated intertwining: ``sigma~_S(Z) j~_S = j~_S (I (x) Z_adm)``."""
    cfg = bundle.cfg
    if not z.ampliated:
        raise ValueError("expected an ampliated operator")
    if z.support_horizon > bundle.admissible_horizon:
        raise HorizonError("operator horizon exceeds the admissible horizon")
    z_adm = compress_block(cfg, z.matrix, bundle.admissible_horizon, True)
    jt = bundle.j_map_ampliated
    lhs = bundle.flow_ampliated(z).matrix @ jt
    rhs = jt @ np.kron(np.eye(bundle.pre_rank, dtype=complex), z_adm)
    return float(np.max(np.abs(lhs - rhs)))


def partition_stability_defect(
    cfg: SliceConfig, s_time: DiscreteStopTime, partition
) -> float:
    """Worst deviation of E/Gamma from their atom-partition values when
    recomputed over a refining partition (should be ~1e-16, bounded 1e-12)."""
    d1 = np.max(
        np.abs(
            stopped_projection(cfg, s_time).matrix
            - stopped_projection(cfg, s_time, partition=partition).matrix
        )
    )
    d2 = np.max(
        np.abs(
            stopped_shift(cfg, s_time)
            - stopped_shift(cfg, s_time, partition=partition)
        )
    )
    return float(max(d1, d2))
