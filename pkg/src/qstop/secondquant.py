"""Second-quantised building blocks on the sliced Fock space.

Provides the conditional-vacuum projections ``E_t``, the shift isometries
``Gamma_s`` (with their admissible-domain contract), the tail projections
``P_[t`` induced by a one-particle projection ``p``, and the flow
endomorphisms ``sigma_t`` together with their initial-space ampliations.

With the little-endian slot ordering every one of these is an exact index
construction: ``E_t`` is a diagonal indicator, ``Gamma_s`` a partial
permutation, and ``sigma_t`` a block embedding.
"""

from __future__ import annotations

import numpy as np

from .errors import HorizonError
from .fock import (
    TOL,
    FockOperator,
    FockVector,
    SliceConfig,
    ampliate,
    compress_block,
    embed_block,
    identity_operator,
    slot_operator,
)


def check_projection(p: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Validate p = p* = p^2 within tolerance and return it as a complex array."""
    p = np.asarray(p, dtype=complex)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("projection must be a square matrix")
    herm = float(np.max(np.abs(p - p.conj().T)))
    idem = float(np.max(np.abs(p @ p - p)))
    if herm > tol or idem > tol:
        raise ValueError(
            f"not an orthogonal projection (hermiticity defect {herm:.3e}, "
            f"idempotency defect {idem:.3e})"
        )
    return p


def conditional_vacuum(cfg: SliceConfig, t: int) -> FockOperator:
    """Projection onto states that are per-slot vacuum from slot t on.

    ``t = 0`` projects onto the vacuum line, ``t = n_slots`` is the identity
    (the at-infinity convention on a finite grid).
    """
    if not 0 <= t <= cfg.n_slots:
        raise ValueError(f"slot index {t} out of range [0, {cfg.n_slots}]")
    if t == cfg.n_slots:
        return identity_operator(cfg)
    diag = np.zeros(cfg.fock_dim, dtype=complex)
    diag[: cfg.pre_dim(t)] = 1.0
    return FockOperator(
        cfg,
        np.diag(diag),
        ampliated=False,
        support_horizon=t,
        tail=np.zeros((cfg.d, cfg.d), dtype=complex),
    )


def shift(cfg: SliceConfig, s: int) -> FockOperator:
    """Right shift by s slots, vacuum filled in front.

    Returned as a partial isometry: basis states occupying the last s slots
    are annihilated, so ``Gamma_s* Gamma_s`` is the projection onto the
    admissible subspace (support horizon <= n_slots - s) where the shift is
    isometric.  Use :func:`apply_shift` to get the domain check.
    """
    if not 0 <= s <= cfg.n_slots:
        raise ValueError(f"shift distance {s} out of range [0, {cfg.n_slots}]")
    mat = np.zeros((cfg.fock_dim, cfg.fock_dim), dtype=complex)
    keep = cfg.pre_dim(cfg.n_slots - s)
    src = np.arange(keep)
    mat[src * cfg.slot_dim**s, src] = 1.0
    return FockOperator(cfg, mat, ampliated=False, support_horizon=cfg.n_slots)


def apply_shift(cfg: SliceConfig, s: int, v: FockVector) -> FockVector:
    """Shift a vector right by s slots; errors if content would fall off the grid."""
    if v.ampliated:
        raise ValueError("apply_shift expects a plain Fock vector")
    if v.support_horizon > cfg.n_slots - s:
        raise HorizonError(
            f"cannot shift by {s}: vector has support horizon "
            f"{v.support_horizon} > {cfg.n_slots - s}"
        )
    keep = cfg.pre_dim(cfg.n_slots - s)
    out = np.zeros(cfg.fock_dim, dtype=complex)
    out[np.arange(keep) * cfg.slot_dim**s] = v.amplitudes[:keep]
    return FockVector(
        cfg, out, ampliated=False, support_horizon=min(v.support_horizon + s, cfg.n_slots)
    )


def p_tail_projection(cfg: SliceConfig, p: np.ndarray, t: int) -> FockOperator:
    """Identity before slot t, second quantisation of p on every slot >= t.

    For ``p = I`` this is the identity; for ``p = 0`` it coincides with the
    conditional vacuum at t.
    """
    p = check_projection(p)
    if p.shape != (cfg.d, cfg.d):
        raise ValueError(f"projection must act on C^{cfg.d}")
    if not 0 <= t <= cfg.n_slots:
        raise ValueError(f"slot index {t} out of range [0, {cfg.n_slots}]")
    if np.max(np.abs(p - np.eye(cfg.d))) <= TOL:
        return identity_operator(cfg)
    core = np.eye(cfg.pre_dim(t), dtype=complex)
    mat = embed_block(cfg, core, 0, t, p, ampliated=False)
    return FockOperator(cfg, mat, ampliated=False, support_horizon=t, tail=p)


def ccr_flow(cfg: SliceConfig, t: int, x: FockOperator) -> FockOperator:
    """Flow endomorphism: relabel the content of x from slots [0, h) to
    slots [t, t + h), identity before, the declared tail after.

    Exact basis-index construction.  Requires ``t + h <= n_slots`` where h is
    the operator's support horizon; handles plain and ampliated operators.
    """
    if not 0 <= t <= cfg.n_slots:
        raise ValueError(f"slot index {t} out of range [0, {cfg.n_slots}]")
    h = x.support_horizon
    if t + h > cfg.n_slots:
        raise HorizonError(
            f"flow by {t} needs support horizon <= {cfg.n_slots - t}, got {h}"
        )
    core = compress_block(cfg, x.matrix, h, x.ampliated)
    mat = embed_block(cfg, core, t, h, x.tail, x.ampliated)
    return FockOperator(
        cfg,
        mat,
        ampliated=x.ampliated,
        support_horizon=t + h,
        tail=x.tail,
    )


def ccr_flow_ampliated(cfg: SliceConfig, t: int, z: FockOperator) -> FockOperator:
    """id (x) sigma_t, accepting plain operators by ampliating them first."""
    if not z.ampliated:
        z = ampliate(z)
    return ccr_flow(cfg, t, z)
