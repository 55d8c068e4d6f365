"""p-adapted isometric cocycles on initial (x) Fock space and their stopping.

A cocycle is generated by one time-homogeneous unitary ``W`` on
initial (x) slot space (repeated-interaction form): the first step is
``V_1 = W_(slot 0) (I (x) P_[1)`` and later steps follow the recursion
``V_k = Vhat_{k-1} sigma~_{k-1}(V_1)``.  On the discrete grid this family
satisfies the cocycle identity exactly for every unitary ``W`` and every
one-particle projection ``p``; the builder validates the identity, the
isometry of the identity-adapted projections ``Vhat_t`` and the p-adapted
factorised form anyway, rejecting generators that break them numerically.

Stopping replaces the time parameter by a discrete stop time:
``V_S = sum_j V_{t_j} S~({t_j})`` (a contraction), and the stopped cocycle
identity ``V_{S * T} = Vhat_S sigma~_S(V_T)`` is checked by computing both
sides through independent code paths.  The stopped flows ``a -> V_S (a (x)
I) V_S*`` and ``a -> V_S (a (x) E_S) V_S*`` give inner, generally
non-unital *-homomorphism families whose composition laws are verified the
same way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CocycleBuildError, HorizonError
from .fock import (
    TOL,
    FockOperator,
    FockVector,
    SliceConfig,
    ampliate,
    compress_block,
    embed_block,
    identity_operator,
    initial_operator,
)
from .secondquant import ccr_flow, check_projection, p_tail_projection
from .stoptime import DiscreteStopTime, convolve
from .stopped import stopped_flow, stopped_projection, stopped_projection_ampliated


def embed_one_step(cfg: SliceConfig, w: np.ndarray, slot: int) -> np.ndarray:
    """Place a unitary on initial (x) (one slot) into the joint space."""
    ki, sd = cfg.k_ini, cfg.slot_dim
    w4 = np.asarray(w, dtype=complex).reshape(ki, sd, ki, sd)
    d_lo = sd**slot
    d_hi = sd ** (cfg.n_slots - slot - 1)
    out = np.einsum(
        "usvt,cC,aA->ucsavCtA",
        w4,
        np.eye(d_hi, dtype=complex),
        np.eye(d_lo, dtype=complex),
        optimize=True,
    )
    return out.reshape(cfg.joint_dim, cfg.joint_dim)


@dataclass(frozen=True, eq=False)
class Cocycle:
    """Eagerly cached family V_0..V_n with its identity-adapted projections."""

    cfg: SliceConfig
    p: np.ndarray
    one_step: np.ndarray
    v: tuple[FockOperator, ...]
    v_hat: tuple[FockOperator, ...]

    @property
    def is_identity_adapted(self) -> bool:
        return bool(np.max(np.abs(self.p - np.eye(self.cfg.d))) <= TOL)

    @property
    def is_vacuum_adapted(self) -> bool:
        return bool(np.max(np.abs(self.p)) <= TOL)


def build_cocycle(
    cfg: SliceConfig, p: np.ndarray, w: np.ndarray, tol: float = TOL
) -> Cocycle:
    """Build and validate the cocycle generated by one unitary step.

    Raises :class:`CocycleBuildError` when ``w`` is not unitary, ``p`` is not
    a projection, or the built family fails the p-adapted factorisation or
    the cocycle identity.
    """
    p = np.asarray(p, dtype=complex).reshape(cfg.d, cfg.d)
    try:
        check_projection(p, tol)
    except ValueError as exc:
        raise CocycleBuildError(f"tail projection invalid: {exc}") from exc
    dim = cfg.k_ini * cfg.slot_dim
    w = np.asarray(w, dtype=complex).reshape(dim, dim)
    unit = float(np.max(np.abs(w.conj().T @ w - np.eye(dim))))
    if unit > tol:
        raise CocycleBuildError(f"one-step matrix is not unitary (defect {unit:.3e})")

    tails = [
        ampliate(p_tail_projection(cfg, p, t)) for t in range(cfg.n_slots + 1)
    ]
    # At t = 0 the factorised form forces V_0 = I (x) P_[0 (equal to the
    # identity only when p = I); the cocycle identity at a zero increment
    # needs exactly this, and no stopped object ever consumes V_0 because
    # atoms at time zero are forbidden.
    v: list[FockOperator] = [tails[0]]
    v_hat: list[FockOperator] = [identity_operator(cfg, ampliated=True)]
    v1 = FockOperator(
        cfg,
        embed_one_step(cfg, w, 0),
        ampliated=True,
        support_horizon=1,
    ) @ tails[1]
    v.append(v1)
    v_hat.append(_identity_adapted(v1))
    for k in range(2, cfg.n_slots + 1):
        step = ccr_flow(cfg, k - 1, v1)
        v_k = v_hat[k - 1] @ step
        # the recursion keeps the p-adapted form; retag at the new horizon
        v_k = FockOperator(
            cfg, v_k.matrix, ampliated=True, support_horizon=k, tail=v_k.tail
        )
        v.append(v_k)
        v_hat.append(_identity_adapted(v_k))

    _validate_family(cfg, v, v_hat, tails, tol)
    return Cocycle(cfg=cfg, p=p, one_step=w, v=tuple(v), v_hat=tuple(v_hat))


def _identity_adapted(v_t: FockOperator) -> FockOperator:
    """Replace the tail factor by the identity: V_t -> V_t) (x) I."""
    cfg = v_t.cfg
    core = compress_block(cfg, v_t.matrix, v_t.support_horizon, ampliated=True)
    mat = embed_block(cfg, core, 0, v_t.support_horizon, None, ampliated=True)
    return FockOperator(
        cfg, mat, ampliated=True, support_horizon=v_t.support_horizon
    )


def _validate_family(cfg, v, v_hat, tails, tol):
    eye = np.eye(cfg.joint_dim)
    for k in range(cfg.n_slots + 1):
        iso = float(np.max(np.abs(v_hat[k].matrix.conj().T @ v_hat[k].matrix - eye)))
        if iso > tol:
            raise CocycleBuildError(
                f"identity-adapted projection at t={k} is not an isometry "
                f"(defect {iso:.3e})"
            )
        adapted = float(
            np.max(np.abs(v[k].matrix - (v_hat[k] @ tails[k]).matrix))
        )
        if adapted > tol:
            raise CocycleBuildError(
                f"p-adapted factorisation fails at t={k} (defect {adapted:.3e})"
            )
    dev = cocycle_identity_defect(cfg, v, v_hat)
    if dev > 1e-10:
        raise CocycleBuildError(f"cocycle identity fails (defect {dev:.3e})")


def cocycle_identity_defect(cfg, v, v_hat) -> float:
    """Max-entry defect of V_{s+t} = Vhat_s sigma~_s(V_t) over all splits."""
    worst = 0.0
    for s in range(cfg.n_slots + 1):
        for t in range(cfg.n_slots + 1 - s):
            rhs = v_hat[s] @ ccr_flow(cfg, s, v[t])
            worst = max(worst, float(np.max(np.abs(v[s + t].matrix - rhs.matrix))))
    return worst


@dataclass(frozen=True, eq=False)
class StoppedCocycleResult:
    """``V_S`` and its identity-adapted companion, with the contraction bound."""

    v_s: FockOperator
    v_hat_s: FockOperator
    norm: float


def stop_cocycle(
    cocycle: Cocycle, s_time: DiscreteStopTime, partition=None
) -> StoppedCocycleResult:
    """Atom-weighted stopping of the cocycle; exact at the atom partition."""
    cfg = cocycle.cfg
    if s_time.max_atom > cfg.n_slots:
        raise HorizonError("stop time extends past the grid")
    masses = (
        [(t, s_time.atom(t)) for t in s_time.times]
        if partition is None
        else _partition_masses(s_time, partition)
    )
    v_mat = np.zeros((cfg.joint_dim, cfg.joint_dim), dtype=complex)
    vh_mat = np.zeros_like(v_mat)
    eye_ini = np.eye(cfg.k_ini, dtype=complex)
    for t, m in masses:
        m_amp = np.kron(eye_ini, m)
        v_mat = v_mat + cocycle.v[t].matrix @ m_amp
        vh_mat = vh_mat + cocycle.v_hat[t].matrix @ m_amp
    tail = None if cocycle.is_identity_adapted else cocycle.p
    v_s = FockOperator(
        cfg, v_mat, ampliated=True, support_horizon=s_time.max_atom, tail=tail
    )
    v_hat_s = FockOperator(
        cfg, vh_mat, ampliated=True, support_horizon=s_time.max_atom
    )
    norm = v_s.norm2()
    if norm > 1.0 + TOL:
        raise CocycleBuildError(f"stopped cocycle is not a contraction (|V_S| = {norm})")
    return StoppedCocycleResult(v_s=v_s, v_hat_s=v_hat_s, norm=norm)


def _partition_masses(s_time: DiscreteStopTime, partition):
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


@dataclass(frozen=True)
class DeviationReport:
    """Two-sided comparison of an operator identity."""

    max_entry: float
    op_norm: float


def _compare(lhs: np.ndarray, rhs: np.ndarray) -> DeviationReport:
    diff = lhs - rhs
    return DeviationReport(
        max_entry=float(np.max(np.abs(diff))),
        op_norm=float(np.linalg.norm(diff, 2)),
    )


def stopped_cocycle_identity_check(
    cocycle: Cocycle, s_time: DiscreteStopTime, t_time: DiscreteStopTime
) -> DeviationReport:
    """Both sides of ``V_{S * T} = Vhat_S sigma~_S(V_T)``, independently.

    Left side: convolve the stop times and stop the cocycle once.  Right
    side: stop at S and at T separately, push ``V_T`` through the stopped
    flow (its p-tail tag makes the relabelling exact) and multiply.
    """
    cfg = cocycle.cfg
    if s_time.max_atom + t_time.max_atom > cfg.n_slots:
        raise HorizonError("stop times do not fit on the grid together")
    lhs = stop_cocycle(cocycle, convolve(s_time, t_time)).v_s.matrix
    stopped_s = stop_cocycle(cocycle, s_time)
    v_t = stop_cocycle(cocycle, t_time).v_s
    rhs = stopped_s.v_hat_s.matrix @ stopped_flow(cfg, s_time, v_t).matrix
    return _compare(lhs, rhs)


# ---------------------------------------------------------------------------
# inner flows obtained by stopping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowHomReport:
    """Homomorphism diagnostics of a stopped inner flow on B(initial)."""

    multiplicativity: float
    star: float
    unit: float  # deviation of flow(I) from V_S V_S*

    @property
    def worst(self) -> float:
        return max(self.multiplicativity, self.star, self.unit)


def _matrix_units(k: int) -> list[np.ndarray]:
    units = []
    for a in range(k):
        for b in range(k):
            e = np.zeros((k, k), dtype=complex)
            e[a, b] = 1.0
            units.append(e)
    return units


def _hom_report(cfg: SliceConfig, phi, v_s_mat: np.ndarray) -> FlowHomReport:
    """Check multiplicativity/adjoints of ``phi`` on all matrix units."""
    k = cfg.k_ini
    units = _matrix_units(k)
    images = [phi(e) for e in units]
    mult = 0.0
    star = 0.0
    for i, e in enumerate(units):
        for j, f in enumerate(units):
            lhs = images[i] @ images[j]
            rhs = phi(e @ f)
            mult = max(mult, float(np.max(np.abs(lhs - rhs))))
        adj = phi(e.conj().T)
        star = max(star, float(np.max(np.abs(images[i].conj().T - adj))))
    unit = float(np.max(np.abs(phi(np.eye(k)) - v_s_mat @ v_s_mat.conj().T)))
    return FlowHomReport(multiplicativity=mult, star=star, unit=unit)


def eh_flow_identity(
    cocycle: Cocycle, s_time: DiscreteStopTime, a: np.ndarray
) -> tuple[FockOperator, FlowHomReport]:
    """``a -> V_S (a (x) I) V_S*`` for an identity-adapted cocycle.

    Returns the image of ``a`` and the homomorphism report over the full
    matrix-unit basis (the isometry ``V_S* V_S = I`` makes the flow
    multiplicative).
    """
    if not cocycle.is_identity_adapted:
        raise CocycleBuildError("flow requires an identity-adapted cocycle")
    cfg = cocycle.cfg
    v_s = stop_cocycle(cocycle, s_time).v_s

    def phi(b: np.ndarray) -> np.ndarray:
        return v_s.matrix @ initial_operator(cfg, b).matrix @ v_s.matrix.conj().T

    report = _hom_report(cfg, phi, v_s.matrix)
    image = FockOperator(
        cfg, phi(np.asarray(a, dtype=complex)), ampliated=True,
        support_horizon=s_time.max_atom,
    )
    return image, report


def eh_flow_vacuum(
    cocycle: Cocycle, s_time: DiscreteStopTime, a: np.ndarray
) -> tuple[FockOperator, FlowHomReport]:
    """``a -> V_S (a (x) E_S) V_S*`` for a vacuum-adapted cocycle.

    Here ``V_S* V_S`` is the ampliated stopped projection, which still makes
    the flow multiplicative; the image of the identity again equals
    ``V_S V_S*``.
    """
    if not cocycle.is_vacuum_adapted:
        raise CocycleBuildError("vacuum flow requires a vacuum-adapted cocycle")
    cfg = cocycle.cfg
    v_s = stop_cocycle(cocycle, s_time).v_s
    e_s = stopped_projection(cfg, s_time).matrix

    def phi(b: np.ndarray) -> np.ndarray:
        mid = np.kron(np.asarray(b, dtype=complex), e_s)
        return v_s.matrix @ mid @ v_s.matrix.conj().T

    report = _hom_report(cfg, phi, v_s.matrix)
    image = FockOperator(
        cfg, phi(np.asarray(a, dtype=complex)), ampliated=True,
        support_horizon=s_time.max_atom,
        tail=np.zeros((cfg.d, cfg.d), dtype=complex),
    )
    return image, report


def eh_composition_defect(
    cocycle: Cocycle, s_time: DiscreteStopTime, t_time: DiscreteStopTime
) -> float:
    """Composition law of the stopped flows over all matrix units.

    Identity-adapted: ``j_{S*T}(a) = V_S sigma~_S(j_T(a)) V_S*``;
    vacuum-adapted: ``k_{S*T}(a) = Vhat_S sigma~_S(k_T(a)) Vhat_S*``.
    Both sides are evaluated through independent paths (convolution versus
    flow-of-flow).
    """
    cfg = cocycle.cfg
    if s_time.max_atom + t_time.max_atom > cfg.n_slots:
        raise HorizonError("stop times do not fit on the grid together")
    u_time = convolve(s_time, t_time)
    stopped_s = stop_cocycle(cocycle, s_time)
    v_u = stop_cocycle(cocycle, u_time).v_s.matrix
    v_t = stop_cocycle(cocycle, t_time).v_s.matrix
    vacuum = cocycle.is_vacuum_adapted
    if vacuum:
        e_t = stopped_projection(cfg, t_time).matrix
        e_u = stopped_projection(cfg, u_time).matrix
        outer = stopped_s.v_hat_s.matrix
        tail = np.zeros((cfg.d, cfg.d), dtype=complex)
    else:
        outer = stopped_s.v_s.matrix
    worst = 0.0
    for e in _matrix_units(cfg.k_ini):
        if vacuum:
            inner = np.kron(e, e_t)
            lhs = v_u @ np.kron(e, e_u) @ v_u.conj().T
            inner_h = t_time.max_atom
            inner_tail = tail
        else:
            inner = np.kron(e, np.eye(cfg.fock_dim, dtype=complex))
            lhs = v_u @ inner @ v_u.conj().T
            inner_h = t_time.max_atom
            inner_tail = None
        flow_t = FockOperator(
            cfg,
            v_t @ inner @ v_t.conj().T,
            ampliated=True,
            support_horizon=inner_h,
            tail=inner_tail,
        )
        rhs = outer @ stopped_flow(cfg, s_time, flow_t).matrix @ outer.conj().T
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def vacuum_composition_defect(
    cfg: SliceConfig, s_time: DiscreteStopTime, t_time: DiscreteStopTime
) -> float:
    """Deviation of ``E_{S*T} = sigma_S(E_T)``."""
    e_t = stopped_projection(cfg, t_time)
    lhs = stopped_projection(cfg, convolve(s_time, t_time)).matrix
    rhs = stopped_flow(cfg, s_time, e_t).matrix
    return float(np.max(np.abs(lhs - rhs)))


def isometry_defect(cocycle: Cocycle, s_time: DiscreteStopTime) -> float:
    """``V_S* V_S`` against the identity (identity-adapted) or the ampliated
    stopped projection (vacuum-adapted)."""
    cfg = cocycle.cfg
    v_s = stop_cocycle(cocycle, s_time).v_s.matrix
    gram = v_s.conj().T @ v_s
    if cocycle.is_identity_adapted:
        target = np.eye(cfg.joint_dim, dtype=complex)
    elif cocycle.is_vacuum_adapted:
        target = stopped_projection_ampliated(cfg, s_time).matrix
    else:
        raise CocycleBuildError(
            "isometry target is defined for identity- and vacuum-adapted cocycles"
        )
    return float(np.max(np.abs(gram - target)))


def cocycle_continuity_probe(
    cocycle: Cocycle,
    approximants: list[DiscreteStopTime],
    target: DiscreteStopTime,
    probes: list[FockVector],
) -> list[list[float]]:
    """Per-approximant, per-probe values of ``|(V_{S_n} - V_S) z|``."""
    v_target = stop_cocycle(cocycle, target).v_s.matrix
    rows = []
    for s_n in approximants:
        v_n = stop_cocycle(cocycle, s_n).v_s.matrix
        delta = v_n - v_target
        rows.append(
            [float(np.linalg.norm(delta @ z.amplitudes)) for z in probes]
        )
    return rows
