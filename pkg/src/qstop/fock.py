"""Truncated model of Boson Fock space over time-sliced multi-channel noise.

The half line is discretised into ``n_slots`` bins of width ``dt``.  Each bin
carries a truncated symmetric Fock space over the channel space C^d, keeping
occupation vectors ``alpha`` with ``|alpha| <= cap``; the full space is the
tensor product of the slot spaces, optionally tensored with an initial space
C^k_ini ("ampliated" objects).

Basis ordering is little-endian in the slots: slot 0 varies fastest, so the
global index of a product basis state is ``sum_j i_j * slot_dim**j``.  Two
consequences are used everywhere:

* splitting at slot ``t`` is a contiguous reshape, and
* a vector is vacuum in every slot ``>= h`` iff its support lies in the
  first ``slot_dim**h`` coordinates (the per-slot vacuum has index 0).

Every vector and operator carries a ``support_horizon``: the slot index
beyond which the vector is per-slot vacuum, respectively beyond which the
operator acts as the second quantisation of a fixed one-particle ``tail``
(identity when ``tail is None``).  This horizon discipline is what makes
shifts and flow endomorphisms exact on their admissible domains.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmpliationError, DimensionLimitError

# Global numerical tolerance for projection/isometry/identity assertions.
TOL = 1e-9
# Inner tolerance for algebraically exact reshapes and partition-stable sums.
STRICT_TOL = 1e-12


@dataclass(frozen=True)
class SliceConfig:
    """Grid of time slots plus truncation and initial-space parameters.

    Attributes:
        n_slots: number of time bins.
        dt: bin width.
        d: multiplicity (channel) dimension.
        cap: maximal total occupation per slot.
        k_ini: initial-space dimension.
        max_fock_dim: hard cap on the dense Fock dimension.
    """

    n_slots: int
    dt: float
    d: int
    cap: int
    k_ini: int = 1
    max_fock_dim: int = 4096

    def __post_init__(self):
        if self.n_slots < 1 or self.d < 1 or self.k_ini < 1:
            raise ValueError("n_slots, d and k_ini must be positive")
        if self.cap < 0:
            raise ValueError("cap must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.fock_dim > self.max_fock_dim:
            raise DimensionLimitError(
                f"fock_dim = {self.slot_dim}**{self.n_slots} = {self.fock_dim} "
                f"exceeds the configured limit {self.max_fock_dim}"
            )

    @property
    def slot_dim(self) -> int:
        """Number of occupation vectors alpha in Z_+^d with |alpha| <= cap."""
        return math.comb(self.cap + self.d, self.d)

    @property
    def fock_dim(self) -> int:
        return self.slot_dim**self.n_slots

    @property
    def joint_dim(self) -> int:
        return self.k_ini * self.fock_dim

    def pre_dim(self, t: int) -> int:
        """Dimension of the slot block [0, t)."""
        return self.slot_dim**t

    def dim(self, ampliated: bool) -> int:
        return self.joint_dim if ampliated else self.fock_dim


def slot_occupations(cfg: SliceConfig) -> tuple[tuple[int, ...], ...]:
    """Per-slot occupation vectors, lexicographically ordered; vacuum first."""
    occs = tuple(
        a
        for a in itertools.product(range(cfg.cap + 1), repeat=cfg.d)
        if sum(a) <= cfg.cap
    )
    return occs


def enumerate_basis(cfg: SliceConfig) -> list[tuple[tuple[int, ...], ...]]:
    """Ordered multi-slot occupation list for the full Fock basis.

    Entry ``k`` is the tuple ``(alpha_slot0, ..., alpha_slot{n-1})`` of the
    basis state with global index ``k``; slot 0 varies fastest and per-slot
    occupations are lexicographic, so the order is stable across runs.
    """
    occs = slot_occupations(cfg)
    sd = cfg.slot_dim
    out = []
    for k in range(cfg.fock_dim):
        digits = []
        r = k
        for _ in range(cfg.n_slots):
            digits.append(occs[r % sd])
            r //= sd
        out.append(tuple(digits))
    return out


def slot_operator(cfg: SliceConfig, a: np.ndarray) -> np.ndarray:
    """Second quantisation of a one-particle operator on a single slot.

    Acts as ``a^{(x) k}`` restricted to the symmetric subspace on the
    k-particle sector; computed from the occupation basis via multiset
    arrangements.  Exact for the truncated slot space.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape != (cfg.d, cfg.d):
        raise ValueError(f"one-particle operator must be {cfg.d}x{cfg.d}")
    occs = slot_occupations(cfg)
    sd = len(occs)
    out = np.zeros((sd, sd), dtype=complex)
    arrangements = {
        occ: sorted(
            set(
                itertools.permutations(
                    [c for c, n in enumerate(occ) for _ in range(n)]
                )
            )
        )
        for occ in occs
    }
    for i, beta in enumerate(occs):
        kb = sum(beta)
        for j, alpha in enumerate(occs):
            if sum(alpha) != kb:
                continue
            if kb == 0:
                out[i, j] = 1.0
                continue
            total = 0.0 + 0.0j
            for wb in arrangements[beta]:
                for wa in arrangements[alpha]:
                    term = 1.0 + 0.0j
                    for cb, ca in zip(wb, wa):
                        term *= a[cb, ca]
                    total += term
            norm = math.sqrt(
                _multifact(beta) * _multifact(alpha)
            ) / math.factorial(kb)
            out[i, j] = norm * total
    return out


def _multifact(occ) -> int:
    r = 1
    for n in occ:
        r *= math.factorial(n)
    return r


def tail_block(cfg: SliceConfig, tail: np.ndarray | None, n_tail: int) -> np.ndarray:
    """``Gamma(tail)^{(x) n_tail}`` on the last ``n_tail`` slots (identity if None)."""
    if n_tail == 0:
        return np.eye(1, dtype=complex)
    per = (
        np.eye(cfg.slot_dim, dtype=complex)
        if tail is None
        else slot_operator(cfg, tail)
    )
    out = per
    for _ in range(n_tail - 1):
        out = np.kron(per, out)
    return out


def _tail_matmul(ta: np.ndarray | None, tb: np.ndarray | None):
    if ta is None:
        return None if tb is None else np.array(tb)
    if tb is None:
        return np.array(ta)
    return ta @ tb


def _tails_equal(ta, tb) -> bool:
    if ta is None or tb is None:
        return ta is None and tb is None
    return ta.shape == tb.shape and bool(np.max(np.abs(ta - tb)) <= TOL)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """A C^d-valued step function on the grid: one value per bin."""

    cfg: SliceConfig
    values: np.ndarray  # shape (n_slots, d)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).reshape(
            self.cfg.n_slots, self.cfg.d
        )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def inner(self, other: "StepFunction") -> complex:
        """L2 inner product <self, other> = sum_j <f_j, g_j> dt."""
        return complex(np.vdot(self.values, other.values) * self.cfg.dt)

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self).real, 0.0))


def zero_step_function(cfg: SliceConfig) -> StepFunction:
    return StepFunction(cfg, np.zeros((cfg.n_slots, cfg.d), dtype=complex))


@dataclass(frozen=True, eq=False)
class FockVector:
    """Dense vector on the truncated Fock space (or on initial (x) Fock).

    ``support_horizon`` declares the vector per-slot vacuum in every slot
    ``>= support_horizon``; equivalently all amplitudes with index
    ``>= slot_dim**support_horizon`` (per initial-space block) vanish.
    """

    cfg: SliceConfig
    amplitudes: np.ndarray
    ampliated: bool = False
    support_horizon: int | None = None

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        expect = self.cfg.dim(self.ampliated)
        if amps.shape != (expect,):
            raise ValueError(
                f"amplitude length {amps.shape[0]} does not match dimension {expect}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        h = self.support_horizon
        if h is None:
            h = self.cfg.n_slots
        if not 0 <= h <= self.cfg.n_slots:
            raise ValueError(f"support_horizon {h} out of range")
        object.__setattr__(self, "support_horizon", h)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "FockVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def horizon_defect(self) -> float:
        """Largest amplitude sitting on a state occupied at or past the horizon."""
        dh = self.cfg.pre_dim(self.support_horizon)
        if self.ampliated:
            blocks = self.amplitudes.reshape(self.cfg.k_ini, self.cfg.fock_dim)
            off = blocks[:, dh:]
        else:
            off = self.amplitudes[dh:]
        return float(np.max(np.abs(off))) if off.size else 0.0

    def validate(self, tol: float = TOL) -> None:
        defect = self.horizon_defect()
        if defect > tol:
            raise ValueError(
                f"vector occupies slots >= horizon {self.support_horizon} "
                f"(defect {defect:.3e})"
            )


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator on the truncated Fock space (or on initial (x) Fock).

    Beyond ``support_horizon`` the operator acts per slot as the second
    quantisation of ``tail`` (identity when ``tail is None``).  The vacuum
    projection at later times and the tail projections of p-adapted cocycles
    are the vacuum-tail (``tail = 0``) and ``tail = p`` cases; tracking the
    tail is what lets the flow endomorphisms relabel such operators exactly.
    """

    cfg: SliceConfig
    matrix: np.ndarray
    ampliated: bool = False
    support_horizon: int | None = None
    tail: np.ndarray | None = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        expect = self.cfg.dim(self.ampliated)
        if mat.shape != (expect, expect):
            raise ValueError(
                f"matrix shape {mat.shape} does not match dimension {expect}"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        h = self.support_horizon
        if h is None:
            h = self.cfg.n_slots
        if not 0 <= h <= self.cfg.n_slots:
            raise ValueError(f"support_horizon {h} out of range")
        object.__setattr__(self, "support_horizon", h)
        if self.tail is not None:
            t = np.array(self.tail, dtype=complex).reshape(self.cfg.d, self.cfg.d)
            t.setflags(write=False)
            object.__setattr__(self, "tail", t)

    @property
    def dag(self) -> "FockOperator":
        tail = None if self.tail is None else self.tail.conj().T
        return FockOperator(
            self.cfg,
            self.matrix.conj().T,
            ampliated=self.ampliated,
            support_horizon=self.support_horizon,
            tail=tail,
        )

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            if self.ampliated != other.ampliated:
                raise AmpliationError("cannot compose ampliated with plain operator")
            return FockOperator(
                self.cfg,
                self.matrix @ other.matrix,
                ampliated=self.ampliated,
                support_horizon=max(self.support_horizon, other.support_horizon),
                tail=_tail_matmul(self.tail, other.tail),
            )
        if isinstance(other, FockVector):
            return self.apply(other)
        return NotImplemented

    def apply(self, v: FockVector) -> FockVector:
        if self.ampliated != v.ampliated:
            raise AmpliationError("operator/vector ampliation mismatch")
        return FockVector(
            self.cfg,
            self.matrix @ v.amplitudes,
            ampliated=self.ampliated,
            support_horizon=max(self.support_horizon, v.support_horizon),
        )

    def add(self, other: "FockOperator") -> "FockOperator":
        """Sum of two operators with compatible tails."""
        if self.ampliated != other.ampliated:
            raise AmpliationError("cannot add ampliated to plain operator")
        if not _tails_equal(self.tail, other.tail):
            raise ValueError("cannot add operators with different tails")
        return FockOperator(
            self.cfg,
            self.matrix + other.matrix,
            ampliated=self.ampliated,
            support_horizon=max(self.support_horizon, other.support_horizon),
            tail=self.tail,
        )

    def structure_defect(self) -> float:
        """Deviation from the declared (horizon, tail) factorised form."""
        rebuilt = embed_block(
            self.cfg,
            compress_block(self.cfg, self.matrix, self.support_horizon, self.ampliated),
            0,
            self.support_horizon,
            self.tail,
            self.ampliated,
        )
        return float(np.max(np.abs(self.matrix - rebuilt)))

    def validate(self, tol: float = TOL) -> None:
        defect = self.structure_defect()
        if defect > tol:
            raise ValueError(
                f"operator does not factor at horizon {self.support_horizon} "
                f"(defect {defect:.3e})"
            )

    def norm2(self) -> float:
        """Operator 2-norm (largest singular value)."""
        return float(np.linalg.norm(self.matrix, 2))


# ---------------------------------------------------------------------------
# block helpers: compress to / embed from the slot block [t, t + h)
# ---------------------------------------------------------------------------


def compress_block(
    cfg: SliceConfig, matrix: np.ndarray, h: int, ampliated: bool
) -> np.ndarray:
    """Restrict onto the states that are vacuum in every slot >= h.

    For an operator with horizon ``h`` this recovers the factor acting on
    (initial (x)) the first ``h`` slots; the tail contributes its vacuum
    expectation, which is 1 for any second-quantised tail.
    """
    dh = cfg.pre_dim(h)
    if not ampliated:
        return matrix[:dh, :dh].copy()
    ki, fd = cfg.k_ini, cfg.fock_dim
    m4 = matrix.reshape(ki, fd, ki, fd)
    return np.ascontiguousarray(m4[:, :dh, :, :dh]).reshape(ki * dh, ki * dh)


def embed_block(
    cfg: SliceConfig,
    core: np.ndarray,
    t: int,
    h: int,
    tail: np.ndarray | None,
    ampliated: bool,
) -> np.ndarray:
    """Place ``core`` on (initial (x)) slots [t, t+h), identity before,
    per-slot ``tail`` after."""
    sd = cfg.slot_dim
    if t + h > cfg.n_slots:
        raise ValueError("block extends past the grid")
    d_lo = sd**t
    d_mid = sd**h
    d_hi = sd ** (cfg.n_slots - t - h)
    tb = tail_block(cfg, tail, cfg.n_slots - t - h)
    if not ampliated:
        return np.kron(tb, np.kron(core, np.eye(d_lo, dtype=complex)))
    ki = cfg.k_ini
    c4 = core.reshape(ki, d_mid, ki, d_mid)
    out = np.einsum(
        "umvn,cd,ab->ucmavdnb",
        c4,
        tb,
        np.eye(d_lo, dtype=complex),
        optimize=True,
    )
    return out.reshape(cfg.joint_dim, cfg.joint_dim)


def infer_vector_horizon(cfg: SliceConfig, amps: np.ndarray, ampliated: bool,
                         tol: float = STRICT_TOL) -> int:
    """Smallest horizon the amplitude data supports."""
    if ampliated:
        blocks = np.abs(amps.reshape(cfg.k_ini, cfg.fock_dim)).max(axis=0)
    else:
        blocks = np.abs(amps)
    for h in range(cfg.n_slots + 1):
        if h == cfg.n_slots or np.all(blocks[cfg.pre_dim(h):] <= tol):
            return h
    return cfg.n_slots


def fock_operator(
    cfg: SliceConfig, matrix: np.ndarray, ampliated: bool = False, tol: float = TOL
) -> FockOperator:
    """Wrap a raw matrix, inferring the smallest identity-tail horizon."""
    matrix = np.asarray(matrix, dtype=complex)
    for h in range(cfg.n_slots + 1):
        cand = FockOperator(cfg, matrix, ampliated=ampliated, support_horizon=h)
        if cand.structure_defect() <= tol:
            return cand
    return FockOperator(cfg, matrix, ampliated=ampliated)


def identity_operator(cfg: SliceConfig, ampliated: bool = False) -> FockOperator:
    return FockOperator(
        cfg,
        np.eye(cfg.dim(ampliated), dtype=complex),
        ampliated=ampliated,
        support_horizon=0,
    )


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


def vacuum_vector(cfg: SliceConfig) -> FockVector:
    amps = np.zeros(cfg.fock_dim, dtype=complex)
    amps[0] = 1.0
    return FockVector(cfg, amps, support_horizon=0)


def basis_vector(cfg: SliceConfig, index: int) -> FockVector:
    amps = np.zeros(cfg.fock_dim, dtype=complex)
    amps[index] = 1.0
    return FockVector(cfg, amps, support_horizon=infer_vector_horizon(cfg, amps, False))


def slot_exponential(cfg: SliceConfig, z: np.ndarray) -> np.ndarray:
    """Truncated per-slot exponential vector for amplitude vector z in C^d.

    Amplitude on occupation alpha is ``prod_c z_c^{alpha_c} / sqrt(alpha_c!)``.
    """
    z = np.asarray(z, dtype=complex).reshape(cfg.d)
    occs = slot_occupations(cfg)
    out = np.empty(len(occs), dtype=complex)
    for i, alpha in enumerate(occs):
        amp = 1.0 + 0.0j
        for c, n in enumerate(alpha):
            amp *= z[c] ** n / math.sqrt(math.factorial(n))
        out[i] = amp
    return out


def exponential_vector(cfg: SliceConfig, f: StepFunction) -> FockVector:
    """Truncated exponential (coherent) vector of a step function.

    The slot-j factor has amplitude vector ``f_j * sqrt(dt)``; the support
    horizon is one past the last slot where f is non-zero.
    """
    sqdt = math.sqrt(cfg.dt)
    acc = None
    horizon = 0
    for j in range(cfg.n_slots):
        fj = f.values[j]
        if np.max(np.abs(fj)) > 0.0:
            horizon = j + 1
        slot = slot_exponential(cfg, fj * sqdt)
        acc = slot if acc is None else np.kron(slot, acc)
    return FockVector(cfg, acc, support_horizon=horizon)


def exponential_inner_oracle(cfg: SliceConfig, f: StepFunction, g: StepFunction) -> complex:
    """<eps(f), eps(g)> by the per-slot truncated series, no vectors built."""
    total = 1.0 + 0.0j
    occs = slot_occupations(cfg)
    for j in range(cfg.n_slots):
        x = np.conj(f.values[j]) * g.values[j] * cfg.dt
        s = 0.0 + 0.0j
        for alpha in occs:
            term = 1.0 + 0.0j
            for c, n in enumerate(alpha):
                term *= x[c] ** n / math.factorial(n)
            s += term
        total *= s
    return total


# ---------------------------------------------------------------------------
# tensor split / join at a slot boundary
# ---------------------------------------------------------------------------


def tensor_split(v: FockVector, t: int) -> np.ndarray:
    """Coefficient matrix M[pre, post] of v over the split at slot t.

    Pure reshape: ``tensor_join(tensor_split(v, t), t)`` returns the
    amplitudes bit-exactly.
    """
    if v.ampliated:
        raise AmpliationError("tensor_split expects a plain Fock vector")
    cfg = v.cfg
    if not 0 <= t <= cfg.n_slots:
        raise ValueError(f"split slot {t} out of range")
    dp = cfg.pre_dim(t)
    dq = cfg.fock_dim // dp
    return v.amplitudes.reshape(dq, dp).T


def tensor_join(cfg: SliceConfig, m: np.ndarray, t: int,
                support_horizon: int | None = None) -> FockVector:
    """Inverse of :func:`tensor_split`."""
    dp = cfg.pre_dim(t)
    dq = cfg.fock_dim // dp
    if m.shape != (dp, dq):
        raise ValueError(f"coefficient matrix shape {m.shape} != ({dp}, {dq})")
    amps = np.ascontiguousarray(m.T).reshape(-1)
    if support_horizon is None:
        support_horizon = infer_vector_horizon(cfg, amps, False)
    return FockVector(cfg, amps, support_horizon=support_horizon)


# ---------------------------------------------------------------------------
# ampliation
# ---------------------------------------------------------------------------


def ampliate(x: FockOperator) -> FockOperator:
    """Tensor an operator with the identity on the initial space."""
    if not isinstance(x, FockOperator):
        raise TypeError("ampliate acts on FockOperator; use joint_vector for states")
    if x.ampliated:
        raise AmpliationError("operator is already ampliated")
    return FockOperator(
        x.cfg,
        np.kron(np.eye(x.cfg.k_ini, dtype=complex), x.matrix),
        ampliated=True,
        support_horizon=x.support_horizon,
        tail=x.tail,
    )


def joint_vector(cfg: SliceConfig, u: np.ndarray, v: FockVector) -> FockVector:
    """u (x) v on the joint space (initial index slow)."""
    if v.ampliated:
        raise AmpliationError("vector is already ampliated")
    u = np.asarray(u, dtype=complex).reshape(cfg.k_ini)
    return FockVector(
        cfg,
        np.kron(u, v.amplitudes),
        ampliated=True,
        support_horizon=v.support_horizon,
    )


def initial_operator(cfg: SliceConfig, a: np.ndarray) -> FockOperator:
    """a (x) I_Fock on the joint space."""
    a = np.asarray(a, dtype=complex).reshape(cfg.k_ini, cfg.k_ini)
    return FockOperator(
        cfg,
        np.kron(a, np.eye(cfg.fock_dim, dtype=complex)),
        ampliated=True,
        support_horizon=0,
    )


def restrict_initial(z: FockOperator, u: np.ndarray, u_other: np.ndarray) -> FockOperator:
    """Compress a joint operator between initial vectors: <u, Z u'> as a Fock operator."""
    if not z.ampliated:
        raise AmpliationError("restrict_initial expects an ampliated operator")
    cfg = z.cfg
    u = np.asarray(u, dtype=complex).reshape(cfg.k_ini)
    u_other = np.asarray(u_other, dtype=complex).reshape(cfg.k_ini)
    z4 = z.matrix.reshape(cfg.k_ini, cfg.fock_dim, cfg.k_ini, cfg.fock_dim)
    mat = np.einsum("a,axby,b->xy", u.conj(), z4, u_other, optimize=True)
    return FockOperator(
        cfg, mat, ampliated=False, support_horizon=z.support_horizon, tail=z.tail
    )


# ---------------------------------------------------------------------------
# simple observables used in tests and probes
# ---------------------------------------------------------------------------


def slot_number_diagonal(cfg: SliceConfig) -> np.ndarray:
    """Total occupation of one slot, as a diagonal (slot_dim,) array."""
    return np.array([sum(a) for a in slot_occupations(cfg)], dtype=complex)


def number_operator(cfg: SliceConfig, slot: int) -> FockOperator:
    """Particle-number operator of a single slot."""
    if not 0 <= slot < cfg.n_slots:
        raise ValueError(f"slot {slot} out of range")
    sd = cfg.slot_dim
    diag = slot_number_diagonal(cfg)
    idx = (np.arange(cfg.fock_dim) // sd**slot) % sd
    return FockOperator(
        cfg,
        np.diag(diag[idx]),
        ampliated=False,
        support_horizon=slot + 1,
    )
