"""Discrete finite quantum stop times.

A stop time is a finitely supported projection-valued measure on the grid:
atoms ``(t_j, P_j)`` with ``t_j >= 1``, the ``P_j`` mutually orthogonal
projections summing to the identity, and each ``P_j`` acting only on the
slots before ``t_j`` (adaptedness).  Atoms are stored on the plain Fock
space; ampliation to the joint space happens on demand.

Convolution pushes the product measure forward under addition of times:
the atom of ``S * T`` at ``u`` is ``sum_{s_i + t_j = u} S({s_i})
sigma_{s_i}(T({t_j}))``, with coinciding sums merged by projection addition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HorizonError, StopTimeValidationError
from .fock import TOL, FockOperator, FockVector, SliceConfig
from .secondquant import ccr_flow, conditional_vacuum


@dataclass(frozen=True, eq=False)
class DiscreteStopTime:
    """Finitely supported spectral measure with adapted atoms.

    Construct through :func:`make_from_adapted_projections` (or one of the
    shortcut constructors) so the axioms are checked; the raw constructor
    trusts its input.
    """

    cfg: SliceConfig
    atoms: tuple[tuple[int, np.ndarray], ...]

    def __post_init__(self):
        atoms = tuple(
            (int(t), _freeze(np.asarray(m, dtype=complex))) for t, m in self.atoms
        )
        atoms = tuple(sorted(atoms, key=lambda a: a[0]))
        object.__setattr__(self, "atoms", atoms)

    @property
    def times(self) -> tuple[int, ...]:
        return tuple(t for t, _ in self.atoms)

    @property
    def max_atom(self) -> int:
        return self.atoms[-1][0]

    def atom(self, t: int) -> np.ndarray:
        """Measure of the single point {t} (zero matrix if no atom there)."""
        for tj, m in self.atoms:
            if tj == t:
                return m
        return np.zeros((self.cfg.fock_dim, self.cfg.fock_dim), dtype=complex)

    def atom_operator(self, t: int) -> FockOperator:
        return FockOperator(self.cfg, self.atom(t), support_horizon=min(t, self.cfg.n_slots))

    def measure(self, times) -> np.ndarray:
        """Measure of a set of grid times."""
        wanted = set(int(t) for t in times)
        out = np.zeros((self.cfg.fock_dim, self.cfg.fock_dim), dtype=complex)
        for tj, m in self.atoms:
            if tj in wanted:
                out = out + m
        return out

    def interval(self, a: int, b: int) -> np.ndarray:
        """Measure of the half-open interval (a, b]."""
        return self.measure(t for t in self.times if a < t <= b)

    def cumulative(self, t: int) -> np.ndarray:
        """Measure of [0, t]."""
        return self.measure(tj for tj in self.times if tj <= t)

    def measure_ampliated(self, times) -> np.ndarray:
        return np.kron(np.eye(self.cfg.k_ini, dtype=complex), self.measure(times))

    def atom_ampliated(self, t: int) -> np.ndarray:
        return np.kron(np.eye(self.cfg.k_ini, dtype=complex), self.atom(t))


def _freeze(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


def validate_stop_time(
    cfg: SliceConfig, atoms, tol: float = TOL
) -> list[str]:
    """Check the five axioms; return a list of failure descriptions.

    An empty list means the candidate is a valid discrete stop time.
    """
    failures: list[str] = []
    atoms = [(int(t), np.asarray(m, dtype=complex)) for t, m in atoms]
    if not atoms:
        return ["no atoms: total mass cannot be the identity"]
    eye = np.eye(cfg.fock_dim, dtype=complex)
    for t, m in atoms:
        if m.shape != (cfg.fock_dim, cfg.fock_dim):
            return [f"atom at t={t} has shape {m.shape}, expected "
                    f"({cfg.fock_dim}, {cfg.fock_dim})"]
        if t <= 0:
            failures.append(
                f"atom at t={t}: no mass at zero is allowed (S({{0}}) = 0)"
            )
        if t > cfg.n_slots:
            failures.append(f"atom at t={t} is beyond the grid ({cfg.n_slots} slots)")
    times = [t for t, _ in atoms]
    if len(set(times)) != len(times):
        failures.append(f"duplicate atom times {sorted(times)}")
    for t, m in atoms:
        herm = float(np.max(np.abs(m - m.conj().T)))
        idem = float(np.max(np.abs(m @ m - m)))
        if max(herm, idem) > tol:
            failures.append(
                f"atom at t={t} is not an orthogonal projection "
                f"(hermiticity {herm:.3e}, idempotency {idem:.3e})"
            )
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            cross = float(np.max(np.abs(atoms[i][1] @ atoms[j][1])))
            if cross > tol:
                failures.append(
                    f"atoms at t={atoms[i][0]} and t={atoms[j][0]} are not "
                    f"orthogonal (|P_i P_j| = {cross:.3e})"
                )
    total = sum(m for _, m in atoms)
    comp = float(np.max(np.abs(total - eye)))
    if comp > tol:
        failures.append(f"atoms do not sum to the identity (defect {comp:.3e})")
    for t, m in atoms:
        if t <= 0 or t > cfg.n_slots:
            continue
        op = FockOperator(cfg, m, support_horizon=min(t, cfg.n_slots))
        defect = op.structure_defect()
        if defect > tol:
            failures.append(
                f"atom at t={t} is not adapted: acts past slot {t} "
                f"(defect {defect:.3e})"
            )
    return failures


def make_from_adapted_projections(cfg: SliceConfig, atoms) -> DiscreteStopTime:
    """General constructor; raises with a full failure report when invalid."""
    failures = validate_stop_time(cfg, atoms)
    if failures:
        raise StopTimeValidationError(failures)
    return DiscreteStopTime(cfg, tuple(atoms))


def make_deterministic(cfg: SliceConfig, t: int) -> DiscreteStopTime:
    """All mass at a single grid time."""
    if t == 0:
        raise StopTimeValidationError(
            ["deterministic time 0 is forbidden: no mass at zero (S({0}) = 0)"]
        )
    if not 1 <= t <= cfg.n_slots:
        raise StopTimeValidationError([f"time {t} is outside the grid"])
    return DiscreteStopTime(cfg, ((t, np.eye(cfg.fock_dim, dtype=complex)),))


def make_first_arrival(cfg: SliceConfig, horizon: int) -> DiscreteStopTime:
    """Stop at the first occupied slot, giving up at ``horizon``.

    Atom j < horizon is (slots 0..j-2 vacuum) x (slot j-1 occupied); the
    final atom absorbs the all-vacuum remainder so the masses telescope to
    the identity.
    """
    if not 1 <= horizon <= cfg.n_slots:
        raise StopTimeValidationError([f"horizon {horizon} is outside the grid"])
    q = [conditional_slot_vacuum(cfg, i) for i in range(horizon)]
    eye = np.eye(cfg.fock_dim, dtype=complex)
    atoms = []
    running = eye
    for j in range(1, horizon):
        atoms.append((j, running @ (eye - q[j - 1])))
        running = running @ q[j - 1]
    atoms.append((horizon, running))
    atoms = [(t, m) for t, m in atoms if np.max(np.abs(m)) > TOL]
    return make_from_adapted_projections(cfg, atoms)


def conditional_slot_vacuum(cfg: SliceConfig, slot: int) -> np.ndarray:
    """Projection onto vacuum in one given slot (identity elsewhere)."""
    sd = cfg.slot_dim
    idx = (np.arange(cfg.fock_dim) // sd**slot) % sd
    return np.diag((idx == 0).astype(complex))


def _sigma_s_matrix(cfg: SliceConfig, s: int, x: FockOperator) -> np.ndarray:
    return ccr_flow(cfg, s, x).matrix


def _flow_of_measure(cfg: SliceConfig, s_time: DiscreteStopTime, x: FockOperator) -> np.ndarray:
    """sigma_S(X) = sum_i sigma_{s_i}(X) S({s_i}) as a raw matrix."""
    out = np.zeros((cfg.fock_dim, cfg.fock_dim), dtype=complex)
    for s_i, p_i in s_time.atoms:
        out = out + _sigma_s_matrix(cfg, s_i, x) @ p_i
    return out


def convolve(s_time: DiscreteStopTime, t_time: DiscreteStopTime) -> DiscreteStopTime:
    """Convolution of two stop times on the same grid.

    Requires ``max_atom(S) + max_atom(T) <= n_slots``.  The merged atoms are
    validated in full; merging is legitimate because summands with equal time
    sums are pairwise orthogonal.
    """
    cfg = s_time.cfg
    if s_time.max_atom + t_time.max_atom > cfg.n_slots:
        raise HorizonError(
            f"convolution needs max_atom(S) + max_atom(T) <= {cfg.n_slots}, "
            f"got {s_time.max_atom} + {t_time.max_atom}"
        )
    groups: dict[int, np.ndarray] = {}
    for s_i, p_i in s_time.atoms:
        for t_j, _ in t_time.atoms:
            piece = p_i @ _sigma_s_matrix(cfg, s_i, t_time.atom_operator(t_j))
            u = s_i + t_j
            groups[u] = groups.get(u, 0) + piece
    atoms = [(u, m) for u, m in sorted(groups.items()) if np.max(np.abs(m)) > TOL]
    return make_from_adapted_projections(cfg, atoms)


def convolve_via_shifted_sets(
    s_time: DiscreteStopTime, t_time: DiscreteStopTime
) -> DiscreteStopTime:
    """Independent evaluation of the convolution through shifted time sets.

    Computes each atom as ``sum_j S(({u} - t_j)_+) sigma_S(T({t_j}))``, an
    alternative grouping of the same measure used as a cross-check of
    :func:`convolve`.
    """
    cfg = s_time.cfg
    if s_time.max_atom + t_time.max_atom > cfg.n_slots:
        raise HorizonError("convolution exceeds the grid")
    sums = sorted({s + t for s in s_time.times for t in t_time.times})
    atoms = []
    for u in sums:
        m = np.zeros((cfg.fock_dim, cfg.fock_dim), dtype=complex)
        for t_j, _ in t_time.atoms:
            if u - t_j in s_time.times:
                m = m + s_time.atom(u - t_j) @ _flow_of_measure(
                    cfg, s_time, t_time.atom_operator(t_j)
                )
        if np.max(np.abs(m)) > TOL:
            atoms.append((u, m))
    return make_from_adapted_projections(cfg, atoms)


def product_rectangle(
    s_time: DiscreteStopTime, t_time: DiscreteStopTime, a_times, b_times
) -> np.ndarray:
    """Product-measure rectangle ``S(A) sigma_S(T(B))``.

    A and B are sets of grid times; the result is an orthogonal projection,
    rectangles with disjoint A (or disjoint B) give orthogonal results.
    """
    cfg = s_time.cfg
    b_set = set(int(b) for b in b_times)
    b_atoms = [t for t in t_time.times if t in b_set]
    h = max(b_atoms, default=0)
    if s_time.max_atom + h > cfg.n_slots:
        raise HorizonError("rectangle exceeds the grid")
    t_of_b = FockOperator(cfg, t_time.measure(b_set), support_horizon=h)
    return s_time.measure(a_times) @ _flow_of_measure(cfg, s_time, t_of_b)


def shift_time(s_time: DiscreteStopTime, t: int) -> DiscreteStopTime:
    """Deterministic shift: atoms move from s_i to s_i + t, projections kept."""
    cfg = s_time.cfg
    if s_time.max_atom + t > cfg.n_slots:
        raise HorizonError(
            f"shift by {t} would move an atom past slot {cfg.n_slots}"
        )
    return make_from_adapted_projections(
        cfg, [(s_i + t, m) for s_i, m in s_time.atoms]
    )


def coarsen(s_time: DiscreteStopTime, boundaries) -> DiscreteStopTime:
    """Reassign interval masses to right endpoints of a coarser boundary set.

    ``boundaries`` is a non-empty subset of grid times; the mass of each
    half-open interval ``(b_{k-1}, b_k]`` moves to ``b_k``, and whatever lies
    beyond the last boundary is absorbed into it.  Cumulative projections of
    the result agree with those of the input at every boundary.
    """
    cfg = s_time.cfg
    bounds = sorted(set(int(b) for b in boundaries))
    if not bounds:
        raise ValueError("boundary set must be non-empty")
    if bounds[0] < 1 or bounds[-1] > cfg.n_slots:
        raise ValueError("boundaries must lie in [1, n_slots]")
    atoms = []
    prev = 0
    for k, b in enumerate(bounds):
        hi = cfg.n_slots if k == len(bounds) - 1 else b
        m = s_time.interval(prev, hi)
        if np.max(np.abs(m)) > TOL:
            atoms.append((b, m))
        prev = b
    return make_from_adapted_projections(cfg, atoms)


def cdf_sample(s_time: DiscreteStopTime) -> list[tuple[int, np.ndarray]]:
    """Cumulative spectral family ``[(t, S([0, t]))]`` over the whole grid."""
    return [(t, s_time.cumulative(t)) for t in range(s_time.cfg.n_slots + 1)]


def cdf_monotonicity_defect(samples) -> float:
    """Worst violation of ``S_cum(s) <= S_cum(t)`` for consecutive samples."""
    worst = 0.0
    for (_, a), (_, b) in zip(samples, samples[1:]):
        worst = max(worst, float(np.max(np.abs(b @ a - a))))
    return worst


def convergence_gap(
    s_a: DiscreteStopTime, s_b: DiscreteStopTime, probes: list[FockVector]
) -> list[tuple[int, float]]:
    """Per-time worst probe deviation of the cumulative projections.

    Returns ``[(t, max_v |(S_a([0,t]) - S_b([0,t])) v|)]`` for every grid
    time; the finite shadow of strong-operator convergence data.
    """
    cfg = s_a.cfg
    rows = []
    for t in range(cfg.n_slots + 1):
        delta = s_a.cumulative(t) - s_b.cumulative(t)
        gap = 0.0
        for v in probes:
            gap = max(gap, float(np.linalg.norm(delta @ v.amplitudes)))
        rows.append((t, gap))
    return rows


# ---------------------------------------------------------------------------
# serialization: structured text with dense matrices as [re, im] pairs
# ---------------------------------------------------------------------------


def matrix_to_pairs(m: np.ndarray) -> list[list[float]]:
    """Row-major [re, im] pair list of a dense complex matrix."""
    flat = np.asarray(m, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def pairs_to_matrix(pairs, dim: int) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in pairs])
    if flat.size != dim * dim:
        raise ValueError(f"expected {dim * dim} entries, got {flat.size}")
    return flat.reshape(dim, dim)


def stop_time_to_text(s_time: DiscreteStopTime, label: str = "S") -> str:
    """Serialize as a scenario-file fragment (structured key-value text)."""
    out = ["[[stop_times]]", f'label = "{label}"', 'kind = "explicit"']
    for t, m in s_time.atoms:
        out.append("")
        out.append("[[stop_times.atoms]]")
        out.append(f"t = {t}")
        pairs = matrix_to_pairs(m)
        body = ", ".join(f"[{re!r}, {im!r}]" for re, im in pairs)
        out.append(f"matrix = [{body}]")
    return "\n".join(out) + "\n"


def stop_time_from_atom_dicts(cfg: SliceConfig, atom_dicts) -> DiscreteStopTime:
    """Build from parsed structured text: a list of {t, matrix} entries."""
    atoms = []
    for entry in atom_dicts:
        t = int(entry["t"])
        m = pairs_to_matrix(entry["matrix"], cfg.fock_dim)
        atoms.append((t, m))
    return make_from_adapted_projections(cfg, atoms)
