"""Named identity checks run by the verification harness.

Each check evaluates one operator identity (or axiom group) on every
applicable combination of the scenario's stop times and cocycles, and
reports the worst max-entry and operator-norm deviation.  Check names are
stable identifiers and each carries an anchor string naming the identity it
certifies; the default suite covers the full identity catalogue of the
package.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cocycle import (
    Cocycle,
    cocycle_identity_defect,
    eh_composition_defect,
    eh_flow_identity,
    eh_flow_vacuum,
    isometry_defect,
    stop_cocycle,
    stopped_cocycle_identity_check,
    vacuum_composition_defect,
)
from .errors import QstopError
from .fock import (
    FockOperator,
    SliceConfig,
    ampliate,
    exponential_vector,
    identity_operator,
    initial_operator,
    vacuum_vector,
)
from .sampling import random_fock_vector, random_step_function
from .secondquant import ccr_flow
from .stopped import (
    StoppedBundle,
    build_bundle,
    factorisation_ampliated_defect,
    factorisation_conjugation_defect,
    factorisation_intertwining_defect,
    partition_stability_defect,
    stopped_flow,
    stopped_flow_ampliated,
    stopped_projection,
)
from .stoptime import (
    DiscreteStopTime,
    convolve,
    convolve_via_shifted_sets,
    make_deterministic,
    shift_time,
    validate_stop_time,
)


@dataclass
class Dev:
    """Accumulator for the worst deviation seen by a check."""

    max_entry: float = 0.0
    op_norm: float = 0.0

    def add(self, lhs, rhs) -> None:
        diff = np.asarray(lhs) - np.asarray(rhs)
        if diff.size == 0:
            return
        self.max_entry = max(self.max_entry, float(np.max(np.abs(diff))))
        if diff.ndim == 2:
            self.op_norm = max(self.op_norm, float(np.linalg.norm(diff, 2)))
        else:
            self.op_norm = max(self.op_norm, float(np.linalg.norm(diff)))

    def add_scalar(self, x: float) -> None:
        self.max_entry = max(self.max_entry, float(x))
        self.op_norm = max(self.op_norm, float(x))


@dataclass
class CheckContext:
    """Materialised scenario instance handed to every check."""

    cfg: SliceConfig
    stop_times: dict[str, DiscreteStopTime]
    cocycles: dict[str, Cocycle]
    rng: np.random.Generator
    tol: float
    _bundles: dict[str, StoppedBundle] = field(default_factory=dict)

    def bundle(self, label: str) -> StoppedBundle:
        if label not in self._bundles:
            self._bundles[label] = build_bundle(self.cfg, self.stop_times[label])
        return self._bundles[label]

    def pairs(self):
        """Ordered stop-time pairs whose convolution fits on the grid."""
        for la, sa in self.stop_times.items():
            for lb, sb in self.stop_times.items():
                if sa.max_atom + sb.max_atom <= self.cfg.n_slots:
                    yield la, sa, lb, sb

    def admissible_units(self, s_time: DiscreteStopTime):
        """Matrix-unit basis of operators supported before the last atom."""
        h = self.cfg.n_slots - s_time.max_atom
        dh = self.cfg.pre_dim(h)
        for a in range(dh):
            for b in range(dh):
                m = np.zeros((self.cfg.fock_dim, self.cfg.fock_dim), dtype=complex)
                m[a, b] = 1.0
                yield FockOperator(self.cfg, m, support_horizon=h)

    def random_admissible(self, s_time: DiscreteStopTime, ampliated: bool = False):
        h = self.cfg.n_slots - s_time.max_atom
        dh = self.cfg.pre_dim(h) * (self.cfg.k_ini if ampliated else 1)
        core = self.rng.normal(size=(dh, dh)) + 1j * self.rng.normal(size=(dh, dh))
        from .fock import embed_block

        mat = embed_block(self.cfg, core, 0, h, None, ampliated)
        return FockOperator(
            self.cfg, mat, ampliated=ampliated, support_horizon=h
        )

    def probe_vectors(self, count: int = 3, ampliated: bool = False):
        probes = [random_fock_vector(self.cfg, self.rng, ampliated) for _ in range(count)]
        if not ampliated:
            probes.append(vacuum_vector(self.cfg))
            probes.append(
                exponential_vector(self.cfg, random_step_function(self.cfg, self.rng, 0.4))
            )
        return probes


@dataclass(frozen=True)
class CheckResult:
    name: str
    anchor: str
    max_entry: float
    op_norm: float
    tolerance: float
    passed: bool
    seconds: float


# ---------------------------------------------------------------------------
# the checks
# ---------------------------------------------------------------------------


def check_stop_time_axioms(ctx: CheckContext) -> Dev:
    dev = Dev()
    for s in ctx.stop_times.values():
        dev.add_scalar(_axiom_defect(ctx.cfg, s))
    return dev


def _axiom_defect(cfg: SliceConfig, s: DiscreteStopTime) -> float:
    worst = 0.0
    eye = np.eye(cfg.fock_dim)
    total = np.zeros((cfg.fock_dim, cfg.fock_dim), dtype=complex)
    mats = []
    for t, m in s.atoms:
        if t < 1 or t > cfg.n_slots:
            return float("inf")
        worst = max(worst, float(np.max(np.abs(m - m.conj().T))))
        worst = max(worst, float(np.max(np.abs(m @ m - m))))
        worst = max(worst, s.atom_operator(t).structure_defect())
        total = total + m
        mats.append(m)
    worst = max(worst, float(np.max(np.abs(total - eye))))
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            worst = max(worst, float(np.max(np.abs(mats[i] @ mats[j]))))
    return worst


def check_stopped_projection(ctx: CheckContext) -> Dev:
    dev = Dev()
    for label, s in ctx.stop_times.items():
        e_s = ctx.bundle(label).projection.matrix
        dev.add(e_s @ e_s, e_s)
        dev.add(e_s, e_s.conj().T)
        # rank of the range agrees with an independent eigen count
        rank_svd = int(np.linalg.matrix_rank(e_s, tol=0.5))
        dev.add_scalar(abs(rank_svd - ctx.bundle(label).pre_rank))
    return dev


def check_stopped_shift(ctx: CheckContext) -> Dev:
    dev = Dev()
    for label, s in ctx.stop_times.items():
        bundle = ctx.bundle(label)
        g = bundle.shift_matrix
        adm = bundle.adm_dim
        gram = (g.conj().T @ g)[:adm, :adm]
        dev.add(gram, np.eye(adm))
        # norm preservation on admissible probes
        for f_support in (0, bundle.admissible_horizon):
            f = random_step_function(ctx.cfg, ctx.rng, 0.4, support=f_support)
            v = exponential_vector(ctx.cfg, f)
            image = bundle.apply_shift(v)
            dev.add_scalar(abs(image.norm() - v.norm()))
    return dev


def check_stopped_flow(ctx: CheckContext) -> Dev:
    dev = Dev()
    cfg = ctx.cfg
    for label, s in ctx.stop_times.items():
        dev.add(stopped_flow(cfg, s, identity_operator(cfg)).matrix, np.eye(cfg.fock_dim))
        x = ctx.random_admissible(s)
        y = ctx.random_admissible(s)
        sx = stopped_flow(cfg, s, x)
        sy = stopped_flow(cfg, s, y)
        dev.add((sx @ sy).matrix, stopped_flow(cfg, s, x @ y).matrix)
        dev.add(sx.dag.matrix, stopped_flow(cfg, s, x.dag).matrix)
        # the ampliation fixes initial-space operators
        a = ctx.rng.normal(size=(cfg.k_ini, cfg.k_ini)) + 1j * ctx.rng.normal(
            size=(cfg.k_ini, cfg.k_ini)
        )
        a_op = initial_operator(cfg, a)
        dev.add(stopped_flow_ampliated(cfg, s, a_op).matrix, a_op.matrix)
        # adapted commutation: sigma_S(T(B)) S(A) = S(A) sigma_S(T(B)) for A before B
        for _, t_time in ctx.stop_times.items():
            if s.max_atom + t_time.max_atom > cfg.n_slots:
                continue
            b_min = t_time.times[0]
            a_set = [u for u in s.times if u <= b_min]
            flow_tb = stopped_flow(cfg, s, t_time.atom_operator(b_min)).matrix
            sa = s.measure(a_set)
            dev.add(flow_tb @ sa, sa @ flow_tb)
    return dev


def check_flow_factorisation(ctx: CheckContext) -> Dev:
    dev = Dev()
    cfg = ctx.cfg
    for label, s in ctx.stop_times.items():
        bundle = ctx.bundle(label)
        gram = bundle.j_map.conj().T @ bundle.j_map
        dev.add(gram, np.eye(gram.shape[0]))
        for unit in ctx.admissible_units(s):
            dev.add_scalar(factorisation_intertwining_defect(bundle, unit))
        x = ctx.random_admissible(s)
        dev.add_scalar(factorisation_conjugation_defect(bundle, x))
        z = ctx.random_admissible(s, ampliated=True)
        dev.add_scalar(factorisation_ampliated_defect(bundle, z))
        # embedding the pre-space measure reproduces it on the range
        t0 = s.times[0]
        emb = bundle.embed_pre(bundle.compress_pre(s.atom(t0)))
        dev.add(emb.matrix, s.atom(t0) @ bundle.range_projection)
    return dev


def check_product_measure(ctx: CheckContext) -> Dev:
    dev = Dev()
    cfg = ctx.cfg
    from .stoptime import product_rectangle

    for la, s, lb, t in ctx.pairs():
        full = product_rectangle(s, t, s.times, t.times)
        dev.add(full, np.eye(cfg.fock_dim))
        empty = product_rectangle(s, t, [], t.times)
        dev.add(empty, np.zeros_like(empty))
        # rectangles are projections; marginals recover S
        a_set = s.times[: max(1, len(s.times) // 2)]
        marginal = sum(
            product_rectangle(s, t, a_set, [tb]) for tb in t.times
        )
        dev.add(marginal, s.measure(a_set))
        rect = product_rectangle(s, t, a_set, t.times[:1])
        dev.add(rect @ rect, rect)
        # compressed product-measure form through the factorisation isometry
        bundle = ctx.bundle(la)
        adm = bundle.adm_dim
        lhs = bundle.j_map.conj().T @ rect @ bundle.j_map
        rhs = np.kron(
            bundle.compress_pre(s.measure(a_set)),
            t.measure(t.times[:1])[:adm, :adm],
        )
        dev.add(lhs, rhs)
    return dev


def check_discrete_convolution(ctx: CheckContext) -> Dev:
    dev = Dev()
    cfg = ctx.cfg
    for la, s, lb, t in ctx.pairs():
        u = convolve(s, t)
        dev.add_scalar(_axiom_defect(cfg, u))
        u2 = convolve_via_shifted_sets(s, t)
        for tu in sorted(set(u.times) | set(u2.times)):
            dev.add(u.atom(tu), u2.atom(tu))
        # compressed check against the product measure, atom by atom
        bundle = ctx.bundle(la)
        adm = bundle.adm_dim
        for tu in u.times:
            lhs = bundle.j_map.conj().T @ u.atom(tu) @ bundle.j_map
            rhs = np.zeros_like(lhs)
            for si in s.times:
                tj = tu - si
                if tj in t.times:
                    rhs = rhs + np.kron(
                        bundle.compress_pre(s.atom(si)), t.atom(tj)[:adm, :adm]
                    )
            dev.add(lhs, rhs)
    return dev


def check_shift_remark(ctx: CheckContext) -> Dev:
    dev = Dev()
    cfg = ctx.cfg
    for label, s in ctx.stop_times.items():
        for t in range(1, cfg.n_slots - s.max_atom + 1):
            shifted = shift_time(s, t)
            convolved = convolve(s, make_deterministic(cfg, t))
            for tu in sorted(set(shifted.times) | set(convolved.times)):
                dev.add(shifted.atom(tu), convolved.atom(tu))
    return dev


def check_stopped_cocycle(ctx: CheckContext) -> Dev:
    dev = Dev()
    for c in ctx.cocycles.values():
        for s in ctx.stop_times.values():
            result = stop_cocycle(c, s)
            dev.add_scalar(max(result.norm - 1.0, 0.0))
            if c.is_identity_adapted or c.is_vacuum_adapted:
                dev.add_scalar(isometry_defect(c, s))
    return dev


def check_cocycle_identity(ctx: CheckContext) -> Dev:
    dev = Dev()
    for c in ctx.cocycles.values():
        dev.add_scalar(cocycle_identity_defect(ctx.cfg, c.v, c.v_hat))
    return dev


def check_commutation_lemma(ctx: CheckContext) -> Dev:
    """Interval masses slide through the shifted cocycle factor."""
    dev = Dev()
    cfg = ctx.cfg
    eye_ini = np.eye(cfg.k_ini, dtype=complex)
    for c in ctx.cocycles.values():
        for s_time in ctx.stop_times.values():
            for s in range(1, cfg.n_slots):
                for r in range(s):
                    m = np.kron(eye_ini, s_time.interval(r, s))
                    if np.max(np.abs(m)) == 0.0:
                        continue
                    for t in range(1, cfg.n_slots - s + 1):
                        flow = ccr_flow(cfg, s, c.v[t]).matrix
                        lhs = c.v[s + t].matrix @ m
                        rhs = c.v_hat[s].matrix @ m @ flow
                        dev.add(lhs, rhs)
    return dev


def check_deterministic_increment(ctx: CheckContext) -> Dev:
    dev = Dev()
    cfg = ctx.cfg
    for c in ctx.cocycles.values():
        for s in ctx.stop_times.values():
            for t in range(1, cfg.n_slots - s.max_atom + 1):
                rep = stopped_cocycle_identity_check(c, s, make_deterministic(cfg, t))
                dev.add_scalar(rep.max_entry)
                dev.op_norm = max(dev.op_norm, rep.op_norm)
    return dev


def check_main_theorem(ctx: CheckContext) -> Dev:
    dev = Dev()
    for c in ctx.cocycles.values():
        for la, s, lb, t in ctx.pairs():
            rep = stopped_cocycle_identity_check(c, s, t)
            dev.add_scalar(rep.max_entry)
            dev.op_norm = max(dev.op_norm, rep.op_norm)
    return dev


def check_eh_identity(ctx: CheckContext) -> Dev:
    dev = Dev()
    ran = False
    for c in ctx.cocycles.values():
        if not c.is_identity_adapted:
            continue
        ran = True
        for s in ctx.stop_times.values():
            _, report = eh_flow_identity(c, s, np.eye(ctx.cfg.k_ini))
            dev.add_scalar(report.worst)
        for la, s, lb, t in ctx.pairs():
            dev.add_scalar(eh_composition_defect(c, s, t))
    if not ran:
        raise QstopError("no identity-adapted cocycle in the scenario")
    return dev


def check_eh_vacuum(ctx: CheckContext) -> Dev:
    dev = Dev()
    ran = False
    for c in ctx.cocycles.values():
        if not c.is_vacuum_adapted:
            continue
        ran = True
        for s in ctx.stop_times.values():
            _, report = eh_flow_vacuum(c, s, np.eye(ctx.cfg.k_ini))
            dev.add_scalar(report.worst)
        for la, s, lb, t in ctx.pairs():
            dev.add_scalar(eh_composition_defect(c, s, t))
            dev.add_scalar(vacuum_composition_defect(ctx.cfg, s, t))
    if not ran:
        raise QstopError("no vacuum-adapted cocycle in the scenario")
    return dev


def check_vacuum_composition(ctx: CheckContext) -> Dev:
    dev = Dev()
    for la, s, lb, t in ctx.pairs():
        dev.add_scalar(vacuum_composition_defect(ctx.cfg, s, t))
    return dev


def check_unit_remark(ctx: CheckContext) -> Dev:
    dev = Dev()
    cfg = ctx.cfg
    eye = np.eye(cfg.k_ini)
    for c in ctx.cocycles.values():
        for s in ctx.stop_times.values():
            v_s = stop_cocycle(c, s).v_s.matrix
            target = v_s @ v_s.conj().T
            if c.is_identity_adapted:
                image, _ = eh_flow_identity(c, s, eye)
                dev.add(image.matrix, target)
            elif c.is_vacuum_adapted:
                image, _ = eh_flow_vacuum(c, s, eye)
                dev.add(image.matrix, target)
    return dev


def check_partition_stability(ctx: CheckContext) -> Dev:
    """E, Gamma, sigma and V recomputed over a refining partition."""
    dev = Dev()
    cfg = ctx.cfg
    full = list(range(1, cfg.n_slots + 1))
    for label, s in ctx.stop_times.items():
        dev.add_scalar(partition_stability_defect(cfg, s, full))
        x = ctx.random_admissible(s)
        dev.add(
            stopped_flow(cfg, s, x).matrix,
            stopped_flow(cfg, s, x, partition=full).matrix,
        )
        for c in ctx.cocycles.values():
            plain = stop_cocycle(c, s)
            refined = stop_cocycle(c, s, partition=full)
            dev.add(plain.v_s.matrix, refined.v_s.matrix)
            dev.add(plain.v_hat_s.matrix, refined.v_hat_s.matrix)
    return dev


@dataclass(frozen=True)
class CheckDef:
    name: str
    anchor: str
    fn: object
    tolerance: float | None = None  # None: use the scenario tolerance


CHECKS: dict[str, CheckDef] = {
    c.name: c
    for c in [
        CheckDef(
            "stop-time-axioms",
            "atoms are orthogonal projections, mutually orthogonal, sum to I, "
            "none at 0, each adapted to its time",
            check_stop_time_axioms,
        ),
        CheckDef(
            "stopped-projection",
            "E_S = sum_j S({t_j}) E_{t_j} is an orthogonal projection",
            check_stopped_projection,
        ),
        CheckDef(
            "stopped-shift",
            "Gamma_S = sum_j S({t_j}) Gamma_{t_j} is isometric on its domain",
            check_stopped_shift,
        ),
        CheckDef(
            "stopped-flow",
            "sigma_S = sum_j sigma_{t_j}(.) S({t_j}) is a unital "
            "*-homomorphism fixing a (x) I",
            check_stopped_flow,
        ),
        CheckDef(
            "flow-factorisation",
            "sigma_S(X) j_S = j_S (I_pre (x) X_adm), plain and ampliated; "
            "j_S* j_S = I",
            check_flow_factorisation,
        ),
        CheckDef(
            "product-measure",
            "(S (x) T)(A x B) = S(A) sigma_S(T(B))",
            check_product_measure,
        ),
        CheckDef(
            "discrete-convolution",
            "(S * T)(C) = sum_j S((C - t_j)_+) sigma_S(T({t_j}))",
            check_discrete_convolution,
        ),
        CheckDef("shift-remark", "S * delta_t = S + t", check_shift_remark),
        CheckDef(
            "stopped-cocycle",
            "V_S = sum_j V_{t_j} S~({t_j}) is a contraction; V_S* V_S = I "
            "(identity-adapted) or E~_S (vacuum-adapted)",
            check_stopped_cocycle,
        ),
        CheckDef(
            "cocycle-identity",
            "V_{s+t} = Vhat_s sigma~_s(V_t) for all grid splits",
            check_cocycle_identity,
        ),
        CheckDef(
            "commutation-lemma",
            "V_{s+t} S((r,s]) = Vhat_s S((r,s]) sigma~_s(V_t)",
            check_commutation_lemma,
        ),
        CheckDef(
            "deterministic-increment",
            "V_{S+t} = Vhat_S sigma~_S(V_t)",
            check_deterministic_increment,
        ),
        CheckDef(
            "main-theorem",
            "V_{S*T} = Vhat_S sigma~_S(V_T)",
            check_main_theorem,
        ),
        CheckDef(
            "eh-identity",
            "a -> V_S (a (x) I) V_S* is a *-homomorphism and composes as "
            "j^_{S*T} = j^^_S o sigma~_S o j^_T",
            check_eh_identity,
        ),
        CheckDef(
            "eh-vacuum",
            "a -> V_S (a (x) E_S) V_S* is a *-homomorphism and composes as "
            "k^_{S*T} = k^^_S o sigma~_S o k^_T",
            check_eh_vacuum,
        ),
        CheckDef(
            "vacuum-composition",
            "E_{S*T} = sigma_S(E_T)",
            check_vacuum_composition,
        ),
        CheckDef(
            "unit-remark",
            "j^_S(I) = V_S V_S* = k^_S(I)",
            check_unit_remark,
        ),
        CheckDef(
            "partition-stability",
            "E_S, Gamma_S, sigma_S and V_S are unchanged under refining "
            "partitions",
            check_partition_stability,
            tolerance=1e-12,
        ),
    ]
}

DEFAULT_SUITE = tuple(CHECKS)


def resolve_check_names(names) -> list[str]:
    out: list[str] = []
    for name in names:
        if name == "default":
            out.extend(DEFAULT_SUITE)
        elif name in CHECKS:
            out.append(name)
        else:
            raise QstopError(f"unknown check '{name}'")
    seen = set()
    unique = []
    for n in out:
        if n not in seen:
            seen.add(n)
            unique.append(n)
    return unique


def run_check(name: str, contexts: list[CheckContext], tol: float) -> CheckResult:
    """Run one named check over all instances, aggregating the worst case."""
    cdef = CHECKS[name]
    tolerance = cdef.tolerance if cdef.tolerance is not None else tol
    dev = Dev()
    start = time.perf_counter()
    for ctx in contexts:
        got = cdef.fn(ctx)
        dev.max_entry = max(dev.max_entry, got.max_entry)
        dev.op_norm = max(dev.op_norm, got.op_norm)
    seconds = time.perf_counter() - start
    return CheckResult(
        name=name,
        anchor=cdef.anchor,
        max_entry=dev.max_entry,
        op_norm=dev.op_norm,
        tolerance=tolerance,
        passed=max(dev.max_entry, dev.op_norm) <= tolerance,
        seconds=seconds,
    )
