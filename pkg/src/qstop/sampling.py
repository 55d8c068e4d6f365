"""Seeded random objects for scenarios and property tests.

Everything takes an explicit ``numpy.random.Generator`` so a scenario seed
fully determines every draw; two runs with the same seed are bit-identical.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .fock import FockVector, SliceConfig, StepFunction
from .stoptime import DiscreteStopTime, make_from_adapted_projections


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-like unitary: QR of a complex Gaussian with phase-fixed diagonal."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def random_smooth_unitary(
    rng: np.random.Generator, n: int, dt: float, scale: float = 0.5
) -> np.ndarray:
    """``exp(scale * dt * G)`` with G anti-Hermitian Gaussian.

    Gives one-step unitaries with a modulus of continuity in dt, which keeps
    refinement experiments monotone.
    """
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    g = (a - a.conj().T) / 2.0
    return expm(scale * dt * g)


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_fock_vector(cfg: SliceConfig, rng: np.random.Generator,
                       ampliated: bool = False) -> FockVector:
    return FockVector(cfg, random_state(rng, cfg.dim(ampliated)), ampliated=ampliated)


def random_step_function(
    cfg: SliceConfig, rng: np.random.Generator, scale: float = 0.5,
    support: int | None = None,
) -> StepFunction:
    vals = scale * (
        rng.normal(size=(cfg.n_slots, cfg.d)) + 1j * rng.normal(size=(cfg.n_slots, cfg.d))
    )
    if support is not None:
        vals[support:] = 0.0
    return StepFunction(cfg, vals)


def random_projection(rng: np.random.Generator, n: int, rank: int) -> np.ndarray:
    u = random_unitary(rng, n)
    cols = u[:, :rank]
    return cols @ cols.conj().T


def random_stop_time(
    cfg: SliceConfig, rng: np.random.Generator, times
) -> DiscreteStopTime:
    """Random adapted spectral measure with atoms at the given times.

    Built by splitting off, at each time, a random subprojection of the
    remaining mass that acts only on the slots seen so far; the last time
    absorbs the remainder, so completeness and orthogonality hold by
    construction.  Early times may be skipped when the remaining rank is too
    small to split.
    """
    times = sorted(set(int(t) for t in times))
    if not times or times[0] < 1 or times[-1] > cfg.n_slots:
        raise ValueError("atom times must lie in [1, n_slots]")
    eye = np.eye(cfg.fock_dim, dtype=complex)
    running = eye.copy()
    atoms = []
    for t in times[:-1]:
        dh = cfg.pre_dim(t)
        pre = running[:dh, :dh]
        vals, vecs = np.linalg.eigh(pre)
        cols = vecs[:, vals > 0.5]
        r = cols.shape[1]
        if r < 2:
            continue
        k = int(rng.integers(1, r))
        mix = cols @ random_unitary(rng, r)[:, :k]
        p_pre = mix @ mix.conj().T
        p_full = np.kron(np.eye(cfg.fock_dim // dh, dtype=complex), p_pre)
        atoms.append((t, p_full))
        running = running - p_full
    atoms.append((times[-1], running))
    return make_from_adapted_projections(cfg, atoms)
