"""Ground-truth engines: dense master-equation propagation and seeded sampling.

The density matrix is stored as a tensor with N ket indices followed by N bra
indices, each of dimension 2 with index 0 = up (sz = +1) and 1 = down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, ConvergenceError, InvariantViolation
from .model import MeasurementDirection, SpinEnsembleParams

MAX_IONS = 8


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    n_ions: int

    def __post_init__(self):
        check_density(self.matrix)

    def expect(self, op) -> complex:
        return complex(np.trace(self.matrix @ op))


def check_density(rho, tol=1e-10, pos_tol=1e-8):
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise InvariantViolation(f"trace {tr} != 1")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise InvariantViolation("density matrix is not Hermitian")
    lmin = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lmin < -pos_tol:
        raise InvariantViolation(f"negative eigenvalue {lmin:.3e}")


def _spins(n):
    """sz eigenvalue (+1/-1) of every site for every basis state, shape (2^n, n)."""
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return 1 - 2 * bits


def _couplings(n, j, params):
    if j is None:
        j = np.full((n, n), params.j_bar)
    j = np.asarray(getattr(j, "j", j), dtype=float)
    if j.shape != (n, n):
        raise ConfigError("coupling matrix does not match N")
    return np.triu(j, 1)


def ising_energies(n, j, params):
    """Diagonal of H = (1/N) sum_{i<j} J_ij sz_i sz_j."""
    s = _spins(n)
    ju = _couplings(n, j, params)
    return np.einsum("bi,ij,bj->b", s, ju, s) / n


def _site_op(rho_t, op, site, n, side):
    """Apply a 2x2 operator to one site, on the ket (side=0) or bra (side=1) index."""
    axis = site + side * n
    if side == 1:
        op = op.conj()  # rho op^dagger: contract bra index with op^*
    out = np.tensordot(op, rho_t, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |down><up|
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


def lindblad_rhs_factory(n, j, params):
    """Return (f(t, y), energies) for the vectorized master equation."""
    energies = ising_energies(n, j, params)
    # non-Hermitian diagonal part: H - (i/2) sum L^dag L
    s = _spins(n)
    up = (s == 1).sum(axis=1)
    down = n - up
    kappa = params.gamma_el / 4.0
    # sum_k rate_k L_k^dag L_k is diagonal in the z basis
    loss = params.gamma_ud * up + params.gamma_du * down + kappa * n
    h_eff = energies - 0.5j * loss
    gen = -1j * (h_eff[:, None] - h_eff.conj()[None, :])
    jumps = []
    if params.gamma_ud > 0:
        jumps.append((params.gamma_ud, SIGMA_MINUS))
    if params.gamma_du > 0:
        jumps.append((params.gamma_du, SIGMA_PLUS))
    if kappa > 0:
        jumps.append((kappa, SIGMA_Z))
    dim = 2 ** n
    shape = (2,) * (2 * n)

    def f(_t, y):
        rho = y.reshape(dim, dim)
        out = gen * rho
        if jumps:
            rho_t = rho.reshape(shape)
            acc = np.zeros(shape, dtype=complex)
            for rate, op in jumps:
                for site in range(n):
                    acc += rate * _site_op(_site_op(rho_t, op, site, n, 0), op, site, n, 1)
            out = out + acc.reshape(dim, dim)
        return out.ravel()

    return f


def x_polarized_state(n):
    psi = np.full(2 ** n, 2.0 ** (-n / 2), dtype=complex)
    return np.outer(psi, psi.conj())


def lindblad_propagate(n, params: SpinEnsembleParams, t, j=None, rtol=1e-10, atol=1e-12):
    """Propagate the x-polarized state to time(s) ``t`` with an adaptive integrator.

    Returns one :class:`DensityOperator` for scalar ``t`` or a list for a sequence.
    """
    if n > MAX_IONS or n < 1:
        raise ConfigError(f"oracle supports 1 <= N <= {MAX_IONS}, got {n}")
    if params.n_ions != n:
        raise ConfigError("params.n_ions must equal n")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ConfigError("times must be non-negative and sorted")
    rho0 = x_polarized_state(n)
    f = lindblad_rhs_factory(n, j, params)
    if times[-1] == 0:
        states = [rho0.copy() for _ in times]
    else:
        sol = solve_ivp(f, (0.0, times[-1]), rho0.ravel(), method="DOP853",
                        t_eval=times, rtol=rtol, atol=atol)
        if not sol.success:
            raise ConvergenceError(sol.message)
        dim = 2 ** n
        states = [sol.y[:, k].reshape(dim, dim) for k in range(len(times))]
    out = [DensityOperator(0.5 * (r + r.conj().T), n) for r in states]
    return out[0] if np.ndim(t) == 0 else out


def local_op(op, site, n):
    mats = [np.eye(2, dtype=complex)] * n
    mats[site] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def collective(direction: MeasurementDirection, n):
    """sum_i sigma^dir_i as a dense matrix."""
    single = (direction.c_x * np.array([[0, 1], [1, 0]], dtype=complex)
              + direction.c_y * np.array([[0, -1j], [1j, 0]])
              + direction.c_z * SIGMA_Z)
    return sum(local_op(single, i, n) for i in range(n))


def _single_eigenbasis(direction: MeasurementDirection):
    single = (direction.c_x * np.array([[0, 1], [1, 0]], dtype=complex)
              + direction.c_y * np.array([[0, -1j], [1j, 0]])
              + direction.c_z * SIGMA_Z)
    _, vecs = np.linalg.eigh(single)
    return vecs[:, ::-1]  # column 0 = +1 eigenvector


def oracle_counting(rho: DensityOperator, direction: MeasurementDirection):
    """P(n) for n = 0..N spins found along +direction, by projective readout."""
    n = rho.n_ions
    u1 = _single_eigenbasis(direction)
    u = u1
    for _ in range(n - 1):
        u = np.kron(u, u1)
    diag = np.real(np.einsum("ai,ab,bi->i", u.conj(), rho.matrix, u))
    ups = (_spins(n) == 1).sum(axis=1)
    return np.bincount(ups, weights=diag, minlength=n + 1)


def rotate_state(rho: DensityOperator, generator_direction: MeasurementDirection, angle):
    """exp(-i angle S_gen) rho exp(+i angle S_gen) with S_gen = (1/2) sum sigma^gen."""
    u1 = _single_rotation(generator_direction, angle)
    u = u1
    for _ in range(rho.n_ions - 1):
        u = np.kron(u, u1)
    return DensityOperator(u @ rho.matrix @ u.conj().T, rho.n_ions)


def _single_rotation(direction, angle):
    single = (direction.c_x * np.array([[0, 1], [1, 0]], dtype=complex)
              + direction.c_y * np.array([[0, -1j], [1j, 0]])
              + direction.c_z * SIGMA_Z)
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * single


def characteristic_function(rho: DensityOperator, direction: MeasurementDirection, q):
    """<exp(i q sum sigma^dir)> evaluated from the dense state."""
    p = oracle_counting(rho, direction)
    n = rho.n_ions
    eig = 2 * np.arange(n + 1) - n
    q = np.asarray(q, dtype=float)
    return np.exp(1j * np.multiply.outer(q, eig)) @ p


def sample_distribution(probabilities, trials, seed):
    """Histogram of ``trials`` draws from a discrete distribution.

    Uses a counter-based Philox generator so the result depends only on the
    seed, and independent streams can be spawned for parallel sampling.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    p = np.asarray(getattr(probabilities, "probabilities", probabilities), dtype=float)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.multinomial(trials, p)


def random_draw(n, rng):
    """Random parameters, time and tomography angle for an oracle comparison."""
    params = SpinEnsembleParams(
        n_ions=n, j_bar=float(rng.uniform(-4.0, 4.0)),
        gamma_el=float(rng.uniform(0.0, 0.5)), gamma_ud=float(rng.uniform(0.0, 0.3)),
        gamma_du=float(rng.uniform(0.0, 0.3)), tau=float(rng.uniform(0.0, 2.0)))
    return params, float(rng.uniform(0.0, math.pi))


def compare_to_oracle(params: SpinEnsembleParams, psi_angle: float) -> dict:
    """Largest absolute deviations of the analytic results from dense propagation.

    Keys: ``s_plus`` (one-body), ``pair`` (all two-body correlators), ``contrast``,
    ``variance`` (of S_psi) and ``counting`` (distribution along psi).
    """
    from .counting import counting_distribution
    from .dynamics import contrast, correlators_uniform, uniform_moments

    n = params.n_ions
    rho = lindblad_propagate(n, params, params.tau)
    ops = {"+": SIGMA_PLUS, "-": SIGMA_MINUS, "z": SIGMA_Z}
    counts = {"+": (1, 0, 0), "-": (0, 1, 0), "z": (0, 0, 1)}
    err = {}
    exact = rho.expect(local_op(SIGMA_PLUS, 0, n))
    err["s_plus"] = abs(correlators_uniform(1, 0, 0, params) - exact)
    err["pair"] = 0.0
    if n >= 2:
        for a, oa in ops.items():
            for b, ob in ops.items():
                exact = rho.expect(local_op(oa, 0, n) @ local_op(ob, 1, n))
                label = tuple(x + y for x, y in zip(counts[a], counts[b]))
                err["pair"] = max(err["pair"], abs(correlators_uniform(*label, params) - exact))
    err["contrast"] = abs(contrast(params) - n * abs(rho.expect(local_op(SIGMA_PLUS, 0, n))))
    direction = MeasurementDirection.tomography(psi_angle)
    sdir = 0.5 * collective(direction, n)
    mean = rho.expect(sdir).real
    var = rho.expect(sdir @ sdir).real - mean ** 2
    err["variance"] = abs(uniform_moments(direction, params)[1] - var)
    dist = counting_distribution(direction, params)
    err["counting"] = float(np.abs(dist.probabilities - oracle_counting(rho, direction)).max())
    return {k: float(v) for k, v in err.items()}
