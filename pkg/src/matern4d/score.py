"""The shell, the mismatch weights, the score statistic and its Monte Carlo harness."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import delta_analytic_sq
from .simulator import SimConfig, replicate_rng, simulate, variance_curve
from .taper import FreqLattice


class DegenerateMismatchError(ValueError):
    """The two models have identical variances over the shell (L = 0)."""


@dataclass(frozen=True)
class Shell:
    """Integer frequencies k in N_0^4 with K0 <= max|k_i| <= K1, representable on the lattice."""

    K0: int
    K1: int
    indices: np.ndarray

    def __len__(self):
        return len(self.indices)


def shell_indices(K0: int, K1: int, lattice: FreqLattice | None = None) -> Shell:
    """Enumerate the shell in lexicographic order.

    With ``lattice`` given, keep only k whose lattice index q*k lies in the box.
    """
    if K0 < 0 or K1 < 0:
        raise ValueError("K0 and K1 must be nonnegative")
    if K0 > K1:
        raise ValueError(f"K0={K0} exceeds K1={K1}")
    top = K1
    if lattice is not None:
        # coordinates are nonnegative, so only the upper edge q*k <= M-1 can bind
        top = min(K1, (lattice.M - 1) // lattice.q)
    grid = np.array(list(itertools.product(range(top + 1), repeat=4)), dtype=np.int64)
    grid = grid.reshape(-1, 4)
    keep = grid.max(axis=1) >= K0
    ks = grid[keep]
    if len(ks) == 0:
        raise ValueError(f"empty shell for K0={K0}, K1={K1}")
    ks.setflags(write=False)
    return Shell(K0, K1, ks)


def delta_from_variances(v1_curve, v2_curve, shell: Shell, lattice: FreqLattice) -> np.ndarray:
    """delta_k = v2(k)/v1(k) - 1 over the shell."""
    pos = lattice.positions(shell.indices)
    v1 = np.asarray(v1_curve)[pos]
    v2 = np.asarray(v2_curve)[pos]
    if np.any(v1 <= 0):
        raise ValueError("v1 must be strictly positive on the shell")
    return v2 / v1 - 1.0


@dataclass
class ScoreReport:
    S: float
    L: float
    T: float
    n_terms: int
    per_k: list | None = None


def score(xk, v1k, deltas, shell: Shell | None = None, per_k: bool = False) -> ScoreReport:
    """Score S and information L, normalized as T = S / L.

    Parameters
    ----------
    xk : array_like
        Coefficients X_k over the shell (complex).
    v1k : array_like
        Model-1 variances v1(k) over the shell.
    deltas : array_like
        Mismatch weights delta_k over the shell.
    shell : Shell, optional
        Only needed to label the per-frequency table.
    per_k : bool
        Attach the table of (k, delta_k, |X_k|^2 / v1(k)).
    """
    xk = np.asarray(xk)
    v1k = np.asarray(v1k, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    ratio = np.abs(xk) ** 2 / v1k
    L = float(np.sum(deltas**2))
    if L == 0.0:
        raise DegenerateMismatchError("degenerate mismatch: L = 0 over the shell")
    S = float(np.sum(deltas * (ratio - 1.0)))
    table = None
    if per_k:
        labels = shell.indices if shell is not None else range(len(deltas))
        table = [(tuple(int(c) for c in np.atleast_1d(k)), float(d), float(r))
                 for k, d, r in zip(labels, deltas, ratio)]
    return ScoreReport(S=S, L=L, T=S / L, n_terms=len(deltas), per_k=table)


def diag_llr(xk, v1k, v2k):
    """Exact diagonal log likelihood ratio and its remainder against S - L/2.

    Returns ``(llr, S, L, R)`` with R = llr - (S - L/2).
    """
    v1k = np.asarray(v1k, dtype=float)
    deltas = np.asarray(v2k, dtype=float) / v1k - 1.0
    if np.any(deltas <= -1.0):
        raise ValueError("delta_k <= -1: variance ratio is not positive")
    ratio = np.abs(np.asarray(xk)) ** 2 / v1k
    llr = float(np.sum(-np.log1p(deltas) + ratio * deltas / (1.0 + deltas)))
    S = float(np.sum(deltas * (ratio - 1.0)))
    L = float(np.sum(deltas**2))
    return llr, S, L, llr - (S - 0.5 * L)


def diagonal_draws(vk, rng: np.random.Generator) -> np.ndarray:
    """Independent circular complex Gaussians with E|X_k|^2 = v(k)."""
    vk = np.asarray(vk, dtype=float)
    z = rng.standard_normal((2,) + vk.shape)
    return np.sqrt(vk / 2.0) * (z[0] + 1j * z[1])


@dataclass
class MCResult:
    reps: int
    mean_T: float
    var_T: float
    per_rep_T: list
    model_tag: int


class ScoreSetup:
    """Variance curves and weights shared, read-only, by all replicates."""

    def __init__(self, config: SimConfig, shell: Shell):
        config.pair.require_mismatch()
        self.config = config
        self.shell = shell
        lat = config.lattice
        self.v1_curve = variance_curve(config.pair.model1, lat, config.taper, config.conv_mode)
        self.v2_curve = variance_curve(config.pair.model2, lat, config.taper, config.conv_mode)
        self.positions = lat.positions(shell.indices)
        self.v1k = self.v1_curve[self.positions]
        self.v2k = self.v2_curve[self.positions]
        self.deltas = delta_from_variances(self.v1_curve, self.v2_curve, shell, lat)
        if float(np.sum(self.deltas**2)) == 0.0:
            raise DegenerateMismatchError("degenerate mismatch: L = 0 over the shell")

    def replicate_T(self, model_tag: int, replicate: int) -> float:
        field = simulate(self.config, model_tag, replicate)
        return score(field.X[self.positions], self.v1k, self.deltas).T


def summarize(values, model_tag: int) -> MCResult:
    values = [float(v) for v in values]
    arr = np.asarray(values)
    var = float(np.var(arr, ddof=1)) if len(arr) > 1 else 0.0
    return MCResult(len(values), float(np.mean(arr)), var, values, model_tag)


def mc_experiment(
    config: SimConfig,
    shell: Shell,
    reps: int,
    generate_under: int,
    threads: int = 1,
    setup: ScoreSetup | None = None,
) -> MCResult:
    """Run ``reps`` replicates under one model and score each against (v1, delta).

    Replicate i always uses the stream (master_seed, model, i), so the result
    does not depend on ``threads``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if generate_under not in (1, 2):
        raise ValueError("generate_under must be 1 or 2")
    setup = setup or ScoreSetup(config, shell)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda i: setup.replicate_T(generate_under, i), range(reps)))
    else:
        values = [setup.replicate_T(generate_under, i) for i in range(reps)]
    return summarize(values, generate_under)


def diagonal_mc(v1k, v2k, reps: int, generate_under: int, master_seed: int = 0):
    """Replicates of (T, R) under the diagonal approximation of model ``generate_under``."""
    v1k = np.asarray(v1k, dtype=float)
    v2k = np.asarray(v2k, dtype=float)
    vk = v1k if generate_under == 1 else v2k
    deltas = v2k / v1k - 1.0
    T = np.empty(reps)
    R = np.empty(reps)
    for i in range(reps):
        xk = diagonal_draws(vk, replicate_rng(master_seed, 100 + generate_under, i))
        T[i] = score(xk, v1k, deltas).T
        R[i] = diag_llr(xk, v1k, v2k)[3]
    return T, R


def shell_square_counts(K0: int, N: int) -> np.ndarray:
    """counts[s] = #{k in {0..N}^4 : max k_i >= K0, |k|^2 = s}.

    Exact integer counting: convolve the indicator of squares with itself four
    times, one shifted add per square since the indicator is sparse.
    """

    def box(n):
        out = np.zeros(4 * n * n + 1, dtype=np.int64)
        if n < 0:
            return out[:1] * 0
        out[0] = 1
        for _ in range(4):
            prev = out.copy()
            out[:] = 0
            for j in range(n + 1):
                sq = j * j
                out[sq:] += prev[: len(out) - sq]
        return out

    full = box(N)
    inner = box(K0 - 1)
    full[: len(inner)] -= inner
    return full


def ln_growth(K0: int, N_list, alpha1: float, alpha2: float, nu: float):
    """L_N = sum of delta_analytic(k)^2 over K0 <= max|k_i| <= N, k in N_0^4.

    Summed by grouping frequencies with equal |k|^2, so N = 128 (about 2.7e8
    frequencies) costs a few integer convolutions.
    """
    if K0 < 1:
        raise ValueError("K0 must be >= 1 so that k = 0 is excluded")
    rows = []
    for N in N_list:
        if N < K0:
            raise ValueError(f"N={N} is below K0={K0}")
        counts = shell_square_counts(K0, int(N))
        s = np.nonzero(counts)[0]
        d = delta_analytic_sq(s.astype(float), alpha1, alpha2, nu)
        rows.append((int(N), float(np.sum(counts[s] * d**2))))
    return rows


def log_fit(table):
    """Least-squares fit L = a + b log N; returns (slope, intercept, r_squared)."""
    N = np.array([r[0] for r in table], dtype=float)
    L = np.array([r[1] for r in table], dtype=float)
    x = np.log(N)
    b, a = np.polyfit(x, L, 1)
    resid = L - (a + b * x)
    ss_tot = float(np.sum((L - L.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else math.nan
    return float(b), float(a), r2
