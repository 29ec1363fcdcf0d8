"""Ranging sensor-network scenario and the two closed-form study setups.

An agent moves in a rectangular arena watched by m reference nodes. Every
step it receives one range measurement per reference,

    z = (1 + c) * h(x) + v,     h_s(x) = |ref_s - x|,   v ~ N(0, xi^2 I_m),

where c is a fixed relative range offset (a miscalibrated gain the tracker
does not know about). Positions map onto T^m through the angle-of-arrival
embedding, which is where the GP regression lives.

Also in this module: the circular mixture density used for scalar regression
on S^1 (three von Mises bumps plus one antipodally symmetric bump and
Gaussian observation noise), and the kernel sweep over two coupled circles
evaluated on a symmetric angle grid.

Trajectories and training sets serialize to headed CSV so simulation output
can feed the training and tracking stages as files.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .kernels import HvmHyperparams, HvmKernel
from .manifold import aoa_embedding_batch

__all__ = [
    "ScenarioConfig",
    "TrainingSet",
    "Trajectory",
    "CircularDensity",
    "range_function",
    "simulate_dynamics",
    "measure_range",
    "training_grid",
    "build_training_set",
    "trajectory",
    "bessel_i0",
    "case_study_1_observe",
    "case_study_2_sweep",
    "CASE2_PARAM_SETS",
    "TRAJECTORY_NAMES",
    "rng_for",
    "save_training_set",
    "load_training_set",
    "save_trajectory",
    "load_trajectory",
]

TRAJECTORY_NAMES = ("T1", "T2", "T3")


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Deterministic generator for a (seed, purpose...) tuple."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key)))


@dataclass(frozen=True)
class ScenarioConfig:
    """Arena, sensing, and motion constants.

    Defaults describe a 30 x 30 m arena with three references, a random-walk
    process model with per-axis variance 0.16 m^2, a 5 % relative range
    offset, and a 24 x 10 training grid (cell-centered, half-cell margins).
    """

    arena: tuple = (30.0, 30.0)
    references: tuple = ((5.0, 5.0), (25.0, 5.0), (15.0, 25.0))
    trajectory: str = "T1"
    steps: int = 1000
    process_cov: tuple = ((0.16, 0.0), (0.0, 0.16))
    noise_xi: float = 0.01
    offset_ratio: float = 0.05
    grid: tuple = (24, 10)
    particles: int = 100
    seed: int = 0

    def __post_init__(self):
        W, H = self.arena
        if not (W > 0 and H > 0):
            raise ValueError("arena sides must be positive")
        refs = np.asarray(self.references, dtype=float)
        if refs.ndim != 2 or refs.shape[1] != 2:
            raise ValueError("references must be (m, 2)")
        if np.any(refs < 0) or np.any(refs > [W, H]):
            raise ValueError("references must lie inside the arena")
        if len({tuple(r) for r in self.references}) != len(self.references):
            raise ValueError("references must be distinct")
        if self.trajectory not in TRAJECTORY_NAMES:
            raise ValueError(f"trajectory must be one of {TRAJECTORY_NAMES}")
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        if not self.noise_xi > 0:
            raise ValueError("noise_xi must be positive")
        if not self.offset_ratio >= 0:
            raise ValueError("offset_ratio must be nonnegative")
        Q = np.asarray(self.process_cov, dtype=float)
        if Q.shape != (2, 2) or not np.allclose(Q, Q.T):
            raise ValueError("process_cov must be a symmetric 2x2 matrix")
        if np.any(np.linalg.eigvalsh(Q) < 0):
            raise ValueError("process_cov must be positive semidefinite")
        gx, gy = self.grid
        if gx < 1 or gy < 1:
            raise ValueError("grid must have at least one cell per axis")
        if self.particles < 1:
            raise ValueError("particles must be >= 1")

    @property
    def m(self) -> int:
        return len(self.references)

    @property
    def references_array(self) -> np.ndarray:
        return np.asarray(self.references, dtype=float)

    @property
    def process_cov_array(self) -> np.ndarray:
        return np.asarray(self.process_cov, dtype=float)

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


def range_function(x, references) -> np.ndarray:
    """Distances from position(s) x to every reference: (m,) or (n, m)."""
    x = np.asarray(x, dtype=float)
    refs = np.asarray(references, dtype=float)
    single = x.ndim == 1
    pos = x[None, :] if single else x
    h = np.linalg.norm(refs[None, :, :] - pos[:, None, :], axis=2)
    return h[0] if single else h


def _cov_sqrt(Q: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (handles the singular case)."""
    w, V = np.linalg.eigh(Q)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def simulate_dynamics(x, Q, rng: np.random.Generator) -> np.ndarray:
    """One random-walk step x_next = x + w, w ~ N(0, Q). x may be (2,) or (n, 2)."""
    x = np.asarray(x, dtype=float)
    S = _cov_sqrt(np.asarray(Q, dtype=float))
    w = rng.standard_normal(x.shape) @ S.T
    return x + w


def measure_range(x, cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Offset, noisy range vector z = (1 + c) h(x) + v at one position."""
    h = range_function(x, cfg.references_array)
    return (1.0 + cfg.offset_ratio) * h + cfg.noise_xi * rng.standard_normal(cfg.m)


def training_grid(cfg: ScenarioConfig) -> np.ndarray:
    """Cell-centered uniform grid over the arena, x index fastest.

    With grid (gx, gy) and arena (W, H), positions are
    ((j + 1/2) W / gx, (k + 1/2) H / gy); margins are half a cell wide.
    """
    gx, gy = cfg.grid
    W, H = cfg.arena
    xs = (np.arange(gx) + 0.5) * (W / gx)
    ys = (np.arange(gy) + 0.5) * (H / gy)
    XX, YY = np.meshgrid(xs, ys)
    return np.column_stack([XX.ravel(), YY.ravel()])


@dataclass
class TrainingSet:
    """Grid positions with their torus embeddings and offset noisy ranges."""

    positions: np.ndarray
    inputs: np.ndarray
    obs: np.ndarray

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def build_training_set(cfg: ScenarioConfig, rng: np.random.Generator | None = None) -> TrainingSet:
    """Sample one observation per grid position (seeded from cfg by default)."""
    if rng is None:
        rng = rng_for(cfg.seed, 0)
    pos = training_grid(cfg)
    inputs = aoa_embedding_batch(pos, cfg.references_array)
    h = range_function(pos, cfg.references_array)
    obs = (1.0 + cfg.offset_ratio) * h + cfg.noise_xi * rng.standard_normal(h.shape)
    return TrainingSet(positions=pos, inputs=inputs, obs=obs)


# ---------------------------------------------------------------------------
# Trajectories: closed curves sampled at uniform arc increments.
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Agent ground truth: (steps, 2) positions along a closed curve."""

    name: str
    positions: np.ndarray

    @property
    def steps(self) -> int:
        return self.positions.shape[0]


def _curve_points(name: str, t: np.ndarray) -> np.ndarray:
    """Closed parametric curves on t in [0, 1]."""
    if name == "T1":
        # circle of radius 9 around the arena center
        ang = 2.0 * np.pi * t
        return np.column_stack([15.0 + 9.0 * np.cos(ang), 15.0 + 9.0 * np.sin(ang)])
    if name == "T2":
        # 1:2 figure-eight spanning [6, 24]^2
        ang = 2.0 * np.pi * t
        return np.column_stack([15.0 + 9.0 * np.sin(ang), 15.0 + 9.0 * np.sin(2.0 * ang)])
    if name == "T3":
        # rounded-rectangle perimeter of [5, 25]^2, corner radius 2
        return _rounded_rectangle(5.0, 25.0, 2.0, t)
    raise ValueError(f"unknown trajectory {name!r}")


def _rounded_rectangle(lo: float, hi: float, r: float, t: np.ndarray) -> np.ndarray:
    side = hi - lo - 2.0 * r
    arc = 0.5 * np.pi * r
    total = 4.0 * (side + arc)
    s = np.asarray(t, dtype=float) * total
    pts = np.empty((s.size, 2))
    # walk counterclockwise from (lo + r, lo): bottom, right, top, left,
    # with a quarter arc after each straight
    for i, si in enumerate(s % total):
        leg, rem = divmod(si, side + arc)
        leg = int(leg)
        if leg == 0:
            if rem < side:
                pts[i] = (lo + r + rem, lo)
            else:
                a = (rem - side) / r
                pts[i] = (hi - r + r * np.sin(a), lo + r - r * np.cos(a))
        elif leg == 1:
            if rem < side:
                pts[i] = (hi, lo + r + rem)
            else:
                a = (rem - side) / r
                pts[i] = (hi - r + r * np.cos(a), hi - r + r * np.sin(a))
        elif leg == 2:
            if rem < side:
                pts[i] = (hi - r - rem, hi)
            else:
                a = (rem - side) / r
                pts[i] = (lo + r - r * np.sin(a), hi - r + r * np.cos(a))
        else:
            if rem < side:
                pts[i] = (lo, hi - r - rem)
            else:
                a = (rem - side) / r
                pts[i] = (lo + r - r * np.cos(a), lo + r - r * np.sin(a))
    return pts


_DENSE_SAMPLES = 20000


def trajectory(cfg: ScenarioConfig) -> Trajectory:
    """Sample cfg.trajectory at cfg.steps uniform arc-length increments.

    The curve is traversed exactly once; the implied per-step path length is
    (total curve length / steps). Positions are validated to lie inside the
    arena and away from every reference.
    """
    name = cfg.trajectory
    t_dense = np.linspace(0.0, 1.0, _DENSE_SAMPLES + 1)
    dense = _curve_points(name, t_dense)
    seg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    s_targets = np.arange(cfg.steps) * (total / cfg.steps)
    xs = np.interp(s_targets, cum, dense[:, 0])
    ys = np.interp(s_targets, cum, dense[:, 1])
    pos = np.column_stack([xs, ys])
    W, H = cfg.arena
    if np.any(pos < -1e-9) or np.any(pos[:, 0] > W + 1e-9) or np.any(pos[:, 1] > H + 1e-9):
        raise ValueError(f"trajectory {name} leaves the arena")
    dist = range_function(pos, cfg.references_array)
    if np.min(dist) < 1e-6:
        raise ValueError(f"trajectory {name} passes through a reference")
    return Trajectory(name=name, positions=pos)


# ---------------------------------------------------------------------------
# Scalar study on S^1: circular mixture density with Gaussian readout noise.
# ---------------------------------------------------------------------------


def bessel_i0(x: float) -> float:
    """Modified Bessel function of order zero, truncated power series.

    Terms are accumulated until the relative increment drops below 1e-15.
    """
    x = float(x)
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if term < 1e-15 * total:
            return total


def _vm_pdf(theta, mu: float, kappa: float):
    return np.exp(kappa * np.cos(theta - mu)) / (2.0 * np.pi * bessel_i0(kappa))


@dataclass(frozen=True)
class CircularDensity:
    """Mixture on S^1: weighted von Mises bumps plus one axial bump.

    The axial component is antipodally symmetric: density proportional to
    exp(conc * sin^2(theta - axis)) with conc < 0, i.e. concentrated along
    the axis direction and its antipode. Observations of the density value
    carry additive Gaussian noise with variance noise_var.
    """

    vm_components: tuple = ((0.0, 2.0), (0.5 * np.pi, 4.0), (4.0, 1.0))
    vm_weights: tuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    axial_angle: float = 1.0
    axial_conc: float = -3.0
    axial_weight: float = 1.0
    noise_var: float = 0.0025

    def __post_init__(self):
        if len(self.vm_components) != len(self.vm_weights):
            raise ValueError("one weight per von Mises component")
        if not self.axial_conc < 0:
            raise ValueError("axial concentration must be negative")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")

    def mean_value(self, theta):
        """Noiseless mixture value at angle(s) theta."""
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta, dtype=float)
        for (mu, kappa), w in zip(self.vm_components, self.vm_weights):
            out = out + w * _vm_pdf(theta, mu, kappa)
        # exp(conc sin^2 u) = exp(conc/2) exp(-(conc/2) cos 2u); normalizer
        # over the circle is 2 pi exp(conc/2) I0(conc/2)
        half = 0.5 * self.axial_conc
        axial = np.exp(-half * np.cos(2.0 * (theta - self.axial_angle))) / (
            2.0 * np.pi * bessel_i0(half)
        )
        return out + self.axial_weight * axial


DEFAULT_DENSITY = CircularDensity()


def case_study_1_observe(theta, rng: np.random.Generator, density: CircularDensity = DEFAULT_DENSITY):
    """Noisy observation(s) of the circular mixture at angle(s) theta."""
    theta = np.asarray(theta, dtype=float)
    noise = rng.standard_normal(theta.shape) if theta.shape else float(rng.standard_normal())
    return density.mean_value(theta) + np.sqrt(density.noise_var) * noise


# ---------------------------------------------------------------------------
# Kernel sweep on T^2: similarity against a fixed point over an angle grid.
# ---------------------------------------------------------------------------

# Four parameter sets on two circles: concentrations only (sets 1, 3) and the
# same concentrations with a pairwise interaction weight added (sets 2, 4).
CASE2_PARAM_SETS = (
    HvmHyperparams(1.0, (0.3, 0.3), (0.0,)),
    HvmHyperparams(1.0, (0.3, 0.3), (0.3,)),
    HvmHyperparams(1.0, (1.0, 1.0), (0.0,)),
    HvmHyperparams(1.0, (1.0, 1.0), (1.0,)),
)


@dataclass
class SweepResult:
    """Kernel values against the fixed point over the (alpha, beta) grid."""

    params: HvmHyperparams
    alphas: np.ndarray
    betas: np.ndarray
    values: np.ndarray
    normalized: np.ndarray


def case_study_2_sweep(params: HvmHyperparams, resolution: int = 181) -> SweepResult:
    """Evaluate k(u0, v(alpha, beta)) on a symmetric angle grid.

    u0 is the torus point at angles (0, 0); the grid is the inclusive
    symmetric linspace over [-pi, pi] per axis (odd resolutions contain 0).
    Rows index alpha, columns beta. normalized is values / max(values).
    """
    if params.m != 2:
        raise ValueError("the sweep is defined on two circles")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    kernel = HvmKernel(params)
    grid = np.linspace(-np.pi, np.pi, resolution)
    A, Bm = np.meshgrid(grid, grid, indexing="ij")
    pts = np.empty((resolution * resolution, 2, 2))
    pts[:, 0, 0] = np.cos(A).ravel()
    pts[:, 0, 1] = np.sin(A).ravel()
    pts[:, 1, 0] = np.cos(Bm).ravel()
    pts[:, 1, 1] = np.sin(Bm).ravel()
    u0 = np.array([[[1.0, 0.0], [1.0, 0.0]]])
    vals = kernel.gram(pts, u0)[:, 0].reshape(resolution, resolution)
    return SweepResult(
        params=params,
        alphas=grid,
        betas=grid.copy(),
        values=vals,
        normalized=vals / np.max(vals),
    )


# ---------------------------------------------------------------------------
# File formats: headed CSV, full float precision.
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def save_training_set(ts: TrainingSet, path) -> None:
    m = ts.inputs.shape[1]
    header = ["x_m", "y_m"]
    for s in range(m):
        header += [f"aoa{s + 1}_e1", f"aoa{s + 1}_e2"]
    header += [f"range{s + 1}_m" for s in range(ts.obs.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(ts.n):
            row = [_fmt(ts.positions[i, 0]), _fmt(ts.positions[i, 1])]
            for s in range(m):
                row += [_fmt(ts.inputs[i, s, 0]), _fmt(ts.inputs[i, s, 1])]
            row += [_fmt(v) for v in ts.obs[i]]
            w.writerow(row)


def load_training_set(path) -> TrainingSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty training-set file")
    header = rows[0]
    m = sum(1 for h in header if h.endswith("_e1"))
    d = sum(1 for h in header if h.startswith("range"))
    expected = ["x_m", "y_m"]
    for s in range(m):
        expected += [f"aoa{s + 1}_e1", f"aoa{s + 1}_e2"]
    expected += [f"range{s + 1}_m" for s in range(d)]
    if header != expected:
        raise ValueError(f"{path}: unexpected training-set header {header}")
    data = np.asarray(rows[1:], dtype=float)
    pos = data[:, :2]
    inputs = data[:, 2 : 2 + 2 * m].reshape(-1, m, 2)
    obs = data[:, 2 + 2 * m :]
    return TrainingSet(positions=pos, inputs=inputs, obs=obs)


def save_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "x_m", "y_m"])
        for i, (x, y) in enumerate(traj.positions):
            w.writerow([i, _fmt(x), _fmt(y)])


def load_trajectory(path, name: str = "file") -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["step", "x_m", "y_m"]:
        raise ValueError(f"{path}: unexpected trajectory header")
    data = np.asarray(rows[1:], dtype=float)
    return Trajectory(name=name, positions=data[:, 1:3])
