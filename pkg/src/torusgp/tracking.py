"""Particle-filter tracking with learned range models.

The filter propagates a particle cloud through the random-walk process model,
reweights every particle by the likelihood of the incoming range vector under
a measurement model, normalizes in log space, and resamples systematically at
every step. Divergence (all weights underflowing to zero) resets the cloud to
uniform weights and flags the run.

Two measurement-model families are supported:

- GpRangeModel: a trained multi-output GP over angle-of-arrival embeddings;
  each particle is scored under the GP's predictive observation density
  N(z; mean(x), C(x) + R). All per-particle predictive moments are computed
  in one batch from the cached factorization.
- ParametricRangeModel: ranges as known geometry plus a constant Gaussian
  residual fitted to the training set, N(z; h(x) + bias, Sigma). It ignores
  where in the arena the residual was collected, which is exactly its
  weakness.

The campaign driver trains every requested method on the same per-noise-level
training set, runs seeded Monte Carlo repetitions, and emits one summary row
per (method, trajectory, noise, run).
"""

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import gp as gp_mod
from . import hyperopt
from .manifold import AOA_SINGULARITY_TOL, aoa_embedding_batch
from .simulator import (
    ScenarioConfig,
    TrainingSet,
    Trajectory,
    build_training_set,
    measure_range,
    range_function,
    rng_for,
    simulate_dynamics,
    trajectory,
)

__all__ = [
    "METHODS",
    "ParticleSet",
    "TrackingResult",
    "TrainedMethod",
    "GpRangeModel",
    "ParametricRangeModel",
    "systematic_resample",
    "fit_parametric",
    "save_parametric",
    "load_parametric",
    "load_range_model",
    "train_method",
    "step",
    "run_tracking",
    "campaign",
    "write_campaign_csv",
    "CAMPAIGN_HEADER",
]

METHODS = ("HvM", "PvM", "PPRD", "PSE", "Parametric")
GP_FAMILIES = {"HvM": "hvm", "PvM": "pvm", "PPRD": "pprd", "PSE": "pse"}

CAMPAIGN_HEADER = ["method", "trajectory", "noise_level", "seed", "rmse", "diverged"]

_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass
class ParticleSet:
    """Particle positions with normalized weights."""

    positions: np.ndarray
    weights: np.ndarray
    diverged: bool = False

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must be (N, 2)")
        if self.weights.shape != (self.positions.shape[0],):
            raise ValueError("one weight per particle")
        if np.any(self.weights < 0) or abs(float(np.sum(self.weights)) - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to one")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.positions


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn on the systematic comb u0/N, (u0+1)/N, ... with u0 ~ U[0,1)."""
    w = np.asarray(weights, dtype=float)
    N = w.size
    pts = (rng.uniform() + np.arange(N)) / N
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.minimum(np.searchsorted(cum, pts, side="left"), N - 1)


# ---------------------------------------------------------------------------
# Measurement models.
# ---------------------------------------------------------------------------


class GpRangeModel:
    """Batched per-particle predictive likelihood under a trained GP.

    For a particle at x with embedding u, the prediction follows the single
    test-point multi-output form: mean = (B kron k_row) alpha and covariance
    C = k(u,u) B - Y^T Y with Y = L^-1 (B kron k_row)^T, scored with the
    observation noise R added. The Gram form of the downdate keeps C positive
    semidefinite even when the trained system is badly conditioned; one
    triangular solve covers all particles of a step.
    """

    def __init__(self, trained: gp_mod.TrainedGp):
        if not trained.multi_output:
            raise ValueError("tracking needs a multi-output range model")
        self.gp = trained
        self.A_mat = trained.alpha.reshape(trained.d, trained.n)
        self.B = trained.coreg
        self.noise_var = np.asarray(trained.noise_var, dtype=float)
        self.c0 = trained.kernel.prior_variance()

    def logpdf(self, positions: np.ndarray, z: np.ndarray, references: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        P = positions.shape[0]
        out = np.full(P, -np.inf)
        dist = range_function(positions, references)
        ok = np.min(dist, axis=1) >= AOA_SINGULARITY_TOL
        if not np.any(ok):
            return out
        emb = aoa_embedding_batch(positions[ok], references)
        d, n = self.gp.d, self.gp.n
        K_pt = self.gp.kernel.gram(emb, self.gp.inputs)  # (p, n)
        p = K_pt.shape[0]
        means = (self.B @ (self.A_mat @ K_pt.T)).T  # (p, d)
        # rhs[u*n + a, p*d + t] = B[t, u] * k_p[a], one column per (particle,
        # output) pair of (B kron k_row)^T
        rhs = self.B.T[:, None, None, :] * K_pt.T[None, :, :, None]
        Y = solve_triangular(self.gp.chol, rhs.reshape(d * n, p * d), lower=True)
        Yp = Y.reshape(d * n, p, d)
        M = np.einsum("kpi,kpj->pij", Yp, Yp)
        S = self.c0 * self.B[None, :, :] - M
        S[:, np.arange(d), np.arange(d)] += self.noise_var
        r = z[None, :] - means
        sign, logdet = np.linalg.slogdet(S)
        ll = np.full(S.shape[0], -np.inf)
        good = sign > 0
        if np.any(good):
            try:
                sol = np.linalg.solve(S[good], r[good][:, :, None])[:, :, 0]
                quad = np.einsum("id,id->i", r[good], sol)
                ll[good] = -0.5 * (quad + logdet[good] + d * _LOG2PI)
            except np.linalg.LinAlgError:
                for i in np.flatnonzero(good):
                    try:
                        sol = np.linalg.solve(S[i], r[i])
                        ll[i] = -0.5 * (r[i] @ sol + logdet[i] + d * _LOG2PI)
                    except np.linalg.LinAlgError:
                        pass
        ll[~np.isfinite(ll)] = -np.inf
        out[ok] = ll
        return out


class ParametricRangeModel:
    """Known geometry plus a constant Gaussian residual model."""

    def __init__(self, bias: np.ndarray, cov: np.ndarray):
        self.bias = np.asarray(bias, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        self.chol, _ = gp_mod.cholesky_with_jitter(self.cov, label="parametric residual")
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def logpdf(self, positions: np.ndarray, z: np.ndarray, references: np.ndarray) -> np.ndarray:
        h = range_function(np.asarray(positions, dtype=float), references)
        r = z[None, :] - (h + self.bias[None, :])
        y = solve_triangular(self.chol, r.T, lower=True)
        quad = np.sum(y * y, axis=0)
        return -0.5 * (quad + self.logdet + self.bias.size * _LOG2PI)


def fit_parametric(ts: TrainingSet, references) -> ParametricRangeModel:
    """Bias and covariance of the training residuals z - h(x)."""
    h = range_function(ts.positions, np.asarray(references, dtype=float))
    res = ts.obs - h
    return ParametricRangeModel(bias=res.mean(axis=0), cov=np.cov(res.T))


_PARAMETRIC_FORMAT = "torusgp-parametric"


def save_parametric(model: ParametricRangeModel, path) -> None:
    """Write the residual bias and covariance to a structured text file."""
    doc = {
        "format": _PARAMETRIC_FORMAT,
        "version": 1,
        "bias": model.bias.tolist(),
        "cov": model.cov.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_parametric(path) -> ParametricRangeModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _PARAMETRIC_FORMAT:
        raise ValueError(f"{path}: not a {_PARAMETRIC_FORMAT} file")
    return ParametricRangeModel(
        bias=np.asarray(doc["bias"], dtype=float), cov=np.asarray(doc["cov"], dtype=float)
    )


def load_range_model(path):
    """Load either measurement-model file by its format marker."""
    with open(path) as fh:
        doc = json.load(fh)
    fmt = doc.get("format")
    if fmt == _PARAMETRIC_FORMAT:
        return ParametricRangeModel(
            bias=np.asarray(doc["bias"], dtype=float), cov=np.asarray(doc["cov"], dtype=float)
        )
    if fmt == "torusgp-model":
        return GpRangeModel(gp_mod.load_model(path))
    raise ValueError(f"{path}: unrecognized model format {fmt!r}")


@dataclass
class TrainedMethod:
    """A ready-to-track measurement model plus its training byproducts."""

    method: str
    model: object
    gp: gp_mod.TrainedGp | None = None
    opt: hyperopt.OptResult | None = None


def train_method(
    ts: TrainingSet,
    method: str,
    references,
    *,
    budget: int = 100,
    restarts: int = 2,
    seed: int = 0,
) -> TrainedMethod:
    """Fit one method's measurement model on a training set."""
    if method == "Parametric":
        return TrainedMethod(method, fit_parametric(ts, references))
    if method not in GP_FAMILIES:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    ds = hyperopt.Dataset.from_data(ts.inputs, ts.obs)
    res = hyperopt.optimize(
        ds, GP_FAMILIES[method], budget=budget, restarts=restarts, seed=seed
    )
    trained = gp_mod.fit(ts.inputs, ts.obs, res.kernel, res.noise_var, coreg=res.coreg)
    return TrainedMethod(method, GpRangeModel(trained), gp=trained, opt=res)


# ---------------------------------------------------------------------------
# Filtering.
# ---------------------------------------------------------------------------


def step(
    particles: ParticleSet,
    z: np.ndarray,
    model,
    cfg: ScenarioConfig,
    rng: np.random.Generator,
) -> ParticleSet:
    """One filter update: propagate, reweight, normalize, resample.

    If every weight underflows to zero (or no particle has a finite
    likelihood), the weights reset to uniform and the returned set is marked
    diverged.
    """
    prop = simulate_dynamics(particles.positions, cfg.process_cov_array, rng)
    ll = model.logpdf(prop, np.asarray(z, dtype=float), cfg.references_array)
    with np.errstate(divide="ignore"):
        logw = np.log(particles.weights) + ll
    N = particles.n
    shift = np.max(logw)
    diverged = False
    if not np.isfinite(shift):
        w = np.full(N, 1.0 / N)
        diverged = True
    else:
        w = np.exp(logw - shift)
        total = float(np.sum(w))
        if total <= 0.0 or not np.isfinite(total):
            w = np.full(N, 1.0 / N)
            diverged = True
        else:
            w = w / total
    idx = systematic_resample(w, rng)
    return ParticleSet(prop[idx], np.full(N, 1.0 / N), diverged=diverged)


@dataclass
class TrackingResult:
    """One filtering pass: per-step estimates, errors, and summary."""

    method: str
    trajectory: str
    seed: int
    truth: np.ndarray
    estimates: np.ndarray
    ape: np.ndarray
    rmse: float
    diverged: bool


def run_tracking(
    cfg: ScenarioConfig,
    method: str,
    model,
    seed: int,
    traj: Trajectory | None = None,
) -> TrackingResult:
    """Filter one measurement sequence along the configured trajectory.

    The measurement stream and the filter's randomness are derived from seed
    through fixed subkeys, so identical (cfg, method, model, seed) arguments
    reproduce the result exactly. The particle cloud starts from a unit
    Gaussian around the true initial position; the estimate is the weighted
    particle mean (uniform after resampling).
    """
    if traj is None:
        traj = trajectory(cfg)
    truth = traj.positions
    steps = truth.shape[0]
    meas_rng = rng_for(seed, 1)
    filt_rng = rng_for(seed, 2)
    N = cfg.particles
    cloud = truth[0] + filt_rng.standard_normal((N, 2))
    particles = ParticleSet(cloud, np.full(N, 1.0 / N))
    estimates = np.empty_like(truth)
    estimates[0] = particles.mean()
    diverged = False
    for t in range(1, steps):
        z = measure_range(truth[t], cfg, meas_rng)
        particles = step(particles, z, model, cfg, filt_rng)
        diverged = diverged or particles.diverged
        estimates[t] = particles.mean()
    ape = np.linalg.norm(estimates - truth, axis=1)
    rmse = float(np.sqrt(np.mean(ape**2)))
    return TrackingResult(
        method=method,
        trajectory=traj.name,
        seed=seed,
        truth=truth,
        estimates=estimates,
        ape=ape,
        rmse=rmse,
        diverged=diverged,
    )


# ---------------------------------------------------------------------------
# Monte Carlo campaign.
# ---------------------------------------------------------------------------


def _row_seed(base_seed: int, ni: int, ti: int, run: int) -> int:
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(2, ni, ti, run))
    return int(ss.generate_state(1)[0])


def _train_seed(base_seed: int, ni: int, mi: int) -> int:
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(1, ni, mi))
    return int(ss.generate_state(1)[0])


_WORKER = {}


def _init_worker(state):
    _WORKER.update(state)


def _run_row(task):
    ni, ti, run, method = task
    state = _WORKER
    cfg = state["cfgs"][(ni, ti)]
    traj = state["trajs"][(ni, ti)]
    model = state["models"][(ni, method)]
    seed = _row_seed(state["seed"], ni, ti, run)
    result = run_tracking(cfg, method, model, seed, traj=traj)
    return {
        "method": method,
        "trajectory": result.trajectory,
        "noise_level": cfg.noise_xi,
        "seed": seed,
        "rmse": result.rmse,
        "diverged": int(result.diverged),
    }


def campaign(
    cfg: ScenarioConfig,
    *,
    methods=METHODS,
    trajectories=("T1",),
    noise_levels=(0.01,),
    runs: int = 20,
    seed: int = 0,
    opt_budget: int = 100,
    opt_restarts: int = 2,
    jobs: int = 1,
):
    """Train per noise level and run the full (method x trajectory x run) grid.

    Returns (rows, trained) where rows is the ordered list of summary dicts
    (one per tracking run, CAMPAIGN_HEADER fields) and trained maps
    (noise_index, method) to the TrainedMethod used. Results are identical
    for a fixed seed regardless of jobs.
    """
    methods = list(methods)
    for mth in methods:
        if mth not in METHODS:
            raise ValueError(f"unknown method {mth!r}; choose from {METHODS}")
    models = {}
    trained = {}
    cfgs = {}
    trajs = {}
    for ni, xi in enumerate(noise_levels):
        cfg_n = cfg.with_(noise_xi=float(xi), seed=seed)
        train_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=int(seed), spawn_key=(0, ni))
        )
        ts = build_training_set(cfg_n, train_rng)
        for mi, method in enumerate(methods):
            tm = train_method(
                ts,
                method,
                cfg_n.references_array,
                budget=opt_budget,
                restarts=opt_restarts,
                seed=_train_seed(seed, ni, mi),
            )
            trained[(ni, method)] = tm
            models[(ni, method)] = tm.model
        for ti, tname in enumerate(trajectories):
            cfg_t = cfg_n.with_(trajectory=tname)
            cfgs[(ni, ti)] = cfg_t
            trajs[(ni, ti)] = trajectory(cfg_t)
    tasks = [
        (ni, ti, run, method)
        for ni in range(len(noise_levels))
        for ti in range(len(trajectories))
        for run in range(runs)
        for method in methods
    ]
    state = {"cfgs": cfgs, "trajs": trajs, "models": models, "seed": seed}
    if jobs <= 1:
        _init_worker(state)
        rows = [_run_row(t) for t in tasks]
        _WORKER.clear()
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(state,)
        ) as ex:
            rows = list(ex.map(_run_row, tasks))
    return rows, trained


def write_campaign_csv(rows, path) -> None:
    """Summary table: method, trajectory, noise_level, seed, rmse, diverged."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CAMPAIGN_HEADER)
        for row in rows:
            w.writerow(
                [
                    row["method"],
                    row["trajectory"],
                    repr(float(row["noise_level"])),
                    int(row["seed"]),
                    repr(float(row["rmse"])),
                    int(row["diverged"]),
                ]
            )
