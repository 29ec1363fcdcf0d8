"""Marginal-likelihood hyperparameter fitting.

The training objective is twice the log marginal likelihood of the observed
data under the GP prior plus noise,

    F(theta) = -z^T K^-1 z - log|K| - N log(2 pi),

with N the length of the (output-major) observation vector and K the full
system matrix from torusgp.gp. Its gradient in a hyperparameter theta_i is

    dF/dtheta_i = z^T K^-1 (dK/dtheta_i) K^-1 z - tr(K^-1 dK/dtheta_i)
                = sum( (alpha alpha^T - K^-1) * dK/dtheta_i ),

with alpha = K^-1 z. Per-coordinate system-matrix derivatives:

    d omega:   (2/omega) * B kron Kxx
    d lam_s:   B kron (Kxx * D^s)
    d corr_t:  2 * B kron (Kxx * D^i * D^j)   stored pair t = (i, j)
    d B_ij:    E_ij kron Kxx                  (each entry treated independently)
    d sigma_s: 2 sigma_s * E_ss kron I_n

(single output drops B and keeps the scalar noise coordinate). K^-1 is formed
once per gradient evaluation from the cached triangular factor and contracted
blockwise against each derivative; a dense-oracle test pins the agreement.

Optimization runs in unconstrained coordinates phi:

    omega, lam, corr, lengthscales, sigma  ->  log(.)
    B = G G^T with G lower triangular      ->  log on diag(G), raw off-diagonal

and ascends with BFGS directions under monotone backtracking acceptance
(only improving steps are ever accepted, so the trace of accepted objective
values is nondecreasing by construction). Termination: gradient norm below
grad_tol * (1 + |F|), relative objective change below rel_tol, or the
iteration budget. A run counts as converged when the gradient rule fired, or
when it stalled with a final gradient norm below 1e-4 * (1 + |F|).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from . import kernels
from .gp import FactorizationError
from .manifold import as_input_array

__all__ = [
    "Dataset",
    "OptResult",
    "objective",
    "gradient",
    "default_initialization",
    "optimize",
    "GRAD_CONVERGED_FACTOR",
]

# A stalled run still counts as converged if it ends this close to stationary.
GRAD_CONVERGED_FACTOR = 1e-4

_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass
class Dataset:
    """Training data: embedded inputs and raw observations."""

    inputs: np.ndarray
    obs: np.ndarray

    @classmethod
    def from_data(cls, inputs, obs) -> "Dataset":
        X = as_input_array(inputs)
        Y = np.asarray(obs, dtype=float)
        if Y.ndim not in (1, 2) or Y.shape[0] != X.shape[0]:
            raise ValueError(f"observations of shape {Y.shape} do not match {X.shape[0]} inputs")
        return cls(X, Y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def multi_output(self) -> bool:
        return self.obs.ndim == 2

    @property
    def d(self) -> int:
        return 1 if self.obs.ndim == 1 else self.obs.shape[1]

    @property
    def zvec(self) -> np.ndarray:
        return self.obs if self.obs.ndim == 1 else np.ravel(self.obs, order="F")


@dataclass
class OptResult:
    """Outcome of one optimize() call (best restart).

    trace holds the accepted objective values of the winning restart, in
    order; converged follows the rule in the module docstring.
    """

    kernel: object
    noise_sigma: np.ndarray
    coreg: np.ndarray | None
    objective: float
    iterations: int
    converged: bool
    stop_reason: str
    grad_norm: float
    trace: list
    seed: int
    restart: int
    restart_objectives: list = field(default_factory=list)

    @property
    def noise_var(self):
        v = self.noise_sigma**2
        return float(v[0]) if self.coreg is None else v

    def theta_vector(self):
        """Full constrained coordinate vector [kernel theta, vec(B), sigma]."""
        parts = [self.kernel.theta]
        if self.coreg is not None:
            parts.append(np.ravel(self.coreg, order="F"))
        parts.append(self.noise_sigma)
        return np.concatenate(parts)

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "grad_norm": self.grad_norm,
            "restart": self.restart,
            "restart_objectives": list(self.restart_objectives),
            "trace": [float(v) for v in self.trace],
        }


def _kernel_context(kernel, X: np.ndarray):
    if hasattr(kernel, "make_context"):
        return kernel.make_context(X)
    return kernels.component_distances(X, X)


class _Problem:
    """Objective/gradient in unconstrained coordinates for one dataset.

    fixed maps kernel-coordinate names to pinned values; pinned coordinates
    are evaluated at their values and dropped from phi.
    """

    def __init__(self, dataset: Dataset, kernel_template, fixed: dict | None = None):
        self.data = dataset
        self.template = kernel_template
        self.fixed = dict(fixed or {})
        names = kernel_template.theta_names
        unknown = set(self.fixed) - set(names)
        if unknown:
            raise ValueError(f"fixed refers to unknown coordinates {sorted(unknown)}")
        self.free_idx = [i for i, nm in enumerate(names) if nm not in self.fixed]
        self.ctx = _kernel_context(kernel_template, dataset.inputs)
        self.d = dataset.d
        self.multi = dataset.multi_output
        self.n = dataset.n
        self.N = dataset.zvec.size
        # lower-triangular (row, col) order for the mixing-matrix factor
        self.tril = [(i, j) for i in range(self.d) for j in range(i + 1)] if self.multi else []

    # -- packing ------------------------------------------------------------

    def pack(self, kernel, G: np.ndarray | None, sigma: np.ndarray) -> np.ndarray:
        theta = kernel.theta
        parts = [np.log(theta[self.free_idx])]
        if self.multi:
            gvals = [np.log(G[i, i]) if i == j else G[i, j] for (i, j) in self.tril]
            parts.append(np.asarray(gvals))
        parts.append(np.log(np.atleast_1d(sigma)))
        return np.concatenate(parts)

    def unpack(self, phi: np.ndarray):
        phi = np.asarray(phi, dtype=float)
        names = self.template.theta_names
        nk = len(self.free_idx)
        theta = np.empty(len(names))
        for i, nm in enumerate(names):
            if nm in self.fixed:
                theta[i] = self.fixed[nm]
        with np.errstate(over="ignore"):
            free = np.exp(phi[:nk])
            pos = nk
            G = None
            if self.multi:
                G = np.zeros((self.d, self.d))
                for (i, j) in self.tril:
                    G[i, j] = np.exp(phi[pos]) if i == j else phi[pos]
                    pos += 1
            sigma = np.exp(phi[pos:])
        # A line-search probe can push exp() past the float range in either
        # direction; report that as a factorization failure so the caller
        # backs off instead of crashing inside a parameter constructor.
        grown = np.concatenate([free, np.diag(G) if self.multi else [], sigma])
        if (
            not np.all(np.isfinite(phi))
            or not np.all(np.isfinite(grown))
            or np.any(grown == 0.0)
        ):
            raise FactorizationError(
                f"{type(self.template).__name__}: hyperparameter coordinates "
                "left the representable positive range"
            )
        theta[self.free_idx] = free
        kernel = self.template.with_theta(theta)
        return kernel, G, sigma

    # -- evaluation ---------------------------------------------------------

    def _system(self, kernel, G, sigma):
        # Overflow is tolerated while assembling the matrix: the finiteness
        # check below turns it into a FactorizationError for the line search.
        with np.errstate(over="ignore"):
            K_x, parts = kernel.gram_and_partials(self.data.inputs, self.ctx)
            if not self.multi:
                K = K_x + sigma[0] ** 2 * np.eye(self.n)
                B = None
            else:
                B = G @ G.T
                K = np.kron(B, K_x) + np.kron(np.diag(sigma**2), np.eye(self.n))
        if not np.all(np.isfinite(K)):
            # Extreme trial coordinates overflow the kernel; report it the
            # same way as an indefinite matrix so line searches back off.
            raise FactorizationError(
                f"{type(kernel).__name__}: system matrix overflowed at the "
                "evaluated coordinates"
            )
        return K_x, parts, B, K

    def value(self, phi: np.ndarray) -> float:
        try:
            kernel, G, sigma = self.unpack(phi)
            _, _, _, K = self._system(kernel, G, sigma)
            L = np.linalg.cholesky(K)
        except FactorizationError as err:
            err.theta = np.asarray(phi, dtype=float).copy()
            raise
        except np.linalg.LinAlgError:
            err = FactorizationError(
                f"{type(self.template).__name__}: system matrix not positive "
                "definite during objective evaluation"
            )
            err.theta = np.asarray(phi, dtype=float).copy()
            raise err
        z = self.data.zvec
        alpha = cho_solve((L, True), z)
        return float(-z @ alpha - 2.0 * np.sum(np.log(np.diag(L))) - self.N * _LOG2PI)

    def value_and_grad(self, phi: np.ndarray):
        try:
            kernel, G, sigma = self.unpack(phi)
            K_x, parts, B, K = self._system(kernel, G, sigma)
            L = np.linalg.cholesky(K)
        except FactorizationError as err:
            err.theta = np.asarray(phi, dtype=float).copy()
            raise
        except np.linalg.LinAlgError:
            err = FactorizationError(
                f"{type(self.template).__name__}: system matrix not positive "
                "definite during gradient evaluation"
            )
            err.theta = np.asarray(phi, dtype=float).copy()
            raise err
        z = self.data.zvec
        alpha = cho_solve((L, True), z)
        F = float(-z @ alpha - 2.0 * np.sum(np.log(np.diag(L))) - self.N * _LOG2PI)
        W = cho_solve((L, True), np.eye(self.N))
        A = np.outer(alpha, alpha) - W

        theta_k = kernel.theta
        if not self.multi:
            MS = np.stack([p.ravel() for p in parts])
            g_kernel = MS @ A.ravel()
            g_sigma = np.array([2.0 * sigma[0] * np.trace(A)])
            g_phi = np.concatenate(
                [g_kernel[self.free_idx] * theta_k[self.free_idx], g_sigma * sigma]
            )
            return F, g_phi

        d, n = self.d, self.n
        A4 = A.reshape(d, n, d, n)
        # blockwise contraction: T_M[i, j] = sum_pq A[(i,p),(j,q)] M[p, q]
        A2 = A4.transpose(0, 2, 1, 3).reshape(d * d, n * n)
        MS = np.stack([p.ravel() for p in parts] + [K_x.ravel()])
        T_all = (A2 @ MS.T).reshape(d, d, len(parts) + 1)
        g_kernel = np.einsum("ij,ijk->k", B, T_all[:, :, :-1])
        D_B = T_all[:, :, -1]  # raw dF/dB_ij, entries independent
        TI = np.einsum("ipjp->ij", A4)
        g_sigma = 2.0 * sigma * np.diag(TI)

        g_G = (D_B + D_B.T) @ G
        g_G_packed = np.array(
            [g_G[i, i] * G[i, i] if i == j else g_G[i, j] for (i, j) in self.tril]
        )
        g_phi = np.concatenate(
            [g_kernel[self.free_idx] * theta_k[self.free_idx], g_G_packed, g_sigma * sigma]
        )
        return F, g_phi

    def raw_gradient(self, kernel, B, sigma):
        """Constrained-space gradient: kernel theta, vec(B) column-major, sigma."""
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        K_x, parts = kernel.gram_and_partials(self.data.inputs, self.ctx)
        if self.multi:
            K = np.kron(B, K_x) + np.kron(np.diag(sigma**2), np.eye(self.n))
        else:
            K = K_x + sigma[0] ** 2 * np.eye(self.n)
        L = np.linalg.cholesky(K)
        z = self.data.zvec
        alpha = cho_solve((L, True), z)
        W = cho_solve((L, True), np.eye(self.N))
        A = np.outer(alpha, alpha) - W
        if not self.multi:
            MS = np.stack([p.ravel() for p in parts])
            g_kernel = MS @ A.ravel()
            return np.concatenate([g_kernel, [2.0 * sigma[0] * np.trace(A)]])
        d, n = self.d, self.n
        A4 = A.reshape(d, n, d, n)
        A2 = A4.transpose(0, 2, 1, 3).reshape(d * d, n * n)
        MS = np.stack([p.ravel() for p in parts] + [K_x.ravel()])
        T_all = (A2 @ MS.T).reshape(d, d, len(parts) + 1)
        g_kernel = np.einsum("ij,ijk->k", B, T_all[:, :, :-1])
        D_B = T_all[:, :, -1]
        TI = np.einsum("ipjp->ij", A4)
        g_sigma = 2.0 * sigma * np.diag(TI)
        return np.concatenate([g_kernel, np.ravel(D_B, order="F"), g_sigma])


def objective(dataset, kernel, noise_sigma, coreg=None) -> float:
    """F(theta) for explicit hyperparameters (see the module docstring).

    noise_sigma is the noise standard deviation (scalar, or one per output).
    Raises FactorizationError (carrying .theta) if K is not positive definite.
    """
    dataset = _as_dataset(dataset)
    sigma = np.atleast_1d(np.asarray(noise_sigma, dtype=float))
    prob = _Problem(dataset, kernel)
    G = None if coreg is None else np.linalg.cholesky(_psd_project(np.asarray(coreg)))
    phi = prob.pack(kernel, G, sigma)
    return prob.value(phi)


def gradient(dataset, kernel, noise_sigma, coreg=None):
    """Constrained-space gradient of F, as (names, values).

    Coordinate order: kernel theta, then vec(B) column-major (multi-output
    only, each entry independent), then the per-output noise deviations.
    """
    dataset = _as_dataset(dataset)
    sigma = np.atleast_1d(np.asarray(noise_sigma, dtype=float))
    prob = _Problem(dataset, kernel)
    B = None if coreg is None else np.asarray(coreg, dtype=float)
    vals = prob.raw_gradient(kernel, B, sigma)
    names = list(kernel.theta_names)
    if B is not None:
        d = B.shape[0]
        names += [f"b_{i + 1}{j + 1}" for j in range(d) for i in range(d)]
    names += [f"sigma_r_{s + 1}" for s in range(sigma.size)]
    return tuple(names), vals


def _as_dataset(dataset) -> Dataset:
    if isinstance(dataset, Dataset):
        return dataset
    return Dataset.from_data(*dataset)


def _psd_project(B: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    """Nearest-in-spirit PSD version of a symmetric matrix (eigenvalue clip)."""
    B = 0.5 * (B + B.T)
    w, V = np.linalg.eigh(B)
    w = np.maximum(w, max(floor, floor * np.max(np.abs(w))))
    return (V * w) @ V.T


def default_initialization(dataset, family_or_kernel):
    """Data-driven starting point: (kernel, noise_sigma, coreg_or_None).

    omega starts at the sample deviation of the observations, concentrations
    at 1, pair weights at 0.1, chart lengthscales at 2, noise at a tenth of
    the per-output deviation, and the mixing matrix at the PSD-projected
    sample output covariance.
    """
    dataset = _as_dataset(dataset)
    if isinstance(family_or_kernel, str):
        kernel = kernels.kernel_from_family(family_or_kernel, dataset.m)
    else:
        kernel = family_or_kernel
    scale = float(np.std(dataset.obs))
    if not scale > 0.0:
        scale = 1.0
    theta = kernel.theta.copy()
    theta[0] = scale
    kernel = kernel.with_theta(theta)
    if dataset.multi_output:
        sig = 0.1 * np.std(dataset.obs, axis=0)
        sig[sig <= 0.0] = 0.1
        B0 = _psd_project(np.cov(dataset.obs.T), floor=1e-6)
        return kernel, sig, B0
    sig0 = 0.1 * scale
    return kernel, np.array([sig0]), None


def optimize(
    dataset,
    kernel_or_family,
    *,
    noise_sigma=None,
    coreg=None,
    fixed=None,
    restarts=4,
    budget=150,
    seed=0,
    rel_tol=1e-6,
    grad_tol=1e-5,
) -> OptResult:
    """Fit hyperparameters by monotone ascent on F from multiple starts.

    Restart 0 starts from the given (or data-driven default) values; further
    restarts perturb the unconstrained coordinates with seeded Gaussian noise.

    Parameters
    ----------
    dataset : Dataset or (inputs, obs) pair
    kernel_or_family : kernel instance used as the starting point, or one of
        "hvm", "pvm", "pprd", "pse"
    noise_sigma : starting noise deviation(s); default 0.1 * output deviation
    coreg : starting mixing matrix; default sample output covariance
    fixed : mapping of kernel coordinate names to pinned values, e.g.
        {"corr_12": 0.0}; pinned coordinates are not optimized
    restarts, budget, seed : multi-start count, iteration cap, RNG seed
    rel_tol, grad_tol : termination thresholds (see the module docstring)

    Returns
    -------
    OptResult for the best restart. Identical arguments give a bitwise
    identical result. Raises FactorizationError if every restart fails at
    its starting point.
    """
    dataset = _as_dataset(dataset)
    kern0, sig0, B0 = default_initialization(dataset, kernel_or_family)
    if not isinstance(kernel_or_family, str):
        kern0 = kernel_or_family
    if noise_sigma is not None:
        sig0 = np.atleast_1d(np.asarray(noise_sigma, dtype=float)) * np.ones(
            dataset.d if dataset.multi_output else 1
        )
    if coreg is not None:
        B0 = np.asarray(coreg, dtype=float)
    if dataset.multi_output and B0 is None:
        raise ValueError("multi-output data needs a coreg starting point")
    prob = _Problem(dataset, kern0, fixed=fixed)
    G0 = np.linalg.cholesky(_psd_project(B0)) if dataset.multi_output else None
    phi0 = prob.pack(kern0, G0, sig0)

    rng = np.random.default_rng(seed)
    best = None
    restart_objectives = []
    last_error = None
    for r in range(max(1, restarts)):
        phi_start = phi0 if r == 0 else phi0 + rng.normal(0.0, 0.5, size=phi0.shape)
        try:
            run = _ascend(prob, phi_start, budget, rel_tol, grad_tol)
        except FactorizationError as err:
            last_error = err
            restart_objectives.append(float("-inf"))
            continue
        restart_objectives.append(run["objective"])
        if best is None or run["objective"] > best["objective"]:
            best = run
            best["restart"] = r
    if best is None:
        raise last_error
    kernel, G, sigma = prob.unpack(best["phi"])
    B = None if G is None else G @ G.T
    gnorm = best["grad_norm"]
    reason = best["stop_reason"]
    converged = reason == "gradient_norm" or (
        reason in ("objective_change", "step_failure")
        and gnorm < GRAD_CONVERGED_FACTOR * (1.0 + abs(best["objective"]))
    )
    return OptResult(
        kernel=kernel,
        noise_sigma=sigma,
        coreg=B,
        objective=best["objective"],
        iterations=best["iterations"],
        converged=converged,
        stop_reason=reason,
        grad_norm=gnorm,
        trace=best["trace"],
        seed=seed,
        restart=best["restart"],
        restart_objectives=restart_objectives,
    )


def _ascend(prob: _Problem, phi0: np.ndarray, budget: int, rel_tol: float, grad_tol: float):
    """BFGS ascent with backtracking; accepts only strictly improving steps."""
    phi = np.asarray(phi0, dtype=float).copy()
    F, g = prob.value_and_grad(phi)
    if not np.isfinite(F):
        err = FactorizationError("objective not finite at the starting point")
        err.theta = phi.copy()
        raise err
    p = phi.size
    H = np.eye(p)
    trace = [F]
    stop_reason = "budget"
    iterations = 0
    first_update = True
    for it in range(budget):
        if np.linalg.norm(g) < grad_tol * (1.0 + abs(F)):
            stop_reason = "gradient_norm"
            break
        direction = H @ g
        if float(direction @ g) <= 0.0:
            H = np.eye(p)
            direction = g
        accepted = False
        for attempt in range(2):
            slope = float(direction @ g)
            t = 1.0 if it > 0 else min(1.0, 1.0 / max(1.0, np.linalg.norm(g)))
            for _ in range(40):
                phi_new = phi + t * direction
                try:
                    F_new = prob.value(phi_new)
                except FactorizationError:
                    F_new = -np.inf
                if np.isfinite(F_new) and F_new > F + 1e-4 * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if accepted or attempt == 1:
                break
            # quasi-Newton direction failed outright: fall back to steepest
            H = np.eye(p)
            direction = g
        if not accepted:
            stop_reason = "step_failure"
            break
        F_new, g_new = prob.value_and_grad(phi_new)
        s = phi_new - phi
        y = -(g_new - g)  # gradient change of -F (minimization form)
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            if first_update:
                H = (sy / float(y @ y)) * np.eye(p)
                first_update = False
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + rho * (
                rho * float(y @ Hy) + 1.0
            ) * np.outer(s, s)
        delta = F_new - F
        phi, F, g = phi_new, F_new, g_new
        trace.append(F)
        iterations = it + 1
        if abs(delta) < rel_tol * max(1.0, abs(F)):
            stop_reason = "objective_change"
            break
    return {
        "phi": phi,
        "objective": F,
        "grad_norm": float(np.linalg.norm(g)),
        "trace": trace,
        "iterations": iterations,
        "stop_reason": stop_reason,
    }
