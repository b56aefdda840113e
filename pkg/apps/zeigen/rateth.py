"""
Convergence-rate theory of the shifted power method and its extrapolation.

J(x; alpha) is the Jacobian of the normalized shifted map at an eigenpair;
its spectral radius rho is the S-SHOPM rate. The extrapolated two-step map
has the 2n x 2n Jacobian J_gamma = [[(1-gamma)J, gamma J], [I, 0]] whose
spectral radius follows in closed form from rho and gamma.
"""
import cmath
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from . import denselin
from .exceptions import (
    DegenerateShiftError,
    NonUnitVectorError,
    RateDomainError,
    ResidualPreconditionError,
)
from .models import Eigenpair, RateReport, Sense, SolveTrace, Stability
from .symtensor import SymmetricTensor, contract_all

logger = logging.getLogger(__name__)

SHIFT_TOL = 1e-12
UNIT_TOL = 1e-10
CLASSIFY_TOL = 1e-8
RESIDUAL_TOL = 1e-10
DYNAMIC_GAMMA_FLOOR = 1e-12
RATE_WINDOW = (1e-12, 1e-4)
MIN_WINDOW_POINTS = 5
ROOT_MERGE_TOL = 1e-2


def residual_norm(tensor: SymmetricTensor, lam: float, x) -> float:
    return float(np.linalg.norm(contract_all(tensor, x).vector - lam * np.asarray(x)))


def sshopm_jacobian(tensor: SymmetricTensor, lam: float, x, alpha: float) -> np.ndarray:
    """J = [(m-1)(A x^{m-2} - lam x x^T) + alpha (I - x x^T)] / (lam + alpha)."""
    if abs(lam + alpha) <= SHIFT_TOL:
        raise DegenerateShiftError(f"lambda + alpha = {lam + alpha!r} is too close to zero")
    x = np.asarray(x, dtype=np.float64)
    if abs(np.linalg.norm(x) - 1.0) > UNIT_TOL:
        raise NonUnitVectorError(f"Vector norm {np.linalg.norm(x)!r} differs from 1")

    m = tensor.order
    hessian = contract_all(tensor, x).matrix
    projector = np.outer(x, x)
    jacobian = ((m - 1) * (hessian - lam * projector)
                + alpha * (np.eye(tensor.dim) - projector)) / (lam + alpha)
    return denselin.sym_matrix(jacobian)


def augmented_jacobian(jacobian, gamma: float) -> np.ndarray:
    """Block matrix [[(1 - gamma) J, gamma J], [I, 0]]."""
    jacobian = np.asarray(jacobian, dtype=np.float64)
    n = jacobian.shape[0]
    return np.block([
        [(1.0 - gamma) * jacobian, gamma * jacobian],
        [np.eye(n), np.zeros((n, n))],
    ])


def augmented_roots(mu: float, gamma: float) -> Tuple[complex, complex]:
    """Eigenvalues of J_gamma generated by an eigenvalue mu of J: roots of a^2 - (1-gamma) mu a - gamma mu."""
    b = (1.0 - gamma) * mu
    disc = cmath.sqrt(b * b + 4.0 * gamma * mu)
    return (b + disc) / 2.0, (b - disc) / 2.0


def augmented_spectral_radius(jacobian, gamma: float) -> float:
    return float(np.max(np.abs(denselin.eig_general(augmented_jacobian(jacobian, gamma)))))


def _check_rho(rho: float) -> None:
    if not 0.0 < rho < 1.0:
        raise RateDomainError(f"rho must lie in (0, 1), got {rho!r}")


def gamma_opt(rho: float) -> float:
    """Extrapolation parameter minimizing rho_gamma: ((rho - 2) + 2 sqrt(1 - rho)) / rho."""
    _check_rho(rho)
    return ((rho - 2.0) + 2.0 * math.sqrt(1.0 - rho)) / rho


def rho_opt(rho: float) -> float:
    _check_rho(rho)
    return 1.0 - math.sqrt(1.0 - rho)


def rho_gamma(rho: float, gamma: float) -> float:
    """
    Spectral radius of J_gamma for a positive semidefinite J with radius rho.

    Real branch for gamma in [gamma_opt, 0]; below gamma_opt the dominant
    roots are complex conjugates with modulus sqrt(-gamma rho).
    """
    _check_rho(rho)
    if not -1.0 < gamma <= 0.0:
        raise RateDomainError(f"gamma must lie in (-1, 0], got {gamma!r}")

    if gamma < gamma_opt(rho):
        return math.sqrt(-gamma * rho)
    b = (1.0 - gamma) * rho
    return (b + math.sqrt(max(b * b + 4.0 * gamma * rho, 0.0))) / 2.0


def dynamic_gamma(rho: float) -> float:
    """
    gamma_opt evaluated at a running estimate of rho, defined for any rho.

    The square root is taken in the complex plane and only its real part
    kept, so rho >= 1 still yields a finite parameter. Near rho = 0 the
    continuity limit 0 is returned.
    """
    if abs(rho) < DYNAMIC_GAMMA_FLOOR:
        return 0.0
    return (rho - 2.0 + 2.0 * cmath.sqrt(1.0 - rho).real) / rho


def _sphere_samples(rng: np.random.Generator, samples: int, dim: int) -> np.ndarray:
    points = rng.standard_normal((samples, dim))
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def beta_estimate(tensor: SymmetricTensor, samples: int, seed: int = 0) -> float:
    """
    Sampled lower bound on beta(A) = (m-1) max_{|x|=1} rho(A x^{m-2}).

    Points are drawn uniformly on the unit sphere; the true supremum can only
    be larger.
    """
    if samples < 1:
        raise RateDomainError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    best = 0.0
    for x in _sphere_samples(rng, samples, tensor.dim):
        best = max(best, denselin.spectral_radius(contract_all(tensor, x).matrix))
    return (tensor.order - 1) * best


def suggest_shift(tensor: SymmetricTensor, samples: int, seed: int = 0,
                  safety: float = 1.1, sense: Sense = Sense.CONVEX) -> float:
    return int(sense) * safety * beta_estimate(tensor, samples, seed)


def refine_eigenpair(tensor: SymmetricTensor, lam: float, x, tol: float = 1e-13,
                     max_steps: int = 8) -> Tuple[float, np.ndarray, int]:
    """
    Newton refinement of an approximate Z-eigenpair.

    Solves A x^{m-1} - lam x = 0, x^T x = 1 with the bordered Jacobian
    [[(m-1) A x^{m-2} - lam I, -x], [-x^T, 0]]. Converges to the nearby pair
    whatever its stability, so it also sharpens saddle points given to four decimals.
    Returns (lam, x, steps taken).
    """
    m, n = tensor.order, tensor.dim
    x = np.asarray(x, dtype=np.float64)
    x = x / np.linalg.norm(x)
    contraction = contract_all(tensor, x)
    lam = contraction.scalar

    for step in range(max_steps):
        residual = contraction.vector - lam * x
        if np.linalg.norm(residual) <= tol:
            return lam, x, step

        bordered = np.zeros((n + 1, n + 1))
        bordered[:n, :n] = (m - 1) * contraction.matrix - lam * np.eye(n)
        bordered[:n, n] = -x
        bordered[n, :n] = -x
        rhs = -np.concatenate([residual, [(1.0 - x @ x) / 2.0]])
        try:
            delta = np.linalg.solve(bordered, rhs)
        except np.linalg.LinAlgError:
            logger.debug("Singular bordered Jacobian at lambda=%r; refinement stopped", lam)
            return lam, x, step

        x = x + delta[:n]
        x = x / np.linalg.norm(x)
        contraction = contract_all(tensor, x)
        lam = contraction.scalar

    return lam, x, max_steps


def classify(tensor: SymmetricTensor, lam: float, x, residual_tol: float = RESIDUAL_TOL,
             threshold: float = CLASSIFY_TOL) -> Stability:
    """
    Stability of an eigenpair from C = U^T ((m-1) A x^{m-2} - lam I) U.

    U spans the complement of x. Positive (negative) definite C means a
    local minimum (maximum) of A x^m on the sphere.
    """
    x = np.asarray(x, dtype=np.float64)
    contraction = contract_all(tensor, x)
    residual = float(np.linalg.norm(contraction.vector - lam * x))
    if residual > residual_tol:
        raise ResidualPreconditionError(
            f"(lambda={lam!r}, x) is not an eigenpair: residual {residual:.3e} > {residual_tol:.1e}"
        )

    basis = denselin.ortho_complement(x / np.linalg.norm(x))
    projected = basis.T @ ((tensor.order - 1) * contraction.matrix - lam * np.eye(tensor.dim)) @ basis
    eigenvalues = denselin.eigh(projected).eigenvalues

    if eigenvalues.size == 0 or np.any(np.abs(eigenvalues) <= threshold):
        return Stability.DEGENERATE
    if np.all(eigenvalues > threshold):
        return Stability.POSITIVE_STABLE
    if np.all(eigenvalues < -threshold):
        return Stability.NEGATIVE_STABLE
    return Stability.UNSTABLE


def roots_coincide(rho: float, gamma: float, tol: float = ROOT_MERGE_TOL) -> bool:
    """True when the two dominant roots of J_gamma agree to a relative ``tol``."""
    first, second = augmented_roots(rho, gamma)
    return abs(first - second) <= tol * max(abs(first), abs(second))


def _window_run(residuals: Sequence[float], window: Tuple[float, float]) -> List[float]:
    low, high = window
    best: List[float] = []
    current: List[float] = []
    for value in residuals:
        if low <= value <= high:
            current.append(float(value))
            if len(current) > len(best):
                best = list(current)
        else:
            current = []
    return best


def measured_rate(residuals: Sequence[float], window: Tuple[float, float] = RATE_WINDOW,
                  min_points: int = MIN_WINDOW_POINTS, repeated_root: bool = False) -> Optional[float]:
    """
    Asymptotic linear rate from a residual history.

    Uses the longest run of consecutive residuals inside ``window``; None when
    that run is shorter than ``min_points``. For a simple dominant root this is
    the geometric mean of successive ratios.

    With ``repeated_root`` the residuals decay like (a + b k) rate^k and each
    ratio t_k overshoots the rate by (k + s + 1)/(k + s). Consecutive ratios
    then satisfy rate^2 - 2 t_k rate + t_k t_{k+1} = 0, and the rate returned
    minimizes the squared left-hand sides summed over the run.
    """
    run = _window_run(residuals, window)
    if len(run) < min_points:
        return None
    if not repeated_root:
        return (run[-1] / run[0]) ** (1.0 / (len(run) - 1))

    values = np.asarray(run)
    ratios = values[1:] / values[:-1]
    objective = Polynomial([0.0])
    for current, following in zip(ratios[:-1], ratios[1:]):
        objective += Polynomial([current * following, -2.0 * current, 1.0]) ** 2
    candidates = objective.deriv().roots().real
    return float(min(candidates, key=objective))


def trace_rate(trace: SolveTrace, repeated_root: bool = False) -> Optional[float]:
    return measured_rate(trace.residuals(), repeated_root=repeated_root)


def rate_report(tensor: SymmetricTensor, eigenpair: Eigenpair, alpha: float,
                gamma_grid: Optional[Iterable[float]] = None,
                trace: Optional[SolveTrace] = None, gamma: Optional[float] = None) -> RateReport:
    """
    Predicted rates at a converged pair for shift ``alpha``.

    rho is lambda_max of the symmetric Jacobian, which equals its spectral
    radius because J is positive semidefinite at a stable pair. Outside
    (0, 1) only rho is reported. ``gamma`` is the extrapolation parameter
    ``trace`` was run with; the measured rate accounts for a double root there.
    """
    jacobian = sshopm_jacobian(tensor, eigenpair.lam, eigenpair.x, alpha)
    rho = denselin.lambda_max(jacobian)

    report = RateReport(rho=rho, gamma_opt=None, rho_opt=None, eigenpair=eigenpair, alpha=alpha)
    if trace is not None:
        repeated = gamma is not None and roots_coincide(rho, gamma)
        report.measured_rate = trace_rate(trace, repeated_root=repeated)
        report.status = trace.status
        report.iterations = trace.iterations

    if not 0.0 < rho < 1.0:
        logger.info("rho=%.6g outside (0, 1); skipping extrapolation predictions", rho)
        return report

    report.gamma_opt = gamma_opt(rho)
    report.rho_opt = rho_opt(rho)
    report.predicted_rate = rho
    if gamma_grid is None:
        gamma_grid = np.linspace(-0.99, 0.0, 100)
    report.rho_gamma_curve = [(float(g), rho_gamma(rho, float(g))) for g in gamma_grid]
    return report
