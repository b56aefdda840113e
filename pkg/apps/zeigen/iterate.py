"""
Shifted symmetric higher-order power iterations for Z-eigenpairs.

Five variants share one loop:

  S-SHOPM    static shift alpha, no extrapolation
  ES-SHOPM   static shift, static extrapolation gamma
  GEAP       adaptive shift alpha_k, no extrapolation
  DES-SHOPM  static shift, gamma_k from the current Jacobian
  DE-GEAP    adaptive shift, dynamic gamma_k

Every method reports and stop-tests lambda_k = A x_k^m. The extrapolated
quotient (u_{k+1}, x_k^gamma) / (x_k^gamma, x_k^gamma) is recorded in the
trace but converges to chi * (lambda + alpha), not lambda.
"""
import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from . import denselin, rateth
from .exceptions import DegenerateShiftError, InvalidConfigError
from .models import (
    AdaptiveShift,
    DynamicGamma,
    Eigenpair,
    IterationRecord,
    Method,
    SolveConfig,
    SolveTrace,
    StaticGamma,
    StaticShift,
    Status,
    StopRule,
)
from .symtensor import Contraction, SymmetricTensor, contract_all

logger = logging.getLogger(__name__)

BREAKDOWN_NORM = 1e-300


def random_start(dim: int, master_seed: int, trial: int) -> np.ndarray:
    """Uniform draw from [-1, 1]^n, normalized; the stream depends only on (master_seed, trial)."""
    rng = np.random.default_rng([master_seed, trial])
    while True:
        x = rng.uniform(-1.0, 1.0, size=dim)
        norm = np.linalg.norm(x)
        if norm > 0.0:
            return x / norm


def adaptive_shift(order: int, hessian: np.ndarray, tau: float, chi: int) -> Tuple[float, float]:
    """
    GEAP shift keeping the shifted objective locally convex (chi = 1) or concave (chi = -1).

    Returns (alpha_k, lambda_min(chi m (m-1) A x^{m-2})).
    """
    smallest = denselin.lambda_min(chi * order * (order - 1) * hessian)
    return chi * max(0.0, (tau - smallest) / order), smallest


def _step_gamma(cfg: SolveConfig, tensor: SymmetricTensor, lam: float, x: np.ndarray,
                alpha: float) -> float:
    if cfg.gamma is None:
        return 0.0
    if isinstance(cfg.gamma, StaticGamma):
        return cfg.gamma.gamma
    try:
        jacobian = rateth.sshopm_jacobian(tensor, lam, x, alpha)
    except DegenerateShiftError:
        return 0.0
    return rateth.dynamic_gamma(denselin.lambda_max(jacobian))


def _residual(contraction: Contraction, lam: float, x: np.ndarray) -> float:
    return float(np.linalg.norm(contraction.vector - lam * x))


def _finish(tensor: SymmetricTensor, cfg: SolveConfig, trace: SolveTrace,
            x: np.ndarray, contraction: Contraction) -> Tuple[Eigenpair, SolveTrace]:
    lam = contraction.scalar
    residual = _residual(contraction, lam, x)

    if trace.status == Status.CONVERGED and cfg.polish and residual > cfg.residual_tol:
        # lambda = A x^m is stationary on the sphere, so it settles while x
        # still carries an error of order sqrt(tol).
        lam, x, steps = rateth.refine_eigenpair(tensor, lam, x, tol=cfg.residual_tol * 1e-2)
        trace.polish_steps = steps
        residual = rateth.residual_norm(tensor, lam, x)
        logger.debug("Refined final pair in %d Newton steps, residual %.3e", steps, residual)

    if trace.status != Status.CONVERGED:
        logger.warning("%s stopped with status %s after %d iterations (lambda=%.6g)",
                       trace.method.label, trace.status.value, trace.iterations, lam)

    return Eigenpair(lam=lam, x=x, residual=residual), trace


def _run(tensor: SymmetricTensor, cfg: SolveConfig, method: Method) -> Tuple[Eigenpair, SolveTrace]:
    if cfg.x0 is None:
        raise InvalidConfigError("A starting vector x0 is required")
    if cfg.x0.shape != (tensor.dim,):
        raise InvalidConfigError(
            f"Starting vector has length {cfg.x0.size}, tensor dimension is {tensor.dim}"
        )

    chi = cfg.chi
    adaptive = isinstance(cfg.shift, AdaptiveShift)
    trace = SolveTrace(method=method)

    def shift_at(contraction: Contraction) -> Tuple[float, Optional[float]]:
        if adaptive:
            return adaptive_shift(tensor.order, contraction.matrix, cfg.shift.tau, chi)
        return cfg.shift.alpha, None

    x = cfg.x0
    contraction = contract_all(tensor, x)
    lam = contraction.scalar
    alpha, hessian_min = shift_at(contraction)
    trace.records.append(IterationRecord(
        k=0, lam=lam, x=x, residual=_residual(contraction, lam, x),
        alpha=alpha, gamma=0.0, hessian_min=hessian_min,
    ))

    x_prev: Optional[np.ndarray] = None
    v_prev: Optional[np.ndarray] = None

    for k in range(cfg.max_iters):
        v = chi * (contraction.vector + alpha * x)

        # The first step is always a plain shifted power step.
        gamma = 0.0 if v_prev is None else _step_gamma(cfg, tensor, lam, x, alpha)
        if v_prev is None:
            u, x_gamma = v, x
        else:
            u = (1.0 - gamma) * v + gamma * v_prev
            x_gamma = (1.0 - gamma) * x + gamma * x_prev

        u_norm = float(np.linalg.norm(u))
        x_gamma_sq = float(x_gamma @ x_gamma)
        if u_norm < BREAKDOWN_NORM or np.sqrt(x_gamma_sq) < BREAKDOWN_NORM:
            trace.status = Status.BREAKDOWN
            return _finish(tensor, cfg, trace, x, contraction)

        x_next = u / u_norm
        contraction_next = contract_all(tensor, x_next)
        lam_next = contraction_next.scalar
        alpha_next, hessian_min = shift_at(contraction_next)
        residual = _residual(contraction_next, lam_next, x_next)

        trace.records.append(IterationRecord(
            k=k + 1, lam=lam_next, x=x_next, residual=residual,
            alpha=alpha_next, gamma=gamma, u_norm=u_norm,
            quotient=float(u @ x_gamma) / x_gamma_sq, hessian_min=hessian_min,
        ))

        if cfg.stop_rule == StopRule.RESIDUAL:
            done = residual <= cfg.residual_tol
        else:
            done = abs(lam_next - lam) < cfg.tol

        x_prev, v_prev = x, v
        x, contraction, lam, alpha = x_next, contraction_next, lam_next, alpha_next

        if done:
            trace.status = Status.CONVERGED
            return _finish(tensor, cfg, trace, x, contraction)

    trace.status = Status.MAX_ITERS
    return _finish(tensor, cfg, trace, x, contraction)


def _require(cfg: SolveConfig, method: Method) -> None:
    if cfg.method != method:
        raise InvalidConfigError(
            f"Configuration describes {cfg.method.label}, not {method.label}"
        )


def sshopm(tensor: SymmetricTensor, cfg: SolveConfig) -> Tuple[Eigenpair, SolveTrace]:
    """S-SHOPM: x_{k+1} = chi (A x_k^{m-1} + alpha x_k), normalized."""
    _require(cfg, Method.SSHOPM)
    return _run(tensor, cfg, Method.SSHOPM)


def es_sshopm(tensor: SymmetricTensor, cfg: SolveConfig) -> Tuple[Eigenpair, SolveTrace]:
    """
    ES-SHOPM: u_{k+1} = (1 - gamma) v_{k+1} + gamma v_k after one plain step.

    With gamma = 0 the iterates coincide with S-SHOPM bit for bit.
    """
    _require(cfg, Method.ES_SSHOPM)
    return _run(tensor, cfg, Method.ES_SSHOPM)


def geap(tensor: SymmetricTensor, cfg: SolveConfig) -> Tuple[Eigenpair, SolveTrace]:
    """GEAP: alpha_k = chi max{0, (tau - lambda_min(chi m (m-1) A x_k^{m-2})) / m}."""
    _require(cfg, Method.GEAP)
    return _run(tensor, cfg, Method.GEAP)


def des_sshopm(tensor: SymmetricTensor, cfg: SolveConfig) -> Tuple[Eigenpair, SolveTrace]:
    """DES-SHOPM: static shift, gamma_{k+1} from lambda_max of J(x_k; alpha) at lambda_k."""
    _require(cfg, Method.DES_SSHOPM)
    return _run(tensor, cfg, Method.DES_SSHOPM)


def de_geap(tensor: SymmetricTensor, cfg: SolveConfig) -> Tuple[Eigenpair, SolveTrace]:
    """DE-GEAP: dynamic gamma with the Jacobian assembled at the current adaptive alpha_k."""
    _require(cfg, Method.DE_GEAP)
    return _run(tensor, cfg, Method.DE_GEAP)


SOLVERS: Dict[Method, Callable[[SymmetricTensor, SolveConfig], Tuple[Eigenpair, SolveTrace]]] = {
    Method.SSHOPM: sshopm,
    Method.ES_SSHOPM: es_sshopm,
    Method.GEAP: geap,
    Method.DES_SSHOPM: des_sshopm,
    Method.DE_GEAP: de_geap,
}


def method_for(cfg: SolveConfig) -> Method:
    """Method implied by the configuration: shift kind times gamma policy."""
    return cfg.method


def solve(tensor: SymmetricTensor, cfg: SolveConfig) -> Tuple[Eigenpair, SolveTrace]:
    """Run the method implied by the configuration's shift and gamma policies."""
    return SOLVERS[method_for(cfg)](tensor, cfg)
