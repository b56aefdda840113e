"""
Service layer for the tensor eigensolver.

This layer holds the use cases the management commands expose: loading
tensors, resolving automatic parameters, solving and classifying, running
campaigns and rate experiments, and exporting results. It reads its
defaults from ``settings.ZEIGEN``; the numerical modules never do.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from django.conf import settings

from . import bench, rateth
from .exceptions import DegenerateShiftError, InvalidConfigError, RateDomainError, ResidualPreconditionError
from .iterate import random_start, solve
from .models import (
    AdaptiveShift,
    DynamicGamma,
    Eigenpair,
    Method,
    RateReport,
    Sense,
    SolveConfig,
    SolveTrace,
    StaticGamma,
    StaticShift,
    Status,
    TrialSummary,
)
from .symtensor import SymmetricTensor, read_tensor, write_tensor

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SolveResult:
    """A finished run plus whatever was resolved on the way to it."""

    config: SolveConfig
    eigenpair: Eigenpair
    trace: SolveTrace
    rate_report: Optional[RateReport] = None
    resolved_alpha: Optional[float] = None
    resolved_gamma: Optional[float] = None
    preliminary: Optional[Tuple[Eigenpair, SolveTrace]] = None

    @property
    def converged(self) -> bool:
        return self.trace.status == Status.CONVERGED


class TensorEigenService:
    """
    Service class encapsulating the solver use cases.

    This service handles:
    - Loading tensors and graphs
    - Single solves with automatic alpha and gamma resolution
    - Multi-start campaigns and rate experiments
    - Exporting traces and summaries
    """

    def __init__(self):
        """Initialize the service with configuration from settings."""
        config = settings.ZEIGEN
        self.output_dir = Path(config['OUTPUT_DIR'])
        self.max_tensor_bytes = config['MAX_TENSOR_BYTES']
        self.tol = config['DEFAULT_TOL']
        self.max_iters = config['DEFAULT_MAX_ITERS']
        self.tau = config['DEFAULT_TAU']
        self.beta_samples = config['BETA_SAMPLES']
        self.beta_safety = config['BETA_SAFETY']
        self.workers = config['WORKERS']
        self.residual_tol = config['RESIDUAL_TOL']

    def load_tensor(self, path: Union[str, Path]) -> SymmetricTensor:
        return read_tensor(path, max_bytes=self.max_tensor_bytes)

    def resolve_alpha(self, tensor: SymmetricTensor, alpha: Union[float, str, None],
                      sense: Optional[str], seed: int) -> Optional[float]:
        """
        Turn ``auto`` into chi * beta_estimate * safety.

        The sampled estimate is a lower bound on beta(A); the safety factor
        is what makes the suggested shift usable.
        """
        if alpha != 'auto':
            return alpha
        chi = Sense.CONCAVE if sense == 'concave' else Sense.CONVEX
        shift = rateth.suggest_shift(tensor, self.beta_samples, seed=seed,
                                     safety=self.beta_safety, sense=chi)
        logger.info("alpha=auto resolved to %.6g from %d samples", shift, self.beta_samples)
        return shift

    def build_config(self, method: str, alpha: Optional[float] = None,
                     gamma: Union[float, str, None] = None, sense: Optional[str] = None,
                     tau: Optional[float] = None, tol: Optional[float] = None,
                     max_iters: Optional[int] = None, x0=None) -> SolveConfig:
        """
        Assemble a SolveConfig for ``method`` from already validated options.

        ``gamma`` must be numeric here for es; ``opt`` is resolved by ``solve``.
        """
        method = Method(method)
        sense_value = None if sense is None else (Sense.CONCAVE if sense == 'concave' else Sense.CONVEX)

        if method in (Method.GEAP, Method.DE_GEAP):
            shift = AdaptiveShift(tau if tau is not None else self.tau)
        else:
            if alpha is None:
                raise InvalidConfigError(f"{method.label} needs a static shift alpha")
            shift = StaticShift(float(alpha))
            sense_value = None

        gamma_policy = None
        if method in (Method.DES_SSHOPM, Method.DE_GEAP):
            gamma_policy = DynamicGamma()
        elif method == Method.ES_SSHOPM:
            if not isinstance(gamma, (int, float)):
                raise InvalidConfigError("ES-SHOPM needs a numeric gamma")
            gamma_policy = StaticGamma(float(gamma))

        if x0 is not None:
            x0 = np.asarray(x0, dtype=np.float64)
            x0 = x0 / np.linalg.norm(x0)

        return SolveConfig(
            shift=shift,
            gamma=gamma_policy,
            sense=sense_value,
            tol=tol if tol is not None else self.tol,
            max_iters=max_iters if max_iters is not None else self.max_iters,
            x0=x0,
            residual_tol=self.residual_tol,
        )

    def classify(self, tensor: SymmetricTensor, pair: Eigenpair) -> Eigenpair:
        try:
            stability = rateth.classify(tensor, pair.lam, pair.x, residual_tol=self.residual_tol)
        except ResidualPreconditionError as exc:
            logger.info("Pair left unclassified: %s", exc)
            return pair
        return pair.classified(stability)

    def solve(self, tensor: SymmetricTensor, method: str, alpha=None, gamma=None,
              sense: Optional[str] = None, tau: Optional[float] = None,
              tol: Optional[float] = None, max_iters: Optional[int] = None,
              start: Optional[Sequence[float]] = None, seed: int = 0) -> SolveResult:
        """
        Solve once and classify the result.

        Without ``start`` the random start of trial 0 under ``seed`` is used.
        ``gamma='opt'`` first runs S-SHOPM from the same start and takes
        gamma_opt at lambda_max of the Jacobian of the pair it finds.
        """
        alpha = self.resolve_alpha(tensor, alpha, sense, seed)
        x0 = start if start is not None else random_start(tensor.dim, seed, 0)

        preliminary = None
        if gamma == 'opt':
            base_cfg = self.build_config(Method.SSHOPM.value, alpha=alpha, tol=tol,
                                         max_iters=max_iters, x0=x0)
            base_pair, base_trace = solve(tensor, base_cfg)
            preliminary = (base_pair, base_trace)
            gamma = self._optimal_gamma(tensor, base_pair, base_trace, alpha)

        cfg = self.build_config(method, alpha=alpha, gamma=gamma, sense=sense, tau=tau,
                                tol=tol, max_iters=max_iters, x0=x0)
        pair, trace = solve(tensor, cfg)
        pair = self.classify(tensor, pair)

        report = None
        if trace.status == Status.CONVERGED and isinstance(cfg.shift, StaticShift):
            static_gamma = cfg.gamma.gamma if isinstance(cfg.gamma, StaticGamma) else None
            try:
                report = rateth.rate_report(tensor, pair, cfg.shift.alpha, trace=trace, gamma=static_gamma)
                if static_gamma is not None and report.gamma_opt is not None:
                    report.gamma = static_gamma
                    report.predicted_rate = rateth.rho_gamma(report.rho, static_gamma)
                    report.oscillatory = static_gamma < report.gamma_opt
            except DegenerateShiftError as exc:
                logger.info("No rate report: %s", exc)

        return SolveResult(
            config=cfg,
            eigenpair=pair,
            trace=trace,
            rate_report=report,
            resolved_alpha=alpha,
            resolved_gamma=gamma if isinstance(gamma, float) else None,
            preliminary=preliminary,
        )

    def _optimal_gamma(self, tensor: SymmetricTensor, pair: Eigenpair, trace: SolveTrace,
                       alpha: float) -> float:
        if trace.status != Status.CONVERGED:
            raise RateDomainError(
                f"Preliminary S-SHOPM run ended with {trace.status.value}; gamma_opt is undefined"
            )
        report = rateth.rate_report(tensor, pair, alpha)
        if report.gamma_opt is None:
            raise RateDomainError(f"rho={report.rho:.6g} is outside (0, 1); gamma_opt is undefined")
        logger.info("gamma=opt resolved to %.6f (rho=%.6f)", report.gamma_opt, report.rho)
        return report.gamma_opt

    def campaign_configs(self, methods: Sequence[str], alpha=None, gamma=None,
                         sense: Optional[str] = None, tau: Optional[float] = None,
                         tol: Optional[float] = None,
                         max_iters: Optional[int] = None) -> Dict[str, SolveConfig]:
        """
        One template per method, labelled as in the result tables.

        Adaptive methods share the sense of the static ones (sign of alpha)
        unless ``sense`` says otherwise.
        """
        if sense is None and isinstance(alpha, float):
            sense = 'convex' if alpha >= 0 else 'concave'
        return {
            Method(method).label: self.build_config(method, alpha=alpha, gamma=gamma, sense=sense,
                                                    tau=tau, tol=tol, max_iters=max_iters)
            for method in methods
        }

    def run_campaign(self, tensor: SymmetricTensor, methods: Sequence[str], trials: int,
                     seed: int, alpha=None, gamma=None, sense: Optional[str] = None,
                     tau: Optional[float] = None, tol: Optional[float] = None,
                     max_iters: Optional[int] = None,
                     workers: Optional[int] = None) -> List[TrialSummary]:
        alpha = self.resolve_alpha(tensor, alpha, sense, seed)
        configs = self.campaign_configs(methods, alpha=alpha, gamma=gamma, sense=sense,
                                        tau=tau, tol=tol, max_iters=max_iters)
        return bench.run_trials(tensor, configs, trials, seed,
                                workers=workers if workers is not None else self.workers)

    def run_rate_experiment(self, tensor: SymmetricTensor, alpha, start: Sequence[float],
                            gammas: Optional[Sequence[float]] = None,
                            residual_tol: float = 1e-13, max_iters: Optional[int] = None,
                            seed: int = 0) -> List[RateReport]:
        alpha = self.resolve_alpha(tensor, alpha, None, seed)
        x0 = np.asarray(start, dtype=np.float64)
        return bench.rate_experiment(
            tensor, alpha, x0 / np.linalg.norm(x0),
            gamma_grid=gammas or None,
            residual_tol=residual_tol,
            max_iters=max_iters if max_iters is not None else self.max_iters,
        )

    def export(self, result: SolveResult, directory: Union[str, Path, None] = None) -> List[Path]:
        """Write the run (and the preliminary S-SHOPM run, if any) as CSV plus a JSON sidecar."""
        directory = Path(directory) if directory is not None else self.output_dir
        runs = {result.trace.method.value: (result.config, result.eigenpair, result.trace, result.rate_report)}
        if result.preliminary is not None:
            base_pair, base_trace = result.preliminary
            runs['preliminary-' + base_trace.method.value] = (
                self.build_config(Method.SSHOPM.value, alpha=result.resolved_alpha,
                                  tol=result.config.tol, max_iters=result.config.max_iters,
                                  x0=result.config.x0),
                base_pair, base_trace, None,
            )
        return bench.export_traces(runs, directory)

    def convert_graph(self, graph_path: Union[str, Path], output_path: Union[str, Path]) -> Tuple[SymmetricTensor, int]:
        graph = bench.read_graph(graph_path)
        tensor = bench.graph_to_tensor(graph)
        write_tensor(tensor, output_path)
        return tensor, len(bench.triangles(graph))
