"""
Domain models for the tensor eigensolver.

These are plain value objects shared by the solver loops, the rate theory
and the experiment harness. Nothing here is persisted: runs are exported to
CSV/JSON files instead of database tables.
"""
import enum
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np

from .exceptions import InvalidConfigError, InvalidGraphError

UNIT_TOL = 1e-12


class Sense(enum.IntEnum):
    """Direction of the shifted objective: chi = +1 (convex) or -1 (concave)."""

    CONVEX = 1
    CONCAVE = -1


class Status(str, enum.Enum):
    CONVERGED = 'Converged'
    MAX_ITERS = 'MaxIters'
    BREAKDOWN = 'Breakdown'


class Stability(str, enum.Enum):
    POSITIVE_STABLE = 'PositiveStable'
    NEGATIVE_STABLE = 'NegativeStable'
    UNSTABLE = 'Unstable'
    DEGENERATE = 'Degenerate'


class StopRule(str, enum.Enum):
    """LAMBDA stops on |lambda_{k+1} - lambda_k| < tol; RESIDUAL on ||r_k|| <= residual_tol."""

    LAMBDA = 'lambda'
    RESIDUAL = 'residual'


class Method(str, enum.Enum):
    SSHOPM = 'sshopm'
    ES_SSHOPM = 'es'
    GEAP = 'geap'
    DES_SSHOPM = 'des'
    DE_GEAP = 'degeap'

    @property
    def label(self) -> str:
        return _METHOD_LABELS[self]


_METHOD_LABELS = {
    Method.SSHOPM: 'S-SHOPM',
    Method.ES_SSHOPM: 'ES-SHOPM',
    Method.GEAP: 'GEAP',
    Method.DES_SSHOPM: 'DES-SHOPM',
    Method.DE_GEAP: 'DE-GEAP',
}


@dataclass(frozen=True)
class StaticShift:
    alpha: float


@dataclass(frozen=True)
class AdaptiveShift:
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidConfigError(f"Adaptive shift needs tau > 0, got {self.tau}")


@dataclass(frozen=True)
class StaticGamma:
    gamma: float

    def __post_init__(self):
        if not -1.0 < self.gamma <= 0.0:
            raise InvalidConfigError(f"Static gamma must lie in (-1, 0], got {self.gamma}")


@dataclass(frozen=True)
class DynamicGamma:
    pass


ShiftPolicy = Union[StaticShift, AdaptiveShift]
GammaPolicy = Optional[Union[StaticGamma, DynamicGamma]]


@dataclass(frozen=True, eq=False)
class SolveConfig:
    """
    Shift, extrapolation and stopping policy for one solver run.

    For a static shift the sense is fixed by the sign of alpha (chi = 1 when
    alpha >= 0); passing a conflicting ``sense`` is rejected. An adaptive
    shift takes its sense from ``sense`` (convex when omitted).

    ``x0`` may be left out of templates used for multi-start campaigns and
    filled per trial with ``with_start``.
    """

    shift: ShiftPolicy
    gamma: GammaPolicy = None
    sense: Optional[Sense] = None
    tol: float = 1e-15
    max_iters: int = 1000
    x0: Optional[np.ndarray] = None
    stop_rule: StopRule = StopRule.LAMBDA
    residual_tol: float = 1e-10
    polish: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise InvalidConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.residual_tol > 0:
            raise InvalidConfigError(f"residual_tol must be positive, got {self.residual_tol}")

        if isinstance(self.shift, StaticShift) and self.sense is not None:
            if Sense(self.sense) != _sign_sense(self.shift.alpha):
                raise InvalidConfigError(
                    f"Sense {Sense(self.sense).name} conflicts with alpha={self.shift.alpha}"
                )

        if self.x0 is not None:
            x0 = np.array(self.x0, dtype=np.float64)
            if x0.ndim != 1 or not np.all(np.isfinite(x0)):
                raise InvalidConfigError("Starting vector must be a finite 1-D array")
            if abs(np.linalg.norm(x0) - 1.0) > UNIT_TOL:
                raise InvalidConfigError(
                    f"Starting vector must have unit norm, got {np.linalg.norm(x0)!r}"
                )
            object.__setattr__(self, 'x0', x0)

    @property
    def chi(self) -> int:
        if isinstance(self.shift, StaticShift):
            return int(_sign_sense(self.shift.alpha))
        return int(self.sense if self.sense is not None else Sense.CONVEX)

    @property
    def method(self) -> Method:
        adaptive = isinstance(self.shift, AdaptiveShift)
        if self.gamma is None:
            return Method.GEAP if adaptive else Method.SSHOPM
        if isinstance(self.gamma, DynamicGamma):
            return Method.DE_GEAP if adaptive else Method.DES_SSHOPM
        if adaptive:
            raise InvalidConfigError("A static gamma cannot be combined with an adaptive shift")
        return Method.ES_SSHOPM

    def with_start(self, x0) -> 'SolveConfig':
        return replace(self, x0=x0)


def _sign_sense(alpha: float) -> Sense:
    return Sense.CONVEX if alpha >= 0 else Sense.CONCAVE


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """
    State after iteration k.

    ``lam`` is A x_k^m, the value reported and stop-tested by every method;
    ``quotient`` is the extrapolated Rayleigh quotient (u_k, x^gamma)/(x^gamma, x^gamma),
    which tends to chi * (lambda + alpha). ``hessian_min`` is
    lambda_min(chi m (m-1) A x^{m-2}) for the adaptive-shift methods.
    """

    k: int
    lam: float
    x: np.ndarray
    residual: float
    alpha: float
    gamma: float
    u_norm: Optional[float] = None
    quotient: Optional[float] = None
    hessian_min: Optional[float] = None


@dataclass(eq=False)
class SolveTrace:
    method: Method
    records: List[IterationRecord] = field(default_factory=list)
    status: Optional[Status] = None
    polish_steps: int = 0

    @property
    def iterations(self) -> int:
        return self.records[-1].k if self.records else 0

    def lambdas(self) -> np.ndarray:
        return np.array([record.lam for record in self.records])

    def residuals(self) -> np.ndarray:
        return np.array([record.residual for record in self.records])


@dataclass(frozen=True, eq=False)
class Eigenpair:
    lam: float
    x: np.ndarray
    residual: float
    classification: Optional[Stability] = None

    def classified(self, stability: Stability) -> 'Eigenpair':
        return replace(self, classification=stability)


@dataclass(eq=False)
class RateReport:
    """
    Predicted and measured convergence rates at one eigenpair.

    ``gamma_opt`` and ``rho_opt`` are None when rho lies outside (0, 1).
    ``gamma``/``predicted_rate`` describe the run the measurement comes from.
    """

    rho: float
    gamma_opt: Optional[float]
    rho_opt: Optional[float]
    eigenpair: Eigenpair
    alpha: float
    rho_gamma_curve: List[Tuple[float, float]] = field(default_factory=list)
    measured_rate: Optional[float] = None
    gamma: float = 0.0
    predicted_rate: Optional[float] = None
    oscillatory: bool = False
    status: Optional[Status] = None
    iterations: Optional[int] = None


@dataclass(frozen=True)
class TrialRow:
    eigenvalue: float
    occurrences: int
    median_iterations: Optional[int]


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    status: Status
    eigenvalue: float
    iterations: int
    residual: float
    class_id: Optional[int] = None
    stability: Optional[Stability] = None


@dataclass(eq=False)
class TrialSummary:
    method: str
    rows: List[TrialRow]
    total_trials: int
    non_converged: int
    master_seed: int
    outcomes: List[TrialOutcome] = field(default_factory=list)

    def row_for(self, eigenvalue: float, tol: float = 1e-4) -> Optional[TrialRow]:
        for row in self.rows:
            if abs(row.eigenvalue - eigenvalue) < tol:
                return row
        return None


@dataclass(frozen=True)
class GraphSpec:
    """Undirected simple graph; edges are 1-based (i, j) pairs with i < j."""

    n: int
    edges: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidGraphError(f"Graph needs at least one node, got {self.n}")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise InvalidGraphError(f"Self-loop at node {i}")
            if not i < j:
                raise InvalidGraphError(f"Edge ({i}, {j}) must be written with i < j")
            if i < 1 or j > self.n:
                raise InvalidGraphError(f"Edge ({i}, {j}) out of range [1, {self.n}]")
            if (i, j) in seen:
                raise InvalidGraphError(f"Duplicate edge ({i}, {j})")
            seen.add((i, j))
