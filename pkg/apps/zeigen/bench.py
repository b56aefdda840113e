"""
Experiment harness: multi-start campaigns, rate experiments, graph ingestion
and trace export.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse

from . import rateth
from .exceptions import InvalidGraphError, RateDomainError, ResidualPreconditionError
from .iterate import random_start, solve
from .models import (
    Eigenpair,
    GraphSpec,
    RateReport,
    SolveConfig,
    SolveTrace,
    StaticGamma,
    StaticShift,
    Status,
    StopRule,
    TrialOutcome,
    TrialRow,
    TrialSummary,
)
from .symtensor import EntryList, SymmetricTensor, from_entries

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-6


def _run_trial(args) -> List[TrialOutcome]:
    tensor, templates, trial, master_seed, classify = args
    x0 = random_start(tensor.dim, master_seed, trial)
    outcomes = []
    for template in templates:
        pair, trace = solve(tensor, template.with_start(x0))
        stability = None
        if classify and trace.status == Status.CONVERGED:
            try:
                stability = rateth.classify(tensor, pair.lam, pair.x)
            except ResidualPreconditionError as exc:
                logger.warning("Trial %d (%s) left unclassified: %s", trial, trace.method.label, exc)
        outcomes.append(TrialOutcome(
            trial=trial,
            status=trace.status,
            eigenvalue=pair.lam,
            iterations=trace.iterations,
            residual=pair.residual,
            stability=stability,
        ))
    return outcomes


def _lower_median(values: Sequence[int]) -> Optional[int]:
    if not values:
        return None
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


class _EigenvalueClasses:
    """
    Merge converged eigenvalues into classes.

    Two values are the same eigenvalue when they differ by less than 1e-6.
    For odd order (lambda, x) and (-lambda, -x) are one pair, so lambda is
    also matched against -lambda. The first value seen represents the class.
    """

    def __init__(self, odd_order: bool, tol: float = IDENTITY_TOL):
        self.odd_order = odd_order
        self.tol = tol
        self.representatives: List[float] = []

    def assign(self, value: float) -> int:
        for class_id, representative in enumerate(self.representatives):
            if abs(value - representative) < self.tol:
                return class_id
            if self.odd_order and abs(value + representative) < self.tol:
                return class_id
        self.representatives.append(value)
        return len(self.representatives) - 1


def run_trials(tensor: SymmetricTensor, methods: Mapping[str, SolveConfig], trials: int,
               master_seed: int, workers: int = 1, classify: bool = False) -> List[TrialSummary]:
    """
    Run every method from the same random starts and tabulate the results.

    Trial t starts from ``random_start(n, master_seed, t)``; results are
    merged in trial order, so the summaries do not depend on ``workers``.
    With ``classify`` each converged pair also gets its stability.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    labels = list(methods)
    templates = [methods[label] for label in labels]
    chis = {template.chi for template in templates}
    if len(chis) > 1:
        raise ValueError("All methods in a campaign must share the same sense")
    chi = chis.pop()

    logger.info("Running %d trials of %s (seed %d, %d workers)",
                trials, ', '.join(labels), master_seed, workers)

    jobs = [(tensor, templates, trial, master_seed, classify) for trial in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_run_trial, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        per_trial = [_run_trial(job) for job in jobs]

    classes = _EigenvalueClasses(odd_order=tensor.order % 2 == 1)
    per_method: List[List[TrialOutcome]] = [[] for _ in labels]
    for outcomes in per_trial:
        for index, outcome in enumerate(outcomes):
            if outcome.status == Status.CONVERGED:
                outcome = replace(outcome, class_id=classes.assign(outcome.eigenvalue))
            per_method[index].append(outcome)

    class_order = sorted(range(len(classes.representatives)),
                         key=lambda c: -chi * classes.representatives[c])

    summaries = []
    for label, outcomes in zip(labels, per_method):
        rows = []
        for class_id in class_order:
            iterations = [o.iterations for o in outcomes if o.class_id == class_id]
            if iterations:
                rows.append(TrialRow(
                    eigenvalue=round(classes.representatives[class_id], 4),
                    occurrences=len(iterations),
                    median_iterations=_lower_median(iterations),
                ))
        summaries.append(TrialSummary(
            method=label,
            rows=rows,
            total_trials=trials,
            non_converged=sum(1 for o in outcomes if o.status != Status.CONVERGED),
            master_seed=master_seed,
            outcomes=outcomes,
        ))

    logger.info("Campaign finished: %d eigenvalue classes", len(classes.representatives))
    return summaries


def basin_agreement(a: TrialSummary, b: TrialSummary) -> float:
    """Fraction of trials converged under both methods that reached the same class."""
    both = [(x, y) for x, y in zip(a.outcomes, b.outcomes)
            if x.class_id is not None and y.class_id is not None]
    if not both:
        return 1.0
    return sum(1 for x, y in both if x.class_id == y.class_id) / len(both)


def render_table(summaries: Sequence[TrialSummary]) -> str:
    """Aligned text table: one row per eigenvalue, Its. and # Occ. per method."""
    eigenvalues: List[float] = []
    for summary in summaries:
        for row in summary.rows:
            if all(abs(row.eigenvalue - value) >= 5e-5 for value in eigenvalues):
                eigenvalues.append(row.eigenvalue)

    header_top = f"{'lambda':>9} |" + ''.join(f" {s.method:^15} |" for s in summaries)
    header_sub = f"{'':>9} |" + ''.join(f" {'Its.':>6} {'# Occ.':>8} |" for _ in summaries)
    rule = '-' * len(header_top)
    lines = [header_top, header_sub, rule]
    for value in eigenvalues:
        cells = []
        for summary in summaries:
            row = summary.row_for(value, tol=5e-5)
            if row is None:
                cells.append(f" {'-':>6} {0:>8} |")
            else:
                cells.append(f" {row.median_iterations:>6} {row.occurrences:>8} |")
        lines.append(f"{value:>9.4f} |" + ''.join(cells))
    lines.append(rule)
    lines.append(f"{'failed':>9} |" + ''.join(f" {'':>6} {s.non_converged:>8} |" for s in summaries))
    return '\n'.join(lines)


def default_gamma_grid(rho: float) -> List[float]:
    optimal = rateth.gamma_opt(rho)
    return [0.0, optimal / 2.0, optimal]


def rate_experiment(tensor: SymmetricTensor, alpha: float, x0,
                    gamma_grid: Optional[Iterable[float]] = None,
                    residual_tol: float = 1e-13, max_iters: int = 1000) -> List[RateReport]:
    """
    Compare measured ES-SHOPM residual rates with the predicted rho_gamma.

    A preliminary S-SHOPM run from ``x0`` fixes the eigenpair and rho. Runs
    stop on the residual so the decay is observed down to the floor. Grid
    points below gamma_opt are flagged oscillatory; non-convergent points are
    reported with their status rather than raised.
    """
    base_cfg = SolveConfig(shift=StaticShift(alpha), x0=x0, stop_rule=StopRule.RESIDUAL,
                           residual_tol=residual_tol, max_iters=max_iters)
    pair, _ = solve(tensor, base_cfg)
    base = rateth.rate_report(tensor, pair, alpha)
    if base.gamma_opt is None:
        raise RateDomainError(f"rho={base.rho!r} at the converged pair is outside (0, 1)")
    if gamma_grid is None:
        gamma_grid = default_gamma_grid(base.rho)

    reports = []
    for gamma in gamma_grid:
        gamma = float(gamma)
        cfg = replace(base_cfg, gamma=StaticGamma(gamma))
        _, trace = solve(tensor, cfg)
        report = rateth.rate_report(tensor, pair, alpha, gamma_grid=[gamma], trace=trace, gamma=gamma)
        report.gamma = gamma
        report.predicted_rate = rateth.rho_gamma(base.rho, gamma)
        report.oscillatory = gamma < base.gamma_opt
        if trace.status != Status.CONVERGED:
            logger.info("gamma=%.4f did not converge (%s)", gamma, trace.status.value)
        elif report.oscillatory:
            logger.info("gamma=%.4f is below gamma_opt=%.4f; excluded from slope comparison",
                        gamma, base.gamma_opt)
        reports.append(report)
    return reports


def read_graph(path: Union[str, Path]) -> GraphSpec:
    """
    Read an undirected graph from a Matrix Market coordinate file.

    Both triangles of a symmetric listing collapse to one edge; diagonal
    entries are dropped.
    """
    try:
        matrix = scipy.sparse.coo_matrix(scipy.io.mmread(str(path)))
    except ValueError as exc:
        raise InvalidGraphError(f"Cannot read {path}: {exc}")
    if matrix.shape[0] != matrix.shape[1]:
        raise InvalidGraphError(f"Adjacency matrix must be square, got {matrix.shape}")

    edges = set()
    loops = 0
    for i, j in zip(matrix.row.tolist(), matrix.col.tolist()):
        if i == j:
            loops += 1
            continue
        edges.add((min(i, j) + 1, max(i, j) + 1))

    logger.info("Read graph %s: %d nodes, %d edges, %d self-loops dropped",
                path, matrix.shape[0], len(edges), loops)
    return GraphSpec(n=matrix.shape[0], edges=tuple(sorted(edges)))


def triangles(graph: GraphSpec) -> List[Tuple[int, int, int]]:
    """All 3-cycles as sorted 1-based triples."""
    neighbours: Dict[int, set] = {node: set() for node in range(1, graph.n + 1)}
    for i, j in graph.edges:
        neighbours[i].add(j)
        neighbours[j].add(i)

    found = []
    for i, j in graph.edges:
        for k in sorted(neighbours[i] & neighbours[j]):
            if k > j:
                found.append((i, j, k))
    return sorted(found)


def graph_to_tensor(graph: GraphSpec) -> SymmetricTensor:
    """Order-3 tensor with a_ijk = 1 on every permutation of each triangle."""
    entries = [(triple, 1.0) for triple in triangles(graph)]
    return from_entries(EntryList(order=3, dim=graph.n, entries=entries))


def export_traces(runs: Mapping[str, Tuple[SolveConfig, Eigenpair, SolveTrace, Optional[RateReport]]],
                  path: Union[str, Path]) -> List[Path]:
    """
    Write ``<label>.csv`` per run (k, lambda, residual, alpha_k, gamma_k) and
    one ``summary.json`` sidecar with configs, final pairs and rate reports.
    """
    # Serializers need configured Django settings; trial workers never import them.
    from rest_framework.renderers import JSONRenderer

    from .serializers import RunSerializer

    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    sidecar = {}
    for label, (cfg, pair, trace, report) in runs.items():
        table = np.array([[r.k, r.lam, r.residual, r.alpha, r.gamma] for r in trace.records])
        csv_path = directory / f"{label}.csv"
        np.savetxt(csv_path, table, delimiter=',', header='k,lambda,residual,alpha_k,gamma_k',
                   comments='', fmt=['%d', '%.17g', '%.17g', '%.17g', '%.17g'])
        written.append(csv_path)
        sidecar[label] = RunSerializer({
            'config': cfg, 'eigenpair': pair, 'trace': trace, 'rate_report': report,
        }).data

    json_path = directory / 'summary.json'
    json_path.write_bytes(JSONRenderer().render(sidecar, renderer_context={'indent': 2}))
    written.append(json_path)
    return written
