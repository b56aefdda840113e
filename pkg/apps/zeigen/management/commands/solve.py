"""Solve one Z-eigenpair problem from a single start."""
import io

import numpy as np
from django.core.management.base import CommandError

from ...serializers import METHOD_CHOICES, RunSerializer, SolveRequestSerializer
from ._base import EXIT_NOT_CONVERGED, ZeigenCommand


class Command(ZeigenCommand):
    help = 'Run one solver from one start and report the eigenpair, its stability and the cost.'
    request_serializer_class = SolveRequestSerializer

    def add_arguments(self, parser):
        parser.add_argument('--tensor', required=True, help='Tensor file (header "m n", then sorted 1-based entries)')
        parser.add_argument('--method', required=True, choices=METHOD_CHOICES)
        parser.add_argument('--alpha', help='Static shift, or "auto" for the sampled beta estimate times 1.1')
        parser.add_argument('--gamma', help='Extrapolation parameter in (-1, 0], "opt" or "dynamic"')
        parser.add_argument('--sense', choices=['convex', 'concave'])
        parser.add_argument('--tau', type=float, help='Convexity margin of the adaptive shift')
        parser.add_argument('--tol', type=float)
        parser.add_argument('--max-iters', type=int)
        parser.add_argument('--start', help='Comma-separated start vector or a file holding it; normalized')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--format', choices=['table', 'json', 'csv'], default='table')
        parser.add_argument('--export', action='store_true', help='Write trace CSVs and summary.json')
        parser.add_argument('--output-dir', help='Export directory (implies --export)')

    def run(self, service, request):
        tensor = service.load_tensor(request['tensor'])
        result = service.solve(
            tensor,
            request['method'],
            alpha=request['alpha'],
            gamma=request['gamma'],
            sense=request['sense'],
            tau=request['tau'],
            tol=request['tol'],
            max_iters=request['max_iters'],
            start=request['start'],
            seed=request['seed'],
        )

        if request['format'] == 'json':
            self.write_json(self._as_json(result))
        elif request['format'] == 'csv':
            self.stdout.write(self._as_csv(result), ending='')
        else:
            self.stdout.write(self._as_table(result))

        if request['export'] or request['output_dir']:
            for path in service.export(result, request['output_dir']):
                self.stderr.write(f"wrote {path}")

        if not result.converged:
            raise CommandError(
                f"{result.trace.method.label} stopped with status {result.trace.status.value} "
                f"after {result.trace.iterations} iterations",
                returncode=EXIT_NOT_CONVERGED,
            )

    def _as_table(self, result):
        pair, trace = result.eigenpair, result.trace
        rows = [('method', trace.method.label)]
        if result.resolved_alpha is not None:
            rows.append(('alpha', f"{result.resolved_alpha:.6g}"))
        if result.resolved_gamma is not None:
            rows.append(('gamma', f"{result.resolved_gamma:.6f}"))
        rows += [
            ('lambda', f"{pair.lam:.4f}"),
            ('classification', pair.classification.value if pair.classification else 'unclassified'),
            ('status', trace.status.value),
            ('iterations', str(trace.iterations)),
            ('residual', f"{pair.residual:.3e}"),
            ('x', ' '.join(f"{value:.6f}" for value in pair.x)),
        ]
        if result.rate_report is not None:
            rows.append(('rho', f"{result.rate_report.rho:.6f}"))
        if result.preliminary is not None:
            base_pair, base_trace = result.preliminary
            rows.append(('preliminary', f"{base_trace.method.label} lambda={base_pair.lam:.4f} "
                                        f"{base_trace.iterations} iterations ({base_trace.status.value})"))
        width = max(len(name) for name, _ in rows)
        return '\n'.join(f"{name:<{width}}  {value}" for name, value in rows)

    def _as_json(self, result):
        data = dict(RunSerializer({
            'config': result.config,
            'eigenpair': result.eigenpair,
            'trace': result.trace,
            'rate_report': result.rate_report,
        }).data)
        data['resolved_alpha'] = result.resolved_alpha
        data['resolved_gamma'] = result.resolved_gamma
        if result.preliminary is not None:
            base_pair, base_trace = result.preliminary
            data['preliminary'] = {
                'method': base_trace.method.label,
                'lam': base_pair.lam,
                'status': base_trace.status.value,
                'iterations': base_trace.iterations,
            }
        return data

    def _as_csv(self, result):
        table = np.array([[r.k, r.lam, r.residual, r.alpha, r.gamma] for r in result.trace.records])
        buffer = io.StringIO()
        np.savetxt(buffer, table, delimiter=',', header='k,lambda,residual,alpha_k,gamma_k',
                   comments='', fmt=['%d', '%.17g', '%.17g', '%.17g', '%.17g'])
        return buffer.getvalue()

