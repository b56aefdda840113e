"""Multi-start campaign: the same seeded starts for every selected method."""
from ... import bench
from ...models import Method
from ...serializers import METHOD_CHOICES, TrialSummarySerializer, TrialsRequestSerializer
from ._base import ZeigenCommand


class Command(ZeigenCommand):
    help = 'Run seeded random starts with one or more methods and tabulate eigenvalues, medians and counts.'
    request_serializer_class = TrialsRequestSerializer

    def add_arguments(self, parser):
        parser.add_argument('--tensor', required=True)
        parser.add_argument('--method', dest='methods', action='append', choices=METHOD_CHOICES,
                            help='Repeat to compare several methods')
        parser.add_argument('--all-methods', action='store_true')
        parser.add_argument('--alpha', help='Static shift for sshopm, es and des, or "auto"')
        parser.add_argument('--gamma', type=float, help='Static extrapolation parameter for es')
        parser.add_argument('--sense', choices=['convex', 'concave'])
        parser.add_argument('--tau', type=float)
        parser.add_argument('--tol', type=float)
        parser.add_argument('--max-iters', type=int)
        parser.add_argument('--trials', type=int, default=1000)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--workers', type=int, help='Worker processes; results do not depend on it')
        parser.add_argument('--format', choices=['table', 'json'], default='table')

    def run(self, service, request):
        tensor = service.load_tensor(request['tensor'])
        summaries = service.run_campaign(
            tensor,
            request['methods'],
            request['trials'],
            request['seed'],
            alpha=request['alpha'],
            gamma=request['gamma'],
            sense=request['sense'],
            tau=request['tau'],
            tol=request['tol'],
            max_iters=request['max_iters'],
            workers=request['workers'],
        )
        agreement = self._agreement(summaries)

        if request['format'] == 'json':
            self.write_json({
                'summaries': TrialSummarySerializer(summaries, many=True).data,
                'basin_agreement': agreement,
            })
            return

        self.stdout.write(f"m={tensor.order} n={tensor.dim} trials={request['trials']} seed={request['seed']}")
        self.stdout.write(bench.render_table(summaries))
        for label, fraction in agreement.items():
            self.stdout.write(f"basin agreement {label}: {fraction:.4f}")

    def _agreement(self, summaries):
        """Agreement of each accelerated method with its unaccelerated counterpart."""
        by_label = {summary.method: summary for summary in summaries}
        pairs = [
            (Method.ES_SSHOPM, Method.SSHOPM),
            (Method.DES_SSHOPM, Method.SSHOPM),
            (Method.DE_GEAP, Method.GEAP),
        ]
        return {
            f"{fast.label} vs {base.label}": bench.basin_agreement(by_label[fast.label], by_label[base.label])
            for fast, base in pairs
            if fast.label in by_label and base.label in by_label
        }
