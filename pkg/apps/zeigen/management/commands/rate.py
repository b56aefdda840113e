"""Measured against predicted ES-SHOPM rates at one eigenpair."""
from ...serializers import RateReportSerializer, RateRequestSerializer
from ._base import ZeigenCommand


class Command(ZeigenCommand):
    help = 'Compare measured residual rates of ES-SHOPM with rho_gamma over a grid of gamma values.'
    request_serializer_class = RateRequestSerializer

    def add_arguments(self, parser):
        parser.add_argument('--tensor', required=True)
        parser.add_argument('--alpha', required=True)
        parser.add_argument('--start', required=True)
        parser.add_argument('--gamma', dest='gammas', action='append', type=float,
                            help='Repeat for each grid point; default 0, gamma_opt/2, gamma_opt')
        parser.add_argument('--residual-tol', type=float)
        parser.add_argument('--max-iters', type=int)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--format', choices=['table', 'json'], default='table')

    def run(self, service, request):
        tensor = service.load_tensor(request['tensor'])
        reports = service.run_rate_experiment(
            tensor,
            request['alpha'],
            request['start'],
            gammas=request['gammas'],
            residual_tol=request['residual_tol'],
            max_iters=request['max_iters'],
            seed=request['seed'],
        )

        if request['format'] == 'json':
            self.write_json(RateReportSerializer(reports, many=True).data)
            return

        first = reports[0]
        self.stdout.write(
            f"lambda={first.eigenpair.lam:.4f} alpha={first.alpha:.6g} rho={first.rho:.6f} "
            f"gamma_opt={first.gamma_opt:.6f} rho_opt={first.rho_opt:.6f}"
        )
        self.stdout.write(f"{'gamma':>9} {'predicted':>10} {'measured':>10} {'rel.err':>8} {'its':>5}  status")
        for report in reports:
            if report.measured_rate is None:
                measured, error = '-', '-'
            else:
                measured = f"{report.measured_rate:.6f}"
                error = f"{abs(report.measured_rate - report.predicted_rate) / report.predicted_rate:.4f}"
            note = ' (oscillatory)' if report.oscillatory else ''
            self.stdout.write(
                f"{report.gamma:>9.4f} {report.predicted_rate:>10.6f} {measured:>10} {error:>8} "
                f"{report.iterations:>5}  {report.status.value}{note}"
            )
