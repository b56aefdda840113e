"""
Shared plumbing for the solver commands.

Options are validated by a request serializer, domain errors become
one-line diagnostics, and exit codes follow one contract: 0 on success,
1 on usage or input errors, 2 when a solve does not converge.
"""
import sys

from django.core.management.base import BaseCommand, CommandError
from rest_framework.renderers import JSONRenderer

from ...exceptions import TensorEigenError
from ...services import TensorEigenService

EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2


def glue_vector_options(argv, names):
    """
    Rewrite ``--start -0.4,0.9,-0.1`` as ``--start=-0.4,0.9,-0.1``.

    argparse would otherwise read a comma-separated list with a leading
    minus sign as an unknown option.
    """
    glued = []
    args = iter(argv)
    for arg in args:
        if arg in names:
            value = next(args, None)
            glued.append(arg if value is None else f"{arg}={value}")
        else:
            glued.append(arg)
    return glued


def first_error(errors, prefix=''):
    """Flatten serializer errors to the first message, prefixed by its option name."""
    if isinstance(errors, dict):
        name, detail = next(iter(errors.items()))
        if name != 'non_field_errors':
            prefix = f"--{name.replace('_', '-')}: "
        return first_error(detail, prefix)
    if isinstance(errors, list):
        return first_error(errors[0], prefix)
    return f"{prefix}{errors}"


class ZeigenCommand(BaseCommand):
    request_serializer_class = None
    vector_options = ('--start',)

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # Parse errors raise CommandError (exit 1) instead of argparse's exit 2.
        parser.called_from_command_line = False
        return parser

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(glue_vector_options(argv, self.vector_options))
        except CommandError as exc:
            self.stderr.write(f"error: {str(exc).removeprefix('Error: ')}")
            sys.exit(exc.returncode)

    def validate_options(self, options):
        data = {
            name: value for name, value in options.items()
            if name in self.request_serializer_class().fields and value is not None
        }
        serializer = self.request_serializer_class(data=data)
        if not serializer.is_valid():
            raise CommandError(first_error(serializer.errors), returncode=EXIT_USAGE)
        return serializer.validated_data

    def handle(self, *args, **options):
        request = self.validate_options(options)
        try:
            self.run(TensorEigenService(), request)
        except (TensorEigenError, OSError) as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc

    def run(self, service, request):
        raise NotImplementedError('subclasses of ZeigenCommand must provide a run() method')

    def write_json(self, data):
        self.stdout.write(JSONRenderer().render(data, renderer_context={'indent': 2}).decode())
