"""Triangle adjacency tensor of an undirected graph."""
from ...serializers import GraphRequestSerializer
from ._base import ZeigenCommand


class Command(ZeigenCommand):
    help = 'Read a Matrix Market adjacency matrix and write its order-3 triangle tensor.'
    request_serializer_class = GraphRequestSerializer

    def add_arguments(self, parser):
        parser.add_argument('--graph', required=True, help='Matrix Market coordinate file')
        parser.add_argument('--output', required=True, help='Tensor file to write')

    def run(self, service, request):
        tensor, count = service.convert_graph(request['graph'], request['output'])
        self.stdout.write(f"n={tensor.dim} triangles={count} written to {request['output']}")
