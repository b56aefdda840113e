"""
Tests for multi-start campaigns, graph ingestion and trace export.
"""
import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from apps.zeigen import bench, rateth
from apps.zeigen.exceptions import InvalidGraphError
from apps.zeigen.iterate import es_sshopm, random_start, sshopm
from apps.zeigen.models import (
    AdaptiveShift,
    DynamicGamma,
    Sense,
    SolveConfig,
    Stability,
    StaticGamma,
    StaticShift,
    Status,
    StopRule,
)

from .factories import (
    COMMUNITY_GRAPH,
    EX1_CONCAVE_MEDIANS,
    EX1_CONVEX_EIGENVALUES,
    EX1_CONVEX_MEDIANS,
    EX1_START_08730,
    EX2_CONCAVE_EIGENVALUES,
    EX2_CONCAVE_MEDIANS,
    EX2_CONVEX_EIGENVALUES,
    EX2_CONVEX_MEDIANS,
    K3_GRAPH,
    example1,
    example2,
    unit,
)


def mean_iterations(summary):
    converged = [o.iterations for o in summary.outcomes if o.status == Status.CONVERGED]
    return sum(converged) / len(converged)


class CampaignTests(SimpleTestCase):
    """Test cases for S-SHOPM against ES-SHOPM from shared random starts."""

    trials = 200

    def campaign(self, tensor, alpha, gamma):
        methods = {
            'S-SHOPM': SolveConfig(StaticShift(alpha)),
            'ES-SHOPM': SolveConfig(StaticShift(alpha), gamma=StaticGamma(gamma)),
        }
        plain, extrapolated = bench.run_trials(tensor, methods, self.trials, master_seed=42, classify=True)
        expected = Stability.NEGATIVE_STABLE if alpha > 0 else Stability.POSITIVE_STABLE

        for summary in (plain, extrapolated):
            self.assertEqual(summary.non_converged, 0)
            self.assertEqual(sum(row.occurrences for row in summary.rows), self.trials)
            for outcome in summary.outcomes:
                self.assertLessEqual(outcome.residual, 1e-10)
                self.assertEqual(outcome.stability, expected)

        self.assertLess(mean_iterations(extrapolated), mean_iterations(plain))
        return plain, extrapolated

    def eigenvalues(self, summary):
        return {row.eigenvalue for row in summary.rows}

    def test_example1_convex(self):
        plain, extrapolated = self.campaign(example1(), 1.0, -0.30)

        self.assertEqual(self.eigenvalues(plain), EX1_CONVEX_EIGENVALUES)
        self.assertEqual([row.eigenvalue for row in plain.rows], [0.8730, 0.4306, 0.0180, -0.0006])
        self.assertEqual(self.eigenvalues(extrapolated), EX1_CONVEX_EIGENVALUES)

    def test_example1_concave_merges_sign_pairs(self):
        """Test that odd order maps each concave eigenvalue onto a negated convex one."""
        plain, _ = self.campaign(example1(), -1.0, -0.50)

        self.assertEqual(self.eigenvalues(plain), {-0.8730, -0.4306, -0.0180, 0.0006})
        self.assertEqual(plain.rows[0].eigenvalue, -0.8730)

    def test_example2_convex(self):
        plain, _ = self.campaign(example2(), 2.0, -0.35)
        self.assertEqual(self.eigenvalues(plain), EX2_CONVEX_EIGENVALUES)

    def test_example2_concave(self):
        plain, _ = self.campaign(example2(), -2.0, -0.20)

        self.assertEqual(self.eigenvalues(plain), EX2_CONCAVE_EIGENVALUES)
        self.assertEqual(plain.rows[0].eigenvalue, -1.0954)


class IterationTableMixin:
    """
    Every method from 1000 shared random starts, checked row by row against
    reference median iteration counts.
    """

    trials = 1000
    master_seed = 42
    tolerance = 0.30
    labels = ('S-SHOPM', 'ES-SHOPM', 'DES-SHOPM', 'GEAP', 'DE-GEAP')

    tensor_factory = None
    alpha = None
    gamma = None
    medians = {}

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        sense = Sense.CONVEX if cls.alpha > 0 else Sense.CONCAVE
        methods = {
            'S-SHOPM': SolveConfig(StaticShift(cls.alpha)),
            'ES-SHOPM': SolveConfig(StaticShift(cls.alpha), gamma=StaticGamma(cls.gamma)),
            'DES-SHOPM': SolveConfig(StaticShift(cls.alpha), gamma=DynamicGamma()),
            'GEAP': SolveConfig(AdaptiveShift(1e-6), sense=sense),
            'DE-GEAP': SolveConfig(AdaptiveShift(1e-6), gamma=DynamicGamma(), sense=sense),
        }
        cls.stability = Stability.NEGATIVE_STABLE if sense == Sense.CONVEX else Stability.POSITIVE_STABLE
        cls.summaries = {
            summary.method: summary
            for summary in bench.run_trials(cls.tensor_factory(), methods, cls.trials,
                                            master_seed=cls.master_seed, workers=4, classify=True)
        }

    def row_medians(self, eigenvalue):
        medians = []
        for label in self.labels:
            row = self.summaries[label].row_for(eigenvalue, tol=5e-5)
            self.assertIsNotNone(row, f"{label} never reached {eigenvalue}")
            medians.append(row.median_iterations)
        return dict(zip(self.labels, medians))

    def test_eigenvalue_set(self):
        for label in self.labels:
            summary = self.summaries[label]
            self.assertEqual(summary.non_converged, 0)
            self.assertEqual({row.eigenvalue for row in summary.rows}, set(self.medians), label)

    def test_converged_pairs_are_stable_eigenpairs(self):
        for label in self.labels:
            for outcome in self.summaries[label].outcomes:
                self.assertLessEqual(outcome.residual, 1e-10)
                self.assertEqual(outcome.stability, self.stability, f"{label}, trial {outcome.trial}")

    def test_extrapolation_never_slower_per_row(self):
        for eigenvalue in self.medians:
            medians = self.row_medians(eigenvalue)
            self.assertLessEqual(medians['ES-SHOPM'], medians['S-SHOPM'], eigenvalue)
            self.assertLessEqual(medians['DES-SHOPM'], medians['S-SHOPM'], eigenvalue)
            self.assertLessEqual(medians['DE-GEAP'], medians['GEAP'], eigenvalue)

    def test_medians_match_reference(self):
        for eigenvalue, reference in self.medians.items():
            medians = self.row_medians(eigenvalue)
            for label, expected in zip(self.labels, reference):
                self.assertLessEqual(abs(medians[label] - expected), self.tolerance * expected,
                                     f"{label} at {eigenvalue}: {medians[label]} vs {expected}")

    def test_static_extrapolation_keeps_basins(self):
        plain, extrapolated = self.summaries['S-SHOPM'], self.summaries['ES-SHOPM']

        self.assertEqual(bench.basin_agreement(extrapolated, plain), 1.0)
        self.assertEqual([(row.eigenvalue, row.occurrences) for row in extrapolated.rows],
                         [(row.eigenvalue, row.occurrences) for row in plain.rows])


@tag('slow')
class Example1ConvexTableTests(IterationTableMixin, SimpleTestCase):
    """Test cases for Example 1 with alpha = 1 and gamma = -0.30."""

    tensor_factory = staticmethod(example1)
    alpha = 1.0
    gamma = -0.30
    medians = EX1_CONVEX_MEDIANS

    def test_dynamic_adaptive_is_fastest(self):
        for eigenvalue in self.medians:
            medians = self.row_medians(eigenvalue)
            self.assertEqual(min(medians.values()), medians['DE-GEAP'], eigenvalue)


@tag('slow')
class Example1ConcaveTableTests(IterationTableMixin, SimpleTestCase):
    """Test cases for Example 1 with alpha = -1 and gamma = -0.50."""

    tensor_factory = staticmethod(example1)
    alpha = -1.0
    gamma = -0.50
    medians = EX1_CONCAVE_MEDIANS

    def test_static_extrapolation_keeps_basins(self):
        """Test that gamma = -0.50 moves at most one start of the 1000, and only into the 0.0006 basin."""
        plain, extrapolated = self.summaries['S-SHOPM'], self.summaries['ES-SHOPM']
        moved = [
            (x, y) for x, y in zip(plain.outcomes, extrapolated.outcomes) if x.class_id != y.class_id
        ]

        self.assertGreaterEqual(bench.basin_agreement(extrapolated, plain), 0.999)
        self.assertLessEqual(len(moved), 1)
        for _, outcome in moved:
            self.assertAlmostEqual(abs(outcome.eigenvalue), 0.0006, delta=5e-5)


@tag('slow')
class Example2ConvexTableTests(IterationTableMixin, SimpleTestCase):
    """Test cases for Example 2 with alpha = 2 and gamma = -0.35."""

    tensor_factory = staticmethod(example2)
    alpha = 2.0
    gamma = -0.35
    medians = EX2_CONVEX_MEDIANS


@tag('slow')
class Example2ConcaveTableTests(IterationTableMixin, SimpleTestCase):
    """Test cases for Example 2 with alpha = -2 and gamma = -0.20."""

    tensor_factory = staticmethod(example2)
    alpha = -2.0
    gamma = -0.20
    medians = EX2_CONCAVE_MEDIANS


class AllMethodsCampaignTests(SimpleTestCase):
    """Test cases for a campaign over every method."""

    def setUp(self):
        """Set up test data."""
        self.methods = {
            'S-SHOPM': SolveConfig(StaticShift(2.0)),
            'ES-SHOPM': SolveConfig(StaticShift(2.0), gamma=StaticGamma(-0.35)),
            'GEAP': SolveConfig(AdaptiveShift(1e-6)),
            'DES-SHOPM': SolveConfig(StaticShift(2.0), gamma=DynamicGamma()),
            'DE-GEAP': SolveConfig(AdaptiveShift(1e-6), gamma=DynamicGamma()),
        }
        self.summaries = {
            summary.method: summary
            for summary in bench.run_trials(example2(), self.methods, 60, master_seed=7)
        }

    def test_every_converged_value_is_a_known_eigenvalue(self):
        for summary in self.summaries.values():
            for row in summary.rows:
                self.assertIn(row.eigenvalue, EX2_CONVEX_EIGENVALUES)

    def test_outcomes_unclassified_by_default(self):
        for summary in self.summaries.values():
            self.assertTrue(all(outcome.stability is None for outcome in summary.outcomes))

    def test_rendered_table(self):
        table = bench.render_table(list(self.summaries.values()))
        lines = table.splitlines()

        for label in self.methods:
            self.assertIn(label, lines[0])
        self.assertIn('# Occ.', lines[1])
        self.assertTrue(any(line.lstrip().startswith('0.8893') for line in lines))
        self.assertTrue(lines[-1].lstrip().startswith('failed'))

    def test_mixed_sense_rejected(self):
        methods = {
            'S-SHOPM': SolveConfig(StaticShift(2.0)),
            'concave': SolveConfig(StaticShift(-2.0)),
        }
        with self.assertRaises(ValueError):
            bench.run_trials(example2(), methods, 2, master_seed=0)


class DeterminismTests(SimpleTestCase):

    def test_worker_count_does_not_change_results(self):
        methods = {
            'S-SHOPM': SolveConfig(StaticShift(1.0)),
            'ES-SHOPM': SolveConfig(StaticShift(1.0), gamma=StaticGamma(-0.3)),
        }
        serial = bench.run_trials(example1(), methods, 20, master_seed=3, workers=1)
        pooled = bench.run_trials(example1(), methods, 20, master_seed=3, workers=2)

        for a, b in zip(serial, pooled):
            self.assertEqual(a.outcomes, b.outcomes)
            self.assertEqual(a.rows, b.rows)


class GraphTests(SimpleTestCase):
    """Test cases for reading graphs and building triangle tensors."""

    def write_graph(self, text):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        path = Path(directory.name) / 'graph.mtx'
        path.write_text(text)
        return path

    def test_triangle_graph(self):
        graph = bench.read_graph(K3_GRAPH)
        self.assertEqual(graph.n, 3)
        self.assertEqual(graph.edges, ((1, 2), (1, 3), (2, 3)))
        self.assertEqual(bench.triangles(graph), [(1, 2, 3)])

        tensor = bench.graph_to_tensor(graph)
        self.assertEqual(tensor[(2, 0, 1)], 1.0)
        self.assertEqual(tensor[(0, 0, 1)], 0.0)

    def test_triangle_graph_eigenpair(self):
        """Test the symmetric pair 2/sqrt(3), (1, 1, 1)/sqrt(3) of the single triangle."""
        tensor = bench.graph_to_tensor(bench.read_graph(K3_GRAPH))
        cfg = SolveConfig(StaticShift(2.0), x0=unit([1.0, 0.8, 0.6]),
                          stop_rule=StopRule.RESIDUAL, residual_tol=1e-13)
        pair, trace = sshopm(tensor, cfg)

        self.assertEqual(trace.status, Status.CONVERGED)
        self.assertAlmostEqual(pair.lam, 2.0 / math.sqrt(3.0), delta=1e-12)
        np.testing.assert_allclose(pair.x, np.ones(3) / math.sqrt(3.0), atol=1e-12)

    def test_path_graph_has_no_triangles(self):
        path = self.write_graph(
            "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n2 1\n3 2\n"
        )
        graph = bench.read_graph(path)

        self.assertEqual(graph.edges, ((1, 2), (2, 3)))
        self.assertEqual(bench.triangles(graph), [])
        self.assertFalse(np.any(bench.graph_to_tensor(graph).values))

    def test_self_loops_dropped(self):
        path = self.write_graph(
            "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 2\n1 1\n2 1\n"
        )
        self.assertEqual(bench.read_graph(path).edges, ((1, 2),))

    def test_non_square_rejected(self):
        path = self.write_graph(
            "%%MatrixMarket matrix coordinate real general\n2 3 1\n1 2 1.0\n"
        )
        with self.assertRaises(InvalidGraphError):
            bench.read_graph(path)

    def test_community_graph(self):
        graph = bench.read_graph(COMMUNITY_GRAPH)

        self.assertEqual(graph.n, 62)
        self.assertEqual(len(graph.edges), 166)
        self.assertEqual(len(bench.triangles(graph)), 66)


class CommunityGraphTests(SimpleTestCase):
    """Test cases for extrapolation on a triangle tensor of a 62-node graph."""

    alpha = 40.0

    def setUp(self):
        """Set up test data."""
        self.tensor = bench.graph_to_tensor(bench.read_graph(COMMUNITY_GRAPH))

    def config(self, x0, gamma=None):
        return SolveConfig(StaticShift(self.alpha), gamma=gamma, x0=x0, tol=1e-12, max_iters=3000)

    def test_extrapolation_reduces_median_iterations(self):
        pair, trace = sshopm(self.tensor, self.config(random_start(62, 11, 0)))
        self.assertEqual(trace.status, Status.CONVERGED)
        report = rateth.rate_report(self.tensor, pair, self.alpha)
        self.assertIsNotNone(report.gamma_opt)

        plain, extrapolated = [], []
        for trial in range(20):
            x0 = random_start(62, 11, trial)
            _, trace = sshopm(self.tensor, self.config(x0))
            self.assertEqual(trace.status, Status.CONVERGED)
            plain.append(trace.iterations)
            _, trace = es_sshopm(self.tensor, self.config(x0, StaticGamma(report.gamma_opt)))
            self.assertEqual(trace.status, Status.CONVERGED)
            extrapolated.append(trace.iterations)

        self.assertLess(np.median(extrapolated), np.median(plain))


class ExportTests(SimpleTestCase):
    """Test cases for writing traces to disk."""

    def setUp(self):
        """Set up test data."""
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.directory = Path(directory.name) / 'runs'

    def test_csv_and_summary_written(self):
        tensor = example1()
        cfg = SolveConfig(StaticShift(1.0), x0=unit(EX1_START_08730))
        pair, trace = sshopm(tensor, cfg)
        report = rateth.rate_report(tensor, pair, 1.0)

        written = bench.export_traces({'S-SHOPM': (cfg, pair, trace, report)}, self.directory)

        self.assertEqual([path.name for path in written], ['S-SHOPM.csv', 'summary.json'])
        lines = (self.directory / 'S-SHOPM.csv').read_text().splitlines()
        self.assertEqual(lines[0], 'k,lambda,residual,alpha_k,gamma_k')
        self.assertEqual(len(lines), len(trace.records) + 1)

        summary = json.loads((self.directory / 'summary.json').read_text())
        self.assertAlmostEqual(summary['S-SHOPM']['eigenpair']['lam'], pair.lam, delta=1e-15)
        self.assertAlmostEqual(summary['S-SHOPM']['rate_report']['rho'], report.rho, delta=1e-15)
