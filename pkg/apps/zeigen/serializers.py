"""
Serializers for the tensor eigensolver commands.

Request serializers validate command-line options (which flags a method
accepts); response serializers turn domain records into JSON-ready data.
"""
from pathlib import Path

import numpy as np
from rest_framework import serializers

from .models import Method

STATIC_SHIFT_METHODS = {Method.SSHOPM.value, Method.ES_SSHOPM.value, Method.DES_SSHOPM.value}
ADAPTIVE_SHIFT_METHODS = {Method.GEAP.value, Method.DE_GEAP.value}
DYNAMIC_GAMMA_METHODS = {Method.DES_SSHOPM.value, Method.DE_GEAP.value}
NO_GAMMA_METHODS = {Method.SSHOPM.value, Method.GEAP.value}
METHOD_CHOICES = [method.value for method in Method]
SENSE_CHOICES = ['convex', 'concave']


def _parse_float(value, name):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise serializers.ValidationError(f"{name} must be a number, got {value!r}")


def parse_vector(value):
    """Inline comma/space separated numbers, or the path of a file holding them."""
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_parse_float(item, 'start') for item in value]

    text = str(value).strip()
    try:
        return [float(token) for token in text.replace(',', ' ').split()]
    except ValueError:
        pass

    path = Path(text)
    if not path.is_file():
        raise serializers.ValidationError(
            f"Start vector {text!r} is neither a list of numbers nor a readable file"
        )
    try:
        return np.array(path.read_text().replace(',', ' ').split(), dtype=np.float64).tolist()
    except ValueError as exc:
        raise serializers.ValidationError(f"Cannot read start vector from {text}: {exc}")


class AlphaField(serializers.Field):
    """A shift value or the keyword ``auto`` (sampled beta estimate times a safety factor)."""

    def to_internal_value(self, data):
        if str(data).strip().lower() == 'auto':
            return 'auto'
        return _parse_float(data, 'alpha')

    def to_representation(self, value):
        return value


class GammaField(serializers.Field):
    """An extrapolation parameter, ``opt`` or ``dynamic``."""

    def to_internal_value(self, data):
        keyword = str(data).strip().lower()
        if keyword in ('opt', 'dynamic'):
            return keyword
        gamma = _parse_float(data, 'gamma')
        if not -1.0 < gamma <= 0.0:
            raise serializers.ValidationError(f"gamma must lie in (-1, 0], got {gamma}")
        return gamma

    def to_representation(self, value):
        return value


class VectorField(serializers.Field):

    def to_internal_value(self, data):
        vector = parse_vector(data)
        if not vector:
            raise serializers.ValidationError("Start vector is empty")
        norm = float(np.linalg.norm(vector))
        if not np.isfinite(norm) or norm == 0.0:
            raise serializers.ValidationError("Start vector must be finite and nonzero")
        return vector

    def to_representation(self, value):
        return [float(item) for item in value]


def _check_sense(attrs):
    alpha = attrs.get('alpha')
    sense = attrs.get('sense')
    if sense and isinstance(alpha, float):
        if (alpha >= 0) != (sense == 'convex'):
            raise serializers.ValidationError(
                {'sense': f"sense {sense} conflicts with the sign of alpha={alpha}"}
            )


class SolveRequestSerializer(serializers.Serializer):
    """
    Options of the ``solve`` command.

    Static-shift methods (sshopm, es, des) need alpha and reject tau;
    adaptive methods (geap, degeap) need no alpha. gamma is required by es,
    optional (``dynamic``) for des/degeap and rejected otherwise.
    """

    tensor = serializers.CharField()
    method = serializers.ChoiceField(choices=METHOD_CHOICES)
    alpha = AlphaField(required=False, allow_null=True, default=None)
    gamma = GammaField(required=False, allow_null=True, default=None)
    sense = serializers.ChoiceField(choices=SENSE_CHOICES, required=False, allow_null=True, default=None)
    tau = serializers.FloatField(required=False, allow_null=True, default=None)
    tol = serializers.FloatField(required=False, allow_null=True, default=None)
    max_iters = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    start = VectorField(required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(default=0)
    export = serializers.BooleanField(default=False)
    output_dir = serializers.CharField(required=False, allow_null=True, default=None)
    format = serializers.ChoiceField(choices=['table', 'json', 'csv'], default='table')

    def validate_tau(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("tau must be positive")
        return value

    def validate_tol(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("tol must be positive")
        return value

    def validate(self, attrs):
        method = attrs['method']
        gamma = attrs.get('gamma')

        if method in STATIC_SHIFT_METHODS:
            if attrs.get('alpha') is None:
                raise serializers.ValidationError({'alpha': f"{method} needs a static shift --alpha"})
            if attrs.get('tau') is not None:
                raise serializers.ValidationError({'tau': f"{method} uses a static shift; --tau does not apply"})
        else:
            if attrs.get('alpha') is not None:
                raise serializers.ValidationError({'alpha': f"{method} chooses its shift adaptively; drop --alpha"})

        if method in NO_GAMMA_METHODS and gamma is not None:
            raise serializers.ValidationError({'gamma': f"{method} does not extrapolate; --gamma does not apply"})
        if method == Method.ES_SSHOPM.value and gamma in (None, 'dynamic'):
            raise serializers.ValidationError({'gamma': "es needs --gamma as a number or 'opt'"})
        if method in DYNAMIC_GAMMA_METHODS and gamma not in (None, 'dynamic'):
            raise serializers.ValidationError({'gamma': f"{method} chooses gamma dynamically"})

        _check_sense(attrs)
        return attrs


class TrialsRequestSerializer(serializers.Serializer):
    """Options of the ``trials`` command; each flag applies to the methods that use it."""

    tensor = serializers.CharField()
    methods = serializers.ListField(
        child=serializers.ChoiceField(choices=METHOD_CHOICES), required=False, default=list,
    )
    all_methods = serializers.BooleanField(default=False)
    alpha = AlphaField(required=False, allow_null=True, default=None)
    gamma = serializers.FloatField(required=False, allow_null=True, default=None)
    sense = serializers.ChoiceField(choices=SENSE_CHOICES, required=False, allow_null=True, default=None)
    tau = serializers.FloatField(required=False, allow_null=True, default=None)
    tol = serializers.FloatField(required=False, allow_null=True, default=None)
    max_iters = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    trials = serializers.IntegerField(min_value=1, default=1000)
    seed = serializers.IntegerField(default=0)
    workers = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    format = serializers.ChoiceField(choices=['table', 'json'], default='table')

    def validate_gamma(self, value):
        if value is not None and not -1.0 < value <= 0.0:
            raise serializers.ValidationError(f"gamma must lie in (-1, 0], got {value}")
        return value

    def validate_tau(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("tau must be positive")
        return value

    def validate(self, attrs):
        methods = METHOD_CHOICES if attrs['all_methods'] else list(dict.fromkeys(attrs['methods']))
        if not methods:
            raise serializers.ValidationError({'methods': "Give --method at least once or --all-methods"})
        attrs['methods'] = methods

        if set(methods) & STATIC_SHIFT_METHODS and attrs.get('alpha') is None:
            raise serializers.ValidationError({'alpha': "Static-shift methods need --alpha"})
        if not set(methods) & STATIC_SHIFT_METHODS and attrs.get('alpha') is not None:
            raise serializers.ValidationError({'alpha': "--alpha only applies to sshopm, es and des"})
        if Method.ES_SSHOPM.value in methods and attrs.get('gamma') is None:
            raise serializers.ValidationError({'gamma': "es needs a static --gamma"})
        if Method.ES_SSHOPM.value not in methods and attrs.get('gamma') is not None:
            raise serializers.ValidationError({'gamma': "--gamma only applies to es"})
        if not set(methods) & ADAPTIVE_SHIFT_METHODS and attrs.get('tau') is not None:
            raise serializers.ValidationError({'tau': "--tau only applies to geap and degeap"})

        _check_sense(attrs)
        return attrs


class RateRequestSerializer(serializers.Serializer):
    """Options of the ``rate`` command."""

    tensor = serializers.CharField()
    alpha = AlphaField()
    start = VectorField()
    gammas = serializers.ListField(child=serializers.FloatField(), required=False, default=list)
    residual_tol = serializers.FloatField(required=False, default=1e-13)
    max_iters = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(default=0)
    format = serializers.ChoiceField(choices=['table', 'json'], default='table')

    def validate_gammas(self, value):
        for gamma in value:
            if not -1.0 < gamma <= 0.0:
                raise serializers.ValidationError(f"gamma must lie in (-1, 0], got {gamma}")
        return value


class GraphRequestSerializer(serializers.Serializer):
    graph = serializers.CharField()
    output = serializers.CharField()


class EigenpairSerializer(serializers.Serializer):
    lam = serializers.FloatField()
    x = serializers.ListField(child=serializers.FloatField())
    residual = serializers.FloatField()
    classification = serializers.SerializerMethodField()

    def get_classification(self, obj):
        return obj.classification.value if obj.classification is not None else None


class SolveConfigSerializer(serializers.Serializer):
    method = serializers.SerializerMethodField()
    chi = serializers.IntegerField()
    alpha = serializers.SerializerMethodField()
    tau = serializers.SerializerMethodField()
    gamma = serializers.SerializerMethodField()
    tol = serializers.FloatField()
    max_iters = serializers.IntegerField()
    stop_rule = serializers.SerializerMethodField()
    x0 = serializers.ListField(child=serializers.FloatField(), allow_null=True)

    def get_method(self, obj):
        return obj.method.label

    def get_alpha(self, obj):
        return getattr(obj.shift, 'alpha', None)

    def get_tau(self, obj):
        return getattr(obj.shift, 'tau', None)

    def get_gamma(self, obj):
        if obj.gamma is None:
            return None
        return getattr(obj.gamma, 'gamma', 'dynamic')

    def get_stop_rule(self, obj):
        return obj.stop_rule.value


class TraceSummarySerializer(serializers.Serializer):
    method = serializers.SerializerMethodField()
    status = serializers.SerializerMethodField()
    iterations = serializers.IntegerField()
    polish_steps = serializers.IntegerField()

    def get_method(self, obj):
        return obj.method.label

    def get_status(self, obj):
        return obj.status.value if obj.status is not None else None


class RateReportSerializer(serializers.Serializer):
    alpha = serializers.FloatField()
    rho = serializers.FloatField()
    gamma_opt = serializers.FloatField(allow_null=True)
    rho_opt = serializers.FloatField(allow_null=True)
    gamma = serializers.FloatField()
    predicted_rate = serializers.FloatField(allow_null=True)
    measured_rate = serializers.FloatField(allow_null=True)
    oscillatory = serializers.BooleanField()
    status = serializers.SerializerMethodField()
    iterations = serializers.IntegerField(allow_null=True)
    rho_gamma_curve = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))

    def get_status(self, obj):
        return obj.status.value if obj.status is not None else None


class TrialRowSerializer(serializers.Serializer):
    eigenvalue = serializers.FloatField()
    occurrences = serializers.IntegerField()
    median_iterations = serializers.IntegerField(allow_null=True)


class TrialSummarySerializer(serializers.Serializer):
    method = serializers.CharField()
    rows = TrialRowSerializer(many=True)
    total_trials = serializers.IntegerField()
    non_converged = serializers.IntegerField()
    master_seed = serializers.IntegerField()


class RunSerializer(serializers.Serializer):
    """One solver run as written to the JSON sidecar."""

    config = SolveConfigSerializer()
    eigenpair = EigenpairSerializer()
    trace = TraceSummarySerializer()
    rate_report = RateReportSerializer(allow_null=True)
