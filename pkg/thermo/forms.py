import math

from django import forms
from django.core.exceptions import ValidationError

from .constitutive import THERMAL_STRESS_KINDS, YIELD_KINDS
from .exceptions import ExpressionError
from .expressions import compile_theta_function, parse_expression
from .integrator import COUPLING_MODES, HEAT_TANGENTS
from .newton import LINEAR_SOLVERS
from .utils import get_material_default

OUTPUT_FORMATS = ("vtk", "csv")


def _choices(values):
    return [(value, value) for value in values]


class TruncationLevelField(forms.FloatField):
    """Positive number or the string 'inf'."""

    def validate(self, value):
        forms.Field.validate(self, value)
        if value in self.empty_values:
            return
        if math.isnan(value) or not value > 0:
            raise ValidationError("must be a positive number or 'inf'", code="invalid")


class VectorField(forms.Field):
    """Fixed-length list of finite numbers."""

    def __init__(self, length=3, integer=False, **kwargs):
        self.length = length
        self.integer = integer
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if not isinstance(value, (list, tuple)) or len(value) != self.length:
            raise ValidationError(f"expected a list of {self.length} numbers", code="invalid")
        try:
            if self.integer:
                if any(isinstance(entry, float) and not entry.is_integer() for entry in value):
                    raise ValueError
                return tuple(int(entry) for entry in value)
            converted = tuple(float(entry) for entry in value)
        except (TypeError, ValueError):
            raise ValidationError(f"expected a list of {self.length} numbers", code="invalid")
        if not all(math.isfinite(entry) for entry in converted):
            raise ValidationError("entries must be finite", code="invalid")
        return converted


class ExpressionDataField(forms.Field):
    """
    Data entry over (x1, x2, x3, t): one expression (or number) per component,
    or {"table": [...]} with one entry per mesh vertex when allow_table is set.
    """

    def __init__(self, components=None, allow_table=False, **kwargs):
        self.components = components
        self.allow_table = allow_table
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return None
        return value

    def _check_expression(self, entry):
        if isinstance(entry, bool) or not isinstance(entry, (str, int, float)):
            raise ValidationError("expected an expression string or a number", code="invalid")
        try:
            parse_expression(entry)
        except ExpressionError as e:
            raise ValidationError(str(e), code="invalid")

    def validate(self, value):
        super().validate(value)
        if value is None:
            return
        if isinstance(value, dict):
            if not self.allow_table or set(value) != {"table"}:
                raise ValidationError("only {\"table\": [...]} is accepted as a mapping here", code="invalid")
            table = value["table"]
            if not isinstance(table, list) or not table:
                raise ValidationError("table must be a non-empty list", code="invalid")
            return
        if self.components is None:
            self._check_expression(value)
            return
        if not isinstance(value, (list, tuple)) or len(value) != self.components:
            raise ValidationError(f"expected a list of {self.components} expressions", code="invalid")
        for entry in value:
            self._check_expression(entry)


class TagListField(forms.Field):
    def to_python(self, value):
        if value in self.empty_values:
            return None
        if not isinstance(value, (list, tuple)) or not all(isinstance(tag, str) for tag in value):
            raise ValidationError("expected a list of boundary tag names", code="invalid")
        return tuple(value)


class ThetaExpressionMixin:
    def clean(self):
        cleaned_data = super().clean()
        if cleaned_data.get("kind") == "expression":
            expression = cleaned_data.get("expression")
            if not expression:
                raise ValidationError({"expression": "kind 'expression' needs an expression in theta"})
            try:
                compile_theta_function(expression)
            except ExpressionError as e:
                raise ValidationError({"expression": str(e)})
        return cleaned_data


class MaterialForm(forms.Form):
    """Elastic moduli, Norton-Hoff exponent and truncation level"""

    mu = forms.FloatField(required=False, help_text="Shear modulus (Pa), must be positive")
    r_exp = forms.FloatField(required=False, help_text="Norton-Hoff exponent r > 1")
    trunc_k = TruncationLevelField(required=False, help_text="Truncation level k, a positive number or 'inf'")

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # 'lambda' is a keyword, so the field cannot be declared as a class attribute
        self.fields["lambda"] = forms.FloatField(required=False, help_text="Lame first parameter (Pa)")

    def clean_mu(self):
        mu = self.cleaned_data.get("mu")
        mu = get_material_default("mu") if mu is None else mu
        if not mu > 0:
            raise ValidationError("shear modulus mu must be positive")
        return mu

    def clean_r_exp(self):
        r_exp = self.cleaned_data.get("r_exp")
        r_exp = get_material_default("r_exp") if r_exp is None else r_exp
        if not r_exp > 1:
            raise ValidationError("Norton-Hoff exponent must satisfy r > 1 (r = 1 is unsupported)")
        return r_exp

    def clean_trunc_k(self):
        trunc_k = self.cleaned_data.get("trunc_k")
        return float(get_material_default("trunc_k")) if trunc_k is None else trunc_k

    def clean(self):
        cleaned_data = super().clean()
        lam = cleaned_data.get("lambda")
        lam = get_material_default("lambda") if lam is None else lam
        cleaned_data["lambda"] = lam
        mu = cleaned_data.get("mu")
        if mu is not None and not 3 * lam + 2 * mu > 0:
            raise ValidationError({"lambda": "moduli must satisfy 3 lambda + 2 mu > 0"})
        return cleaned_data


class ThermalStressForm(ThetaExpressionMixin, forms.Form):
    kind = forms.ChoiceField(choices=_choices(THERMAL_STRESS_KINDS), required=False)
    a = forms.FloatField(required=False, min_value=0.0, help_text="Growth constant a >= 0")
    B = forms.FloatField(required=False, min_value=0.0, help_text="Growth constant B >= 0")
    B_tilde = forms.FloatField(required=False, help_text="Growth constant for theta < 0, positive")
    alpha = forms.FloatField(required=False, help_text="Growth exponent in (1/2, 5/6)")
    expression = forms.CharField(required=False, strip=True, help_text="Custom f(theta)")

    def clean_kind(self):
        return self.cleaned_data.get("kind") or "default"

    def clean_alpha(self):
        alpha = self.cleaned_data.get("alpha")
        alpha = get_material_default("alpha") if alpha is None else alpha
        if not 0.5 < alpha < 5.0 / 6.0:
            raise ValidationError(
                f"alpha = {alpha} violates the growth condition on f, which needs 1/2 < alpha < 5/6"
            )
        return alpha

    def clean_B_tilde(self):
        B_tilde = self.cleaned_data.get("B_tilde")
        B_tilde = get_material_default("B_tilde") if B_tilde is None else B_tilde
        if not B_tilde > 0:
            raise ValidationError("B_tilde must be positive")
        return B_tilde


class YieldForm(ThetaExpressionMixin, forms.Form):
    kind = forms.ChoiceField(choices=_choices(YIELD_KINDS), required=False)
    d = forms.FloatField(required=False, help_text="Upper yield bound d > 0")
    d_tilde = forms.FloatField(required=False, help_text="Lipschitz bound of beta, positive")
    smoothing = forms.FloatField(required=False, help_text="Corner width of the smooth clamp, in (0, d/2]")
    expression = forms.CharField(required=False, strip=True, help_text="Custom beta(theta)")

    def clean_kind(self):
        return self.cleaned_data.get("kind") or get_material_default("beta_kind")

    def clean(self):
        cleaned_data = super().clean()
        d = cleaned_data.get("d")
        d = get_material_default("d") if d is None else d
        d_tilde = cleaned_data.get("d_tilde")
        d_tilde = get_material_default("d_tilde") if d_tilde is None else d_tilde
        if not d > 0:
            raise ValidationError({"d": "yield bound d must be positive"})
        if not d_tilde > 0:
            raise ValidationError({"d_tilde": "Lipschitz bound d_tilde must be positive"})
        smoothing = cleaned_data.get("smoothing")
        if smoothing is None:
            smoothing = get_material_default("smoothing_fraction") * d
        if cleaned_data.get("kind") == "smooth_clamp" and not 0 < smoothing <= d / 2:
            raise ValidationError({"smoothing": f"smoothing must lie in (0, d/2] = (0, {d / 2:g}]"})
        cleaned_data.update(d=d, d_tilde=d_tilde, smoothing=smoothing)
        return cleaned_data


class MeshForm(forms.Form):
    """Either a box (extent + resolution) or a mesh file"""

    extent = VectorField(required=False, help_text="Box edge lengths")
    resolution = VectorField(integer=True, required=False, help_text="Cells per axis")
    origin = VectorField(required=False, help_text="Lower box corner")
    file = forms.CharField(required=False, help_text="Path of a plain-text mesh file")
    dirichlet_tags = TagListField(required=False, help_text="Displacement-constrained boundary tags")
    neumann_tags = TagListField(required=False, help_text="Heat-flux boundary tags")

    def clean_extent(self):
        extent = self.cleaned_data.get("extent")
        if extent is not None and min(extent) <= 0:
            raise ValidationError("box extent must be positive")
        return extent

    def clean_resolution(self):
        resolution = self.cleaned_data.get("resolution")
        if resolution is not None and min(resolution) < 1:
            raise ValidationError("box resolution must be at least 1 per axis")
        return resolution

    def clean(self):
        cleaned_data = super().clean()
        has_box = cleaned_data.get("extent") is not None or cleaned_data.get("resolution") is not None
        if cleaned_data.get("file"):
            if has_box:
                raise ValidationError({"file": "give either a mesh file or a box, not both"})
        elif cleaned_data.get("extent") is None:
            raise ValidationError({"extent": "box extent is required when no mesh file is given"})
        elif cleaned_data.get("resolution") is None:
            raise ValidationError({"resolution": "box resolution is required when no mesh file is given"})
        if cleaned_data.get("origin") is None:
            cleaned_data["origin"] = (0.0, 0.0, 0.0)
        return cleaned_data


class DataForm(forms.Form):
    body_force = ExpressionDataField(components=3, required=False)
    g_D = ExpressionDataField(components=3, required=False)
    g_theta = ExpressionDataField(required=False)
    heat_source = ExpressionDataField(required=False)
    u0 = ExpressionDataField(components=3, allow_table=True, required=False)
    T0 = ExpressionDataField(components=6, required=False)
    theta0 = ExpressionDataField(allow_table=True, required=False)
    exact = forms.Field(required=False, help_text="Manufactured solution {'u': [...], 'theta': ...}")

    def clean_exact(self):
        exact = self.cleaned_data.get("exact")
        if exact in (None, "", {}):
            return None
        if not isinstance(exact, dict) or set(exact) != {"u", "theta"}:
            raise ValidationError("exact must be a mapping with keys 'u' and 'theta'")
        ExpressionDataField(components=3).validate(exact["u"])
        ExpressionDataField().validate(exact["theta"])
        return exact


class SolverForm(forms.Form):
    dt = forms.FloatField(help_text="Time step")
    t_end = forms.FloatField(help_text="Final time")
    newton_tol = forms.FloatField(required=False)
    newton_max_iter = forms.IntegerField(required=False, min_value=1)
    outer_coupling = forms.ChoiceField(choices=_choices(COUPLING_MODES), required=False)
    fixed_point_tol = forms.FloatField(required=False)
    fixed_point_max_iter = forms.IntegerField(required=False, min_value=1)
    linear_solver = forms.ChoiceField(choices=_choices(LINEAR_SOLVERS), required=False)
    linear_tol = forms.FloatField(required=False)
    heat_tangent = forms.ChoiceField(choices=_choices(HEAT_TANGENTS), required=False)
    audit_level = TruncationLevelField(required=False, help_text="Truncation level of the audit test function")
    audit_tol = forms.FloatField(required=False)

    def clean_dt(self):
        dt = self.cleaned_data["dt"]
        if not dt > 0:
            raise ValidationError("time step must be positive")
        return dt

    def clean(self):
        cleaned_data = super().clean()
        dt, t_end = cleaned_data.get("dt"), cleaned_data.get("t_end")
        if dt is not None and t_end is not None and not t_end >= dt * (1.0 - 1e-12):
            raise ValidationError({"t_end": "final time must be at least one time step"})
        for name in ("newton_tol", "fixed_point_tol", "linear_tol", "audit_tol"):
            value = cleaned_data.get(name)
            if value is not None and not value > 0:
                raise ValidationError({name: "tolerance must be positive"})
        return cleaned_data


class OutputForm(forms.Form):
    directory = forms.CharField(required=False, help_text="Output directory")
    snapshot_stride = forms.IntegerField(required=False, min_value=1, help_text="Keep every n-th step")
    formats = forms.Field(required=False, help_text="Subset of ['vtk', 'csv']")

    def clean_formats(self):
        formats = self.cleaned_data.get("formats")
        if formats in (None, ""):
            return OUTPUT_FORMATS
        if not isinstance(formats, list) or not set(formats) <= set(OUTPUT_FORMATS):
            raise ValidationError(f"formats must be a list drawn from {list(OUTPUT_FORMATS)}")
        return tuple(fmt for fmt in OUTPUT_FORMATS if fmt in formats)


class MaterialPointForm(forms.Form):
    """0D path: strain and temperature tabulated at increasing times"""

    dt = forms.FloatField(help_text="Integration step")
    times = forms.Field(help_text="Increasing path times")
    strains = forms.Field(help_text="Total strain (6 components) per path time")
    temperatures = forms.Field(help_text="Temperature per path time")
    initial_stress = VectorField(length=6, required=False)

    def clean_dt(self):
        dt = self.cleaned_data["dt"]
        if not dt > 0:
            raise ValidationError("time step must be positive")
        return dt

    def clean(self):
        cleaned_data = super().clean()
        times = cleaned_data.get("times")
        strains = cleaned_data.get("strains")
        temperatures = cleaned_data.get("temperatures")
        if times is None or strains is None or temperatures is None:
            return cleaned_data
        try:
            times = [float(value) for value in times]
            temperatures = [float(value) for value in temperatures]
            strains = [[float(entry) for entry in row] for row in strains]
        except (TypeError, ValueError):
            raise ValidationError("path tables must hold numbers")
        if len(times) < 2 or any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError({"times": "need at least two strictly increasing times"})
        if len(temperatures) != len(times):
            raise ValidationError({"temperatures": "one temperature per path time is required"})
        if len(strains) != len(times) or any(len(row) != 6 for row in strains):
            raise ValidationError({"strains": "one 6-component strain per path time is required"})
        cleaned_data.update(times=times, strains=strains, temperatures=temperatures)
        return cleaned_data
