"""Experiment configuration: JSON file -> validated ``ExperimentConfig``."""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from django import forms
from django.conf import settings
from django.core.exceptions import ValidationError

from solver.problems import PROFILES

from .models import FORCING_CHOICES, FORMULATION_CHOICES, PRECONDITIONER_CHOICES, PROBLEM_CHOICES

LINEAR_SOLVER_CHOICES = [("krylov", "Preconditioned Krylov"), ("direct", "Sparse LU")]

# Scalar spellings accepted for the list-valued sweep fields.
ALIASES = {
    "alpha": "alphas",
    "beta": "betas",
    "level": "levels",
    "formulation": "formulations",
    "preconditioner": "preconditioners",
    "out": "output_dir",
}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``messages`` holds one line per problem."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


def _as_list(value):
    if value is None:
        return []
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _numbers(value, name, positive=True):
    items = _as_list(value)
    out = []
    for item in items:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ValidationError(f"{name} entries must be numbers, got {item!r}.")
        if positive and not item > 0:
            raise ValidationError(f"{name} entries must be strictly positive, got {item!r}.")
        out.append(float(item))
    return out


def _choices(value, choices, name):
    allowed = {key for key, _ in choices}
    items = _as_list(value)
    for item in items:
        if item not in allowed:
            raise ValidationError(f"{name} entries must be one of {sorted(allowed)}, got {item!r}.")
    return list(dict.fromkeys(items))


def _data_spec(value, name):
    """A named profile or a finite constant; None keeps the problem default."""
    if value is None:
        return None
    message = f"{name} must be one of {list(PROFILES)} or a number, got {value!r}."
    if isinstance(value, str):
        if value not in PROFILES:
            raise ValidationError(message)
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(message)
    return float(value)


class ExperimentConfigForm(forms.Form):
    """Validates one sweep description."""

    name = forms.CharField(max_length=100, required=False)
    problem = forms.ChoiceField(choices=PROBLEM_CHOICES)
    levels = forms.JSONField(required=False)
    points = forms.JSONField(required=False)
    alphas = forms.JSONField()
    betas = forms.JSONField()
    formulations = forms.JSONField(required=False)
    preconditioners = forms.JSONField(required=False)
    forcing = forms.ChoiceField(choices=FORCING_CHOICES, required=False)
    eta0 = forms.JSONField(required=False)
    epsilon = forms.FloatField(required=False)
    delta = forms.FloatField(required=False, min_value=0.0)
    # profile name or number, passed through undecoded
    y_d = forms.Field(required=False)
    f = forms.Field(required=False)
    tau = forms.FloatField(required=False)
    max_iters = forms.IntegerField(required=False, min_value=0)
    krylov_max = forms.IntegerField(required=False, min_value=1)
    linear_solver = forms.ChoiceField(choices=LINEAR_SOLVER_CHOICES, required=False)
    dense_threshold = forms.IntegerField(required=False, min_value=1)
    jobs = forms.IntegerField(required=False, min_value=1)
    all_active = forms.BooleanField(required=False)
    output_dir = forms.CharField(required=False)

    def clean_levels(self):
        levels = _as_list(self.cleaned_data.get("levels"))
        for level in levels:
            if isinstance(level, bool) or not isinstance(level, int) or level < 2:
                raise ValidationError(f"levels must be integers >= 2, got {level!r}.")
        return sorted(set(levels))

    def clean_points(self):
        points = _as_list(self.cleaned_data.get("points"))
        for p in points:
            if isinstance(p, bool) or not isinstance(p, int) or p < 2:
                raise ValidationError(f"points must be integers >= 2, got {p!r}.")
        return sorted(set(points))

    def clean_alphas(self):
        alphas = _numbers(self.cleaned_data.get("alphas"), "alphas")
        if not alphas:
            raise ValidationError("alphas must not be empty.")
        return alphas

    def clean_betas(self):
        betas = _numbers(self.cleaned_data.get("betas"), "betas")
        if not betas:
            raise ValidationError("betas must not be empty.")
        return betas

    def clean_formulations(self):
        value = self.cleaned_data.get("formulations")
        if value in (None, []):
            return ["reduced"]
        return _choices(value, FORMULATION_CHOICES, "formulations")

    def clean_preconditioners(self):
        value = self.cleaned_data.get("preconditioners")
        if value in (None, []):
            return ["ipf"]
        return _choices(value, PRECONDITIONER_CHOICES, "preconditioners")

    def clean_eta0(self):
        etas = _numbers(self.cleaned_data.get("eta0"), "eta0")
        for eta in etas:
            if not eta < 1.0:
                raise ValidationError(f"eta0 entries must lie in (0, 1), got {eta!r}.")
        return etas

    def clean_epsilon(self):
        epsilon = self.cleaned_data.get("epsilon")
        if epsilon is not None and not epsilon > 0:
            raise ValidationError("epsilon must be strictly positive.")
        return epsilon

    def clean_y_d(self):
        return _data_spec(self.cleaned_data.get("y_d"), "y_d")

    def clean_f(self):
        return _data_spec(self.cleaned_data.get("f"), "f")

    def clean_tau(self):
        tau = self.cleaned_data.get("tau")
        if tau is not None and not tau > 0:
            raise ValidationError("tau must be strictly positive.")
        return tau

    def clean(self):
        cleaned = super().clean()
        problem = cleaned.get("problem")
        if problem and not cleaned.get("levels") and not cleaned.get("points"):
            raise ValidationError("give at least one entry in levels or points.")
        if cleaned.get("points") and problem != "convdiff":
            self.add_error("points", "points is only supported for convdiff problems.")
        if problem == "poisson3d" and any(level > 7 for level in cleaned.get("levels") or []):
            self.add_error("levels", "poisson3d levels above 7 do not fit a direct factorization.")
        return cleaned


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    alphas: list[float]
    betas: list[float]
    levels: list[int] = field(default_factory=list)
    points: list[int] = field(default_factory=list)
    name: str = ""
    formulations: list[str] = field(default_factory=lambda: ["reduced"])
    preconditioners: list[str] = field(default_factory=lambda: ["ipf"])
    forcing: str = "exact"
    eta0: list[float] = field(default_factory=list)
    epsilon: float = 1.0
    delta: float | None = None
    y_d: str | float | None = None
    f: str | float | None = None
    tau: float = 1e-6
    max_iters: int = 100
    krylov_max: int = 500
    linear_solver: str = "krylov"
    dense_threshold: int = 4096
    jobs: int = 1
    all_active: bool = False
    output_dir: str = "results"

    @property
    def eta_values(self) -> list[float | None]:
        if self.forcing == "exact":
            return [None]
        return self.eta0 or [0.1]

    @property
    def grids(self) -> list[tuple[int, int | None]]:
        """(level, points) pairs; explicit point counts come after the levels."""
        grids = [(level, None) for level in self.levels]
        grids += [(int(math.floor(math.log2(p))), p) for p in self.points]
        return grids


def build_config(data: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a decoded JSON object; ``overrides`` (command-line flags) win over the file."""
    if not isinstance(data, dict):
        raise ConfigError(["config: top level must be a JSON object"])
    data = {ALIASES.get(key, key): value for key, value in data.items()}
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    form = ExperimentConfigForm(data=data)
    unknown = sorted(set(data) - set(form.fields))
    messages = [f"{key}: unknown field" for key in unknown]
    if not form.is_valid():
        for name, errors in form.errors.items():
            label = "config" if name == "__all__" else name
            messages.extend(f"{label}: {error}" for error in errors)
    if messages:
        raise ConfigError(messages)

    cleaned = {key: value for key, value in form.cleaned_data.items() if value not in (None, "")}
    cleaned.setdefault("dense_threshold", settings.SSN_DENSE_THRESHOLD)
    cleaned.setdefault("output_dir", str(settings.SSN_OUTPUT_DIR))
    cleaned.setdefault("forcing", "exact")
    cleaned.setdefault("linear_solver", "krylov")
    return ExperimentConfig(**cleaned)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from exc
    return build_config(data, overrides)
