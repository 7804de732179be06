"""Persisted experiment runs and their Newton iteration logs."""
from django.core.exceptions import ValidationError
from django.db import models

PROBLEM_CHOICES = [
    ("poisson2d", "Poisson 2D"),
    ("poisson3d", "Poisson 3D"),
    ("convdiff", "Convection-diffusion"),
]
FORMULATION_CHOICES = [("augmented", "Augmented"), ("reduced", "Reduced")]
PRECONDITIONER_CHOICES = [("bdf", "Block diagonal"), ("ipf", "Indefinite block triangular")]
FORCING_CHOICES = [("exact", "Exact"), ("eisenstat_walker", "Eisenstat-Walker")]


def validate_positive(value):
    """Validate that a regularization weight is strictly positive."""
    if value is None or not value > 0:
        raise ValidationError("Must be strictly positive.")


def validate_percentage(value):
    if not 0.0 <= value <= 100.0:
        raise ValidationError("Must be between 0 and 100.")


class ExperimentRun(models.Model):
    """One sweep point: a single Newton solve on one problem instance."""

    name = models.CharField(max_length=100, blank=True)
    problem = models.CharField(max_length=16, choices=PROBLEM_CHOICES)
    formulation = models.CharField(max_length=16, choices=FORMULATION_CHOICES)
    preconditioner = models.CharField(max_length=8, choices=PRECONDITIONER_CHOICES)
    level = models.PositiveSmallIntegerField()
    n = models.PositiveIntegerField()
    alpha = models.FloatField(validators=[validate_positive])
    beta = models.FloatField(validators=[validate_positive])
    forcing = models.CharField(max_length=20, choices=FORCING_CHOICES, default="exact")
    eta0 = models.FloatField(null=True, blank=True)
    li = models.FloatField(default=0.0)
    nli = models.PositiveIntegerField(default=0)
    bt = models.PositiveIntegerField(default=0)
    pct_u0 = models.FloatField(default=0.0, validators=[validate_percentage])
    cpu = models.FloatField(default=0.0)
    tcpu = models.FloatField(default=0.0)
    converged = models.BooleanField(default=False)
    error = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]
        indexes = [
            models.Index(
                fields=["problem", "formulation", "preconditioner"],
                name="experiments_problem_8c41d2_idx",
            ),
            models.Index(fields=["created_at"], name="experiments_created_5a7f90_idx"),
        ]

    def __str__(self):
        status = "converged" if self.converged else "failed"
        return (
            f"{self.problem} {self.formulation}/{self.preconditioner} "
            f"l={self.level} alpha={self.alpha:g} ({status})"
        )

    def clean(self):
        if self.forcing == "eisenstat_walker" and self.eta0 is None:
            raise ValidationError("eta0 is required for Eisenstat-Walker forcing.")
        super().clean()

    def save(self, *args, **kwargs):
        self.full_clean()
        super().save(*args, **kwargs)


class NewtonIterationLog(models.Model):
    """A single Newton iteration of a run."""

    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name="iterations")
    index = models.PositiveIntegerField()
    merit = models.FloatField()
    merit_next = models.FloatField()
    theta_norm = models.FloatField()
    eta = models.FloatField()
    krylov_iterations = models.PositiveIntegerField(default=0)
    eta_compliant = models.BooleanField(default=True)
    backtracks = models.PositiveIntegerField(default=0)
    step_length = models.FloatField(default=1.0)
    n_active = models.PositiveIntegerField(default=0)
    n_inactive = models.PositiveIntegerField(default=0)
    pct_zero = models.FloatField(default=0.0, validators=[validate_percentage])

    class Meta:
        ordering = ["run", "index"]
        unique_together = [["run", "index"]]
        indexes = [
            models.Index(fields=["run", "index"], name="experiments_run_id_3b9e1c_idx"),
        ]

    def __str__(self):
        return f"Iteration {self.index} of run {self.run_id}"

    def clean(self):
        if self.step_length is not None and not 0.0 < self.step_length <= 1.0:
            raise ValidationError("Step length must lie in (0, 1].")
        super().clean()

    def save(self, *args, **kwargs):
        self.full_clean()
        super().save(*args, **kwargs)
