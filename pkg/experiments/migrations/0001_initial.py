# Generated by Django 5.0.14 on 2026-10-19 09:12

import django.db.models.deletion
import experiments.models
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True, primary_key=True, serialize=False, verbose_name="ID"
                    ),
                ),
                ("name", models.CharField(blank=True, max_length=100)),
                (
                    "problem",
                    models.CharField(
                        choices=[
                            ("poisson2d", "Poisson 2D"),
                            ("poisson3d", "Poisson 3D"),
                            ("convdiff", "Convection-diffusion"),
                        ],
                        max_length=16,
                    ),
                ),
                (
                    "formulation",
                    models.CharField(
                        choices=[("augmented", "Augmented"), ("reduced", "Reduced")],
                        max_length=16,
                    ),
                ),
                (
                    "preconditioner",
                    models.CharField(
                        choices=[
                            ("bdf", "Block diagonal"),
                            ("ipf", "Indefinite block triangular"),
                        ],
                        max_length=8,
                    ),
                ),
                ("level", models.PositiveSmallIntegerField()),
                ("n", models.PositiveIntegerField()),
                (
                    "alpha",
                    models.FloatField(validators=[experiments.models.validate_positive]),
                ),
                (
                    "beta",
                    models.FloatField(validators=[experiments.models.validate_positive]),
                ),
                (
                    "forcing",
                    models.CharField(
                        choices=[("exact", "Exact"), ("eisenstat_walker", "Eisenstat-Walker")],
                        default="exact",
                        max_length=20,
                    ),
                ),
                ("eta0", models.FloatField(blank=True, null=True)),
                ("li", models.FloatField(default=0.0)),
                ("nli", models.PositiveIntegerField(default=0)),
                ("bt", models.PositiveIntegerField(default=0)),
                (
                    "pct_u0",
                    models.FloatField(
                        default=0.0, validators=[experiments.models.validate_percentage]
                    ),
                ),
                ("cpu", models.FloatField(default=0.0)),
                ("tcpu", models.FloatField(default=0.0)),
                ("converged", models.BooleanField(default=False)),
                ("error", models.TextField(blank=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="NewtonIterationLog",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True, primary_key=True, serialize=False, verbose_name="ID"
                    ),
                ),
                ("index", models.PositiveIntegerField()),
                ("merit", models.FloatField()),
                ("merit_next", models.FloatField()),
                ("theta_norm", models.FloatField()),
                ("eta", models.FloatField()),
                ("krylov_iterations", models.PositiveIntegerField(default=0)),
                ("eta_compliant", models.BooleanField(default=True)),
                ("backtracks", models.PositiveIntegerField(default=0)),
                ("step_length", models.FloatField(default=1.0)),
                ("n_active", models.PositiveIntegerField(default=0)),
                ("n_inactive", models.PositiveIntegerField(default=0)),
                (
                    "pct_zero",
                    models.FloatField(
                        default=0.0, validators=[experiments.models.validate_percentage]
                    ),
                ),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="iterations",
                        to="experiments.experimentrun",
                    ),
                ),
            ],
            options={
                "ordering": ["run", "index"],
                "indexes": [
                    models.Index(fields=["run", "index"], name="experiments_run_id_3b9e1c_idx")
                ],
                "unique_together": {("run", "index")},
            },
        ),
        migrations.AddIndex(
            model_name="experimentrun",
            index=models.Index(
                fields=["problem", "formulation", "preconditioner"],
                name="experiments_problem_8c41d2_idx",
            ),
        ),
        migrations.AddIndex(
            model_name="experimentrun",
            index=models.Index(fields=["created_at"], name="experiments_created_5a7f90_idx"),
        ),
    ]
