"""Discretized control problems: finite-difference Poisson (2D/3D) and convection-diffusion."""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Literal

import numpy as np
import scipy.sparse as sp

from .sparse import as_csr, mtx_path, read_mtx, read_vector_mtx, write_mtx, write_vector_mtx

logger = logging.getLogger(__name__)

ProblemKind = Literal["poisson2d", "poisson3d", "convdiff"]

# Control bounds used by the reference experiments.
POISSON_BOUNDS = (-30.0, 30.0)
CONVDIFF_BOUNDS = (-20.0, 20.0)
# The recirculating wind closes its streamlines on this square.
CONVDIFF_DOMAIN = (-1.0, 1.0)
# Amplitude of the default convection-diffusion target relative to the Poisson one.
CONVDIFF_TARGET_AMPLITUDE = 3.0

# Named data profiles for y_d and f; a number means a constant vector.
PROFILES = ("poisson", "convdiff", "zero")
DataSpec = str | float | int


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of interior nodes on the unit square or cube.

    By default a level-l grid has 2**l interior points per side; ``points`` overrides that
    for grids such as the 65 x 65 convection-diffusion mesh.
    """

    dim: int
    level: int
    points: int | None = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.points is None and self.level < 2:
            raise ValueError(f"level must be >= 2, got {self.level}")
        if self.points is not None and self.points < 2:
            raise ValueError(f"points must be >= 2, got {self.points}")

    @classmethod
    def from_points(cls, points: int, dim: int = 2) -> "GridSpec":
        level = int(np.floor(np.log2(points)))
        return cls(dim=dim, level=level, points=points)

    @property
    def m(self) -> int:
        """Interior points per side."""
        return self.points if self.points is not None else 2**self.level

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def n(self) -> int:
        return self.m**self.dim

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Node coordinates (x, y[, z]) flattened in lexicographic order, x fastest."""
        t = self.h * np.arange(1, self.m + 1)
        if self.dim == 2:
            Y, X = np.meshgrid(t, t, indexing="ij")
            return X.ravel(), Y.ravel()
        Z, Y, X = np.meshgrid(t, t, t, indexing="ij")
        return X.ravel(), Y.ravel(), Z.ravel()

    def as_dict(self) -> dict:
        return {"dim": self.dim, "level": self.level, "points": self.points}


Wind = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def recirculating_wind(x, y):
    """w = (2y(1 - x^2), -2x(1 - y^2))."""
    return 2.0 * y * (1.0 - x**2), -2.0 * x * (1.0 - y**2)


def zero_wind(x, y):
    return np.zeros_like(x), np.zeros_like(y)


@dataclass(frozen=True)
class CDConfig:
    """Convection-diffusion parameters. ``delta=None`` means half the mesh size."""

    epsilon: float = 1.0
    wind: Wind = recirculating_wind
    delta: float | None = None
    domain: tuple[float, float] = CONVDIFF_DOMAIN

    def __post_init__(self):
        if not self.domain[0] < self.domain[1]:
            raise ValueError(f"domain must be an interval (lo, hi), got {self.domain}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta is not None and self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Discrete optimality-system data: L y - Mbar u = f, tracking y_d, bounds a < 0 < b."""

    L: sp.csr_matrix
    M: sp.csr_matrix
    Mbar: sp.csr_matrix
    y_d: np.ndarray
    f: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha: float
    beta: float
    c: float
    kind: str = "custom"
    grid: GridSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.L.shape[0]
        for name in ("L", "M", "Mbar"):
            if getattr(self, name).shape != (n, n):
                raise ValueError(f"{name} must be {n} x {n}, got {getattr(self, name).shape}")
        for name in ("y_d", "f", "a", "b"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have length {n}")
        if not (np.all(self.a < 0.0) and np.all(self.b > 0.0)):
            raise ValueError("bounds must satisfy a < 0 < b componentwise")
        offdiag = self.M - sp.diags(self.M.diagonal())
        if offdiag.count_nonzero():
            raise ValueError("M must be diagonal")
        if np.any(self.M.diagonal() <= 0.0):
            raise ValueError("M must have a strictly positive diagonal")
        if not (self.alpha > 0 and self.beta > 0 and self.c > 0):
            raise ValueError("alpha, beta and c must be positive")

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def m_diag(self) -> np.ndarray:
        return self.M.diagonal()

    def with_params(self, alpha=None, beta=None, c=None) -> "ProblemInstance":
        """Copy with new regularization weights; c follows 1/alpha unless given."""
        alpha = self.alpha if alpha is None else alpha
        beta = self.beta if beta is None else beta
        c = 1.0 / alpha if c is None else c
        return replace(self, alpha=alpha, beta=beta, c=c)


def _laplacian_1d(m: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / h**2


def laplacian(grid: GridSpec) -> sp.csr_matrix:
    """5-point (2D) or 7-point (3D) Dirichlet Laplacian on interior nodes, scaled by 1/h^2."""
    T = _laplacian_1d(grid.m, grid.h)
    eye = sp.identity(grid.m)
    if grid.dim == 2:
        A = sp.kron(eye, T) + sp.kron(T, eye)
    else:
        A = (
            sp.kron(eye, sp.kron(eye, T))
            + sp.kron(eye, sp.kron(T, eye))
            + sp.kron(T, sp.kron(eye, eye))
        )
    return as_csr(A)


def desired_state(grid: GridSpec) -> np.ndarray:
    """sin(2 pi x) sin(2 pi y) [sin(2 pi z)] exp(2x) / 6 at the interior nodes."""
    coords = grid.coordinates()
    x = coords[0]
    y_d = np.exp(2.0 * x) / 6.0
    for t in coords:
        y_d = y_d * np.sin(2.0 * np.pi * t)
    return y_d


def make_poisson(
    grid: GridSpec,
    alpha: float,
    beta: float,
    a_val=POISSON_BOUNDS[0],
    b_val=POISSON_BOUNDS[1],
):
    """Poisson control with M = Mbar = I."""
    n = grid.n
    eye = as_csr(sp.identity(n))
    prob = ProblemInstance(
        L=laplacian(grid),
        M=eye,
        Mbar=eye,
        y_d=desired_state(grid),
        f=np.zeros(n),
        a=np.full(n, float(a_val)),
        b=np.full(n, float(b_val)),
        alpha=float(alpha),
        beta=float(beta),
        c=1.0 / alpha,
        kind=f"poisson{grid.dim}d",
        grid=grid,
    )
    logger.debug("built %s n=%d alpha=%g beta=%g", prob.kind, n, alpha, beta)
    return prob


def data_profile(spec: DataSpec, grid: GridSpec) -> np.ndarray:
    """Resolve a named profile from PROFILES, or a number, to a vector on ``grid``."""
    if isinstance(spec, bool):
        raise ValueError(f"unknown data profile {spec!r}")
    if isinstance(spec, (int, float)):
        return np.full(grid.n, float(spec))
    if spec == "poisson":
        return desired_state(grid)
    if spec == "convdiff":
        return CONVDIFF_TARGET_AMPLITUDE * desired_state(grid)
    if spec == "zero":
        return np.zeros(grid.n)
    raise ValueError(f"unknown data profile {spec!r}; expected one of {PROFILES} or a number")


def _convection_matrices(
    grid: GridSpec, wind: Wind, domain: tuple[float, float]
) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """First-order upwind and centered differences of w . grad on the mapped interior nodes."""
    m, n = grid.m, grid.n
    lo, hi = domain
    h = (hi - lo) * grid.h
    x, y = (lo + (hi - lo) * t for t in grid.coordinates())
    w1, w2 = wind(x, y)
    idx = np.arange(n)
    i, j = idx % m, idx // m

    up_rows, up_cols, up_vals = [], [], []
    ce_rows, ce_cols, ce_vals = [], [], []

    for w, pos, stride in ((w1, i, 1), (w2, j, m)):
        has_prev = pos > 0
        has_next = pos < m - 1
        fwd = w > 0
        # upwind: w > 0 uses (y_k - y_{k-1}) / h, w < 0 uses (y_{k+1} - y_k) / h
        up_rows.append(idx)
        up_cols.append(idx)
        up_vals.append(np.abs(w) / h)
        sel = fwd & has_prev
        up_rows.append(idx[sel])
        up_cols.append(idx[sel] - stride)
        up_vals.append(-w[sel] / h)
        sel = ~fwd & has_next
        up_rows.append(idx[sel])
        up_cols.append(idx[sel] + stride)
        up_vals.append(w[sel] / h)
        # centered: w (y_{k+1} - y_{k-1}) / (2h)
        ce_rows.extend([idx[has_next], idx[has_prev]])
        ce_cols.extend([idx[has_next] + stride, idx[has_prev] - stride])
        ce_vals.extend([w[has_next] / (2 * h), -w[has_prev] / (2 * h)])

    upwind = sp.csr_matrix(
        (np.concatenate(up_vals), (np.concatenate(up_rows), np.concatenate(up_cols))), shape=(n, n)
    )
    centered = sp.csr_matrix(
        (np.concatenate(ce_vals), (np.concatenate(ce_rows), np.concatenate(ce_cols))), shape=(n, n)
    )
    return as_csr(upwind), as_csr(centered)


def make_convection_diffusion(
    grid: GridSpec,
    cd: CDConfig,
    alpha: float,
    beta: float,
    a_val=CONVDIFF_BOUNDS[0],
    b_val=CONVDIFF_BOUNDS[1],
    y_d: np.ndarray | None = None,
    f: np.ndarray | None = None,
):
    """Stabilized finite-difference convection-diffusion control on ``cd.domain`` squared.

    With H the mesh size on the domain, every block carries the H^2 weight of a lumped
    finite-element assembly: L = H^2 (-eps Lap_H + upwind(w . grad)), M = H^2 I and
    Mbar = M + delta H^2 C, where C is the centered convection matrix standing in for the
    streamline correction. The default target is the "convdiff" profile and f = 0.
    """
    if grid.dim != 2:
        raise ValueError("convection-diffusion problems are 2D only")
    n = grid.n
    H = (cd.domain[1] - cd.domain[0]) * grid.h
    delta = H / 2.0 if cd.delta is None else cd.delta
    upwind, centered = _convection_matrices(grid, cd.wind, cd.domain)
    stencil = grid.h**2 * laplacian(grid)
    M = as_csr(H**2 * sp.identity(n))
    prob = ProblemInstance(
        L=as_csr(cd.epsilon * stencil + H**2 * upwind),
        M=M,
        Mbar=as_csr(M + delta * H**2 * centered),
        y_d=data_profile("convdiff", grid) if y_d is None else np.asarray(y_d, dtype=np.float64),
        f=np.zeros(n) if f is None else np.asarray(f, dtype=np.float64),
        a=np.full(n, float(a_val)),
        b=np.full(n, float(b_val)),
        alpha=float(alpha),
        beta=float(beta),
        c=1.0 / alpha,
        kind="convdiff",
        grid=grid,
        meta={"epsilon": cd.epsilon, "delta": delta, "domain": list(cd.domain)},
    )
    logger.debug("built convdiff n=%d eps=%g delta=%g", n, cd.epsilon, delta)
    return prob


def make_problem(
    kind: ProblemKind,
    level: int,
    alpha: float,
    beta: float,
    points: int | None = None,
    epsilon: float = 1.0,
    delta: float | None = None,
    y_d: DataSpec | None = None,
    f: DataSpec | None = None,
) -> ProblemInstance:
    """Build a problem by name.

    ``points``, ``epsilon`` and ``delta`` apply to convdiff only. ``y_d`` and ``f`` take a
    profile name or a constant and default to each problem's own data.
    """
    if kind in ("poisson2d", "poisson3d"):
        if points is not None:
            raise ValueError("explicit point counts are only supported for convdiff")
        prob = make_poisson(GridSpec(2 if kind == "poisson2d" else 3, level), alpha, beta)
        if y_d is None and f is None:
            return prob
        return replace(
            prob,
            y_d=prob.y_d if y_d is None else data_profile(y_d, prob.grid),
            f=prob.f if f is None else data_profile(f, prob.grid),
        )
    if kind == "convdiff":
        grid = GridSpec.from_points(points) if points else GridSpec(2, level)
        return make_convection_diffusion(
            grid,
            CDConfig(epsilon=epsilon, delta=delta),
            alpha,
            beta,
            y_d=None if y_d is None else data_profile(y_d, grid),
            f=None if f is None else data_profile(f, grid),
        )
    raise ValueError(f"unknown problem kind {kind!r}")


# Export / import


_MATRICES = ("L", "M", "Mbar")
_VECTORS = ("y_d", "f", "a", "b")


def save_problem(prob: ProblemInstance, directory) -> Path:
    """Write the problem as .mtx files plus manifest.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in _MATRICES:
        write_mtx(mtx_path(directory, name), getattr(prob, name))
    for name in _VECTORS:
        write_vector_mtx(mtx_path(directory, name), getattr(prob, name))
    manifest = {
        "kind": prob.kind,
        "n": prob.n,
        "alpha": prob.alpha,
        "beta": prob.beta,
        "c": prob.c,
        "grid": prob.grid.as_dict() if prob.grid else None,
        "bounds": {"a": float(prob.a.min()), "b": float(prob.b.max())},
        "meta": prob.meta,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    logger.info("exported %s (n=%d) to %s", prob.kind, prob.n, directory)
    return directory


def load_problem(directory) -> ProblemInstance:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    grid = GridSpec(**manifest["grid"]) if manifest.get("grid") else None
    data = {name: read_mtx(mtx_path(directory, name)) for name in _MATRICES}
    data.update({name: read_vector_mtx(mtx_path(directory, name)) for name in _VECTORS})
    return ProblemInstance(
        alpha=manifest["alpha"],
        beta=manifest["beta"],
        c=manifest["c"],
        kind=manifest.get("kind", "custom"),
        grid=grid,
        meta=manifest.get("meta", {}),
        **data,
    )
