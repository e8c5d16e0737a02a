"""Data models for blow-up scenarios, similarity frames, fits and verdicts."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from blowuplab.exceptions import DomainError, ScenarioError

FloatArray = NDArray[np.float64]
BoolArray = NDArray[np.bool_]


# ─── Model parameters ────────────────────────────────────────────────

@dataclass(frozen=True)
class Params:
    """Exponent p and space dimension N of the radial equation.

    The exponent must be superlinear and, for N ≥ 2, conformally subcritical:
    p ≤ 1 + 4/(N−1).
    """

    p: float
    N: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.p) or self.p <= 1.0:
            raise DomainError("Params", f"exponent p must be > 1, got {self.p}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError("Params", f"dimension N must be an integer >= 1, got {self.N}")
        if self.N >= 2 and self.p > 1.0 + 4.0 / (self.N - 1) + 1e-12:
            raise DomainError(
                "Params",
                f"p={self.p} exceeds the conformal exponent 1 + 4/(N-1) for N={self.N}",
            )

    @property
    def alpha(self) -> float:
        """Similarity exponent 2/(p−1)."""
        return 2.0 / (self.p - 1.0)

    @property
    def mass_coeff(self) -> float:
        """Coefficient 2(p+1)/(p−1)² of the linear term in similarity variables."""
        return 2.0 * (self.p + 1.0) / (self.p - 1.0) ** 2

    @property
    def kappa0(self) -> float:
        """Constant soliton value (2(p+1)/(p−1)²)^{1/(p−1)}."""
        return self.mass_coeff ** (1.0 / (self.p - 1.0))

    def to_dict(self) -> dict[str, float | int]:
        return {"p": self.p, "N": int(self.N)}


@dataclass(frozen=True)
class SolitonParams:
    """Sign, velocity and shift of one (possibly distorted) soliton."""

    theta: int
    d: float
    nu: float = 0.0

    def __post_init__(self) -> None:
        if self.theta not in (-1, 1):
            raise DomainError("SolitonParams", f"theta must be +1 or -1, got {self.theta}")
        if not abs(self.d) < 1.0:
            raise DomainError("SolitonParams", f"|d| must be < 1, got {self.d}")
        if self.nu < -(1.0 - abs(self.d)):
            raise DomainError(
                "SolitonParams", f"nu={self.nu} below the admissible bound -(1-|d|)"
            )

    @property
    def xi(self) -> float:
        """Hyperbolic angle argth d."""
        return math.atanh(self.d)


# ─── Similarity frames ───────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class SimilarityFrame:
    """Samples of (w, ∂ₛw, ∂ᵧw) on a y-grid at similarity time s around r0.

    ``weights`` optionally carries quadrature weights matched to ``y``
    (Gauss–Legendre for closed-form oracles); when absent, integrals use the
    composite trapezoid rule on the grid.
    """

    params: Params
    r0: float
    s: float
    y: FloatArray
    w: FloatArray
    ws: FloatArray
    wy: FloatArray
    weights: FloatArray | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1:
            raise DomainError("SimilarityFrame", "grid must be one-dimensional")
        if y.size and (np.any(np.diff(y) <= 0.0) or y[0] <= -1.0 or y[-1] >= 1.0):
            raise DomainError(
                "SimilarityFrame", "grid must be strictly increasing inside (-1, 1)"
            )
        for name in ("w", "ws", "wy"):
            if np.shape(getattr(self, name)) != y.shape:
                raise DomainError("SimilarityFrame", f"'{name}' does not match the grid length")
        if self.weights is not None and np.shape(self.weights) != y.shape:
            raise DomainError("SimilarityFrame", "quadrature weights do not match the grid")
        if not self.r0 > 0.0:
            raise DomainError("SimilarityFrame", f"center r0 must be > 0, got {self.r0}")

    def with_fields(
        self,
        w: FloatArray | None = None,
        ws: FloatArray | None = None,
        wy: FloatArray | None = None,
    ) -> SimilarityFrame:
        """Return a frame on the same grid with some fields replaced."""
        return SimilarityFrame(
            params=self.params,
            r0=self.r0,
            s=self.s,
            y=self.y,
            w=self.w if w is None else w,
            ws=self.ws if ws is None else ws,
            wy=self.wy if wy is None else wy,
            weights=self.weights,
        )

    def scaled(self, factor: float) -> SimilarityFrame:
        return self.with_fields(self.w * factor, self.ws * factor, self.wy * factor)

    def minus(self, other: SimilarityFrame) -> SimilarityFrame:
        """Field-wise difference, used for 𝓗-distances between states."""
        if other.y.shape != self.y.shape or not np.allclose(other.y, self.y):
            raise DomainError("SimilarityFrame", "frames live on different grids")
        return self.with_fields(self.w - other.w, self.ws - other.ws, self.wy - other.wy)


# ─── Solver types ────────────────────────────────────────────────────

@dataclass(frozen=True)
class Scenario:
    """Radial domain, grid, initial data generator and stop rules of one simulation."""

    params: Params
    r_max: float
    n_cells: int
    generator: str
    generator_params: Mapping[str, Any] = field(default_factory=dict)
    cfl: float = 0.45
    dt: float | None = None
    amplitude_ceiling: float = 1.0e6
    max_time: float = 10.0
    max_steps: int = 2_000_000
    blowup_safety: float = 0.1
    snapshot_interval: float | None = None
    trace_fraction: float = 0.1

    def __post_init__(self) -> None:
        if not self.r_max > 0.0:
            raise ScenarioError(f"R_max must be > 0, got {self.r_max}")
        if self.n_cells < 2:
            raise ScenarioError(f"grid needs at least 2 cells, got {self.n_cells}")
        if not 0.0 < self.cfl <= 1.0:
            raise ScenarioError(f"CFL factor must lie in (0, 1], got {self.cfl}")
        if not self.amplitude_ceiling > 0.0:
            raise ScenarioError("amplitude ceiling M must be > 0")
        if not self.max_time > 0.0 or self.max_steps < 1:
            raise ScenarioError("max time and max steps must be positive")
        if not 0.0 < self.blowup_safety <= 1.0:
            raise ScenarioError("blow-up step safety factor must lie in (0, 1]")

    @property
    def h(self) -> float:
        """Radial grid spacing."""
        return self.r_max / self.n_cells

    @property
    def r(self) -> FloatArray:
        return np.linspace(0.0, self.r_max, self.n_cells + 1)

    @property
    def base_dt(self) -> float:
        return self.dt if self.dt is not None else self.cfl * self.h

    @property
    def snapshot_every(self) -> float:
        return self.snapshot_interval if self.snapshot_interval is not None else self.base_dt

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "r_max": self.r_max,
            "n_cells": self.n_cells,
            "generator": self.generator,
            "generator_params": dict(self.generator_params),
            "cfl": self.cfl,
            "dt": self.dt,
            "amplitude_ceiling": self.amplitude_ceiling,
            "max_time": self.max_time,
            "max_steps": self.max_steps,
            "blowup_safety": self.blowup_safety,
            "snapshot_interval": self.snapshot_interval,
            "trace_fraction": self.trace_fraction,
        }


@dataclass(frozen=True, eq=False)
class FieldState:
    """Solution (u, ∂ₜu) on the radial grid at time t, with the alive mask.

    Dead nodes hold NaN in ``u`` and ``v``, so any stencil that read one would
    poison its result. ``death_time`` is NaN on alive nodes, ``death_amplitude``
    keeps |u| at the step an amplitude death happened, and ``deadline`` is the
    latest time a node may stay alive given the deaths seen so far.
    """

    t: float
    r: FloatArray
    u: FloatArray
    v: FloatArray
    alive: BoolArray
    death_time: FloatArray
    deadline: FloatArray
    death_cause: NDArray[np.int8]
    death_amplitude: FloatArray
    steps: int = 0

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def all_dead(self) -> bool:
        return not bool(np.any(self.alive))


@dataclass(frozen=True, eq=False)
class SolutionHistory:
    """Immutable space-time record of one simulation.

    Snapshot rows hold NaN at nodes that were dead at that time. ``traces`` maps a
    node index to its dense (t, |u|) record once |u| passed the trace threshold.
    """

    params: Params
    r: FloatArray
    times: FloatArray
    u: FloatArray
    v: FloatArray
    ur: FloatArray
    alive: BoolArray
    traces: Mapping[int, tuple[FloatArray, FloatArray]]
    death_time: FloatArray
    death_cause: tuple[str, ...]
    final_time: float
    stop_reason: str

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def blew_up(self) -> bool:
        return bool(np.any(np.isfinite(self.death_time)))


@dataclass(frozen=True, eq=False)
class BlowupCurve:
    """Sampled blow-up curve T(r) with slopes and the 1-Lipschitz certificate."""

    r: FloatArray
    T: FloatArray
    dT: FloatArray
    residual: FloatArray
    method: tuple[str, ...]
    h: float
    lipschitz_excess: float

    @property
    def lipschitz_ok(self) -> bool:
        return self.lipschitz_excess <= 0.0

    def value_at(self, r0: float) -> float:
        return float(np.interp(r0, self.r, self.T))

    def slope_at(self, r0: float) -> float:
        return float(np.interp(r0, self.r, self.dT))

    def index_of(self, r0: float) -> int:
        return int(np.argmin(np.abs(self.r - r0)))

    def to_rows(self) -> list[dict[str, str]]:
        return [
            {
                "r": f"{r:.17g}",
                "T": f"{t:.17g}",
                "dT": f"{dt:.17g}",
                "fit_residual": f"{res:.17g}",
                "method": method,
            }
            for r, t, dt, res, method in zip(self.r, self.T, self.dT, self.residual, self.method)
        ]


# ─── Similarity diagnostics ──────────────────────────────────────────

@dataclass(frozen=True)
class MonotonicityReport:
    """Outcome of the Lyapunov checks on one trace.

    Violations are split between the first and second half of the s-range so
    that transient early-s behavior can be told apart from late-s failures.
    """

    h_nonincreasing: bool
    inequality_holds: bool
    max_h_increase: float
    max_inequality_violation: float
    tolerance: float
    early_violations: int
    late_violations: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "h_nonincreasing": self.h_nonincreasing,
            "inequality_holds": self.inequality_holds,
            "max_h_increase": self.max_h_increase,
            "max_inequality_violation": self.max_inequality_violation,
            "tolerance": self.tolerance,
            "early_violations": self.early_violations,
            "late_violations": self.late_violations,
        }


@dataclass(frozen=True, eq=False)
class LyapunovTrace:
    """E, F, H, dF/ds and dissipation along a range of similarity times."""

    r0: float
    gamma: float
    s: FloatArray
    E: FloatArray
    F: FloatArray
    H: FloatArray
    dFds: FloatArray
    dissipation: FloatArray
    w_norm: FloatArray
    ws_norm: FloatArray
    report: MonotonicityReport

    def __post_init__(self) -> None:
        if self.s.size > 1 and np.any(np.diff(self.s) <= 0.0):
            raise DomainError("LyapunovTrace", "similarity times must be strictly increasing")
        for name in ("E", "F", "H", "dFds", "dissipation"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DomainError("LyapunovTrace", f"non-finite values in '{name}'")

    def __len__(self) -> int:
        return int(self.s.size)

    def to_rows(self) -> list[dict[str, str]]:
        return [
            {
                "s": f"{s:.17g}",
                "E": f"{e:.17g}",
                "F": f"{f:.17g}",
                "H": f"{h:.17g}",
                "dFds": f"{dfds:.17g}",
                "dissipation": f"{dis:.17g}",
            }
            for s, e, f, h, dfds, dis in zip(
                self.s, self.E, self.F, self.H, self.dFds, self.dissipation
            )
        ]


@dataclass(frozen=True)
class BoundednessReport:
    """Supremum of the weighted frame densities over an r-interval and s-range."""

    supremum: float
    first: float
    last: float
    growth_factor: float
    diverging: bool
    samples: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "supremum": self.supremum,
            "first": self.first,
            "last": self.last,
            "growth_factor": self.growth_factor,
            "diverging": self.diverging,
            "samples": self.samples,
        }


# ─── Soliton fits ────────────────────────────────────────────────────

@dataclass(frozen=True)
class SolitonFit:
    """Best single soliton θκ(d) for one frame."""

    theta: int
    d: float
    residual: float
    converged: bool
    s: float = math.nan

    @property
    def xi(self) -> float:
        return math.atanh(self.d)

    def to_dict(self) -> dict[str, Any]:
        return {
            "s": self.s,
            "theta": self.theta,
            "d": self.d,
            "residual": self.residual,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class MultiSolitonFit:
    """Alternating sum of k distorted solitons with signs e1·(−1)^{i+1}."""

    k: int
    e1: int
    zetas: tuple[float, ...]
    nus: tuple[float, ...]
    residual: float
    converged: bool
    degenerate: bool = False
    iterations: int = 0
    s: float = math.nan
    signs: tuple[int, ...] | None = None

    @property
    def ds(self) -> tuple[float, ...]:
        return tuple(-math.tanh(z) for z in self.zetas)

    @property
    def sign_pattern(self) -> tuple[int, ...]:
        if self.signs is not None:
            return self.signs
        return tuple(self.e1 * (-1) ** i for i in range(self.k))

    def to_row(self, k_max: int) -> dict[str, str]:
        row = {
            "s": f"{self.s:.17g}",
            "k": str(self.k),
            "e1": str(self.e1),
            "residual": f"{self.residual:.17g}",
            "converged": str(self.converged).lower(),
            "degenerate": str(self.degenerate).lower(),
        }
        for i in range(k_max):
            row[f"zeta{i + 1}"] = f"{self.zetas[i]:.17g}" if i < self.k else ""
            row[f"nu{i + 1}"] = f"{self.nus[i]:.17g}" if i < self.k else ""
        return row


@dataclass(frozen=True)
class KSelection:
    """Soliton count chosen for a frame with every candidate's residual.

    ``accepted`` is False when no k met the threshold and ``k`` is only the
    most economical near-best fit.
    """

    k: int
    fits: tuple[MultiSolitonFit | None, ...]
    residuals: tuple[float, ...]
    frame_norm: float
    threshold: float
    accepted: bool = True

    @property
    def best(self) -> MultiSolitonFit | None:
        return self.fits[self.k] if self.k < len(self.fits) else None


@dataclass(frozen=True)
class ZetaTraceReport:
    """Regression of fitted hyperbolic angles ζᵢ(s) against log s."""

    k: int
    status: str
    slopes: tuple[float, ...] = ()
    predicted: tuple[float, ...] = ()
    gaps_nondecreasing: bool = False
    gap_growth: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "status": self.status,
            "slopes": list(self.slopes),
            "predicted": list(self.predicted),
            "gaps_nondecreasing": self.gaps_nondecreasing,
            "gap_growth": self.gap_growth,
        }


# ─── Classification ──────────────────────────────────────────────────

class Verdict(Enum):
    """Classification of one blow-up point."""

    NON_CHARACTERISTIC = "non-characteristic"
    CHARACTERISTIC_CANDIDATE = "characteristic-candidate"
    UNDETERMINED = "undetermined"


class Outcome(Enum):
    """Result of one evidence test."""

    PASS = "pass"
    FAIL = "fail"
    UNDETERMINED = "undetermined"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class EnergyCriterion:
    outcome: Outcome
    margin: float = math.nan
    last_energy: float = math.nan
    threshold: float = math.nan
    lower_bound_ok: bool | None = None
    c3: float = math.nan


@dataclass(frozen=True)
class ConeTest:
    """Smallest slope δ₀ on the test grid for which the curve stays above the cone.

    ``corner`` marks a symmetric secant slope that stays large down to the
    nearest cells and shrinks with the gap; such a point fails the test even
    when some δ₀ fits the window.
    """

    passed: bool
    delta0: float | None
    one_sided: bool = False
    window: float = math.nan
    corner: bool = False
    secant: float = math.nan


@dataclass(frozen=True)
class SlopeMatch:
    applicable: bool
    mismatch: float = math.nan


@dataclass(frozen=True)
class ConvergenceRate:
    mu: float
    r_squared: float
    decaying: bool
    samples: int


@dataclass(frozen=True)
class CornerFit:
    """Logarithmic corner exponents on each side of a candidate point."""

    beta_left: float
    beta_right: float
    beta_predicted: float
    c_left: float
    c_right: float
    beta_left_derivative: float
    beta_right_derivative: float
    stderr: float
    degenerate: bool


@dataclass(frozen=True)
class SpeedTrace:
    slope: float
    predicted: float
    intercept: float
    r_squared: float
    samples: int


@dataclass(frozen=True)
class Evidence:
    """Everything the aggregation rule may look at for one point."""

    r0: float
    on_axis: bool = False
    sign_constant: bool = False
    k: int | None = None
    energy: EnergyCriterion | None = None
    cone: ConeTest | None = None
    slope: SlopeMatch | None = None
    rate: ConvergenceRate | None = None
    corner: CornerFit | None = None
    speed: SpeedTrace | None = None
    slope_tolerance: float = 0.05


@dataclass(frozen=True)
class PointClassification:
    r0: float
    verdict: Verdict
    k: int | None
    evidence: Evidence
    passed_tests: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        evidence = asdict(self.evidence)
        for value in evidence.values():
            if isinstance(value, dict) and "outcome" in value:
                value["outcome"] = value["outcome"].value
        return {
            "r0": self.r0,
            "verdict": self.verdict.value,
            "k": self.k,
            "passed_tests": list(self.passed_tests),
            "evidence": evidence,
        }


@dataclass(frozen=True)
class GlobalChecks:
    open_set: bool
    isolated_candidates: bool
    forward_light_cone: bool | None
    violations: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "open_set": self.open_set,
            "isolated_candidates": self.isolated_candidates,
            "forward_light_cone": self.forward_light_cone,
            "violations": list(self.violations),
        }


# ─── Run configuration ───────────────────────────────────────────────

@dataclass(frozen=True)
class AnalysisSettings:
    """Frame, fit and classification settings shared by every probe."""

    n_y: int = 201
    eta: float = 1.0e-3
    s_samples: int = 12
    s_start_offset: float = 1.0
    s_end_offset: float = 1.0
    min_frame_cells: int = 8
    k_max: int = 4
    k_threshold: float = 0.05
    slope_tolerance: float = 0.05
    r2_threshold: float = 0.9
    c3_safety: float = 2.0
    growth_factor: float = 10.0
    cone_window: float = 0.2
    gamma: float | None = None
    analyze_peaks: bool = True

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SweepSettings:
    """Optional long-running sweeps (trapping in ε, stability under perturbation)."""

    kind: str
    epsilons: tuple[float, ...]
    r0: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "epsilons": list(self.epsilons), "r0": self.r0}


@dataclass(frozen=True)
class RunConfig:
    """A complete, validated run description loaded from YAML."""

    name: str
    scenario: Scenario
    probes: tuple[float, ...]
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    snapshot_format: str = "none"
    output_dir: Path | None = None
    seed: int = 0
    sweep: SweepSettings | None = None
    source_path: Path | None = None

    @property
    def params(self) -> Params:
        return self.scenario.params

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "scenario": self.scenario.to_dict(),
            "probes": list(self.probes),
            "analysis": self.analysis.to_dict(),
            "snapshot_format": self.snapshot_format,
            "seed": self.seed,
            "sweep": self.sweep.to_dict() if self.sweep else None,
        }


# ─── Pipeline results ────────────────────────────────────────────────

@dataclass(frozen=True)
class ProbeResult:
    """Everything computed for one probe radius; ``error`` is set when a stage failed."""

    r0: float
    classification: PointClassification | None = None
    trace: LyapunovTrace | None = None
    single_fits: tuple[SolitonFit, ...] = ()
    multi_fits: tuple[MultiSolitonFit, ...] = ()
    selection: KSelection | None = None
    zeta: ZetaTraceReport | None = None
    corner: CornerFit | None = None
    boundedness: BoundednessReport | None = None
    notes: tuple[str, ...] = ()
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.classification is not None


@dataclass(frozen=True)
class PipelineResult:
    """Outcome of one pipeline run and where its bundle was written."""

    config: RunConfig
    bundle_dir: Path
    history: SolutionHistory | None
    curve: BlowupCurve | None
    probes: tuple[ProbeResult, ...]
    checks: GlobalChecks | None
    errors: tuple[dict[str, str], ...]
    manifest_path: Path | None = None

    @property
    def blew_up(self) -> bool:
        return self.curve is not None

    @property
    def classifications(self) -> tuple[PointClassification, ...]:
        return tuple(p.classification for p in self.probes if p.classification is not None)

    @property
    def exit_code(self) -> int:
        return 2 if self.errors else 0


@dataclass(frozen=True)
class SweepPoint:
    """One member of an ε-sweep."""

    epsilon: float
    blowup_time: float
    d_fit: float
    drift: float
    candidates: tuple[float, ...] = ()
    error: str | None = None

    def to_row(self) -> dict[str, str]:
        return {
            "epsilon": f"{self.epsilon:.17g}",
            "blowup_time": f"{self.blowup_time:.17g}",
            "d_fit": f"{self.d_fit:.17g}",
            "drift": f"{self.drift:.17g}",
            "candidates": " ".join(f"{c:.17g}" for c in self.candidates),
            "error": self.error or "",
        }


@dataclass(frozen=True)
class SweepResult:
    """Trapping or stability sweep with its acceptance flag."""

    kind: str
    points: tuple[SweepPoint, ...]
    accepted: bool
    detail: str
    bundle_dir: Path | None = None
