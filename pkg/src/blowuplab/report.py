"""Terminal reports for pipeline runs and sweeps."""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from blowuplab.models import PipelineResult, ProbeResult, SweepResult, Verdict

_VERDICT_ICONS = {
    Verdict.NON_CHARACTERISTIC: "✅",
    Verdict.CHARACTERISTIC_CANDIDATE: "📍",
    Verdict.UNDETERMINED: "❓",
}


def print_classification_report(result: PipelineResult) -> None:
    """Print a formatted classification report to the terminal.

    Shows the blow-up curve range, one line per probe and the scenario-wide
    geometry checks.

    Args:
        result: Outcome of one pipeline run.
    """
    print("\n" + "=" * 70)
    print(f"  Blow-up Lab — Classification Report: {result.config.name}")
    print("=" * 70)

    if result.curve is None:
        if result.history is None:
            print("\n  ❌ The solver did not finish; no curve was produced.")
        else:
            print("\n  ℹ️  No blow-up: every node stayed below the amplitude ceiling.")
        _print_errors(result)
        print("=" * 70)
        return

    curve = result.curve
    t_min, t_max = float(np.nanmin(curve.T)), float(np.nanmax(curve.T))
    print(f"\n  📈 T(r) in [{_fmt(t_min)}, {_fmt(t_max)}]")
    lipschitz = "yes" if curve.lipschitz_ok else f"no (excess {curve.lipschitz_excess:.3g})"
    print(f"     1-Lipschitz: {lipschitz}")

    if result.probes:
        print(f"\n  {'─' * 50}")
        print("  🔬 PROBES")
        for probe in result.probes:
            _print_probe(probe)
        _print_verdict_counts(result)

    checks = result.checks
    if checks is not None:
        print(f"\n  {'─' * 50}")
        print("  🧭 GLOBAL CHECKS")
        print(f"     Non-characteristic set open: {_yes_no(checks.open_set)}")
        print(f"     Candidates isolated:         {_yes_no(checks.isolated_candidates)}")
        cone = "n/a" if checks.forward_light_cone is None else _yes_no(checks.forward_light_cone)
        print(f"     T(r) < T(0) + r:             {cone}")
        for violation in checks.violations:
            print(f"     ⚠️  {violation}")

    _print_errors(result)
    print("=" * 70)


def _print_probe(probe: ProbeResult) -> None:
    if probe.classification is None:
        print(f"     ❌ r0={probe.r0:<8g} failed: {probe.error}")
        return
    c = probe.classification
    icon = _VERDICT_ICONS[c.verdict]
    k = "-" if c.k is None else str(c.k)
    tests = ", ".join(c.passed_tests) or "none"
    print(f"     {icon} r0={probe.r0:<8g} {c.verdict.value:<25} k={k:<2} passed: {tests}")


def _print_verdict_counts(result: PipelineResult) -> None:
    counts = Counter(c.verdict for c in result.classifications)
    failed = sum(1 for p in result.probes if p.classification is None)
    print(f"\n  {'─' * 50}")
    print("  📊 OVERALL")
    print(f"     Probes:                {len(result.probes)}")
    print(f"     ✅ Non-characteristic: {counts[Verdict.NON_CHARACTERISTIC]}")
    print(f"     📍 Candidates:         {counts[Verdict.CHARACTERISTIC_CANDIDATE]}")
    print(f"     ❓ Undetermined:       {counts[Verdict.UNDETERMINED]}")
    if failed:
        print(f"     ❌ Failed:             {failed}")


def _print_errors(result: PipelineResult) -> None:
    if not result.errors:
        return
    print(f"\n  {'─' * 50}")
    print(f"  ⚠️  {len(result.errors)} stage error(s), see manifest.json")
    for error in result.errors:
        print(f"     {error['stage']}: {error['reason']}")


def print_sweep_report(result: SweepResult) -> None:
    """Print one line per sweep member and the acceptance flag."""
    print("\n" + "=" * 70)
    print(f"  Blow-up Lab — {result.kind.capitalize()} Sweep")
    print("=" * 70)
    for point in result.points:
        if point.error:
            print(f"  ❌ eps={point.epsilon:<8g} {point.error}")
        elif result.kind == "trapping":
            print(
                f"  🔁 eps={point.epsilon:<8g} d_fit={_fmt(point.d_fit)} drift={_fmt(point.drift)}"
            )
        else:
            candidates = ", ".join(f"{c:g}" for c in point.candidates) or "none"
            print(f"  🔁 eps={point.epsilon:<8g} candidates: {candidates}")
    print(f"\n  {'✅ Accepted' if result.accepted else '❌ Rejected'}: {result.detail}")
    print("=" * 70)


def _fmt(value: float) -> str:
    return f"{value:.6g}" if math.isfinite(value) else "n/a"


def _yes_no(flag: bool) -> str:
    return "yes" if flag else "no"
