"""Scenario-driven command line front end.

    g2lab <command> --scenario <path> [--scenario <path> ...] [--out <dir>]
                    [--jobs N] [--paper-literal]

Exit codes: 0 every check passed, 1 a checked condition failed,
2 bad input or singular data.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConditionViolation, G2LabError, InputError
from .exterior import AltForm
from .flow import (
    FlowState,
    KPolicy,
    assemble_phi,
    integrate,
    volume_monotone,
    write_trace_csv,
)
from .homogeneous import MILNOR_PRESETS, ModelAlgebra, levi_civita
from .invariant_forms import (
    InvariantTriple,
    assemble_psi,
    decompose_omega,
    decompose_psi,
    is_one_one,
)
from .lifting import horizontal_lift, rigid_witness_pipeline, write_lift_csv
from .reduced import ReducedPath, check_reduced, read_reduced_csv, write_reduced_csv
from .stable_forms import g2_metric_volume, hitchin_lambda, is_definite6

COMMANDS = ("flow", "lift", "witness", "check-form", "decompose", "reduced-check")
EXIT = {"pass": 0, "fail": 1, "error": 2}

DEFAULT_TOLERANCES = {
    "closed": 1e-12,
    "evolution": 1e-6,
    "reduced": 1e-5,
    "tracking": 1e-8,
    "kappa_min": 1e-3,
}

_MATRIX = {
    "type": "array",
    "minItems": 3,
    "maxItems": 3,
    "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}},
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "model": {
            "oneOf": [
                {"enum": sorted(MILNOR_PRESETS)},
                {
                    "type": "object",
                    "required": ["structure_constants"],
                    "properties": {
                        "name": {"type": "string"},
                        "structure_constants": {
                            "type": "array",
                            "minItems": 3,
                            "maxItems": 3,
                            "items": _MATRIX,
                        },
                    },
                },
            ]
        },
        "initial": {
            "type": "object",
            "required": ["E", "f"],
            "properties": {"E": _MATRIX, "f": {"type": "number", "exclusiveMinimum": 0}},
        },
        "policy": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["constant", "polynomial"]},
                "K": _MATRIX,
                "coefficients": {"type": "array", "minItems": 1, "items": _MATRIX},
            },
        },
        "interval": {
            "type": "array",
            "minItems": 2,
            "maxItems": 2,
            "items": {"type": "number"},
        },
        "steps": {"type": "integer", "minimum": 1},
        "tolerances": {
            "type": "object",
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in DEFAULT_TOLERANCES},
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "coefficients": {"type": "array", "items": {"type": "number"}},
        "terms": {"type": "object", "additionalProperties": {"type": "number"}},
        "dimension": {"enum": [6, 7]},
        "omega": {"type": "array", "minItems": 15, "maxItems": 15, "items": {"type": "number"}},
        "triple": {
            "type": "object",
            "required": ["f", "A", "E"],
            "properties": {"f": {"type": "number"}, "A": _MATRIX, "E": _MATRIX},
        },
        "path": {"type": "string"},
        "reduced_path": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t", "f", "Gamma"],
                "properties": {"t": {"type": "number"}, "f": {"type": "number"}, "Gamma": _MATRIX},
            },
        },
        "E_init": _MATRIX,
        "expect": {"type": "string"},
        "outputs": {"type": "object", "additionalProperties": {"type": "string"}},
    },
}

_REQUIRED = {
    "flow": ["model", "initial", "policy", "interval", "steps"],
    "witness": ["model", "initial", "policy", "interval", "steps"],
    "lift": ["model"],
    "check-form": [],
    "decompose": ["model"],
    "reduced-check": ["model"],
}


class ScenarioError(InputError):
    pass


@dataclass
class Check:
    name: str
    condition: str
    passed: bool
    residual: float | None = None
    tolerance: float | None = None
    required: bool = True

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "condition": self.condition,
            "passed": self.passed,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "required": self.required,
        }

    def line(self) -> str:
        tag = "PASS" if self.passed else ("FAIL" if self.required else "note")
        extra = ""
        if self.residual is not None:
            extra = f"  residual={self.residual:.3e}"
            if self.tolerance is not None:
                extra += f"  tol={self.tolerance:.1e}"
        return f"{tag}  {self.name}  [{self.condition}]{extra}"


@dataclass
class Verdict:
    command: str
    checks: list[Check] = field(default_factory=list)
    status: str = "pass"
    witness: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    message: str = ""

    def add(self, *args, **kwargs) -> Check:
        c = Check(*args, **kwargs)
        self.checks.append(c)
        if c.required and not c.passed and self.status == "pass":
            self.status = "fail"
        return c

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "status": self.status,
            "message": self.message,
            "checks": [c.as_dict() for c in self.checks],
            "witness": self.witness,
            "results": self.results,
            "metadata": self.metadata,
        }


def _validate(scenario: dict) -> None:
    validator = jsonschema.Draft7Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(scenario), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ScenarioError(f"scenario field {where}: {err.message}")
    for key in _REQUIRED[scenario["command"]]:
        if key not in scenario:
            raise ScenarioError(f"scenario field {key}: required for {scenario['command']}")


def load_scenario(path) -> dict:
    path = Path(path)
    try:
        scenario = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(scenario, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    _validate(scenario)
    scenario["_base"] = str(path.parent)
    return scenario


def _model(scenario: dict) -> ModelAlgebra:
    spec = scenario["model"]
    if isinstance(spec, str):
        return ModelAlgebra.preset(spec)
    return ModelAlgebra(spec.get("name", "custom"), spec["structure_constants"])


def _policy(scenario: dict) -> KPolicy:
    p = scenario["policy"]
    if p["type"] == "constant":
        if "K" not in p:
            raise ScenarioError("scenario field policy/K: required for a constant policy")
        return KPolicy.constant(p["K"])
    if "coefficients" not in p:
        raise ScenarioError("scenario field policy/coefficients: required for a polynomial policy")
    return KPolicy.polynomial(p["coefficients"])


def _tol(scenario: dict, key: str) -> float:
    return float(scenario.get("tolerances", {}).get(key, DEFAULT_TOLERANCES[key]))


def _run_flow(scenario: dict, verdict: Verdict):
    alg = _model(scenario)
    t1, t2 = scenario["interval"]
    if not t1 < t2:
        raise ScenarioError("scenario field interval: need t1 < t2")
    init = scenario["initial"]
    E0 = np.array(init["E"], dtype=float)
    if np.linalg.det(E0) <= 0:
        raise ScenarioError("scenario field initial/E: need det E > 0")
    kappa = _tol(scenario, "kappa_min")
    try:
        trace = integrate(
            FlowState(t1, E0, init["f"]),
            _policy(scenario),
            alg,
            t1,
            t2,
            scenario["steps"],
            kappa_min=kappa,
            seed=scenario.get("seed"),
        )
    except ConditionViolation as exc:
        verdict.add(type(exc).__name__, exc.condition, False)
        verdict.witness = _jsonable(exc.witness)
        verdict.message = str(exc)
        return None
    verdict.add("policy-gate", "positive-symmetric-K", True, tolerance=kappa)
    verdict.add("f-positive", "positive-f", bool(np.all(trace.f > 0)), float(np.min(trace.f)))
    return trace


def _flow_checks(trace, scenario: dict, verdict: Verdict, paper_literal: bool) -> None:
    alg = trace.alg
    r_closed, r_evol = trace.residuals
    tc = _tol(scenario, "closed") * max(1.0, max(trace.psi(i).norm for i in (0, len(trace) - 1)))
    verdict.add("closedness", "closed-slice-form", float(r_closed.max()) <= tc,
                float(r_closed.max()), tc)
    te = _tol(scenario, "evolution")
    verdict.add("evolution", "dpsi/dt-equals-domega", float(r_evol.max()) <= te,
                float(r_evol.max()), te)
    vols = []
    orient_ok = True
    for i in range(len(trace)):
        data = g2_metric_volume(assemble_phi(trace.state(i), trace.K[i], alg))
        vols.append(data.volume)
        orient_ok &= data.orientation == 1
    verdict.add("definite-positive-volume", "definite-positive-volume",
                orient_ok and min(vols) > 0, float(min(vols)))
    mono = volume_monotone(trace)
    verdict.add("frame-volume-monotone", "irreflexive", mono.verdict,
                float(np.min(np.diff(mono.det_E))))
    tr = _tol(scenario, "reduced")
    report = check_reduced(ReducedPath.from_trace(trace), alg, tr)
    verdict.add("reduced-relation", "reduced-f-evolution", report.verdict,
                report.max_residual, tr)
    verdict.add("reduced-relation-printed-reading", "reduced-f-evolution-literal",
                float(np.max(report.literal_residual)) <= tr,
                float(np.max(report.literal_residual)), tr, required=paper_literal)
    sym = bool(np.all(np.abs(trace.K - trace.K.transpose(0, 2, 1)) <= 1e-12))
    if sym:
        ok = all(is_one_one(trace.omega(i), trace.psi(i)) for i in range(len(trace)))
        verdict.add("orthogonal-slice", "one-one-omega", ok, required=False)
    verdict.results.update(
        f_final=float(trace.f[-1]),
        detE_final=float(np.linalg.det(trace.E[-1])),
        E_final=trace.E[-1].tolist(),
        endpoint_psi_difference=mono.endpoint_difference,
        reduced_residual=report.max_residual,
        reduced_residual_printed_reading=float(np.max(report.literal_residual)),
    )
    verdict.metadata.update(trace.metadata())


def cmd_flow(scenario, out: Path, verdict: Verdict, paper_literal: bool):
    trace = _run_flow(scenario, verdict)
    if trace is None:
        return
    _flow_checks(trace, scenario, verdict, paper_literal)
    write_trace_csv(trace, out / "trace.csv", out / "trace.meta.json")


def cmd_witness(scenario, out: Path, verdict: Verdict, paper_literal: bool):
    trace = _run_flow(scenario, verdict)
    if trace is None:
        return
    _flow_checks(trace, scenario, verdict, paper_literal)
    write_trace_csv(trace, out / "trace.csv", out / "trace.meta.json")
    try:
        lift = rigid_witness_pipeline(
            trace,
            evolution_tol=_tol(scenario, "evolution"),
            tracking_tol=_tol(scenario, "tracking"),
            reduced_tol=_tol(scenario, "reduced"),
        )
    except ConditionViolation as exc:
        verdict.add("rigid-witness", exc.condition, False)
        verdict.witness = _jsonable(exc.witness)
        verdict.message = str(exc)
        return
    _lift_checks(lift, scenario, verdict)
    write_lift_csv(lift, out / "lift.csv", out / "lift.meta.json")


def _lift_checks(lift, scenario, verdict: Verdict):
    rep = lift.report
    tt = _tol(scenario, "tracking")
    verdict.add("metric-tracking", "horizontal-lift", rep["max_tracking"] <= tt,
                rep["max_tracking"], tt)
    verdict.add("horizontality", "symmetric-velocity", rep["max_sym_defect"] <= 1e-12,
                rep["max_sym_defect"], 1e-12)
    verdict.add("witness-one-one", "one-one-omega", True, rep["max_one_one"])
    verdict.add("witness-evolution", "dpsi/dt-equals-domega",
                rep["max_r_evolution"] <= _tol(scenario, "evolution"),
                rep["max_r_evolution"], _tol(scenario, "evolution"))
    verdict.add("gauge-rotation", "tau-in-SO3", lift.tau.defect <= tt, lift.tau.defect, tt)
    verdict.add("gauge-coherence", "projection-of-endpoint", rep["gauge_coherence"] <= tt,
                rep["gauge_coherence"], tt)
    verdict.results.update(
        tau=lift.tau.R.tolist(),
        tau_det=lift.tau.det,
        tau_orthogonality_defect=lift.tau.defect,
        tau_distance_to_identity=lift.tau.distance_to_identity(),
    )


def _reduced_path(scenario: dict) -> ReducedPath:
    if "path" in scenario:
        return read_reduced_csv(Path(scenario["_base"]) / scenario["path"])
    if "reduced_path" in scenario:
        rows = scenario["reduced_path"]
        return ReducedPath([r["t"] for r in rows], [r["f"] for r in rows], [r["Gamma"] for r in rows])
    raise ScenarioError("scenario field path: a reduced path (CSV 'path' or inline 'reduced_path') is required")


def cmd_lift(scenario, out: Path, verdict: Verdict, paper_literal: bool):
    if "initial" in scenario:
        trace = _run_flow(scenario, verdict)
        if trace is None:
            return
        path = ReducedPath.from_trace(trace)
        E_init = trace.E[0]
    else:
        path = _reduced_path(scenario)
        if "E_init" not in scenario:
            raise ScenarioError("scenario field E_init: required when lifting a reduced path")
        E_init = np.array(scenario["E_init"], dtype=float)
    alg = _model(scenario)
    tr = _tol(scenario, "reduced")
    report = check_reduced(path, alg, tr, paper_literal)
    verdict.add("reduced-relation", "reduced-f-evolution", report.verdict, report.max_residual, tr)
    lift = horizontal_lift(path, E_init)
    tt = _tol(scenario, "tracking")
    verdict.add("metric-tracking", "horizontal-lift", float(lift.tracking.max()) <= tt,
                float(lift.tracking.max()), tt)
    sym = float(np.max(np.abs(lift.S - lift.S.transpose(0, 2, 1))))
    verdict.add("horizontality", "symmetric-velocity", sym <= 1e-12, sym, 1e-12)
    lift.report = {"max_tracking": float(lift.tracking.max()), "max_sym_defect": sym}
    verdict.results.update(E_final=lift.E[-1].tolist())
    write_lift_csv(lift, out / "lift.csv", out / "lift.meta.json")
    write_reduced_csv(path, out / "reduced.csv")


def _form_from_scenario(scenario: dict) -> AltForm:
    if "coefficients" in scenario:
        c = scenario["coefficients"]
        if len(c) == 20:
            return AltForm(6, 3, c)
        if len(c) == 35:
            return AltForm(7, 3, c)
        raise ScenarioError(f"scenario field coefficients: expected 20 or 35 entries, got {len(c)}")
    if "terms" in scenario:
        dim = scenario.get("dimension", 6)
        try:
            return AltForm.from_terms(dim, 3, {tuple(k.split()): v for k, v in scenario["terms"].items()})
        except KeyError as exc:
            raise ScenarioError(f"scenario field terms: {exc}") from None
    raise ScenarioError("scenario field coefficients: a 3-form is required")


def cmd_check_form(scenario, out: Path, verdict: Verdict, paper_literal: bool):
    form = _form_from_scenario(scenario)
    if form.dim == 6:
        if "seed" not in scenario:
            raise ScenarioError("scenario field seed: required (sampled rank criterion)")
        lam = hitchin_lambda(form)
        sampled = is_definite6(form, "sampled", n=scenario.get("samples", 64), seed=scenario["seed"])
        exact = lam.verdict.value == "Definite"
        verdict.results.update(classification=lam.verdict.value, **{"lambda": lam.lam},
                               sampled_definite=sampled.definite)
        if sampled.witness is not None:
            verdict.results.update(witness_vector=sampled.witness.tolist(),
                                   witness_rank=sampled.witness_rank)
        verdict.add("criteria-agree", "orbit-invariant-vs-rank-criterion", exact == sampled.definite)
        verdict.metadata.update(seed=scenario["seed"], samples=sampled.samples)
    else:
        try:
            data = g2_metric_volume(form)
            verdict.results.update(classification="Definite", metric=data.metric.tolist(),
                                   volume=data.volume, orientation=data.orientation)
        except ConditionViolation:
            verdict.results.update(classification="NotDefinite")
    if "expect" in scenario:
        got = verdict.results["classification"]
        verdict.add("expected-classification", "classification", got == scenario["expect"])


def cmd_decompose(scenario, out: Path, verdict: Verdict, paper_literal: bool):
    alg = _model(scenario)
    if "triple" in scenario:
        t = scenario["triple"]
        psi = assemble_psi(InvariantTriple(t["f"], t["A"], t["E"], alg))
    else:
        psi = _form_from_scenario(scenario)
        if psi.dim != 6:
            raise ScenarioError("scenario field coefficients: decompose needs a 6-dim 3-form")
    triple = decompose_psi(psi, alg)
    res = float(np.max(np.abs(assemble_psi(triple).coeffs - psi.coeffs)))
    verdict.add("round-trip", "unique-triple", True, res)
    lc = levi_civita(triple.E, alg)
    verdict.add("levi-civita", "closed-slice-form",
                bool(np.allclose(lc, triple.A, atol=1e-10)), float(np.max(np.abs(lc - triple.A))),
                required=False)
    verdict.results.update(f=triple.f, A=triple.A.tolist(), E=triple.E.tolist(),
                           psi=psi.coeffs.tolist())
    if "omega" in scenario:
        K = decompose_omega(AltForm(6, 2, scenario["omega"]), triple)
        verdict.results.update(K=K.tolist())
        verdict.add("omega-one-one", "one-one-omega",
                    bool(np.allclose(K, K.T, atol=1e-10)), required=False)


def cmd_reduced_check(scenario, out: Path, verdict: Verdict, paper_literal: bool):
    alg = _model(scenario)
    path = _reduced_path(scenario)
    tr = _tol(scenario, "reduced")
    report = check_reduced(path, alg, tr, paper_literal)
    name = "reduced-f-evolution-literal" if paper_literal else "reduced-f-evolution"
    mins = float(np.min(report.gamma_dot_min_eig))
    verdict.add("metric-velocity", "positive-metric-velocity", mins > 0, mins)
    verdict.add("f-evolution", name, bool(np.all(report.f_residual <= tr)),
                report.max_residual, tr)
    if report.witness:
        verdict.witness = report.witness
    verdict.results.update(
        max_residual=report.max_residual,
        max_residual_printed_reading=float(np.max(report.literal_residual)),
    )


HANDLERS = {
    "flow": cmd_flow,
    "lift": cmd_lift,
    "witness": cmd_witness,
    "check-form": cmd_check_form,
    "decompose": cmd_decompose,
    "reduced-check": cmd_reduced_check,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def run(command: str, scenario_path, out_dir, paper_literal: bool = False) -> Verdict:
    """Run one scenario; writes ``report.json`` (plus artifacts) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    verdict = Verdict(command)
    verdict.metadata["version"] = __version__
    try:
        scenario = load_scenario(scenario_path)
        if scenario["command"] != command:
            raise ScenarioError(
                f"scenario field command: file is for {scenario['command']!r}, invoked as {command!r}"
            )
        HANDLERS[command](scenario, out, verdict, paper_literal)
        if "seed" in scenario:
            verdict.metadata.setdefault("seed", scenario["seed"])
    except (G2LabError, KeyError, FileNotFoundError, ValueError, np.linalg.LinAlgError) as exc:
        if isinstance(exc, ConditionViolation):
            verdict.status = "fail"
            verdict.witness = _jsonable(exc.witness)
        else:
            verdict.status = "error"
            verdict.witness = {"error": type(exc).__name__}
        verdict.message = str(exc)
    verdict.metadata["paper_literal"] = paper_literal
    with open(out / "report.json", "w") as fh:
        json.dump(_jsonable(verdict.as_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return verdict


def _run_job(args):
    command, scenario, out, paper_literal = args
    v = run(command, scenario, out, paper_literal)
    return scenario, v.status, [c.line() for c in v.checks], v.message


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="g2lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", action="append", required=True,
                   help="scenario JSON file; repeat to run a batch")
    p.add_argument("--out", default="g2lab-out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="run batch scenarios concurrently")
    p.add_argument("--paper-literal", action="store_true",
                   help="check the reduced relation against gamma instead of its derivative")
    p.add_argument("--version", action="version", version=f"g2lab {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    if len(args.scenario) == 1:
        jobs = [(args.command, args.scenario[0], out, args.paper_literal)]
    else:
        jobs = [(args.command, s, out / Path(s).stem, args.paper_literal) for s in args.scenario]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    code = 0
    for scenario, status, lines, message in results:
        print(f"== {scenario}: {status}")
        for line in lines:
            print("  " + line)
        if message:
            print("  " + message)
        code = max(code, EXIT[status])
    return code


if __name__ == "__main__":
    sys.exit(main())
