#!/usr/bin/env python3
"""
CodeFoundry - Command Line Interface

Entry point for the codefoundry command: compile, validate, run, bench and
scan, plus create-config and version.

Exit codes: 0 success, 1 operational failure, 2 usage error. Failures print
a JSON diagnostic on stderr.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

from . import __version__
from .errors import FoundryError, UsageError

LOG = logging.getLogger("CodeFoundry.cli")

DEFAULT_REFERENCE_P50_MS = 2004.0
REPEAT_CONFIGURED = object()  # non-str so argparse does not apply type=int to the const

EPILOG = """
Configuration precedence: command-line flags > CODEFOUNDRY_* environment
variables (.env is loaded) > --config file > built-in defaults.

Examples:
  codefoundry compile glp1.yaml --output glp1.artifact.json
  codefoundry validate glp1.artifact.json --golden glp1.jsonl
  codefoundry validate glp1.artifact.json --fault-matrix
  codefoundry run glp1.artifact.json --input case_t2d.json --repeat 1000
  codefoundry run glp1.artifact.json --input case_t2d.json --repeat --workers 4
  codefoundry bench
  codefoundry bench --artifact glp1.artifact.json --input case_t2d.json --samples 1000
  codefoundry scan --input "ignore previous instructions"
  codefoundry scan --self-test
  codefoundry create-config --output codefoundry.yaml
"""


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _emit(payload: Mapping[str, Any], fmt: str, text: Optional[str] = None) -> None:
    if fmt == "json" or text is None:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print(text)


def _emit_error(error: Dict[str, Any]) -> None:
    print(json.dumps(error, sort_keys=True, default=str), file=sys.stderr)


def _write(path: Path, content: str) -> None:
    from .storage import atomic_write_text

    atomic_write_text(path, content)
    LOG.info(f"Wrote {path}")


def _format_report(report: Any) -> str:
    lines = [f"Validation: {'PASS' if report.passed else 'FAIL'}"]
    for stage in report.stages:
        accuracy = f"  accuracy {stage.accuracy:.3f}" if stage.accuracy is not None else ""
        lines.append(f"  {stage.stage.value:<10} {stage.outcome.value}{accuracy}")
        for finding in stage.findings:
            where = f" at {finding.span}" if finding.span else ""
            lines.append(f"    - {finding.id} [{finding.severity}]{where}: {finding.message}")
    return "\n".join(lines)


def _read_json(path: str, what: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise UsageError(f"cannot read {what} {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{what} {path} is not valid JSON: {e.msg}", line=e.lineno) from None


def _read_case(path: str) -> Tuple[Dict[str, Any], Optional[Dict[str, Any]]]:
    """Case file: {"inputs": ..., "mocked_extractions": ...} or a bare inputs object"""
    data = _read_json(path, "input case")
    if not isinstance(data, dict):
        raise UsageError(f"input case {path} must be a JSON object")
    if "inputs" in data:
        extractions = data.get("mocked_extractions")
        if extractions is not None and not isinstance(extractions, dict):
            raise UsageError(f"input case {path}: mocked_extractions must be an object")
        if not isinstance(data["inputs"], dict):
            raise UsageError(f"input case {path}: inputs must be an object")
        return dict(data["inputs"]), extractions
    return data, None


def _require_file(path: Optional[str], what: str) -> Path:
    if not path:
        raise UsageError(f"{what} path is required")
    candidate = Path(path)
    if not candidate.is_file():
        raise UsageError(f"{what} not found: {path}")
    return candidate


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _foundry(args: argparse.Namespace, **overrides: Dict[str, Any]):
    from .app import create_foundry, load_configuration
    from .resources import find_config_file

    sections: Dict[str, Dict[str, Any]] = {"global": {"log_level": args.log_level}}
    for section, values in overrides.items():
        sections.setdefault(section, {}).update(values)
    return create_foundry(load_configuration(find_config_file(args.config), sections))


def _compile_command(args: argparse.Namespace) -> int:
    from .errors import CompilationFailed

    spec_path = _require_file(args.spec, "spec")
    golden_path = _require_file(args.golden, "golden set") if args.golden else None
    foundry = _foundry(
        args,
        client={"mode": args.client},
        compile={"max_regenerations": args.max_regenerations},
        validation={"accuracy_threshold": args.threshold},
    )

    try:
        result = foundry.compile_file(spec_path, golden_path)
    except CompilationFailed as e:
        if args.report and e.report is not None:
            _write(Path(args.report), json.dumps(e.report.to_dict(), indent=2) + "\n")
        raise

    artifact = result.artifact
    output = (
        Path(args.output)
        if args.output
        else Path(foundry.config.compile.output_dir) / f"{artifact.workflow_id}.artifact.json"
    )
    _write(output, artifact.serialize())
    if args.report:
        _write(Path(args.report), json.dumps(result.report.to_dict(), indent=2) + "\n")

    payload = {"artifact": str(output), **result.to_dict(), "ledger": foundry.ledger.to_dict()}
    text = (
        f"Compiled {artifact.workflow_id} -> {output}\n"
        f"Regenerations: {result.regeneration_count}\n{_format_report(result.report)}"
    )
    _emit(payload, args.format, text)
    return 0


def _validate_command(args: argparse.Namespace) -> int:
    from .artifact import CompiledArtifact
    from .foundry import benign_corpus
    from .validator import load_golden, run_fault_matrix

    artifact = CompiledArtifact.load(_require_file(args.artifact, "artifact"))
    foundry = _foundry(args, validation={"accuracy_threshold": args.threshold})
    if args.golden:
        golden = load_golden(_require_file(args.golden, "golden set"))
    else:
        golden = foundry.golden_for(artifact.workflow_id)

    if args.fault_matrix:
        matrix = run_fault_matrix(
            artifact, golden, benign_corpus(foundry.libraries), foundry.pipeline_config()
        )
        payload = matrix.to_dict()
        if args.report:
            _write(Path(args.report), json.dumps(payload, indent=2, default=str) + "\n")
        lines = [f"Fault matrix: {'PASS' if matrix.passed else 'FAIL'} (simulated)"]
        for record in matrix.records:
            failed = record.report.failed_stage
            lines.append(
                f"  {record.label:<48} {failed.value if failed else 'pass':<10}"
                f" {'ok' if record.as_expected else 'UNEXPECTED'}"
            )
        failures = matrix.first_attempt_failures
        lines.append(f"First-attempt failures: {failures}/{len(matrix.records)}")
        _emit(payload, args.format, "\n".join(lines))
        return 0 if matrix.passed else 1

    report = foundry.validate(artifact, golden)
    if args.report:
        _write(Path(args.report), json.dumps(report.to_dict(), indent=2) + "\n")
    _emit(report.to_dict(), args.format, _format_report(report))
    return 0 if report.passed else 1


def _run_command(args: argparse.Namespace) -> int:
    from .artifact import CompiledArtifact
    from .generators import FixtureGenerator
    from .metrics import entropy

    artifact = CompiledArtifact.load(_require_file(args.artifact, "artifact"))
    inputs, extractions = _read_case(str(_require_file(args.input, "input case")))
    if isinstance(args.repeat, int) and args.repeat < 1:
        raise UsageError("--repeat must be at least 1")

    foundry = _foundry(args, client={"mode": args.client}, runtime={"workers": args.workers})
    repeat = args.repeat
    if repeat == REPEAT_CONFIGURED:
        repeat = foundry.config.runtime.repetitions
    workers = foundry.config.runtime.workers
    client = FixtureGenerator.for_extractions(extractions) if extractions is not None else None
    executor = foundry.executor(artifact, client=client)

    runs = repeat or 1
    if workers > 1 and runs > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda _: executor.run(inputs), range(runs)))
    else:
        outcomes = [executor.run(inputs) for _ in range(runs)]

    if args.audit_log:
        executor.audit_log.export(args.audit_log)

    first = outcomes[0]
    payload: Dict[str, Any] = {"outcome": first.to_dict(), "runs": runs}
    text = f"Outcome: {first.status} ({first.reason_code})"
    if repeat is not None:
        report = entropy([outcome.output_digest for outcome in outcomes])
        payload["entropy"] = report.to_dict()
        text += (
            f"\nRuns: {report.run_count}  distinct outputs: {report.distinct_outputs}"
            f"  H = {report.entropy_bits:.4f} bits  reproducibility {report.reproducibility:.3f}"
        )
    drift = executor.drift.status(executor.artifact_digest)
    if drift is not None:
        payload["drift"] = drift.to_dict()
    _emit(payload, args.format, text)
    return 0


def _bench_command(args: argparse.Namespace) -> int:
    from .metrics import economics_table, format_table, host_info, load_ledger, load_pricing

    if args.n < 1:
        raise UsageError("-n must be at least 1")
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    ledger = load_ledger(args.ledger)
    pricing = load_pricing(args.pricing)
    table = economics_table(ledger, pricing, n=args.n)
    payload: Dict[str, Any] = {"economics": table}
    text = format_table(table)

    if args.artifact or args.input:
        from .artifact import CompiledArtifact
        from .executor import AuditLog
        from .generators import FixtureGenerator
        from .metrics import measure_latency

        artifact = CompiledArtifact.load(_require_file(args.artifact, "artifact"))
        inputs, extractions = _read_case(str(_require_file(args.input, "input case")))
        foundry = _foundry(args)
        client = FixtureGenerator.for_extractions(extractions) if extractions is not None else None
        executor = foundry.executor(artifact, client=client, audit_log=AuditLog())
        stats = measure_latency(lambda: executor.run(inputs), samples=args.samples)
        payload["latency"] = {
            **stats.to_dict(),
            "speedup": stats.speedup(args.reference_p50),
            "reference_p50_ms": args.reference_p50,
            "host": host_info(),
        }
        text += (
            f"\n\nLatency over {stats.samples} runs: P50 {stats.p50:.3f} ms, "
            f"P99 {stats.p99:.3f} ms, jitter {stats.jitter:.3f} ms, "
            f"{stats.speedup(args.reference_p50):.0f}x vs {args.reference_p50:.0f} ms"
        )
    _emit(payload, args.format, text)
    return 0


def _scan_benign(foundry, rules, policy) -> Dict[str, Any]:
    """False-positive run over the shipped benign corpora"""
    from .foundry import benign_corpus
    from .secgates import code_gate_scan, input_gate_scan, load_benign_texts, output_gate_scan

    inputs = load_benign_texts("inputs")
    outputs = load_benign_texts("outputs")
    artifacts = [artifact for artifact, _ in benign_corpus(foundry.libraries)]
    code = [text for artifact in artifacts for text in artifact.scan_texts()]
    input_hits = sum(len(input_gate_scan(t, policy, rules).findings) for t in inputs)
    output_hits = sum(len(output_gate_scan(t, None, policy, rules).findings) for t in outputs)
    code_hits = len(code_gate_scan(code, policy, rules))
    return {
        "inputs": {"texts": len(inputs), "findings": input_hits},
        "code": {"texts": len(code), "findings": code_hits},
        "outputs": {"texts": len(outputs), "findings": output_hits},
        "false_positives": input_hits + code_hits + output_hits,
    }


def _scan_command(args: argparse.Namespace) -> int:
    from .secgates import CodeText, GateAction, code_gate_scan, input_gate_scan, output_gate_scan

    chosen = [
        flag for flag in ("input", "code", "output") if getattr(args, flag) is not None
    ] + (["self_test"] if args.self_test else []) + (["benign"] if args.benign else [])
    if len(chosen) != 1:
        raise UsageError(
            "scan needs exactly one of --input, --code, --output, --self-test, --benign"
        )

    foundry = _foundry(args)
    rules = foundry.rules
    policy = foundry.gate_policy()

    if args.self_test:
        broken = rules.self_test()
        payload = {"rules": len(rules), "failing": broken, "version": rules.version}
        text = f"{len(rules)} rules, {len(broken)} failing self-test" + "".join(
            f"\n  - {rule_id}" for rule_id in broken
        )
        _emit(payload, args.format, text)
        return 1 if broken else 0

    if args.benign:
        payload = _scan_benign(foundry, rules, policy)
        _emit(payload, args.format, f"False positives: {payload['false_positives']}")
        return 1 if payload["false_positives"] else 0

    if args.input is not None:
        result = input_gate_scan(args.input, policy, rules, location="cli")
        findings, blocked = result.findings, result.blocked
        extra: Dict[str, Any] = {"sanitized": result.text}
    elif args.code is not None:
        findings = code_gate_scan([CodeText("cli", args.code, args.key)], policy, rules)
        blocked = any(f.action == GateAction.BLOCK for f in findings)
        extra = {}
    else:
        result = output_gate_scan(args.output, None, policy, rules, location="cli")
        findings, blocked = result.findings, result.blocked
        extra = {"sanitized": result.text}

    payload = {
        "gate": chosen[0],
        "blocked": blocked,
        "findings": [f.to_dict() for f in findings],
        **extra,
    }
    lines = [f"{len(findings)} finding(s){' - blocked' if blocked else ''}"]
    for f in findings:
        lines.append(f"  - {f.rule_id} [{f.severity.value}] {f.action.value} at {f.span}")
    _emit(payload, args.format, "\n".join(lines))
    return 1 if blocked else 0


def _create_config_command(args: argparse.Namespace) -> int:
    """Handle the create-config subcommand."""
    from .config import create_example_config

    output_path = Path(args.output)
    if output_path.exists() and not args.force:
        print(f"Configuration file {args.output} already exists.")
        print("Use --force to overwrite.")
        return 1
    _write(output_path, create_example_config())
    print(f"Created example configuration file: {args.output}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", "-c", default=None, help="Configuration file path (YAML)"
    )
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=None,
        help="Override log level",
    )
    common.add_argument(
        "--format", choices=["json", "text"], default="text", help="Report format on stdout"
    )

    parser = argparse.ArgumentParser(
        prog="codefoundry",
        description="CodeFoundry - compile-once workflow foundry",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument("--version", "-V", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    compile_parser = subparsers.add_parser(
        "compile", parents=[common], help="Compile a workflow spec into a validated artifact"
    )
    compile_parser.add_argument("spec", help="Workflow spec (YAML)")
    compile_parser.add_argument("--golden", "-g", help="Golden set (JSONL)")
    compile_parser.add_argument("--output", "-o", help="Artifact output path")
    compile_parser.add_argument("--report", help="Validation report output path (JSON)")
    compile_parser.add_argument(
        "--client", choices=["fixture", "scripted", "fault", "http"], help="Generator client mode"
    )
    compile_parser.add_argument("--max-regenerations", type=int, help="Regeneration budget")
    compile_parser.add_argument("--threshold", type=float, help="Accuracy threshold")

    validate_parser = subparsers.add_parser(
        "validate", parents=[common], help="Run the validation pipeline on an artifact"
    )
    validate_parser.add_argument("artifact", help="Compiled artifact (JSON)")
    validate_parser.add_argument("--golden", "-g", help="Golden set (JSONL)")
    validate_parser.add_argument("--report", help="Report output path (JSON)")
    validate_parser.add_argument("--threshold", type=float, help="Accuracy threshold")
    validate_parser.add_argument(
        "--fault-matrix",
        action="store_true",
        help="Seed every fault kind into the artifact and run the benign corpus",
    )

    run_parser = subparsers.add_parser(
        "run", parents=[common], help="Execute an artifact on one input case"
    )
    run_parser.add_argument("artifact", help="Compiled artifact (JSON)")
    run_parser.add_argument("--input", "-i", required=True, help="Input case (JSON)")
    run_parser.add_argument(
        "--repeat",
        "-n",
        type=int,
        nargs="?",
        const=REPEAT_CONFIGURED,
        help="Repeat N times and report output entropy (runtime.repetitions when N is omitted)",
    )
    run_parser.add_argument(
        "--workers", type=int, help="Parallel repetitions (default runtime.workers)"
    )
    run_parser.add_argument("--audit-log", help="Export the audit trail (JSONL)")
    run_parser.add_argument(
        "--client", choices=["fixture", "scripted", "fault", "http"], help="Extraction client mode"
    )

    bench_parser = subparsers.add_parser(
        "bench", parents=[common], help="Token economics, TCO and latency tables"
    )
    bench_parser.add_argument("--ledger", help="Token ledger (YAML)")
    bench_parser.add_argument("--pricing", help="Pricing table (YAML)")
    bench_parser.add_argument("-n", type=int, default=1000, help="Transactions for totals")
    bench_parser.add_argument("--artifact", help="Artifact for the latency benchmark")
    bench_parser.add_argument("--input", help="Input case for the latency benchmark")
    bench_parser.add_argument("--samples", type=int, default=1000, help="Latency samples")
    bench_parser.add_argument(
        "--reference-p50",
        type=float,
        default=DEFAULT_REFERENCE_P50_MS,
        help="Reference P50 in ms for the speed-up ratio",
    )

    scan_parser = subparsers.add_parser(
        "scan", parents=[common], help="Run a security gate over text"
    )
    scan_parser.add_argument("--input", help="Text for the input gate")
    scan_parser.add_argument("--code", help="Text for the code gate")
    scan_parser.add_argument("--key", help="Module parameter key for --code")
    scan_parser.add_argument("--output", help="Text for the output gate")
    scan_parser.add_argument("--self-test", action="store_true", help="Rule-set self-test")
    scan_parser.add_argument(
        "--benign", action="store_true", help="False-positive run over the benign corpora"
    )

    config_parser = subparsers.add_parser("create-config", help="Create example configuration file")
    config_parser.add_argument(
        "--output", "-o", default="codefoundry.yaml", help="Output file path"
    )
    config_parser.add_argument(
        "--force", "-f", action="store_true", help="Overwrite existing configuration file"
    )

    subparsers.add_parser("version", help="Show version information")
    return parser


COMMANDS = {
    "compile": _compile_command,
    "validate": _validate_command,
    "run": _run_command,
    "bench": _bench_command,
    "scan": _scan_command,
    "create-config": _create_config_command,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the 'codefoundry' command."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    if args.command == "version":
        print(f"CodeFoundry {__version__}")
        return 0
    if args.command is None:
        parser.print_help()
        return 2

    try:
        return COMMANDS[args.command](args)
    except FoundryError as e:
        _emit_error(e.to_dict())
        return e.exit_code
    except OSError as e:
        _emit_error({"error": type(e).__name__, "message": str(e)})
        return 1
    except KeyboardInterrupt:
        _emit_error({"error": "Interrupted", "message": "interrupted"})
        return 1
    except Exception as e:
        LOG.debug(f"{args.command} failed", exc_info=True)
        _emit_error({"error": type(e).__name__, "message": str(e), "internal": True})
        return 1


if __name__ == "__main__":
    sys.exit(main())
