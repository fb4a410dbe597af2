"""Command line entry points: serve, rules check, validate-content, simulate."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import HeritourError
from .rules import ParseError, parse, typecheck


@click.group()
def main():
    """Gamified heritage-visit backend."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--host", default=None, help="Override the configured listen host.")
@click.option("--port", default=None, type=int, help="Override the configured listen port.")
def serve(config_path: str, host: str | None, port: int | None):
    """Run the gateway."""
    import uvicorn

    from .gateway.app import create_app
    from .gateway.config import load_config
    from .gateway.service import VisitorService

    config = load_config(Path(config_path))
    if host:
        config.listen_host = host
    if port:
        config.listen_port = port
    service = VisitorService(config)
    app = create_app(service)
    try:
        uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")
    finally:
        service.close()


@main.group()
def rules():
    """Rule DSL tooling."""


@rules.command("check")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--schemas", "schemas_path", type=click.Path(exists=True),
              help="Action schema registry (JSON). Defaults to parse-only checking.")
def rules_check(directory: str, schemas_path: str | None):
    """Parse (and optionally typecheck) every .grule file in DIRECTORY."""
    failures = 0
    all_rules = []
    for path in sorted(Path(directory).glob("*.grule")):
        try:
            parsed = parse(path.read_text(encoding="utf-8"))
        except ParseError as exc:
            click.echo(f"{path}:{exc.line}:{exc.column}: expected {exc.expected}, found {exc.found!r}")
            failures += 1
            continue
        all_rules.extend(parsed)
        click.echo(f"{path}: {len(parsed)} rule(s) ok")
    if schemas_path and not failures:
        schemas = json.loads(Path(schemas_path).read_text(encoding="utf-8"))
        for issue in typecheck(all_rules, schemas):
            click.echo(str(issue))
            failures += 1
    if failures:
        sys.exit(1)
    click.echo(f"{len(all_rules)} rule(s) valid")


@main.command("validate-content")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
def validate_content(directory: str):
    """Validate templates, site documents and the editorial store in DIRECTORY."""
    from . import ar as ar_mod
    from .content import ContentStore
    from .journey import load_template

    root = Path(directory)
    failures = 0

    for path in sorted((root / "templates").glob("*.json")) if (root / "templates").is_dir() else []:
        try:
            _, report = load_template(json.loads(path.read_text(encoding="utf-8")))
        except (ValueError, KeyError) as exc:
            click.echo(f"{path}: malformed: {exc}")
            failures += 1
            continue
        for finding in report.errors:
            click.echo(f"{path}: error {finding.kind}: {finding.detail}")
            failures += 1
        for finding in report.warnings:
            click.echo(f"{path}: warning {finding.kind}: {finding.detail}")
        if report.ok:
            click.echo(f"{path}: ok")

    site = root / "site"
    for name, loader in (
        ("walkgraph.json", ar_mod.walkgraph_from_dict),
        ("assets.json", lambda docs: [ar_mod.asset_from_dict(d) for d in docs]),
        ("trackables.json", lambda docs: [ar_mod.trackable_from_dict(d) for d in docs]),
    ):
        path = site / name
        if not path.exists():
            continue
        try:
            loader(json.loads(path.read_text(encoding="utf-8")))
            click.echo(f"{path}: ok")
        except (ValueError, KeyError) as exc:
            click.echo(f"{path}: invalid: {exc}")
            failures += 1

    editorial = root / "editorial"
    if editorial.is_dir():
        problems = ContentStore(root=editorial).audit()
        for problem in problems:
            click.echo(f"{editorial}: {problem}")
        failures += len(problems)
        if not problems:
            click.echo(f"{editorial}: audit clean")

    if failures:
        sys.exit(1)


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--target", required=True, help="Gateway base URL, e.g. http://127.0.0.1:8400")
@click.option("--out", "out_path", default=None, type=click.Path())
def simulate(scenario_path: str, target: str, out_path: str | None):
    """Drive synthetic visitors against a running gateway."""
    from .sim import Scenario, run

    scenario = Scenario.from_dict(json.loads(Path(scenario_path).read_text(encoding="utf-8")))
    report = run(scenario, target, Path(out_path) if out_path else None)
    click.echo(json.dumps({k: report[k] for k in ("actions_sent", "http_5xx", "latency_ms", "duration_s")}, indent=2))
    if report["errors"]:
        click.echo(f"{len(report['errors'])} error(s); first: {report['errors'][0]}")
        sys.exit(1)


@main.command("demo-init")
@click.argument("directory", type=click.Path())
@click.option("--visitors", default=5, type=int)
@click.option("--port", default=8400, type=int)
def demo_init(directory: str, visitors: int, port: int):
    """Write a ready-to-serve demo site into DIRECTORY."""
    from .demo import create_demo_site

    config_path = create_demo_site(Path(directory), visitors=visitors, port=port)
    click.echo(f"demo site ready; run: heritour serve --config {config_path}")


if __name__ == "__main__":
    try:
        main()
    except HeritourError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
