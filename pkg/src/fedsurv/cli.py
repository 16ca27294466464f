"""Command-line entry points: in-process simulation, networked coordinator
and client, and report generation."""
from __future__ import annotations

import json
import pathlib
import sys

import click

from fedsurv.config import load_config
from fedsurv.experiment import (
    ExperimentConfig,
    load_survival_csv,
    run_experiment,
    run_mccv,
    write_records_csv,
)


def _parse_hostport(value: str):
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter(f"expected host:port, got {value!r}")
    return host, int(port)


@click.group()
def main():
    """Federated random survival forests for partially overlapping features."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML experiment configuration (defaults reproduce the reference setup).")
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--mccv", is_flag=True, help="Run Monte-Carlo cross-validation of the pooled model instead of the full grid.")
def simulate(config_path, data_path, out_dir, seed, mccv):
    """Run the in-process experiment grid and write records.csv."""
    config = load_config(config_path) if config_path else ExperimentConfig()
    if seed is not None:
        config.seed = seed
    dataset = load_survival_csv(data_path)
    if dataset.rejected_rows:
        click.echo(f"rejected {len(dataset.rejected_rows)} rows with invalid times: "
                   f"{dataset.rejected_rows}", err=True)
    records = run_mccv(config, dataset) if mccv else run_experiment(config, dataset)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out / "records.csv")
    n_excluded = sum(1 for r in records if r.excluded)
    click.echo(f"wrote {len(records)} records to {out / 'records.csv'} "
               f"({n_excluded} excluded: no comparable pairs)")


@main.command()
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), default="report")
@click.option("--svg", is_flag=True, help="Also emit an SVG boxplot.")
def report(records_path, out_dir, svg):
    """Summarize a records CSV: per-configuration statistics and paired tests."""
    from fedsurv.experiment import read_records_csv
    from fedsurv.report import write_report

    records = read_records_csv(records_path)
    tables = write_report(records, out_dir, svg=svg)
    click.echo(tables["summary"].to_string(index=False))
    if not tables["paired_tests"].empty:
        click.echo(tables["paired_tests"].to_string(index=False))


@main.command()
@click.option("--listen", required=True, help="host:port to bind.")
@click.option("--roster", "roster_path", type=click.Path(exists=True), required=True,
              help="File with one client id per line (or a JSON list).")
@click.option("--timeout-secs", type=float, default=120.0, show_default=True)
@click.option("--seed", type=int, default=None)
def coordinator(listen, roster_path, timeout_secs, seed):
    """Serve one federation round to a fixed client roster."""
    from fedsurv.transport import Coordinator, TransportError

    text = pathlib.Path(roster_path).read_text()
    try:
        roster = json.loads(text)
    except json.JSONDecodeError:
        roster = [line.strip() for line in text.splitlines() if line.strip()]
    try:
        log = Coordinator(roster, listen=_parse_hostport(listen), seed=seed,
                          timeout=timeout_secs).run()
    except TransportError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    click.echo(json.dumps(log, indent=2, sort_keys=True))


@main.command()
@click.option("--connect", required=True, help="Coordinator host:port.")
@click.option("--client-id", required=True)
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--update-method", type=click.Choice(["all", "constant"]), default="all",
              show_default=True)
@click.option("--update-weighting", type=click.Choice(["equal", "site_size"]),
              default="equal", show_default=True)
@click.option("--test-fraction", type=float, default=0.3, show_default=True)
@click.option("--timeout-secs", type=float, default=120.0, show_default=True)
@click.option("--seed", type=int, default=None)
def client(connect, client_id, data_path, update_method, update_weighting,
           test_fraction, timeout_secs, seed):
    """Join a federation round and evaluate the integrated model locally."""
    from fedsurv.experiment import one_hot
    from fedsurv.transport import TransportError, run_client

    dataset = load_survival_csv(data_path)
    table, _ = one_hot(dataset.X, dataset.categorical)
    try:
        result = run_client(_parse_hostport(connect), client_id, table,
                            (dataset.time, dataset.event), seed=seed,
                            update_method=update_method,
                            update_weighting=update_weighting,
                            test_fraction=test_fraction, timeout=timeout_secs)
    except TransportError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    click.echo(json.dumps({
        "client_id": result.client_id,
        "c_index": result.c_index,
        "n_test": result.n_test,
        "n_comparable_pairs": result.n_comparable_pairs,
        "active_set_size": len(result.active_set),
    }, sort_keys=True))


if __name__ == "__main__":
    main()
