"""Command-line interface: extract, calibrate, evaluate, tune, serve.

Exit codes: 0 success, 2 input-schema error, 3 degenerate-data error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .artifacts import TableJob, load_jobs_manifest
from .errors import DegenerateDataError, InputSchemaError
from .pipeline import RunConfig, load_model, run_calibrate, run_evaluate, run_extract
from .synth import generate_corpus

SCORE_CHOICES = ["aps", "lac", "hss", "ocr", "tsr"]


def config_options(fn):
    fn = click.option("--score-fn", type=click.Choice(SCORE_CHOICES), default="aps",
                      show_default=True, help="Conformal score function.")(fn)
    fn = click.option("--hss-weights", default=None,
                      help="HSS weights 'w_row,w_col,w_text' or 'auto'.")(fn)
    fn = click.option("--alpha", type=float, default=0.1, show_default=True,
                      help="Target error rate for calibration.")(fn)
    fn = click.option("--tau", type=float, default=0.03, show_default=True,
                      help="Uncertainty threshold for flagging.")(fn)
    fn = click.option("--ioa-threshold", type=float, default=0.5, show_default=True,
                      help="Span-to-cell overlap threshold.")(fn)
    fn = click.option("--calib-fraction", type=float, default=0.5, show_default=True,
                      help="Fraction of cells held out for calibration.")(fn)
    fn = click.option("--similarity-threshold", type=float, default=1.0, show_default=True,
                      help="Text-match threshold for correctness (1.0 = exact).")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True,
                      help="Seed for the calibration split.")(fn)
    fn = click.option("--per-domain-calibration", is_flag=True, default=False,
                      help="Fit one threshold per domain instead of pooled.")(fn)
    return fn


def build_config(score_fn, hss_weights, alpha, tau, ioa_threshold, calib_fraction,
                 similarity_threshold, seed, per_domain_calibration) -> RunConfig:
    weights = hss_weights
    if isinstance(weights, str) and weights != "auto":
        try:
            weights = tuple(float(v) for v in weights.split(","))
        except ValueError:
            raise InputSchemaError(
                f"--hss-weights must be 'auto' or three comma-separated numbers, got {hss_weights!r}"
            )
    try:
        return RunConfig(
            score_fn=score_fn,
            hss_weights=weights,
            alpha=alpha,
            tau=tau,
            ioa_threshold=ioa_threshold,
            similarity_threshold=similarity_threshold,
            calib_fraction=calib_fraction,
            seed=seed,
            per_domain_calibration=per_domain_calibration,
        )
    except ValueError as exc:
        raise InputSchemaError(str(exc))


def load_jobs(jobs_path: str) -> list[TableJob]:
    return load_jobs_manifest(Path(jobs_path))


@click.group()
def cli() -> None:
    """Uncertainty-aware table data extraction."""


@cli.command()
@click.option("--jobs", "jobs_path", type=click.Path(exists=False), help="Jobs manifest JSON.")
@click.option("--tsr", "tsr_path", type=click.Path(exists=False), help="Structure file (single table).")
@click.option("--ocr", "ocr_path", type=click.Path(exists=False), help="OCR file (single table).")
@click.option("--gt", "gt_path", type=click.Path(exists=False), default=None, help="Ground-truth file.")
@click.option("--table-id", default="table", show_default=True)
@click.option("--domain", default="default", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=False), default=None,
              help="Calibration model to apply (otherwise uncertainty = raw score).")
@click.option("--out-dir", type=click.Path(), required=True)
@config_options
def extract(jobs_path, tsr_path, ocr_path, gt_path, table_id, domain, model_path,
            out_dir, **cfg_kwargs) -> None:
    """Extract cells (grid + alignment + scoring) and write cells artifacts."""
    cfg = build_config(**cfg_kwargs)
    if jobs_path:
        jobs = load_jobs(jobs_path)
    elif tsr_path and ocr_path:
        jobs = [TableJob(table_id=table_id, tsr_input=Path(tsr_path), ocr_input=Path(ocr_path),
                         gt_input=Path(gt_path) if gt_path else None, domain=domain)]
    else:
        raise InputSchemaError("extract needs --jobs or both --tsr and --ocr")
    model = load_model(Path(model_path)) if model_path else None
    for job in jobs:
        path = run_extract(job, cfg, Path(out_dir), model=model)
        click.echo(f"wrote {path}")


@cli.command()
@click.option("--jobs", "jobs_path", type=click.Path(exists=False), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--tune-tau", is_flag=True, default=False,
              help="Sweep the flag threshold on the calibration split (needs GT).")
@config_options
def calibrate(jobs_path, out_dir, tune_tau, **cfg_kwargs) -> None:
    """Fit the conformal threshold on a seeded split of the extracted cells."""
    cfg = build_config(**cfg_kwargs)
    model = run_calibrate(load_jobs(jobs_path), cfg, out_dir=Path(out_dir), tune_tau=tune_tau)
    click.echo(f"q_hat={model.q_hat:.6f} tau={model.flag_threshold_tau} "
               f"n={model.calibration_size}")


@cli.command()
@click.option("--jobs", "jobs_path", type=click.Path(exists=False), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@config_options
def tune(jobs_path, out_dir, **cfg_kwargs) -> None:
    """Calibrate with threshold tuning (and HSS weight search when requested)."""
    cfg = build_config(**cfg_kwargs)
    model = run_calibrate(load_jobs(jobs_path), cfg, out_dir=Path(out_dir), tune_tau=True)
    click.echo(f"q_hat={model.q_hat:.6f} tuned_tau={model.flag_threshold_tau} "
               f"n={model.calibration_size}")


@cli.command()
@click.option("--jobs", "jobs_path", type=click.Path(exists=False), required=True)
@click.option("--model", "model_path", type=click.Path(exists=False), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@config_options
def evaluate(jobs_path, model_path, out_dir, **cfg_kwargs) -> None:
    """Run the three-phase evaluation on the held-out split; write reports."""
    cfg = build_config(**cfg_kwargs)
    model = load_model(Path(model_path))
    run = run_evaluate(load_jobs(jobs_path), model, cfg, out_dir=Path(out_dir))
    agg = run.aggregate
    click.echo(
        f"accuracy_before={agg.accuracy_before:.4f} "
        f"precision_uq={agg.precision_uq:.4f} recall_uq={agg.recall_uq:.4f} "
        f"labor_savings={agg.labor_savings:.4f} "
        f"error_rate_after_hc={agg.error_rate_after_hc:.4f}"
    )


@cli.command()
@click.option("--state-dir", type=click.Path(exists=False), required=True,
              help="Directory holding evaluate artifacts (review_state.json, report.json).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8400, show_default=True)
def serve(state_dir, host, port) -> None:
    """Serve the review API over the artifacts in --state-dir."""
    from .service import serve_review

    serve_review(Path(state_dir), f"{host}:{port}")


@cli.command("make-fixtures")
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--tables", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=20250407, show_default=True)
@click.option("--no-inject", is_flag=True, default=False, help="Generate clean tables.")
@click.option("--no-images", is_flag=True, default=False, help="Skip PNG rendering.")
def make_fixtures(out_dir, tables, seed, no_inject, no_images) -> None:
    """Generate the synthetic corpus (inputs + manifest) for demos and tests."""
    manifest = generate_corpus(
        Path(out_dir), n_tables=tables, seed=seed, inject=not no_inject, images=not no_images
    )
    click.echo(f"wrote {manifest}")


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(130)
    except InputSchemaError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    except DegenerateDataError as exc:
        click.echo(f"degenerate data: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
