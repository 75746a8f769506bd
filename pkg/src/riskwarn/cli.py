"""Command-line driver: ``riskwarn {generate,evaluate,sweep-noise,tune,correlate}``.

Tables are comma-separated with a header row. With ``--out DIR`` they are
written to files (plus PNG figures unless ``--no-plots``); otherwise they go
to standard output.
"""

from __future__ import annotations

import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import click
import yaml

from . import experiment as ex
from .config import ConfigError, ga_config, load_config, run_config, suite_spec
from .core import Scenario, ScenarioError, load_scenario, save_scenario
from .metrics import iou
from .pipeline import METHODS
from .synth import NoiseSpec, apply_noise, standard_suite

log = logging.getLogger("riskwarn")

VARIANT_CHOICES = ["plain", "hyst", "hyst-jpdaf", "hysteresis", "hysteresis_jpdaf"]


def table_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


class Output:
    """Destination for tables and figures."""

    def __init__(self, out: str | None, plots: bool):
        self.dir = Path(out) if out else None
        self.plots = plots and self.dir is not None
        if self.dir is not None:
            try:
                self.dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise OSError(f"cannot create output directory {self.dir}: {exc.strerror}") from exc

    def table(self, name: str, header, rows) -> None:
        text = table_text(header, rows)
        if self.dir is None:
            click.echo(f"# {name}")
            click.echo(text, nl=False)
        else:
            (self.dir / name).write_text(text, encoding="utf-8")
            click.echo(f"wrote {self.dir / name}", err=True)

    def figure(self, name: str, fn, *args) -> None:
        if self.plots:
            fn(*args, self.dir / name)
            click.echo(f"wrote {self.dir / name}", err=True)


def common(f):
    f = click.option("--no-plots", is_flag=True, help="Skip PNG figures.")(f)
    f = click.option("--variant", type=click.Choice(VARIANT_CHOICES), default=None)(f)
    f = click.option("--method", type=click.Choice(list(METHODS)), default=None)(f)
    f = click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker processes.")(f)
    f = click.option("--seed", type=int, default=None, help="Master seed.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(f)
    f = click.option("--config", "configs", multiple=True, type=click.Path(), help="YAML config (repeatable).")(f)
    return f


def _config(configs, seed, workers, method, variant) -> dict:
    return load_config(configs, {"seed": seed, "workers": workers, "method": method, "variant": variant})


def _suite(cfg: dict, seed: int | None = None) -> list[Scenario]:
    s = suite_spec(cfg)
    return standard_suite(s.seed if seed is None else seed, s.per_kind, s.duration_range, s.speed_range)


def _scenarios(cfg: dict, directory: str | None) -> list[Scenario]:
    if directory is None:
        return _suite(cfg)
    d = Path(directory)
    if not d.is_dir():
        raise OSError(f"scenario directory not found: {d}")
    files = sorted(d.glob("*.jsonl"))
    if not files:
        raise ValueError(f"no scenario files (*.jsonl) in {d}")
    out = []
    for f in files:
        sc = load_scenario(f)
        out.append(sc if sc.metadata.get("name") else sc.with_observed(sc.observed, name=f.stem))
    return out


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Collision-warning experiments on synthetic pedestrian scenarios."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@cli.command()
@common
def generate(configs, out, seed, workers, method, variant, no_plots):
    """Write the standard suite (and optional noisy copies) as scenario files."""
    cfg = _config(configs, seed, workers, method, variant)
    if out is None:
        raise click.UsageError("generate needs --out")
    dest = Output(out, False)
    suite = _suite(cfg)
    gen = cfg["generate"]
    rows = []
    for k, sc in enumerate(suite):
        name = sc.metadata["name"]
        save_scenario(sc, dest.dir / f"{name}.jsonl")
        rows.append([f"{name}.jsonl", name, sc.metadata["template"], 0.0, 0.0, ""])
        for sigma in gen["sigmas"]:
            for r in range(int(gen["repeats"])):
                spec = NoiseSpec(float(sigma), float(gen["p"]), ex._noise_seed(int(cfg["seed"]), r, k))
                noisy = apply_noise(sc, spec)
                fname = f"{name}_s{float(sigma):g}_p{float(gen['p']):g}_r{r}.jsonl"
                save_scenario(noisy.with_observed(noisy.observed, name=Path(fname).stem), dest.dir / fname)
                rows.append([fname, name, sc.metadata["template"], float(sigma), float(gen["p"]), r])
    dest.table("suite_index.csv", ["file", "scenario", "template", "sigma", "p", "repeat"], rows)


@cli.command()
@common
@click.option("--scenarios", type=click.Path(), default=None, help="Directory of *.jsonl scenarios.")
def evaluate(configs, out, seed, workers, method, variant, no_plots, scenarios):
    """Per-scenario and pooled confusion counts and IoU."""
    cfg = _config(configs, seed, workers, method, variant)
    rc = run_config(cfg)
    res = ex.evaluate(_scenarios(cfg, scenarios), rc)
    rows = [[n, c.tp, c.fp, c.fn, iou(c)] for n, c in zip(res.names, res.counts)]
    p = res.pooled
    rows.append(["pooled", p.tp, p.fp, p.fn, iou(p)])
    Output(out, not no_plots).table(f"evaluate_{rc.method}_{rc.variant}.csv", ["scenario", "tp", "fp", "fn", "iou"], rows)


@cli.command("sweep-noise")
@common
@click.option("--repeats", type=click.IntRange(min=1), default=None)
def sweep_noise(configs, out, seed, workers, method, variant, no_plots, repeats):
    """IoU over the position-noise x id-swap grid, long format plus summary."""
    cfg = _config(configs, seed, workers, method, variant)
    noise = cfg["noise"]
    methods = [method] if method else list(noise["methods"])
    variants = [variant] if variant else list(noise["variants"])
    rcs = [run_config(cfg, m, v) for m in methods for v in variants]
    rows = ex.sweep_noise(_suite(cfg), rcs, noise["sigmas"], noise["ps"], int(repeats or noise["repeats"]),
                          int(cfg["seed"]), int(cfg["workers"]))
    keys = ["method", "variant", "sigma", "p", "repeat", "tp", "fp", "fn", "iou"]
    dest = Output(out, not no_plots)
    dest.table("sweep_noise.csv", keys, [[r[k] for k in keys] for r in rows])
    summary = ex.summarize_sweep(rows)
    skeys = ["method", "variant", "sigma", "p", "repeats", "iou_mean", "iou_std", "iou_pooled"]
    dest.table("sweep_noise_summary.csv", skeys, [[r[k] for k in skeys] for r in summary])
    from .plotting import plot_sweep

    dest.figure("sweep_noise.png", plot_sweep, summary)


@cli.command()
@common
def tune(configs, out, seed, workers, method, variant, no_plots):
    """GA-tune one method (or grid-search hysteresis counts) on the training suite.

    Writes the best parameters, the per-generation history and ``tuned.yaml``,
    an overrides file that later commands accept through ``--config``.
    """
    cfg = _config(configs, seed, workers, method, variant)
    rc = run_config(cfg)
    t = cfg["tune"]
    suite = _suite(cfg)
    train_noise = t.get("noise") or {}
    if train_noise.get("sigma", 0) or train_noise.get("p", 0):
        suite = ex.noisy_copies(suite, float(train_noise.get("sigma", 0.0)), float(train_noise.get("p", 0.0)),
                                int(train_noise.get("copies", 1)), int(cfg["seed"]))
    dest = Output(out, not no_plots)
    stem = f"tune_{rc.method}_{rc.variant}"
    if t.get("hysteresis_grid"):
        base = run_config(cfg, rc.method, "plain")
        rc = replace(rc, **{rc.method: base.method_params()})
        lo_on, hi_on = t.get("n_on", [1, 8])
        lo_off, hi_off = t.get("n_off", [1, 30])
        search = ex.tune_hysteresis(suite, rc, range(lo_on, hi_on + 1), range(lo_off, hi_off + 1))
        best = ex.apply_values(rc, {"n_on": search.best.n_on, "n_off": search.best.n_off})
        keys = ["n_on", "n_off", "tp", "fp", "fn", "iou"]
        dest.table(f"{stem}_grid.csv", keys, [[g[k] for k in keys] for g in search.grid])
        fitness, names = search.best_iou, None
    else:
        rep = ex.tune(suite, rc, ga_config(cfg), bool(t.get("include_uncertainty")),
                      bool(t.get("include_hysteresis")), int(cfg["workers"]))
        best, fitness, names = rep.config, rep.result.best_fitness, rep.space.names
        hkeys = ["generation", "best_fitness", "generation_best", "mean_fitness"]
        dest.table(f"{stem}_history.csv", hkeys, [[h[k] for k in hkeys] for h in rep.result.history])
        from .plotting import plot_history

        dest.figure(f"{stem}_history.png", plot_history, rep.result.history)
    flat = ex.flat_params(best)
    shown = names or list(flat)
    dest.table(f"{stem}_params.csv", ["parameter", "value"], [[k, flat[k]] for k in shown] + [["iou", fitness]])
    tuned = {"overrides": {f"{best.method}/{best.variant}": {k: (int(v) if k in ("n_on", "n_off") else float(v))
                                                            for k, v in flat.items()}}}
    text = yaml.safe_dump(tuned, sort_keys=True)
    if dest.dir is None:
        click.echo("# tuned.yaml")
        click.echo(text, nl=False)
    else:
        path = dest.dir / f"{stem}.yaml"
        path.write_text(text, encoding="utf-8")
        click.echo(f"wrote {path}", err=True)


@cli.command()
@common
@click.option("--samples", type=click.IntRange(min=3), default=None)
def correlate(configs, out, seed, workers, method, variant, no_plots, samples):
    """Latin-hypercube sweep of the core risk parameters and Spearman matrix."""
    cfg = _config(configs, seed, workers, "risk", variant)
    rc = run_config(cfg, "risk")
    n = int(samples or cfg["correlate"]["n_samples"])
    labels, rho, rows = ex.correlate(_suite(cfg), rc, n, int(cfg["seed"]), int(cfg["workers"]))
    dest = Output(out, not no_plots)
    dest.table("correlation.csv", [""] + labels, [[a] + [float(x) for x in row] for a, row in zip(labels, rho)])
    dest.table("correlation_samples.csv", labels, [[p[k] for k in labels[:-1]] + [v] for p, v in rows])
    from .plotting import plot_correlation

    dest.figure("correlation.png", plot_correlation, labels, rho)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="riskwarn", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("error: aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except (ConfigError, ScenarioError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
