"""Command-line experiment runner.

    lbm train   [--config=FILE] [--key=value ...]
    lbm sample  [--config=FILE] [--checkpoint=PATH] [--key=value ...]
    lbm ablate  --sweep={sigma,lambda,steps,timesteps} --values=V1,V2,... [...]
    lbm oracle  [--spec=gauss1d:0,1,2,1] [--checkpoint=PATH] [...]

Exit status: 0 success, 1 configuration error, 2 divergence or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from lbm.codec import encode
from lbm.config import RunConfig, format_value, parse_flags, read_config_file, resolve
from lbm.core import RngStream, write_tensor
from lbm.data import PointToBimodal, ShadowToy, bar_on_right, light_is_left
from lbm.errors import ConfigError, DivergenceError, FormatError, LBMError, ScheduleError
from lbm.evaluation import MetricReport, conditional_coverage, energy_distance, paired_metrics, sliced_wasserstein
from lbm.model import DriftModel, default_widths, forward, init_params, load_checkpoint, save_checkpoint
from lbm.oracle import drift_rms, oracle_table, parse_gaussian_spec
from lbm.sample import translate, write_pgm, write_points_csv
from lbm.schedule import inference_grid
from lbm.train import TrainReport, train_run, write_loss_csv

logger = logging.getLogger("lbm")

ORACLE_TIMES = (0.0, 0.25, 0.5, 0.75)
ORACLE_GRID = np.linspace(-3.0, 3.0, 17)
ORACLE_SIGMA = 0.1
SWEEPS = {"sigma": "sigma", "lambda": "lam", "steps": "steps", "timesteps": "timesteps"}


def model_dims(cfg: RunConfig) -> tuple[int, int]:
    """(latent dim, condition dim) implied by the task and codec."""
    task, codec = cfg.task_obj(), cfg.codec_obj()
    x0, _, c = task.sample(1, RngStream(0))
    latent = int(np.prod(codec.latent_shape(x0.shape)[1:]))
    cond = int(np.prod(encode(codec, c).shape[1:])) if c is not None else 0
    return latent, cond


def write_echo(cfg: RunConfig) -> None:
    Path(cfg.out, "config.resolved").write_text(cfg.to_text(), encoding="utf-8")


def run_train(cfg: RunConfig) -> TrainReport:
    os.makedirs(cfg.out, exist_ok=True)
    write_echo(cfg)
    latent, cond = model_dims(cfg)
    widths = default_widths(latent, cond, cfg.hidden_widths())
    model = init_params(widths, RngStream(cfg.seed).split("init"), cond_dim=cond)
    logger.info("training %s on %s: widths %s, %d iterations", cfg.codec, cfg.task, widths, cfg.iterations)
    report = train_run(cfg.train_config(), cfg.task_obj(), cfg.codec_obj(), model)
    save_checkpoint(cfg.checkpoint_path(), report.model)
    write_loss_csv(os.path.join(cfg.out, "losses.csv"), report)
    logger.info("done in %.1fs", report.wall_clock)
    return report


def _load_matching(cfg: RunConfig) -> DriftModel:
    path = cfg.checkpoint_path()
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    model = load_checkpoint(path)
    latent, cond = model_dims(cfg)
    if model.latent_dim != latent or model.cond_dim != cond:
        raise ConfigError(
            f"checkpoint {path} has latent={model.latent_dim}, cond={model.cond_dim}; "
            f"config implies latent={latent}, cond={cond}"
        )
    return model


def evaluate(cfg: RunConfig, x0, x1, c, out, nfe: int) -> list[MetricReport]:
    task = cfg.task_obj()
    rows = [MetricReport("nfe", float(nfe)), MetricReport("steps", float(cfg.steps))]
    rows.append(MetricReport("energy_distance", energy_distance(out, x1)))
    rows.append(MetricReport("energy_distance_source", energy_distance(x0, x1)))
    sw_stream = RngStream(cfg.seed).split("sliced")
    rows.append(MetricReport("sliced_wasserstein", sliced_wasserstein(out, x1, 64, sw_stream)))
    flat = out.reshape(len(out), -1)
    if flat.shape[1] == 1:
        rows.append(MetricReport("mean", float(flat.mean()), float(flat.std(ddof=1) / math.sqrt(len(flat)))))
        rows.append(MetricReport("std", float(flat.std(ddof=1))))
    if task.coupling == "paired":
        mse, psnr = paired_metrics(out, x1)
        rows += [MetricReport("mse", mse), MetricReport("psnr", psnr)]
    if isinstance(task, PointToBimodal):
        cov = conditional_coverage(out, task.mode_centers, radius=1.0)
        n = len(out)
        for i, f in enumerate(cov.fractions):
            rows.append(MetricReport(f"coverage_mode{i}", f, math.sqrt(f * (1 - f) / n)))
        rows.append(MetricReport("covered", float(cov.covered)))
    if isinstance(task, ShadowToy):
        acc = float(np.mean(bar_on_right(out) == light_is_left(c)))
        rows.append(MetricReport("side_accuracy", acc, math.sqrt(acc * (1 - acc) / len(out))))
    return rows


def write_metrics(path, rows: list[MetricReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value", "stderr"])
        for r in rows:
            w.writerow([r.name, format_value(float(r.value)), format_value(float(r.stderr))])


def run_sample(cfg: RunConfig) -> list[MetricReport]:
    model = _load_matching(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    task, codec = cfg.task_obj(), cfg.codec_obj()
    x0, x1, c = task.sample(cfg.n_eval, RngStream(cfg.seed).split("test"))
    grid = inference_grid(cfg.train_config().timesteps, cfg.steps)
    noise = RngStream(cfg.sample_seed).split("sample")
    out, run = translate(model, codec, x0, grid, cfg.sigma, noise, cond=c)
    out = out.astype(np.float32)
    write_tensor(os.path.join(cfg.out, "samples.lbmt"), out)
    if out.ndim == 2 and out.shape[1] == 2:
        write_points_csv(os.path.join(cfg.out, "samples.csv"), out)
    if out.ndim == 4 and out.shape[1] == 1:
        pgm_dir = Path(cfg.out, "pgm")
        pgm_dir.mkdir(exist_ok=True)
        for i in range(min(8, len(out))):
            write_pgm(pgm_dir / f"sample_{i:03d}.pgm", out[i])
    rows = evaluate(cfg, x0, x1, c, out, run.nfe)
    write_metrics(os.path.join(cfg.out, "metrics.csv"), rows)
    return rows


def _fmt_sweep_value(v) -> str:
    return format_value(v).replace(":", "_").replace("@", "at").replace(",", "_")


def run_ablation(cfg: RunConfig, sweep: str, values: list[str]) -> list[dict]:
    """Train and sample once per sweep value with the same master seed.

    Values sharing an identical training configuration (a ``steps`` sweep)
    reuse one checkpoint.
    """
    if sweep not in SWEEPS:
        raise ConfigError(f"unknown sweep {sweep!r}; expected one of {', '.join(SWEEPS)}")
    field_name = SWEEPS[sweep]
    os.makedirs(cfg.out, exist_ok=True)
    trained: dict[str, str] = {}
    rows = []
    for raw in values:
        kind = type(getattr(cfg, field_name))
        try:
            value = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"sweep {sweep}: bad value {raw!r}") from exc
        sub = cfg.with_values(**{field_name: value})
        sub = sub.with_values(out=os.path.join(cfg.out, f"{sweep}={_fmt_sweep_value(value)}"), checkpoint="")
        sub.validate()
        key = sub.with_values(steps=1, out="", checkpoint="", sample_seed=0).to_text()
        if key not in trained:
            run_train(sub)
            trained[key] = sub.checkpoint_path()
        else:
            os.makedirs(sub.out, exist_ok=True)
            write_echo(sub)
        sub = sub.with_values(checkpoint=trained[key])
        row = {"sweep": sweep, "value": format_value(value), "error": ""}
        try:
            for m in run_sample(sub):
                row[m.name] = format_value(float(m.value))
        except ScheduleError as exc:
            row["error"] = str(exc)
            logger.warning("%s=%s: %s", sweep, raw, exc)
        rows.append(row)
    cols = ["sweep", "value", "error"]
    for r in rows:
        cols += [k for k in r if k not in cols]
    with open(os.path.join(cfg.out, "ablation.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, restval="")
        w.writeheader()
        w.writerows(rows)
    return rows


def run_oracle_check(cfg: RunConfig, spec: str = "gauss1d:0,1,2,1") -> list[dict]:
    sigma = cfg.sigma if "sigma" in cfg.explicit else ORACLE_SIGMA
    gspec = parse_gaussian_spec(spec, sigma)
    rows = oracle_table(gspec, ORACLE_TIMES, ORACLE_GRID, cfg.oracle_n, RngStream(cfg.seed).split("oracle"))
    if cfg.checkpoint:
        model = load_checkpoint(cfg.checkpoint)
        if model.latent_dim != 1 or model.cond_dim:
            raise ConfigError(f"checkpoint {cfg.checkpoint} is not a 1D unconditional drift model")
        for r in rows:
            r["v_model"] = float(forward(model, np.array([[r["z"]]]), r["t"])[0, 0])
        rms = drift_rms(lambda z, t: forward(model, z[:, None], t)[:, 0], gspec, ORACLE_TIMES, ORACLE_GRID)
        logger.info("model vs closed-form drift, density-weighted RMS = %.4f", rms)
    os.makedirs(cfg.out, exist_ok=True)
    cols = ["t", "z", "v_star", "v_mc", "stderr", "count", "abs_dev", "tol_3se"]
    if rows and "v_model" in rows[0]:
        cols.append("v_model")
    with open(os.path.join(cfg.out, "oracle.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([format_value(r[c]) for c in cols])
    return rows


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lbm", description="Latent bridge matching experiments.")
    p.add_argument("command", choices=["train", "sample", "ablate", "oracle"])
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--sweep", help="ablate: parameter to sweep")
    p.add_argument("--values", help="ablate: values, comma separated (';' when values contain commas)")
    p.add_argument("--spec", default="gauss1d:0,1,2,1", help="oracle: Gaussian endpoints mu0,s0,mu1,s1")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, rest = build_parser().parse_known_args(argv)
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve(file_values, parse_flags(rest))
        if args.command == "train":
            run_train(cfg)
        elif args.command == "sample":
            run_sample(cfg)
        elif args.command == "ablate":
            if not args.sweep or not args.values:
                raise ConfigError("ablate needs --sweep and --values")
            sep = ";" if ";" in args.values else ","
            run_ablation(cfg, args.sweep, [v.strip() for v in args.values.split(sep) if v.strip()])
        else:
            run_oracle_check(cfg, args.spec)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return 1
    except (DivergenceError, OSError, FormatError, LBMError) as exc:
        logger.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
