"""Command-line entry point.

Verbs:
  run <preset|config.json>    execute an experiment (simulated oracle)
  presets                     list the shipped presets
  grid <checkpoint>           export a decision-probability grid CSV
  serve-oracle <preset|json>  run with a human oracle behind the HTTP API
"""

from __future__ import annotations

import argparse
import sys
import threading
from pathlib import Path

import numpy as np

from . import experiments, loop as loop_mod, models
from .errors import ConfigError, DeepBassError
from .oracle import OracleQueue


def _load_config(ref) -> experiments.ExperimentConfig:
    if Path(ref).exists():
        return experiments.ExperimentConfig.load(ref)
    return experiments.preset(ref)


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.runs is not None:
        cfg.runs = args.runs
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def cmd_run(args):
    cfg = _apply_overrides(_load_config(args.config), args)
    print(f"running {cfg.name}: {cfg.runs} run(s), seed {cfg.seed}")
    summary = experiments.run_experiment(
        cfg, progress=lambda i, acc: print(f"  run {i}: final val acc {acc:.4f}")
    )
    std = "n/a" if summary["stddev"] is None else f"{summary['stddev']:.4f}"
    print(f"mean final val acc {summary['mean']:.4f} (stddev {std})")
    print(f"artifacts in {Path(cfg.out_dir) / cfg.name}")


def cmd_presets(_args):
    for name in sorted(experiments.PRESETS):
        cfg = experiments.PRESETS[name]()
        mode = cfg.training.mode
        pol = f"{cfg.loop.threshold_policy}/{cfg.loop.acquisition_policy}"
        print(f"{name:28s} {cfg.dataset['name']:8s} {mode:10s} {pol}")


def cmd_grid(args):
    model = models.load_model(args.checkpoint)
    n = experiments.export_decision_grid(
        model, tuple(args.bounds), tuple(args.res), args.out or "grid.csv"
    )
    print(f"wrote {n} grid rows to {args.out or 'grid.csv'}")


def cmd_serve_oracle(args):
    import uvicorn

    from .service import RunHandle, RunStatus, create_app

    cfg = _apply_overrides(_load_config(args.config), args)
    if cfg.training.mode != "em":
        raise ConfigError("serve-oracle needs an EM-mode experiment")
    out_dir = Path(cfg.out_dir) / cfg.name
    out_dir.mkdir(parents=True, exist_ok=True)

    seed = experiments.derive_run_seed(cfg.seed, 0)
    ss = np.random.SeedSequence(seed)
    data_seed, init_seed, loop_seed = ss.spawn(3)
    data_rng = np.random.default_rng(data_seed)
    train_x, train_y, val_x, val_y = experiments._load_dataset(cfg, data_rng)
    spec = models.spec_by_name(cfg.model)
    model = models.build(spec, seed=int(init_seed.generate_state(1)[0]))
    pools, truth = experiments.make_pools(
        train_x, train_y, cfg.n_labeled, cfg.balanced, data_rng, n_classes=spec.n_classes
    )

    oracle_cfg = cfg.oracle if cfg.oracle.get("mode") == "remote" else {}
    queue = OracleQueue(
        n_classes=spec.n_classes,
        timeout_s=oracle_cfg.get("timeout_s"),
        journal_path=str(out_dir / "oracle-journal.jsonl"),
    )
    if cfg.loop.max_pending is None and cfg.loop.acquire_count > 0:
        # keep a human-paced run from flooding the queue
        cfg.loop.max_pending = 3 * cfg.loop.acquire_count
    status = RunStatus(
        total_iterations=cfg.loop.iterations,
        label_budget=(cfg.loop.iterations // cfg.loop.acquire_every)
        * cfg.loop.acquire_count,
    )
    runs = {cfg.name: RunHandle(queue=queue, status=status, n_classes=spec.n_classes)}
    app = create_app(runs, token=oracle_cfg.get("token"))

    reporter = experiments.JsonlReporter(out_dir / "run00.jsonl")

    def tee(report):
        reporter(report)
        status.update(report)

    def train():
        try:
            loop_mod.run(
                model,
                pools,
                cfg.loop,
                queue,
                val_inputs=val_x,
                val_labels=val_y,
                rng=np.random.default_rng(loop_seed),
                reporter=tee,
                truth=truth,
                payload_fn=experiments._payload_fn(cfg),
                run_id=cfg.name,
                checkpoint_on_error=out_dir / "run00-aborted.npz",
            )
            model.save(out_dir / "run00-final.npz")
        finally:
            status.finish()
            reporter.close()

    thread = threading.Thread(target=train, daemon=True, name="deepbass-loop")
    thread.start()
    print(f"labeling API for run {cfg.name!r} at http://{args.host}:{args.port}/v1")
    print(f"UI (if built) at http://{args.host}:{args.port}/ui/?run={cfg.name}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def build_parser():
    p = argparse.ArgumentParser(prog="deepbass", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="override master seed")
        sp.add_argument("--runs", type=int, default=None, help="override run count")
        sp.add_argument("--out", default=None, help="override output directory")

    sp = sub.add_parser("run", help="run an experiment with the simulated oracle")
    sp.add_argument("config", help="preset name or path to a config JSON")
    common(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("presets", help="list available presets")
    sp.set_defaults(fn=cmd_presets)

    sp = sub.add_parser("grid", help="export decision grid CSV from a checkpoint")
    sp.add_argument("checkpoint")
    sp.add_argument(
        "--bounds", type=float, nargs=4, default=[-2.0, 2.0, -2.0, 2.0],
        metavar=("XMIN", "XMAX", "YMIN", "YMAX"),
    )
    sp.add_argument("--res", type=int, nargs=2, default=[100, 100], metavar=("NX", "NY"))
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_grid)

    sp = sub.add_parser("serve-oracle", help="serve the human-labeling API for a run")
    sp.add_argument("config")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    common(sp)
    sp.set_defaults(fn=cmd_serve_oracle)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except DeepBassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
