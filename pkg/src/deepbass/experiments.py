"""Experiment configuration, presets reproducing the reported result
grid, the multi-run experiment driver, and artifact export (JSONL
reports, summary CSV, checkpoints, decision grids)."""

from __future__ import annotations

import base64
import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import loop as loop_mod
from . import models
from .autodiff import Adam
from .data import generate_yinyang, load_mnist_idx, make_pools
from .errors import ConfigError
from .loop import LoopConfig, REPORT_COLUMNS
from .oracle import SimulatedOracle

MNIST_DIR_ENV = "DEEPBASS_MNIST_DIR"
DEFAULT_MNIST_DIR = "data/mnist"

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class TrainingConfig:
    """em: the active EM loop; supervised: plain training on the labeled
    pool until validation accuracy stagnates (patience epochs without an
    improvement of at least min_delta).

    Patience is counted in epochs, and an epoch over a pool smaller than
    the batch size is a single optimizer step, so small pools need a large
    patience to actually reach their plateau.
    """

    mode: str = "em"
    patience: int = 200
    min_delta: float = 0.001
    max_epochs: int = 3000

    def __post_init__(self):
        if self.mode not in ("em", "supervised"):
            raise ConfigError(f"training mode must be em|supervised, got {self.mode!r}")


@dataclass
class ExperimentConfig:
    name: str
    dataset: dict
    model: str
    n_labeled: int
    balanced: bool
    loop: LoopConfig = field(default_factory=LoopConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    oracle: dict = field(default_factory=lambda: {"mode": "simulated"})
    runs: int = 10
    seed: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        if isinstance(self.loop, dict):
            self.loop = LoopConfig(**self.loop)
        if isinstance(self.training, dict):
            self.training = TrainingConfig(**self.training)
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")

    def to_dict(self):
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def derive_run_seed(master_seed: int, run_index: int) -> int:
    """Stable per-run seed: sha256 over (master seed, run index)."""
    digest = hashlib.sha256(f"{master_seed}:{run_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**31 - 1)


# ----------------------------------------------------------------------
# presets


def _yinyang_dataset():
    return {"name": "yinyang", "n_per_class": 500, "val_per_class": 500}


def _mnist_dataset(unlabeled_pool=None):
    return {"name": "mnist", "dir": DEFAULT_MNIST_DIR, "unlabeled_pool": unlabeled_pool}


def _yinyang(name, n_labeled, threshold, acquisition, iterations, **kw):
    return ExperimentConfig(
        name=name,
        dataset=_yinyang_dataset(),
        model=models.ARCH_MLP_YINYANG,
        n_labeled=n_labeled,
        balanced=True,
        loop=LoopConfig(
            threshold_policy=threshold,
            acquisition_policy=acquisition,
            acquire_count=2 if acquisition != "none" else 0,
            acquire_every=2,
            iterations=iterations,
            initial_presentations=2000,
            **kw,
        ),
    )


def _yinyang_supervised(name, n_labeled):
    return ExperimentConfig(
        name=name,
        dataset=_yinyang_dataset(),
        model=models.ARCH_MLP_YINYANG,
        n_labeled=n_labeled,
        balanced=True,
        loop=LoopConfig(),
        training=TrainingConfig(mode="supervised"),
    )


def _mnist(name, threshold, acquisition, n_labeled=100, iterations=200, unlabeled_pool=None, runs=10):
    return ExperimentConfig(
        name=name,
        dataset=_mnist_dataset(unlabeled_pool),
        model=models.ARCH_CNN_MNIST,
        n_labeled=n_labeled,
        balanced=True,
        runs=runs,
        loop=LoopConfig(
            threshold_policy=threshold,
            acquisition_policy=acquisition,
            acquire_count=10 if acquisition != "none" else 0,
            acquire_every=10,
            iterations=iterations,
            initial_presentations=2000,
        ),
    )


def _mnist_supervised(name, n_labeled, balanced=True):
    # full-data epochs are hundreds of steps, so stagnation shows quickly
    patience = 10 if n_labeled >= 60000 else 200
    max_epochs = 100 if n_labeled >= 60000 else 1500
    return ExperimentConfig(
        name=name,
        dataset=_mnist_dataset(),
        model=models.ARCH_CNN_MNIST,
        n_labeled=n_labeled,
        balanced=balanced,
        loop=LoopConfig(),
        training=TrainingConfig(
            mode="supervised", patience=patience, max_epochs=max_epochs
        ),
    )


def _build_presets():
    presets = {}

    presets["yinyang-initial"] = lambda: _yinyang("yinyang-initial", 8, "step_wise", "none", 0)
    presets["yinyang-semi"] = lambda: _yinyang("yinyang-semi", 8, "step_wise", "none", 72)
    presets["yinyang-active"] = lambda: _yinyang("yinyang-active", 8, "none", "max_entropy", 72)
    presets["yinyang-active-semi"] = lambda: _yinyang(
        "yinyang-active-semi", 8, "step_wise", "max_entropy", 72
    )
    presets["yinyang-supervised-80"] = lambda: _yinyang_supervised("yinyang-supervised-80", 80)
    presets["yinyang-supervised-1000"] = lambda: _yinyang_supervised(
        "yinyang-supervised-1000", 1000
    )

    presets["mnist-alldata-maxent"] = lambda: _mnist(
        "mnist-alldata-maxent", "all_data", "max_entropy"
    )
    presets["mnist-stepwise-maxent"] = lambda: _mnist(
        "mnist-stepwise-maxent", "step_wise", "max_entropy"
    )
    presets["mnist-alldata-aboveavg"] = lambda: _mnist(
        "mnist-alldata-aboveavg", "all_data", "above_average"
    )
    presets["mnist-stepwise-aboveavg"] = lambda: _mnist(
        "mnist-stepwise-aboveavg", "step_wise", "above_average"
    )
    presets["mnist-alldata-maxent-1000"] = lambda: _mnist(
        "mnist-alldata-maxent-1000", "all_data", "max_entropy", iterations=900, runs=1
    )
    for n in (100, 300, 600, 1000, 3000):
        presets[f"mnist-semi-{n}"] = (
            lambda n=n: _mnist(f"mnist-semi-{n}", "all_data", "none", n_labeled=n)
        )
        presets[f"mnist-supervised-{n}"] = (
            lambda n=n: _mnist_supervised(f"mnist-supervised-{n}", n)
        )
    presets["mnist-supervised-60000"] = lambda: _mnist_supervised(
        "mnist-supervised-60000", 60000, balanced=False
    )
    # reduced CI smoke: small unlabeled pool, fewer iterations
    presets["mnist-smoke"] = lambda: _mnist(
        "mnist-smoke", "all_data", "max_entropy", iterations=60, unlabeled_pool=10000, runs=1
    )
    return presets


PRESETS = _build_presets()


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r}; available: {known}")
    return PRESETS[name]()


# ----------------------------------------------------------------------
# dataset loading


def mnist_dir(config_dir=None):
    return Path(os.environ.get(MNIST_DIR_ENV) or config_dir or DEFAULT_MNIST_DIR)


def mnist_available(config_dir=None) -> bool:
    d = mnist_dir(config_dir)
    return all((d / f).exists() for f in MNIST_FILES.values())


def _load_dataset(cfg: ExperimentConfig, rng):
    ds = cfg.dataset
    if ds["name"] == "yinyang":
        train_x, train_y = generate_yinyang(ds["n_per_class"], rng)
        val_x, val_y = generate_yinyang(ds["val_per_class"], rng)
        return train_x, train_y, val_x, val_y
    if ds["name"] == "mnist":
        d = mnist_dir(ds.get("dir"))
        if not mnist_available(ds.get("dir")):
            raise ConfigError(
                f"MNIST IDX files not found under {d}; set {MNIST_DIR_ENV} "
                f"or place {', '.join(MNIST_FILES.values())} there"
            )
        train_x, train_d = load_mnist_idx(
            d / MNIST_FILES["train_images"], d / MNIST_FILES["train_labels"]
        )
        val_x, val_d = load_mnist_idx(
            d / MNIST_FILES["test_images"], d / MNIST_FILES["test_labels"]
        )
        train_x = train_x[..., None]
        val_x = val_x[..., None]
        pool = ds.get("unlabeled_pool")
        if pool:
            keep = rng.choice(train_x.shape[0], size=pool + cfg.n_labeled, replace=False)
            keep = np.sort(keep)
            train_x, train_d = train_x[keep], train_d[keep]
        return train_x, train_d + 1, val_x, val_d + 1
    raise ConfigError(f"unknown dataset {ds['name']!r}")


def point_payload(x):
    return {"kind": "point", "x": float(x[0]), "y": float(x[1])}


def image_payload(x):
    from PIL import Image

    arr = np.asarray(x)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    img = Image.fromarray((np.clip(arr, 0, 1) * 255).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return {"kind": "image", "png_base64": base64.b64encode(buf.getvalue()).decode()}


def _payload_fn(cfg: ExperimentConfig):
    return point_payload if cfg.dataset["name"] == "yinyang" else image_payload


# ----------------------------------------------------------------------
# supervised baseline


def train_supervised(model, inputs, labels, val_inputs, val_labels, training, cfg, rng):
    """Train on a fixed labeled set until validation accuracy stagnates.

    Stops after `patience` epochs without an improvement of at least
    `min_delta`; returns (reports, best validation accuracy seen).
    """
    adam = Adam(model.trainable)
    best = -1.0
    since_best = 0
    reports = []
    for epoch in range(1, training.max_epochs + 1):
        perm = rng.permutation(inputs.shape[0])
        for start in range(0, inputs.shape[0], cfg.loop.batch_size):
            sel = perm[start : start + cfg.loop.batch_size]
            loop_mod.train_step(model, inputs[sel], labels[sel], adam, rng)
        acc = loop_mod.accuracy(model, val_inputs, val_labels)
        reports.append(
            loop_mod.IterationReport(
                iteration=epoch,
                val_acc=acc,
                n_labeled=inputs.shape[0],
                n_pseudo=0,
                pseudo_err=None,
                theta=None,
            )
        )
        if acc >= best + training.min_delta:
            best = acc
            since_best = 0
        else:
            since_best += 1
            if since_best >= training.patience:
                break
    return reports, best


# ----------------------------------------------------------------------
# runner


class JsonlReporter:
    def __init__(self, path):
        self._f = open(path, "w")

    def __call__(self, report):
        row = report.row()
        row["n_acquired"] = report.n_acquired
        row["oracle_error"] = report.oracle_error
        self._f.write(json.dumps(row) + "\n")
        self._f.flush()

    def close(self):
        self._f.close()


def write_reports_csv(path, reports):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            row = r.row()
            writer.writerow([row[c] for c in REPORT_COLUMNS])


def run_single(cfg: ExperimentConfig, run_seed: int, out_dir: Path, run_index: int):
    """One independent run; returns (final val acc, reports)."""
    ss = np.random.SeedSequence(run_seed)
    data_seed, init_seed, loop_seed = ss.spawn(3)
    data_rng = np.random.default_rng(data_seed)
    train_x, train_y, val_x, val_y = _load_dataset(cfg, data_rng)
    spec = models.spec_by_name(cfg.model)
    model = models.build(spec, seed=int(init_seed.generate_state(1)[0]))
    rng = np.random.default_rng(loop_seed)

    reporter = JsonlReporter(out_dir / f"run{run_index:02d}.jsonl")
    checkpoint = out_dir / f"run{run_index:02d}-final.npz"
    try:
        if cfg.training.mode == "supervised":
            pools, truth = make_pools(
                train_x, train_y, cfg.n_labeled, cfg.balanced, data_rng,
                n_classes=spec.n_classes,
            )
            reports, best = train_supervised(
                model, pools.labeled_inputs(), pools.labels, val_x, val_y,
                cfg.training, cfg, rng,
            )
            for r in reports:
                reporter(r)
            final = best
        else:
            pools, truth = make_pools(
                train_x, train_y, cfg.n_labeled, cfg.balanced, data_rng,
                n_classes=spec.n_classes,
            )
            if cfg.oracle.get("mode", "simulated") != "simulated":
                raise ConfigError(
                    "run_experiment drives the simulated oracle; use the "
                    "serve-oracle command for a human-labeled run"
                )
            oracle = SimulatedOracle(truth)
            reports, model = loop_mod.run(
                model,
                pools,
                cfg.loop,
                oracle,
                val_inputs=val_x,
                val_labels=val_y,
                rng=rng,
                reporter=reporter,
                truth=truth,
                payload_fn=_payload_fn(cfg),
                run_id=f"{cfg.name}-r{run_index}",
                checkpoint_on_error=out_dir / f"run{run_index:02d}-aborted.npz",
            )
            final = reports[-1].val_acc
    finally:
        reporter.close()
    write_reports_csv(out_dir / f"run{run_index:02d}.csv", reports)
    model.save(checkpoint)
    return final, reports


def summarize(finals):
    mean = float(np.mean(finals))
    std = float(np.std(finals, ddof=1)) if len(finals) > 1 else None
    return mean, std


def run_experiment(cfg: ExperimentConfig, progress=None):
    """Execute cfg.runs independent runs with derived seeds.

    Writes per-run JSONL reports and checkpoints plus a summary CSV with
    the mean and sample standard deviation of the final validation
    accuracy. Returns a summary dict.
    """
    out_dir = Path(cfg.out_dir) / cfg.name
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.save(out_dir / "config.json")
    finals = []
    for i in range(cfg.runs):
        seed = derive_run_seed(cfg.seed, i)
        final, _ = run_single(cfg, seed, out_dir, i)
        finals.append(final)
        if progress is not None:
            progress(i, final)
    mean, std = summarize(finals)
    with open(out_dir / "summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["run", "seed", "final_val_acc"])
        for i, acc in enumerate(finals):
            writer.writerow([i, derive_run_seed(cfg.seed, i), f"{acc:.6f}"])
        writer.writerow(["mean", "", f"{mean:.6f}"])
        writer.writerow(["stddev", "", "n/a" if std is None else f"{std:.6f}"])
    return {"name": cfg.name, "finals": finals, "mean": mean, "stddev": std}


def export_decision_grid(model, bounds, resolution, path):
    """Write a CSV of (x, y, p_red) over a uniform grid; 2-D models only."""
    if tuple(model.spec.input_shape) != (2,):
        raise ConfigError(
            f"decision grids need a 2-D input model, got input shape "
            f"{model.spec.input_shape}"
        )
    xmin, xmax, ymin, ymax = bounds
    nx, ny = resolution
    xs = np.linspace(xmin, xmax, nx)
    ys = np.linspace(ymin, ymax, ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1).astype(np.float32)
    probs = []
    for start in range(0, grid.shape[0], 4096):
        probs.append(model.forward(grid[start : start + 4096], mode="eval")[:, 0])
    p_red = np.concatenate(probs)
    with open(path, "w") as f:
        f.write("x,y,p_red\n")
        for (x, y), p in zip(grid, p_red):
            f.write(f"{x:.6f},{y:.6f},{p:.6f}\n")
    return grid.shape[0]
