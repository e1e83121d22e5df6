"""End-to-end runs of the conv architecture on synthetic images: the EM
loop trains the real 14,970-parameter network, and the experiment driver
exercises its image-dataset branch against IDX files on disk."""

import numpy as np

from deepbass import experiments
from deepbass.data import make_pools, save_idx_images, save_idx_labels
from deepbass.loop import LoopConfig, accuracy, run
from deepbass.mc import McConfig
from deepbass.models import build, cnn_mnist_spec
from deepbass.oracle import SimulatedOracle

from synth_images import make_images


def test_em_loop_trains_the_conv_net(tmp_path):
    train_x, train_d = make_images(30, seed=0)
    val_x, val_d = make_images(8, seed=1)
    train_x, val_x = train_x[..., None], val_x[..., None]
    train_y, val_y = train_d + 1, val_d + 1

    pools, truth = make_pools(train_x, train_y, 20, balanced=True, seed_or_rng=2)
    model = build(cnn_mnist_spec(), seed=3)
    before = accuracy(model, val_x, val_y)
    cfg = LoopConfig(
        threshold_policy="all_data",
        acquisition_policy="max_entropy",
        acquire_count=5,
        acquire_every=2,
        iterations=2,
        upsample_factor=3,
        mc=McConfig(passes_unlabeled=2, passes_labeled=3),
        batch_size=64,
        initial_presentations=25,
    )
    reports, model = run(
        model, pools, cfg, SimulatedOracle(truth),
        val_inputs=val_x, val_labels=val_y,
        rng=np.random.default_rng(4), truth=truth,
    )
    assert reports[-1].val_acc > max(before, 0.5)
    assert pools.n_labeled == 20 + 5
    assert (pools.labels == truth.reveal(pools.labeled_ids)).all()
    # pseudo-labels on this easy problem should be mostly right already
    assert reports[-1].pseudo_err is not None and reports[-1].pseudo_err < 0.5


def test_experiment_driver_image_branch(tmp_path, monkeypatch):
    data_dir = tmp_path / "idx"
    data_dir.mkdir()
    train_x, train_d = make_images(12, seed=5)
    test_x, test_d = make_images(4, seed=6)
    save_idx_images(data_dir / "train-images-idx3-ubyte", (train_x * 255).astype(np.uint8))
    save_idx_labels(data_dir / "train-labels-idx1-ubyte", train_d.astype(np.uint8))
    save_idx_images(data_dir / "t10k-images-idx3-ubyte", (test_x * 255).astype(np.uint8))
    save_idx_labels(data_dir / "t10k-labels-idx1-ubyte", test_d.astype(np.uint8))
    monkeypatch.setenv(experiments.MNIST_DIR_ENV, str(data_dir))
    assert experiments.mnist_available()

    cfg = experiments.ExperimentConfig(
        name="synth-images",
        dataset={"name": "mnist", "dir": str(data_dir), "unlabeled_pool": 60},
        model="cnn-mnist",
        n_labeled=20,
        balanced=True,
        runs=1,
        seed=9,
        out_dir=str(tmp_path / "out"),
        loop=LoopConfig(
            threshold_policy="step_wise",
            acquisition_policy="above_average",
            acquire_count=3,
            acquire_every=1,
            iterations=2,
            upsample_factor=2,
            mc=McConfig(passes_unlabeled=2, passes_labeled=2),
            batch_size=64,
            initial_presentations=10,
        ),
    )
    summary = experiments.run_experiment(cfg)
    out = tmp_path / "out" / "synth-images"
    assert (out / "run00.jsonl").exists()
    assert (out / "run00.csv").exists()
    assert (out / "run00-final.npz").exists()
    assert 0.0 <= summary["mean"] <= 1.0
