"""End-to-end acceptance checks, one test per criterion.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
block of the summary: one PASS/FAIL line per criterion with measured values.
Datasets are read from ``$FUZZYPOOL_DATA`` (default ``~/data``); see
``tools/prepare_data.py``.
"""
import time

import numpy as np
import pytest

from fuzzypool import cli
from fuzzypool.core import PoolWindowSpec
from fuzzypool.data import data_root, load_cifar10_dir, load_mnist
from fuzzypool.experiments import compare_poolings, featuremap_experiment
from fuzzypool.nn import ConvLayer, DenseLayer, build_lenet, train
from fuzzypool.pooling import OPERATORS, fuzzy_pool_forward, pool_backward, pool_forward
from oracles import central_difference, naive_fuzzy_window
from sampling import REGP_TAU, away_from_relu_corners, rel_err, smooth_tiny_network, smooth_volume

K2 = PoolWindowSpec.square(2, 2)


def _require(loader, **kw):
    try:
        return loader(**kw)
    except FileNotFoundError as exc:
        pytest.fail(f"dataset missing under {data_root()} ({exc}); run tools/prepare_data.py")


def _natural_corpus():
    pytest.importorskip("skimage")
    from corpus import natural_corpus

    return natural_corpus()


@pytest.mark.criterion(1, "worked-example oracle")
def test_worked_examples(record_property):
    for values, expected in (([0, 1, 2, 3], 0.8), ([4, 5, 6, 3], 5.125)):
        oracle = naive_fuzzy_window(values)
        got = fuzzy_pool_forward(np.array(values, dtype=float).reshape(1, 2, 2), K2).pooled.item()
        record_property("detail", f"{values} -> {got!r} (oracle {oracle!r})")
        assert oracle == pytest.approx(expected, abs=1e-12)
        assert abs(got - oracle) <= 1e-9


@pytest.mark.criterion(2, "property suite on 10,000 random windows")
def test_property_suite(record_property):
    rng = np.random.default_rng(2024)
    violations = dict.fromkeys(["bounded", "permutation", "constant", "denominator", "channel"], 0)
    total = 0
    for k in (2, 3):
        for z in (1, 4):
            n = 2500
            total += n
            spec = PoolWindowSpec.square(k, k)
            x = rng.uniform(0, 6, size=(n, z, k, k))
            lo = x.min(axis=(2, 3))
            hi = x.max(axis=(2, 3))
            perm = np.argsort(rng.random((n, 1, k * k)), axis=-1)
            shuffled = np.take_along_axis(x.reshape(n, z, k * k), np.broadcast_to(perm, (n, z, k * k)), -1)
            shuffled = shuffled.reshape(x.shape)
            const = np.broadcast_to(rng.uniform(0, 6, size=(n, z, 1, 1)), x.shape).copy()
            zeroed = x.copy()
            dropped = rng.integers(0, z, size=n)
            zeroed[np.arange(n), dropped] = 0
            keep = np.ones((n, z), dtype=bool)
            keep[np.arange(n), dropped] = False
            for op in OPERATORS:
                out = pool_forward(x, op, spec)
                y = out.pooled[..., 0, 0]
                violations["bounded"] += int(np.sum((y < lo - 1e-12) | (y > hi + 1e-12)))
                if op != "regp":
                    y_perm = pool_forward(shuffled, op, spec).pooled[..., 0, 0]
                    violations["permutation"] += int(np.sum(np.abs(y_perm - y) > 1e-12))
                y_const = pool_forward(const, op, spec).pooled[..., 0, 0]
                violations["constant"] += int(np.sum(np.abs(y_const - const[..., 0, 0]) > 1e-12))
                if op == "fuzzy":
                    violations["denominator"] += int(np.sum(~(out.cache.denom > 0)))
                if z > 1:
                    y_zero = pool_forward(zeroed, op, spec).pooled[..., 0, 0]
                    violations["channel"] += int(np.sum(y_zero[keep] != y[keep]))
    record_property("detail", f"{total} windows, violations {violations}")
    assert total == 10_000
    assert sum(violations.values()) == 0


@pytest.mark.criterion(3, "gradient suite vs central differences")
def test_gradient_suite(record_property):
    rng = np.random.default_rng(7)
    specs = [PoolWindowSpec.square(2, 2), PoolWindowSpec.square(3, 2, 1), PoolWindowSpec.square(2, 1)]
    worst = {}
    counts = {}

    def note(kind, err):
        worst[kind] = max(worst.get(kind, 0.0), err)
        counts[kind] = counts.get(kind, 0) + 1

    plan = {"fuzzy": 50, "max": 30, "avg": 30, "regp": 30}
    for op, n in plan.items():
        for i in range(n):
            spec = specs[i % 3]
            x = smooth_volume(rng, op, (2, 5, 5), spec)
            out = pool_forward(x, op, spec, tau=REGP_TAU)
            g = rng.normal(size=out.pooled.shape)
            analytic = pool_backward(out.cache, g)
            numeric = central_difference(
                lambda v: np.sum(pool_forward(v, op, spec, tau=REGP_TAU).pooled * g), x.copy(), 1e-3
            )
            note(op, rel_err(analytic, numeric))

    for _ in range(30):
        while True:
            layer = ConvLayer(rng.normal(size=(2, 2, 3, 3)), rng.normal(size=2), r_max=2.0)
            x = rng.uniform(0, 1, size=(2, 2, 5, 5))
            out, cache = layer.forward(x)
            if away_from_relu_corners(cache[2], 2.0):
                break
        g = rng.normal(size=out.shape)
        gx, (gw, gb) = layer.backward(cache, g)
        f = lambda _: np.sum(layer.forward(x)[0] * g)
        err = max(
            rel_err(gx, central_difference(lambda v: np.sum(layer.forward(v)[0] * g), x.copy(), 1e-3)),
            rel_err(gw, central_difference(f, layer.weights, 1e-3)),
            rel_err(gb, central_difference(f, layer.biases, 1e-3)),
        )
        note("conv", err)

    for _ in range(30):
        while True:
            layer = DenseLayer(rng.normal(size=(4, 6)), rng.normal(size=4), True, r_max=3.0)
            x = rng.uniform(0, 1, size=(3, 6))
            out, cache = layer.forward(x)
            if away_from_relu_corners(cache[2], 3.0):
                break
        g = rng.normal(size=out.shape)
        gx, (gw, gb) = layer.backward(cache, g)
        f = lambda _: np.sum(layer.forward(x)[0] * g)
        err = max(
            rel_err(gx, central_difference(lambda v: np.sum(layer.forward(v)[0] * g), x.copy(), 1e-3)),
            rel_err(gw, central_difference(f, layer.weights, 1e-3)),
            rel_err(gb, central_difference(f, layer.biases, 1e-3)),
        )
        note("dense", err)

    e2e = 0.0
    for i in range(10):
        net, x = smooth_tiny_network(rng)
        label = np.array([i % 2])
        _, grads = net.loss_and_grads(x, label)
        for p, g in zip(net.params(), grads):
            e2e = max(e2e, rel_err(g, central_difference(lambda _: net.loss(x, label), p, 1e-3)))

    record_property("detail", f"{sum(counts.values())} layer instances, worst rel err "
                    + ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
                    + f"; end-to-end worst {e2e:.1e}")
    assert sum(counts.values()) == 200
    assert max(worst.values()) <= 1e-4
    assert e2e <= 1e-3


SEEDS = (0, 1, 2)


@pytest.mark.criterion(4, "MNIST 10k/2k, 3 epochs: median fuzzy accuracy >= max + 1 pp")
def test_mnist_accuracy_trend(record_property):
    train_set = _require(load_mnist, train=True).subset(10_000)
    test_set = _require(load_mnist, train=False).subset(2_000)
    start = time.perf_counter()
    acc = {}
    for op in ("max", "fuzzy"):
        acc[op] = []
        for seed in SEEDS:
            cfg = build_lenet(op, epochs=3, lr=0.01, batch_size=32, seed=seed)
            acc[op].append(train(cfg, train_set, test_set).final_accuracy)
    med = {op: float(np.median(v)) for op, v in acc.items()}
    minutes = (time.perf_counter() - start) / 60
    record_property("detail", f"max {acc['max']} median {med['max']:.4f}; fuzzy {acc['fuzzy']} "
                    f"median {med['fuzzy']:.4f}; margin {100 * (med['fuzzy'] - med['max']):+.2f} pp; "
                    f"{minutes:.1f} min")
    assert minutes <= 30
    assert med["fuzzy"] - med["max"] >= 0.01


@pytest.mark.criterion(5, "natural-image corpus: fuzzy beats max on mean RMS contrast, PSNR and SSIM")
def test_natural_image_ordering(record_property):
    corpus = _natural_corpus()
    assert len(corpus) >= 10 and all(img.shape == (256, 256) for _, img in corpus)
    _, means = compare_poolings(corpus, K2)
    record_property("detail", f"{len(corpus)} images; " + "; ".join(
        f"{op} rms={m.rms_contrast:.2f} psnr={m.psnr_db:.3f} ssim={m.ssim:.4f}" for op, m in means.items()
    ))
    f, m = means["fuzzy"], means["max"]
    assert f.psnr_db > m.psnr_db
    assert f.ssim > m.ssim
    assert f.rms_contrast > m.rms_contrast


@pytest.mark.criterion(6, "CIFAR-10 feature maps under 0.01 noise: fuzzy PSNR > max PSNR")
def test_featuremap_noise_trend(record_property):
    corpus = _natural_corpus()
    train_set = _require(load_cifar10_dir, train=True).subset(10_000)
    test_set = _require(load_cifar10_dir, train=False).subset(2_000)
    report = train(build_lenet("max", (3, 32, 32), epochs=2, seed=0), train_set, test_set)
    network = report.network
    inputs, scores = [], {op: [] for op in OPERATORS}
    for index, (_, img) in enumerate(corpus):
        dump = featuremap_experiment(network, img, variance=0.01, seed=index, spec=K2)
        inputs.append(dump.input_psnr)
        for op in OPERATORS:
            scores[op].append(dump.psnr_db[op])
    mean_in = float(np.mean(inputs))
    means = {op: float(np.mean(v)) for op, v in scores.items()}
    record_property("detail", f"checkpoint accuracy {report.final_accuracy:.4f}; input psnr mean {mean_in:.2f} "
                    f"(range {min(inputs):.2f}..{max(inputs):.2f}); "
                    + ", ".join(f"{op}={v:.2f}" for op, v in means.items()))
    assert abs(mean_in - 20.0) <= 1.0
    assert means["fuzzy"] > means["max"]


@pytest.mark.criterion(7, "train is bit-deterministic at one worker")
def test_train_determinism(tmp_path, record_property):
    _require(load_mnist, train=False)
    blobs = []
    for run in ("a", "b"):
        out = tmp_path / run
        argv = ["train", "--operator", "fuzzy", "--seed", "11", "--workers", "1", "--epochs", "1",
                "--train-subset", "1000", "--test-subset", "200", "--out-dir", str(out)]
        assert cli.main(argv) == 0
        blobs.append((out / "model.fzp").read_bytes())
    record_property("detail", f"two checkpoints of {len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}")
    assert blobs[0] == blobs[1]
