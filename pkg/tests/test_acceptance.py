"""Acceptance suite AC-1..AC-10.

Each test records one ``AC-k PASS|FAIL ...`` line; the lines are printed in
the terminal summary (see ``conftest.py``). The desk benchmark behind AC-6,
AC-7 and AC-10 trains both refiners once per session, which takes several
minutes on one CPU.
"""
import os
import time

import numpy as np
import pytest

import phaselab as pl
from oracles import dft2_direct, register_bruteforce, ssim_direct
from phaselab import cli
from phaselab.bench import METHODS, run_benchmark, stage_share, train_refiners
from phaselab.config import RunConfig
from phaselab.metrics import PSNR_CAP

RESULTS = {}


def record(ac, ok, detail):
    RESULTS[ac] = f"{ac} {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[ac]


def rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_ac1_transform_correctness():
    rng = np.random.default_rng(1)
    worst_rt = worst_pars = 0.0
    for m in (8, 16, 64):
        f = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        spec = pl.forward_dft(f)
        worst_rt = max(worst_rt, rel(pl.inverse_dft(spec), f))
        energy = np.sum(np.abs(f) ** 2)
        worst_pars = max(worst_pars, abs(np.sum(np.abs(spec) ** 2) / m**2 - energy) / energy)
    f = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    direct = rel(pl.forward_dft(f), dft2_direct(f))
    ok = worst_rt <= 1e-12 and worst_pars <= 1e-9 and direct <= 1e-10
    record("AC-1", ok, f"round trip {worst_rt:.1e} (<=1e-12), Parseval {worst_pars:.1e} (<=1e-9), "
                       f"direct DFT {direct:.1e} (<=1e-10)")


def test_ac2_projection_properties():
    rng = np.random.default_rng(2)
    worst_idem = worst_fix = worst_step = 0.0
    for p in range(10):
        x = rng.uniform(1, 255, (8, 8))
        f = pl.embed(x, 16)
        y = np.abs(pl.forward_dft(f))
        support = pl.support_mask(8, 16)
        g = rng.standard_normal((16, 16))
        once = pl.magnitude_project(g, y)
        worst_idem = max(worst_idem, rel(pl.magnitude_project(once, y), once))
        for variant in ("HIO", "ER"):
            nxt = pl.run(y, f, pl.HIOParams(iterations=1, variant=variant), support).iterate
            worst_fix = max(worst_fix, rel(nxt, f))
        state = pl.run(y, pl.random_init(8, 16, p), pl.HIOParams(iterations=50, variant="ER"), support)
        trace = np.asarray(state.residual_trace)
        worst_step = max(worst_step, float(np.max((trace[1:] - trace[:-1]) / trace[:-1])))
    ok = worst_idem <= 1e-10 and worst_fix <= 1e-10 and worst_step <= 1e-9
    record("AC-2", ok, f"idempotence {worst_idem:.1e}, fixed point {worst_fix:.1e} (<=1e-10), "
                       f"worst ER residual rise {worst_step:.1e} (<=1e-9)")


def test_ac3_noiseless_recovery():
    t0 = time.perf_counter()
    imgs = pl.generate_corpus(pl.CorpusSpec(20, 32, seed=0))
    params = pl.InitParams(m_starts=10, s_iters=20, n_iters=500, beta=0.9)
    scores = []
    for x in imgs:
        y = pl.simulate(x, 64, pl.NoiseParams(0.0))
        scores.append(pl.score(pl.crop(pl.multi_start(y, 32, params).field, 32), x).psnr_db)
    hits = int(np.sum(np.asarray(scores) >= 40.0))
    elapsed = time.perf_counter() - t0
    record("AC-3", hits >= 16 and elapsed < 120,
           f"{hits}/20 images >= 40 dB (need 16), {elapsed:.1f} s (< 120 s)")


def test_ac4_noise_model():
    cfg = RunConfig()
    imgs = pl.generate_corpus(cfg.test_corpus)
    means = [np.mean([pl.simulate(x, 64, pl.NoiseParams(a, cfg.test_noise_seed + i)).snr_db
                      for i, x in enumerate(imgs)]) for a in (2.0, 3.0, 4.0)]
    exact = all(np.array_equal(pl.simulate(x, 64, pl.NoiseParams(0.0)).y, np.abs(pl.forward_dft(pl.embed(x, 64))))
                for x in imgs[:5])
    ok = means[0] > means[1] > means[2] and exact
    record("AC-4", ok, "mean SNR " + " > ".join(f"{m:.2f}" for m in means)
           + f" dB for alpha 2,3,4; alpha=0 exact: {exact}")


def test_ac5_training_machinery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    w = pl.init_weights(pl.DEFAULT_ARCH, seed=5)
    sample = (rng.uniform(0, 255, (12, 12)), rng.uniform(0, 255, (12, 12)))
    gerr = pl.gradient_check(w, sample)
    # toy task: undo a mild Gaussian blur
    toy = [(pl.smooth_baseline(x, 1.0), x) for x in pl.generate_corpus(pl.CorpusSpec(20, 32, seed=3))]
    _, log = pl.train(toy, params=pl.TrainParams(epochs=10))
    strict = bool(np.all(np.diff(log[:11]) < 0))
    img = rng.uniform(0, 255, (16, 16))
    identity = np.array_equal(pl.refine(pl.zero_weights(), img), img)
    elapsed = time.perf_counter() - t0
    ok = gerr <= 1e-4 and strict and identity and elapsed < 300
    record("AC-5", ok, f"gradient check {gerr:.1e} (<=1e-4), loss strictly decreasing over 10 epochs: {strict}, "
                       f"zero net is identity: {identity}, {elapsed:.1f} s")


@pytest.fixture(scope="module")
def desk():
    """Train on the default 200-image corpus at alpha=3, benchmark on 30 held-out images."""
    cfg = RunConfig()
    t0 = time.perf_counter()
    w1, w2, log = train_refiners(
        pl.generate_corpus(cfg.corpus), cfg.train_alpha, cfg.init, cfg.loop, cfg.hio, cfg.arch, cfg.train,
        noise_seed=cfg.noise_seed, m=cfg.m, refiner2_min_psnr=cfg.refiner2_min_psnr,
    )
    t_train = time.perf_counter() - t0
    report = run_benchmark(
        pl.generate_corpus(cfg.test_corpus), cfg.alphas, cfg.runs, METHODS, m=cfg.m, init=cfg.init,
        loop=cfg.loop, hio=cfg.hio, refiner1=w1, refiner2=w2, noise_seed=cfg.test_noise_seed,
    )
    means = {(a["method"], a["alpha"]): a["mean_psnr"] for a in report.aggregate()}
    return {"w1": w1, "w2": w2, "log": log, "report": report, "means": means,
            "elapsed": time.perf_counter() - t0, "train_s": t_train}


@pytest.mark.slow
def test_ac6_pipeline_benefit(desk):
    m = {k: desk["means"][(k, 3.0)] for k in METHODS}
    gain = m["pipeline"] - m["hio"]
    ordered = m["pipeline"] >= m["iterative"] - 0.1 and m["iterative"] >= m["hio"] - 0.1
    ok = gain >= 1.0 and ordered and desk["elapsed"] < 3600
    record("AC-6", ok, f"alpha=3 mean PSNR hio {m['hio']:.2f}, dnn1 {m['dnn1']:.2f}, iterative "
                       f"{m['iterative']:.2f}, pipeline {m['pipeline']:.2f} dB; gain {gain:+.2f} dB (>=1.0), "
                       f"ordered: {ordered}, {desk['elapsed']:.0f} s (< 3600 s)")


@pytest.mark.slow
def test_ac7_noise_robustness(desk):
    gains = {a: desk["means"][("pipeline", a)] - desk["means"][("hio", a)] for a in (2.0, 4.0)}
    ok = all(g >= 0.5 for g in gains.values())
    record("AC-7", ok, ", ".join(f"alpha={a:g} gain {g:+.2f} dB" for a, g in gains.items()) + " (>=0.5)")


def test_ac8_metrics_oracles():
    rng = np.random.default_rng(8)
    a = rng.uniform(0, 254, (16, 16))
    offset = abs(pl.psnr(a, a + 1) - 48.1308036087)
    self_one = pl.ssim(a, a) == 1.0
    b = np.clip(a + rng.normal(0, 25, (16, 16)), 0, 255)
    ssim_err = abs(pl.ssim(a, b) - ssim_direct(a, b))
    exact = True
    for dy, dx in ((0, 0), (3, 5), (15, 1)):
        for flip in (False, True):
            base = a[::-1, ::-1] if flip else a
            recon = np.roll(base, (dy, dx), axis=(0, 1))
            exact &= pl.psnr(pl.register(recon, a).aligned, a) == PSNR_CAP
    c = rng.uniform(0, 255, (8, 8))
    d = rng.uniform(0, 255, (8, 8))
    brute = abs(np.sum((pl.register(d, c).aligned - c) ** 2) - register_bruteforce(d, c)[0])
    ok = offset <= 1e-6 and self_one and ssim_err <= 1e-8 and exact and brute <= 1e-6
    record("AC-8", ok, f"offset PSNR error {offset:.1e} (<=1e-6), SSIM(a,a)=1: {self_one}, SSIM oracle "
                       f"{ssim_err:.1e} (<=1e-8), shifts/flips exact: {exact}")


@pytest.mark.slow
def test_ac9_determinism(desk, tmp_path):
    paths = {k: str(tmp_path / f"{k}.prw") for k in ("w1", "w2")}
    pl.save_weights(desk["w1"], paths["w1"])
    pl.save_weights(desk["w2"], paths["w2"])
    blobs = []
    for i, threads in enumerate((1, 1, 4)):
        out = tmp_path / f"run{i}"
        code = cli.main([
            "benchmark", "--threads", str(threads), "--seed", "7",
            "--set", "test_corpus.count=4", "--set", "bench.runs=2", "--set", "noise.alphas=[2,3]",
            "--set", "bench.record_runtime=false", "--set", f"paths.weights1={paths['w1']}",
            "--set", f"paths.weights2={paths['w2']}", "--set", f"paths.out_dir={out}",
        ])
        assert code == 0
        blobs.append((out / "report.csv").read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    rows = blobs[0].count(b"\n") - 1
    record("AC-9", ok, f"report.csv byte-identical across 2 runs and --threads 4: {ok} "
                       f"({len(blobs[0])} bytes, {rows} rows)")


@pytest.mark.slow
def test_ac10_runtime_structure(desk):
    share = stage_share(desk["report"])
    # informational: the line is always recorded, the threshold is reported alongside
    RESULTS["AC-10"] = (f"AC-10 {'PASS' if share >= 0.70 else 'FAIL'}  initialization share of pipeline "
                        f"wall-clock {share:.1%} (>=70%, informational)")
    assert np.isfinite(share)


@pytest.fixture(scope="module", autouse=True)
def _export_report():
    yield
    path = os.environ.get("PHASELAB_ACCEPTANCE_OUT")
    if path:
        with open(path, "w") as fh:
            fh.write("\n".join(RESULTS[k] for k in sorted(RESULTS, key=lambda s: int(s[3:]))) + "\n")
