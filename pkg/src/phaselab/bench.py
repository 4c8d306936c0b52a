"""Benchmark harness: every method on every image, Monte-Carlo run and noise level.

Methods are the stages of one pipeline execution, so their runtimes are
cumulative wall-clock from the start of that execution:

``hio``        initialization-stage reconstruction
``dnn1``       refiner-1 applied once to the ``hio`` output
``iterative``  output of the refiner/HIO loop
``pipeline``   refiner-2 applied to the ``iterative`` output
"""
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .data import BenchReport, BenchRow
from .grid import crop, embed
from .initsel import InitParams, multi_start
from .measure import NoiseParams, simulate
from .metrics import psnr, register, score
from .pipeline import LoopParams, iterative_stage
from .projections import HIOParams, residual
from .refiner import DEFAULT_ARCH, TrainParams, train

METHODS = ("hio", "dnn1", "iterative", "pipeline")
NEEDS_REFINER1 = {"dnn1", "iterative", "pipeline"}


class MissingArtifactError(ValueError):
    category = "missing-artifact"


def check_methods(methods, refiner1=None, refiner2=None):
    """Reject unknown methods and methods whose refiners were not supplied."""
    for name in methods:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {METHODS}")
        if name in NEEDS_REFINER1 and refiner1 is None:
            raise MissingArtifactError(f"method {name!r} needs refiner-1 weights")
        if name == "pipeline" and refiner2 is None:
            raise MissingArtifactError("method 'pipeline' needs refiner-2 weights")


def measurement_seed(base, index):
    return base + index


def run_init_seed(base_seed, run, m_starts):
    # disjoint trial seed ranges per Monte-Carlo run
    return base_seed + run * m_starts


def evaluate(y, n, methods, run=0, init=InitParams(), loop=LoopParams(), hio=HIOParams(),
             refiner1=None, refiner2=None):
    """Run the stages needed for ``methods`` on one measurement.

    Returns a dict ``method -> (recon, residual, cumulative_runtime_s)``.
    """
    mag = y.y
    m = mag.shape[0]
    params = InitParams(init.m_starts, init.s_iters, init.n_iters, init.beta,
                        run_init_seed(init.base_seed, run, init.m_starts))
    out = {}
    t0 = time.perf_counter()
    ms = multi_start(mag, n, params)
    recon = crop(ms.field, n)
    t_init = time.perf_counter() - t0
    out["hio"] = (recon, t_init)
    if "dnn1" in methods:
        t1 = time.perf_counter()
        out["dnn1"] = (np.asarray(refiner1(recon)), t_init + time.perf_counter() - t1)
    if "iterative" in methods or "pipeline" in methods:
        t1 = time.perf_counter()
        it = iterative_stage(mag, embed(recon, m), refiner1, loop, hio, n)
        inter = crop(it.field, n)
        t_iter = t_init + time.perf_counter() - t1
        out["iterative"] = (inter, t_iter)
        if "pipeline" in methods:
            t1 = time.perf_counter()
            out["pipeline"] = (np.asarray(refiner2(inter)), t_iter + time.perf_counter() - t1)
    return {k: (img, residual(embed(img, m), mag), t) for k, (img, t) in out.items() if k in methods}


def run_benchmark(images, alphas, runs=1, methods=METHODS, image_ids=None, m=None,
                  init=InitParams(), loop=LoopParams(), hio=HIOParams(), refiner1=None,
                  refiner2=None, noise_seed=0, workers=1, record_runtime=True):
    """Evaluate ``methods`` over images x runs x alphas and collect a report.

    Image ``i`` at every alpha is measured with noise seed ``noise_seed + i``;
    run ``r`` only changes the initialization seeds. Rows are sorted by
    ``(image_id, run, method, alpha)`` so the report does not depend on
    ``workers``.
    """
    methods = list(methods)
    check_methods(methods, refiner1, refiner2)
    if image_ids is None:
        image_ids = [f"img{i:04d}" for i in range(len(images))]
    jobs = [(i, r, a) for i in range(len(images)) for r in range(runs) for a in alphas]

    def job(spec):
        i, r, alpha = spec
        truth = np.asarray(images[i], dtype=np.float64)
        n = truth.shape[0]
        side = m if m is not None else 2 * n
        y = simulate(truth, side, NoiseParams(float(alpha), measurement_seed(noise_seed, i)))
        rows = []
        for name, (img, res, t) in evaluate(y, n, methods, r, init, loop, hio,
                                            refiner1, refiner2).items():
            q = score(img, truth)
            rows.append(BenchRow(image_ids[i], r, name, float(alpha), q.psnr_db, q.ssim, float(res),
                                 t if record_runtime else None, q.raw_psnr_db, q.raw_ssim))
        return rows

    chunks = _pmap(job, jobs, workers)
    rows = sorted((row for chunk in chunks for row in chunk),
                  key=lambda r: (r.image_id, r.run, r.method, r.alpha))
    meta = {
        "images": len(images), "runs": runs, "alphas": [float(a) for a in alphas],
        "methods": methods, "noise_seed": noise_seed,
        "init": {"m_starts": init.m_starts, "s_iters": init.s_iters, "n_iters": init.n_iters,
                 "beta": init.beta, "base_seed": init.base_seed},
        "loop": {"t_iters": loop.t_iters, "tol": loop.tol, "max_cycles": loop.max_cycles},
    }
    return BenchReport(rows, meta)


def stage_share(report, alpha=None):
    """Mean fraction of pipeline runtime spent in the initialization stage."""
    by_key = {}
    for r in report.rows:
        if alpha is None or r.alpha == alpha:
            by_key.setdefault((r.image_id, r.run, r.alpha), {})[r.method] = r.runtime_s
    shares = [v["hio"] / v["pipeline"] for v in by_key.values()
              if v.get("pipeline") and v.get("hio") is not None]
    return float(np.mean(shares)) if shares else None


def _pmap(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def training_pairs(recons, truths, min_psnr=None):
    """``(recon, target)`` pairs with each truth aligned into its recon's frame.

    A reconstruction is only defined up to shift and 180-degree rotation, so
    the target is the truth moved onto the reconstruction rather than the
    other way round; inputs then look exactly like test-time inputs. With
    ``min_psnr`` set, pairs whose input scores below it are dropped.
    """
    pairs = [(r, register(t, r).aligned) for r, t in zip(recons, truths)]
    if min_psnr is not None:
        pairs = [(r, t) for r, t in pairs if psnr(r, t) >= min_psnr]
    if not pairs:
        raise ValueError(f"no training pair reaches the input floor of {min_psnr} dB")
    return pairs


def train_refiners(images, alpha, init=InitParams(), loop=LoopParams(), hio=HIOParams(),
                   arch=DEFAULT_ARCH, train_params=TrainParams(), noise_seed=0, m=None, workers=1,
                   refiner2_min_psnr=40.0):
    """Train refiner-1 on initialization outputs, then refiner-2 on loop outputs.

    Refiner-2 skips loop outputs below ``refiner2_min_psnr`` (registered, in
    dB). Those are reconstructions the loop failed to recover at all; under
    MSE a handful of them outweighs every good input, and the network then
    learns a global correction that costs precision on the rest.

    Returns ``(weights1, weights2, log)`` where ``log`` holds both loss logs,
    the mean registered PSNR of each stage's training inputs and the number
    of pairs refiner-2 was trained on.
    """
    truths = [np.asarray(x, dtype=np.float64) for x in images]

    def measure_and_init(i):
        x = truths[i]
        n = x.shape[0]
        y = simulate(x, m if m is not None else 2 * n, NoiseParams(float(alpha), measurement_seed(noise_seed, i)))
        return y, crop(multi_start(y, n, init).field, n)

    stage_a = _pmap(measure_and_init, range(len(truths)), workers)
    recons_a = [r for _, r in stage_a]
    w1, log1 = train(training_pairs(recons_a, truths), arch, train_params)

    def loop_output(i):
        y, r = stage_a[i]
        n = r.shape[0]
        return crop(iterative_stage(y, embed(r, y.m), w1, loop, hio, n).field, n)

    recons_b = _pmap(loop_output, range(len(truths)), workers)
    pairs_b = training_pairs(recons_b, truths, refiner2_min_psnr)
    w2, log2 = train(pairs_b, arch, train_params)
    for w, role in ((w1, "refiner1"), (w2, "refiner2")):
        w.meta.update(role=role, alpha=float(alpha), train_images=len(truths))
    log = {
        "refiner1_loss": log1,
        "refiner2_loss": log2,
        "stage_a_input_psnr": float(np.mean([psnr(register(r, t).aligned, t) for r, t in zip(recons_a, truths)])),
        "stage_b_input_psnr": float(np.mean([psnr(register(r, t).aligned, t) for r, t in zip(recons_b, truths)])),
        "refiner2_pairs": len(pairs_b),
    }
    return w1, w2, log
