"""Three-stage reconstruction: initialization, refiner/HIO loop, final refiner.

A refiner is any callable mapping an ``(n, n)`` image to an ``(n, n)`` image
(e.g. :class:`~phaselab.refiner.RefinerWeights` or
:func:`~phaselab.refiner.identity_refiner`).
"""
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .grid import crop, embed, support_mask
from .initsel import InitParams, multi_start
from .projections import HIOParams, run


@dataclass(frozen=True)
class LoopParams:
    t_iters: int = 5
    tol: float = 1e-3
    max_cycles: int = 200

    def __post_init__(self):
        if self.t_iters < 1 or not self.tol > 0 or self.max_cycles < 1:
            raise ValueError("need t_iters >= 1, tol > 0, max_cycles >= 1")


PAPER_LOOP = LoopParams(t_iters=5, tol=1e-3)


@dataclass
class IterativeResult:
    field: np.ndarray
    cycles: int
    changes: list
    degenerate: bool
    last_refined: np.ndarray


@dataclass
class PipelineResult:
    init_recon: np.ndarray
    intermediate_hio_recon: np.ndarray
    final_recon: np.ndarray
    dnn1_recon: np.ndarray
    cycle_count: int
    changes: list
    degenerate: bool
    timings: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    STAGES = ("init_recon", "dnn1_recon", "intermediate_hio_recon", "final_recon")

    def to_json(self, out_dir, prefix="recon", truth=None):
        """Write stage images as PGM files into ``out_dir`` and return a JSON string.

        Images are referenced by path. With ``truth`` given, registered and raw
        PSNR/SSIM of every stage are included inline.
        """
        from .data import save_pgm
        from .metrics import score

        os.makedirs(out_dir, exist_ok=True)
        doc = {
            "cycle_count": self.cycle_count,
            "changes": list(self.changes),
            "degenerate": self.degenerate,
            "timings": dict(self.timings),
            "provenance": self.provenance,
            "images": {},
            "metrics": {},
        }
        for name in self.STAGES:
            path = os.path.join(out_dir, f"{prefix}_{name}.pgm")
            save_pgm(getattr(self, name), path)
            doc["images"][name] = path
            if truth is not None:
                q = score(getattr(self, name), truth)
                doc["metrics"][name] = {
                    "psnr_registered": q.psnr_db, "ssim_registered": q.ssim,
                    "psnr_raw": q.raw_psnr_db, "ssim_raw": q.raw_ssim,
                    "shift": list(q.shift), "flipped": q.flipped,
                }
        return json.dumps(doc, indent=2, sort_keys=True)


def iterative_stage(y, start, refiner, loop=LoopParams(), hio=HIOParams(), n=None):
    """Alternate the refiner with short HIO runs until refined images settle.

    Cycle ``k`` refines the current reconstruction, ``u_k = refiner(crop(x))``,
    then runs ``loop.t_iters`` HIO steps from ``embed(u_k)``. The loop stops
    once ``||u_k - u_{k-1}|| / ||u_k|| < loop.tol``, where ``u_0`` is the crop
    of ``start``, or after ``loop.max_cycles`` cycles. The last HIO iterate is
    returned, not the last refined image.
    """
    mag = y.y if hasattr(y, "y") else np.asarray(y)
    m = mag.shape[0]
    if n is None:
        n = m // 2
    support = support_mask(n, m)
    params = HIOParams(beta=hio.beta, iterations=loop.t_iters, variant=hio.variant)
    x = np.asarray(start, dtype=np.float64)
    prev = crop(x, n)
    changes = []
    degenerate = False
    for cycle in range(1, loop.max_cycles + 1):
        u = np.asarray(refiner(crop(x, n)), dtype=np.float64)
        norm = np.linalg.norm(u)
        if norm == 0:
            degenerate = True
            x = embed(u, m)
            break
        changes.append(float(np.linalg.norm(u - prev) / norm))
        x = run(mag, embed(u, m), params, support).iterate
        prev = u
        if changes[-1] < loop.tol:
            break
    return IterativeResult(x, cycle, changes, degenerate, prev)


def full_pipeline(y, n, init=InitParams(), refiner1=None, refiner2=None, loop=LoopParams(),
                  hio=HIOParams(), workers=1):
    """Run all three stages and record each stage's output and wall-clock time."""
    t0 = time.perf_counter()
    ms = multi_start(y, n, init, workers=workers)
    init_recon = crop(ms.field, n)
    t1 = time.perf_counter()
    dnn1 = np.asarray(refiner1(init_recon), dtype=np.float64)
    t2 = time.perf_counter()
    m = ms.field.shape[0]
    it = iterative_stage(y, embed(init_recon, m), refiner1, loop, hio, n)
    intermediate = crop(it.field, n)
    t3 = time.perf_counter()
    final = np.asarray(refiner2(intermediate), dtype=np.float64)
    t4 = time.perf_counter()
    timings = {
        "init_s": t1 - t0,
        "dnn1_single_s": t2 - t1,
        "iterative_s": t3 - t2,
        "final_s": t4 - t3,
    }
    timings["total_s"] = timings["init_s"] + timings["iterative_s"] + timings["final_s"]
    provenance = {
        "init": ms.provenance,
        "loop": {"t_iters": loop.t_iters, "tol": loop.tol, "max_cycles": loop.max_cycles},
        "hio": {"beta": hio.beta, "variant": hio.variant},
    }
    return PipelineResult(init_recon, intermediate, final, dnn1, it.cycles, it.changes,
                          it.degenerate, timings, provenance)
