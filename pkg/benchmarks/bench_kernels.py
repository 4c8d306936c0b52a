"""Compare the compiled and numpy kernel backends.

Kernel timings run in-process against each backend module directly. The
end-to-end timings (one multi-start initialization, one training epoch) run
in a subprocess per backend, because the backend is chosen once at import.

    python benchmarks/bench_kernels.py [--repeat 20] [--json out.json]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from phaselab import kernels

END_TO_END = r"""
import json, time
import numpy as np
import phaselab as pl
from phaselab import kernels
img = pl.generate_corpus(pl.CorpusSpec(1, 32, seed=0))[0]
y = pl.simulate(img, 64, pl.NoiseParams(3.0, 0))
t = time.perf_counter()
pl.multi_start(y, 32, pl.InitParams(10, 20, 500))
t_init = time.perf_counter() - t
pairs = [(x, x) for x in pl.generate_corpus(pl.CorpusSpec(32, 32, seed=1))]
t = time.perf_counter()
pl.train(pairs, params=pl.TrainParams(epochs=1))
t_train = time.perf_counter() - t
print(json.dumps({"backend": kernels.BACKEND, "multi_start_s": t_init, "train_epoch_s": t_train}))
"""


def _cases(rng):
    x = rng.standard_normal((8, 16, 32, 32))
    w = rng.standard_normal((16, 16, 3, 3))
    b = rng.standard_normal(16)
    dout = rng.standard_normal((8, 16, 32, 32))
    m = 64
    spec = rng.standard_normal((m, m // 2 + 1)) + 1j * rng.standard_normal((m, m // 2 + 1))
    mag_half = np.abs(rng.standard_normal((m, m // 2 + 1)))
    mag = np.abs(rng.standard_normal((m, m)))
    f = rng.standard_normal((m, m))
    fp = rng.standard_normal((m, m))
    support = np.zeros((m, m), bool)
    support[:32, :32] = True
    return {
        "conv2d_forward 8x16x32x32": lambda k: k.conv2d_forward(x, w, b),
        "conv2d_backward 8x16x32x32": lambda k: k.conv2d_backward(x, w, dout),
        "magnitude_replace 64": lambda k: k.magnitude_replace(spec, mag_half),
        "constraint_update 64": lambda k: k.constraint_update(f, fp, support, 0.9, False),
        "half_spectrum_residual 64": lambda k: k.half_spectrum_residual(spec, mag),
    }


def kernel_timings(repeat):
    backends = kernels.available_backends()
    rows = []
    for name, fn in _cases(np.random.default_rng(0)).items():
        row = {"kernel": name}
        for bname, mod in backends.items():
            fn(mod)  # warm up
            row[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=repeat))
        rows.append(row)
    return list(backends), rows


def end_to_end():
    out = []
    for pure in ("0", "1"):
        env = dict(os.environ, PHASELAB_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                             text=True, check=True)
        out.append(json.loads(res.stdout.strip().splitlines()[-1]))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", help="also write the results to this file")
    args = ap.parse_args(argv)
    names, rows = kernel_timings(args.repeat)
    print(f"{'kernel':32s}" + "".join(f"{n:>14s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for r in rows:
        line = f"{r['kernel']:32s}" + "".join(f"{r[n] * 1e3:11.3f} ms" for n in names)
        if "compiled" in r:
            line += f"{r['python'] / r['compiled']:11.2f}x"
        print(line)
    e2e = end_to_end()
    print()
    for r in e2e:
        print(f"{r['backend']:>9s} backend: multi_start {r['multi_start_s']:.3f} s, "
              f"train epoch {r['train_epoch_s']:.3f} s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": rows, "end_to_end": e2e}, fh, indent=2)


if __name__ == "__main__":
    main()
