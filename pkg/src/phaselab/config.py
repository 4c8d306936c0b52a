"""Run configuration: one nested JSON document plus dotted-path overrides."""
import copy
import json
import os

from .data import CorpusSpec
from .initsel import InitParams
from .measure import NoiseParams
from .pipeline import LoopParams
from .projections import HIOParams
from .refiner import DEFAULT_ARCH, TrainParams


class ConfigError(ValueError):
    category = "config"


DEFAULTS = {
    "seed": None,
    "grid": {"m": None},
    "corpus": {"count": 200, "n": 32, "seed": 1000, "style": "mixed"},
    "test_corpus": {"count": 30, "n": 32, "seed": 2000, "style": "mixed"},
    "noise": {"alphas": [2.0, 3.0, 4.0], "train_alpha": 3.0, "seed": 10000, "test_seed": 50000},
    "init": {"m_starts": 10, "s_iters": 20, "n_iters": 500, "beta": 0.9, "base_seed": 0},
    "loop": {"t_iters": 5, "tol": 1e-3, "max_cycles": 200},
    "hio": {"beta": 0.9, "variant": "HIO"},
    "train": {"learning_rate": 1e-2, "momentum": 0.9, "epochs": 150, "batch_size": 8, "seed": 0,
              "zero_last_layer": True, "refiner2_min_psnr": 40.0, "arch": [list(layer) for layer in DEFAULT_ARCH]},
    "bench": {"runs": 3, "methods": ["hio", "dnn1", "iterative", "pipeline"], "record_runtime": True},
    "analyze": {"layer": 0, "grid": 64},
    "paths": {
        "corpus_dir": None,
        "test_dir": None,
        "measurement": None,
        "truth": None,
        "weights1": None,
        "weights2": None,
        "out_dir": "out",
    },
}


def _merge(base, override, where=""):
    for key, value in override.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must be an object")
            _merge(base[key], value, path + ".")
        else:
            base[key] = value


def _parse_value(text):
    # JSON literals first (numbers, bools, null, lists); fall back to a bare string
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(doc, assignment):
    """Apply one ``dotted.key=value`` assignment to ``doc`` in place."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    parts = key.split(".")
    node = doc
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config section {'.'.join(parts[:i + 1])!r}")
        node = node[part]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = _parse_value(raw)


class RunConfig:
    """Validated view over a nested configuration document.

    Parameter groups are exposed as the library's frozen parameter objects.
    A top-level ``seed`` overrides ``init.base_seed``.
    """

    def __init__(self, doc=None):
        self.doc = copy.deepcopy(DEFAULTS)
        if doc:
            _merge(self.doc, doc)
        try:
            self._build()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid parameter: {exc}") from exc

    @classmethod
    def load(cls, path=None, overrides=(), seed=None):
        doc = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                with open(path) as fh:
                    user = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
            if not isinstance(user, dict):
                raise ConfigError(f"config {path!r} must hold a JSON object")
            _merge(doc, user)
        for assignment in overrides:
            apply_override(doc, assignment)
        if seed is not None:
            doc["seed"] = seed
        return cls(doc)

    def _build(self):
        d = self.doc
        init = dict(d["init"])
        if d["seed"] is not None:
            if not isinstance(d["seed"], int) or not 0 <= d["seed"] < 2**64:
                raise ConfigError(f"seed must be an unsigned 64-bit integer, got {d['seed']!r}")
            init["base_seed"] = d["seed"]
        self.init = InitParams(**init)
        self.loop = LoopParams(**d["loop"])
        self.hio = HIOParams(beta=d["hio"]["beta"], variant=d["hio"]["variant"])
        self.corpus = CorpusSpec(**d["corpus"])
        self.test_corpus = CorpusSpec(**d["test_corpus"])
        t = d["train"]
        self.train = TrainParams(t["learning_rate"], t["momentum"], t["epochs"], t["batch_size"], t["seed"],
                                 bool(t["zero_last_layer"]))
        self.refiner2_min_psnr = None if t["refiner2_min_psnr"] is None else float(t["refiner2_min_psnr"])
        self.arch = tuple((int(c), int(k)) for c, k in t["arch"])
        noise = d["noise"]
        self.alphas = [float(a) for a in noise["alphas"]]
        if not self.alphas:
            raise ConfigError("noise.alphas must list at least one noise level")
        for a in self.alphas + [noise["train_alpha"]]:
            NoiseParams(alpha=float(a))
        self.train_alpha = float(noise["train_alpha"])
        self.noise_seed = int(noise["seed"])
        self.test_noise_seed = int(noise["test_seed"])
        bench = d["bench"]
        if int(bench["runs"]) < 1:
            raise ConfigError("bench.runs must be >= 1")
        self.runs = int(bench["runs"])
        self.methods = list(bench["methods"])
        self.record_runtime = bool(bench["record_runtime"])
        self.m = d["grid"]["m"]
        self.paths = dict(d["paths"])

    def grid_side(self, n):
        return int(self.m) if self.m is not None else 2 * n

    def require_paths(self, *keys):
        """Check that the named input paths are set and exist."""
        for key in keys:
            value = self.paths.get(key)
            if value is None:
                raise ConfigError(f"paths.{key} is required for this command")
            if not os.path.exists(value):
                raise ConfigError(f"paths.{key} does not exist: {value}")

    def to_json(self):
        return json.dumps(self.doc, indent=2, sort_keys=True)
