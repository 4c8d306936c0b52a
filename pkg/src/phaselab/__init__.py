"""Fourier phase retrieval with HIO, multi-start initialization and CNN refiners."""
from . import kernels
from .data import BenchReport, BenchRow, CorpusSpec, generate_corpus, load_pgm, save_pgm, write_report
from .errors import FormatError, TrainingDivergedError
from .grid import crop, embed, forward_dft, inverse_dft, support_mask
from .initsel import PAPER_INIT, InitParams, multi_start, random_init
from .measure import MagnitudeMeasurement, NoiseParams, load_measurement, save_measurement, simulate, snr_db
from .metrics import psnr, register, score, ssim
from .pipeline import PAPER_LOOP, LoopParams, PipelineResult, full_pipeline, iterative_stage
from .projections import HIOParams, HIOState, er_step, hio_step, magnitude_project, residual, run
from .refiner import (
    DEFAULT_ARCH, GaussianRefiner, RefinerWeights, TrainParams, filter_frequency_response,
    gradient_check, identity_refiner, init_weights, load_weights, refine, save_weights,
    smooth_baseline, train, zero_weights,
)

__version__ = "0.1.0"
