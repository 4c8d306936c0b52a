import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import hio_step_scalar, idft2_direct, residual_direct
from phaselab.grid import embed, forward_dft, inverse_dft, support_mask
from phaselab.initsel import random_init
from phaselab.projections import HIOParams, HIOState, er_step, hio_step, magnitude_project, residual, run


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def consistent_problem(seed, n=8, m=16):
    x = np.random.default_rng(seed).uniform(1, 255, (n, n))
    f = embed(x, m)
    return f, np.abs(forward_dft(f)), support_mask(n, m)


def test_params_validation():
    for beta in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            HIOParams(beta=beta)
    HIOParams(beta=1.0)
    with pytest.raises(ValueError):
        HIOParams(iterations=0)
    with pytest.raises(ValueError):
        HIOParams(variant="GS")
    HIOParams(beta=2.0, variant="ER")  # beta is ignored for ER


def test_magnitude_project_fixed_point():
    f, y, _ = consistent_problem(0)
    assert rel(magnitude_project(f, y), f) <= 1e-10


def test_magnitude_project_idempotent(rng):
    f = rng.standard_normal((16, 16))
    y = np.abs(rng.standard_normal((16, 16)))
    once = magnitude_project(f, y)
    assert rel(magnitude_project(once, y), once) <= 1e-10


def test_magnitude_project_zero_field_uses_unit_phase(rng):
    y = np.abs(rng.standard_normal((8, 8)))
    np.testing.assert_allclose(magnitude_project(np.zeros((8, 8)), y), idft2_direct(y), atol=1e-12)


def test_hio_fixed_point():
    f, y, support = consistent_problem(1)
    nxt = hio_step(HIOState(f), y, HIOParams(), support)
    assert rel(nxt.iterate, f) <= 1e-10
    assert nxt.k == 1 and len(nxt.residual_trace) == 1


def test_er_fixed_point():
    f, y, support = consistent_problem(2)
    assert rel(er_step(HIOState(f), y, support).iterate, f) <= 1e-10


def test_step_matches_scalar_oracle():
    x = np.array([
        [3.0, -1.0, 0.5, 0.0],
        [2.0, 4.0, -0.5, 1.0],
        [0.0, 1.5, 0.0, -2.0],
        [1.0, 0.0, 0.25, 0.0],
    ])
    y = np.array([
        [9.0, 2.0, 1.0, 3.0],
        [4.0, 0.5, 2.5, 1.0],
        [1.0, 3.0, 0.0, 2.0],
        [2.0, 1.0, 4.0, 0.5],
    ])
    support = support_mask(2, 4)
    for beta in (0.9, 0.5):
        got = hio_step(HIOState(x), y, HIOParams(beta=beta), support).iterate
        np.testing.assert_allclose(got, hio_step_scalar(x, y, support, beta), rtol=0, atol=1e-12)
    got = er_step(HIOState(x), y, support).iterate
    np.testing.assert_allclose(got, hio_step_scalar(x, y, support, 0.0, hard=True), rtol=0, atol=1e-12)


def test_step_handles_zero_spectrum_entries():
    # [1, 1, 0, 0] rows have an exactly vanishing spectrum at column 2
    x = np.zeros((4, 4))
    x[0, :2] = 1.0
    y = np.ones((4, 4))
    support = support_mask(2, 4)
    spec = forward_dft(x)
    zero = np.abs(spec) == 0
    assert zero.sum() > 0
    phase = np.where(zero, 1.0, spec / np.where(zero, 1.0, np.abs(spec)))
    xp = np.real(inverse_dft(y * phase))
    gamma = ~support | (xp < 0)
    expected = np.where(gamma, x - 0.9 * xp, xp)
    got = hio_step(HIOState(x), y, HIOParams(), support).iterate
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_er_and_hio_agree_when_gamma_is_empty_of_mass():
    # consistent data: gamma holds only off-support zeros, so both updates give 0 there
    f, y, support = consistent_problem(3)
    a = hio_step(HIOState(f), y, HIOParams(), support).iterate
    b = er_step(HIOState(f), y, support).iterate
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_er_residual_non_increasing():
    _, y, support = consistent_problem(4)
    state = run(y, random_init(8, 16, 0), HIOParams(iterations=20, variant="ER"), support)
    trace = np.array(state.residual_trace)
    assert np.all(np.diff(trace) <= 1e-9 * trace[:-1])


def test_run_single_step_and_composability():
    _, y, support = consistent_problem(5)
    x0 = random_init(8, 16, 1)
    one = run(y, x0, HIOParams(iterations=1), support)
    manual = hio_step(HIOState(x0), y, HIOParams(), support)
    np.testing.assert_array_equal(one.iterate, manual.iterate)
    a = run(y, x0, HIOParams(iterations=7), support)
    b = run(y, run(y, x0, HIOParams(iterations=3), support), HIOParams(iterations=4), support)
    np.testing.assert_array_equal(a.iterate, b.iterate)
    assert a.residual_trace == b.residual_trace
    assert b.k == 7 and len(b.residual_trace) == 7


def test_run_does_not_mutate_input_state():
    _, y, support = consistent_problem(6)
    s0 = HIOState(random_init(8, 16, 2))
    before = s0.iterate.copy()
    run(y, s0, HIOParams(iterations=3), support)
    np.testing.assert_array_equal(s0.iterate, before)
    assert s0.k == 0 and s0.residual_trace == []


def test_trace_entries_are_residuals_of_iterates():
    _, y, support = consistent_problem(7)
    s = run(y, random_init(8, 16, 3), HIOParams(iterations=2), support)
    assert s.residual_trace[-1] == pytest.approx(residual(s.iterate, y), rel=1e-10)


def test_residual_cases(rng):
    f, y, _ = consistent_problem(8)
    assert residual(f, y) <= 1e-18 * np.sum(y**2)
    g = rng.standard_normal((8, 8))
    assert residual(g, np.zeros((8, 8))) == pytest.approx(np.sum(np.abs(forward_dft(g)) ** 2), rel=1e-12)
    h = rng.standard_normal((4, 4))
    yy = np.abs(rng.standard_normal((4, 4)))
    assert residual(h, yy) == pytest.approx(residual_direct(h, yy), rel=1e-10)


seeds = st.integers(0, 2**31)


@given(seeds)
def test_projected_spectrum_has_measured_magnitude(seed):
    r = np.random.default_rng(seed)
    f = r.standard_normal((8, 8))
    y = r.uniform(0.1, 10, (8, 8))
    spec = forward_dft(magnitude_project(f, y))
    np.testing.assert_allclose(np.abs(spec), y, rtol=1e-10)


@given(seeds, st.floats(0.05, 1.0))
def test_iterates_stay_real_and_er_respects_constraints(seed, beta):
    r = np.random.default_rng(seed)
    x = r.standard_normal((12, 12))
    y = r.uniform(0, 20, (12, 12))
    support = support_mask(6, 12)
    h = hio_step(HIOState(x), y, HIOParams(beta=beta), support).iterate
    assert h.dtype == np.float64
    e = er_step(HIOState(x), y, support).iterate
    assert np.all(e[support] >= 0)
    assert np.all(e[~support] == 0)


@given(seeds)
def test_hio_fixed_point_property(seed):
    f, y, support = consistent_problem(seed % 1000, n=4, m=8)
    assert rel(hio_step(HIOState(f), y, HIOParams(), support).iterate, f) <= 1e-10


def test_inverse_of_projection_is_complex_field(rng):
    f = rng.standard_normal((8, 8))
    out = magnitude_project(f, np.abs(forward_dft(f)))
    assert np.iscomplexobj(out)
    np.testing.assert_allclose(inverse_dft(forward_dft(out)), out, atol=1e-12)
