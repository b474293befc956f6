import json

import numpy as np
import pytest

from dynpat.grid import DataSeq, Grid2D, RegParams
from dynpat.phantom import (
    EllipseTrack,
    default_tracks,
    image_metrics,
    make_dynamic_phantom,
    simulate_data,
    tracks_from_json,
    tracks_to_json,
)
from dynpat.recon import RECIPES, reference_flow, run_recipe, tvtvl2_params
from dynpat.sampling import SamplingSchedule, make_rsp_schedule

from conftest import translating_blob

GRID = Grid2D()


def test_empty_tracks_zero():
    assert np.all(make_dynamic_phantom(GRID, [], 3) == 0)


def test_static_ellipse():
    p = make_dynamic_phantom(GRID, [EllipseTrack.static((50, 40), (10, 5))], 4)
    assert np.all(p == p[0])
    assert p[0, 40, 50] == 1.0 and p[0, 40, 58] == 1.0 and p[0, 40, 62] == 0.0
    assert p[0, 46, 50] == 0.0


def test_track_errors():
    with pytest.raises(ValueError):
        make_dynamic_phantom(GRID, [EllipseTrack.static((5, 50), (10, 3))], 2)
    with pytest.raises(ValueError):
        EllipseTrack.static((50, 50), (0, 3))
    with pytest.raises(ValueError):
        make_dynamic_phantom(GRID, [], 0)


def test_default_phantom_properties():
    p = make_dynamic_phantom(GRID, default_tracks(), 25)
    assert p.shape == (25, 100, 100)
    assert p.min() >= 0 and p.max() <= 1
    area = (p > 0).sum(axis=(1, 2))
    assert np.max(np.abs(np.diff(area)) / area[:-1]) < 0.10
    # three separated tubes in the first frame
    from scipy.ndimage import label
    assert label(p[0] > 0)[1] == 3


def test_tracks_json_roundtrip():
    tracks = default_tracks()
    assert tracks_from_json(tracks_to_json(tracks)) == tracks
    assert len(tracks) == 3
    c, a, ang = tracks[0].at(0, 25)
    assert c == tracks[0].center_start
    c, a, ang = tracks[0].at(24, 25)
    assert np.allclose(c, tracks[0].center_end) and ang == pytest.approx(tracks[0].angle_end)


def test_simulate_noiseless_and_deterministic(small_op):
    p = 0.8 * translating_blob(n=16, T=2, width=2.0, center=(6.0, 8.0))
    sched = make_rsp_schedule(small_op.n_sensors, 2, seed=0)
    full, sub, snr = simulate_data(p, small_op, sched, 0.0)
    clean = small_op.forward(p)
    assert np.array_equal(full.blocks, clean) and snr == np.inf
    for t in range(2):
        assert np.array_equal(sub.blocks[t], clean[t, sched.indices(t)])
    a = simulate_data(p, small_op, sched, 1e-3, seed=7)
    b = simulate_data(p, small_op, sched, 1e-3, seed=7)
    c = simulate_data(p, small_op, sched, 1e-3, seed=8)
    assert np.array_equal(a[0].blocks, b[0].blocks)
    assert not np.array_equal(a[0].blocks, c[0].blocks)
    assert a[0].sigma == 1e-3
    noise = a[0].blocks - clean
    assert np.allclose(noise, 1e-3 * np.random.default_rng(7).standard_normal(clean.shape))
    expected = np.mean(20 * np.log10(np.sqrt(np.mean(clean ** 2, axis=(1, 2))) / 1e-3))
    assert a[2] == pytest.approx(expected)


def test_image_metrics(rng):
    truth = rng.random((3, 5, 5))
    m = image_metrics(truth, truth)
    assert m["mean_rel_l2"] == 0 and np.all(np.isinf(m["psnr"]))
    assert image_metrics(np.zeros_like(truth), truth)["mean_rel_l2"] == pytest.approx(1.0)
    p = rng.random((3, 5, 5))
    m = image_metrics(p, truth)
    t = 1
    rel = np.linalg.norm(p[t] - truth[t]) / np.linalg.norm(truth[t])
    psnr = 10 * np.log10(truth.max() ** 2 / np.mean((p[t] - truth[t]) ** 2))
    assert m["rel_l2"][t] == pytest.approx(rel) and m["psnr"][t] == pytest.approx(psnr)
    assert m["mean_psnr"] == pytest.approx(np.mean(m["psnr"]))
    with pytest.raises(ValueError):
        image_metrics(p[:2], truth)


@pytest.fixture(scope="module")
def tiny_problem(small_op):
    truth = 0.8 * translating_blob(n=16, T=3, shift=1.0, width=2.0, center=(6.0, 8.0))
    sched = make_rsp_schedule(small_op.n_sensors, 2, seed=1)
    _, sub, _ = simulate_data(truth, small_op, sched, 1e-3, seed=0)
    return truth, sched, sub


def test_run_recipe_dispatch(tiny_problem, small_op):
    truth, sched, sub = tiny_problem
    L = np.ones(3)
    with pytest.raises(ValueError):
        run_recipe("pinv", sub, sched, small_op)
    res = {r: run_recipe(r, sub, sched, small_op, iters=4, truth=truth, lipschitz=L)
           for r in RECIPES}
    assert res["nnls"].v is None and res["tvtvl2"].v.shape == (3, 2, 16, 16)
    assert res["tv_fbf"].params.alpha == pytest.approx(3.2e-4)
    assert res["tvtvl2"].params == tvtvl2_params(3.2e-4)
    for r in res.values():
        assert r.metrics["mean_rel_l2"] < 1.0
        assert r.info["iterations"] == 4
    same = run_recipe("tv_fbf", sub, sched, small_op, iters=4, lipschitz=L)
    assert np.array_equal(same.p, res["tv_fbf"].p)
    joint = run_recipe("tvtvl2", sub, sched, small_op, params=RegParams(3.2e-4, 0, 0), iters=4,
                       lipschitz=L)
    assert np.array_equal(joint.p, res["tv_fbf"].p)


def test_nnls_zero_data(small_op):
    sched = SamplingSchedule.full(small_op.n_sensors, 2)
    data = DataSeq(np.zeros((2, small_op.n_sensors, small_op.grid.n_tau)))
    assert np.all(run_recipe("nnls", data, sched, small_op, iters=3).p == 0)


def test_reference_flow_static_and_translation():
    still = np.repeat(translating_blob(n=24, T=1, width=4.0)[None, 0], 3, axis=0)
    assert np.all(reference_flow(still) == 0)
    p = translating_blob(n=24, T=3, shift=1.0, width=4.0)
    v = reference_flow(p, beta=0.05)
    grad = np.hypot(*np.gradient(p[0]))
    mask = grad > 0.5 * grad.max()
    assert np.abs(v[0, 0][mask] - 1.0).max() <= 0.2
    assert np.abs(v[0, 1][mask]).max() <= 0.2
