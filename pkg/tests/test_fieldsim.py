import numpy as np
import pytest
from scipy import stats

from gneitlab.covariance import make_gneiting, make_radial
from gneitlab.errors import InvalidParams
from gneitlab.fieldsim import (CirculantSampler, GridSpec, empirical_cov_check, read_raw,
                               sample_field, write_raw)
from gneitlab.geometry import ConvexBody, WindowSpec, unit_box


def gneiting(rho1=0.3, rho2=0.4):
    return make_gneiting(make_radial("gen-cauchy", (1.0, rho1), 1),
                         make_radial("gen-cauchy", (1.0, rho2), 1, role="factor2"))


@pytest.fixture(scope="module")
def C():
    return gneiting()


def test_single_node_is_standard_normal(C):
    grid = GridSpec(WindowSpec(unit_box(1), unit_box(1)), 0.5)
    assert grid.n_total == 1
    sampler = CirculantSampler(C, grid)
    draws = sampler.replicates(7, 0, 4000).ravel()
    assert stats.kstest(draws, "norm").pvalue > 0.001


def test_two_nodes_correlation(C):
    window = WindowSpec(unit_box(1), ConvexBody("scaled-box", 1, (0.5,)))
    grid = GridSpec(window, 2.0)
    assert grid.node_counts == (2, 1)
    values = CirculantSampler(C, grid).replicates(11, 0, 100_000).reshape(100_000, 2)
    r = np.corrcoef(values.T)[0, 1]
    rho = C(1.0, 0.0)
    se = (1 - rho**2) / np.sqrt(values.shape[0])
    assert abs(r - rho) < 3 * se


def test_seed_determinism_and_thread_independence(C):
    grid = GridSpec(WindowSpec(unit_box(1), unit_box(1)), 16.0)
    a = sample_field(C, grid, 123).values
    b = sample_field(C, grid, 123).values
    assert np.array_equal(a, b)
    sampler = CirculantSampler(C, grid)
    serial = sampler.replicates(5, 0, 6)
    again = np.concatenate([sampler.replicates(5, 0, 3), sampler.replicates(5, 3, 6)])
    assert np.array_equal(serial, again)


def test_empirical_covariance_rows(C):
    grid = GridSpec(WindowSpec(unit_box(1), unit_box(1)), 8.0)
    rows = empirical_cov_check(C, grid, [(0, 0), (1, 0), (0, 2), (3, 3)], 4000, seed=2)
    assert rows[0][1] == 1.0
    for lag, theo, emp, se in rows:
        assert theo == pytest.approx(C(float(lag[0]), float(lag[1])))
        assert abs(theo - emp) < 4 * se


def test_off_grid_lag_rejected(C):
    grid = GridSpec(WindowSpec(unit_box(1), unit_box(1)), 8.0)
    with pytest.raises(InvalidParams):
        empirical_cov_check(C, grid, [(20, 0)], 10)


def test_pooled_marginals_gaussian(C):
    grid = GridSpec(WindowSpec(unit_box(1), unit_box(1)), 10.0)
    vals = CirculantSampler(C, grid).replicates(3, 0, 10_000).reshape(10_000, -1)
    # one node per replicate keeps the pooled values independent
    pooled = vals[np.arange(10_000), np.arange(10_000) % vals.shape[1]]
    assert stats.kstest(pooled, "norm").pvalue > 0.01


def test_stationarity_on_grid(C):
    grid = GridSpec(WindowSpec(unit_box(1), unit_box(1)), 12.0)
    vals = CirculantSampler(C, grid).replicates(9, 0, 6000).reshape(6000, 12, 12)
    pairs = [((0, 0), (2, 1)), ((5, 3), (7, 4)), ((9, 10), (11, 11))]
    cov = [np.mean(vals[:, a[0], a[1]] * vals[:, b[0], b[1]]) for a, b in pairs]
    se = 1.0 / np.sqrt(6000)
    assert max(cov) - min(cov) < 4 * np.sqrt(2) * se


def test_embedding_reports_no_clipping_for_target_model(C):
    for t in (32, 64):
        sampler = CirculantSampler(C, GridSpec(WindowSpec(unit_box(1), unit_box(1)), t))
        assert sampler.method == "circulant"
        assert sampler.clipped_mass <= 1e-3


def test_raw_dump_roundtrip(tmp_path, C):
    grid = GridSpec(WindowSpec(unit_box(1), unit_box(1)), 6.0)
    sample = sample_field(C, grid, 77)
    path = tmp_path / "field.raw"
    write_raw(path, sample, grid)
    header, values = read_raw(path)
    assert header["seed"] == 77
    assert np.array_equal(values, sample.values)
