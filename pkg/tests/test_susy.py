import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specfactor.errors import NumericalError, PreconditionError
from specfactor.numtheory import SpectrumSpec, spectrum_values
from specfactor.susy import (
    Grid,
    PotentialTable,
    assemble_potential,
    build_lloyd_system,
    build_potential,
    build_superpotentials,
    eigen_solve,
    lloyd_equivalence_report,
    lloyd_matrix,
    lloyd_residuals,
    lloyd_vector,
    recovered_spectrum,
    unrolled_potential,
    well_profile,
)


def closed_form_single_level(a, x):
    """One bound level at ``-a^2``: ``W = -a tanh(a x)``, ``V = -2 a^2 sech^2(a x)``."""
    return -a * np.tanh(a * x), -2 * a * a / np.cosh(a * x) ** 2


def table_from(x, v):
    return PotentialTable(x, v, np.zeros(0), 0.0, float(x[1] - x[0]))


def spacings_error(pt):
    got = recovered_spectrum(pt)
    return float(np.abs(np.diff(got) - np.diff(pt.targets)).max())


# --- grid -----------------------------------------------------------------


def test_grid_defaults():
    g = Grid()
    assert g.half_width == 12 and g.step == 12 / 512 and g.nodes.size == 1025
    assert g.nodes[512] == 0.0
    assert g.refined().step == g.step / 2


@pytest.mark.parametrize("half, step", [(0, 0.1), (1, 0), (1, 0.3), (1, 0.75)])
def test_grid_rejects(half, step):
    with pytest.raises(PreconditionError):
        Grid(half, step)


# --- superpotentials ------------------------------------------------------


def test_single_level_matches_closed_form():
    a = math.sqrt(math.log(2))
    sps = build_superpotentials([0.0, math.log(2)], Grid(12.0, 12 / 1024))
    w, v = closed_form_single_level(a, sps.x)
    assert np.abs(sps.w[0] - w).max() < 1e-6
    assert np.abs(sps.partner_potentials()[0] - v).max() < 1e-6


def test_no_levels_gives_flat_potential():
    sps = build_superpotentials([1.5], Grid(4.0, 0.05))
    assert sps.m == 0 and sps.w.shape == (0, sps.x.size)
    pt = assemble_potential(sps)
    assert np.all(pt.v == 1.5)
    assert recovered_spectrum(pt).tolist() == [1.5]


def test_nearly_degenerate_levels_give_nearly_flat_potential():
    pt = build_potential([0.0, 1e-8, 2e-8], Grid(8.0, 8 / 256))
    assert np.abs(pt.v - pt.offset).max() < 1e-6


def test_superpotentials_are_odd():
    sps = build_superpotentials(np.log([2, 3, 5, 7]))
    assert np.abs(sps.w + sps.w[:, ::-1]).max() == 0.0


def test_targets_validation():
    with pytest.raises(PreconditionError):
        build_superpotentials([1.0, 1.0])
    with pytest.raises(PreconditionError):
        build_superpotentials([])


def test_blowup_is_reported():
    with pytest.raises(NumericalError, match="W_1"):
        build_superpotentials([0.0, 1.0], Grid(12.0, 12 / 512), blowup=0.5, min_half_width=6.0)


def test_blowup_clips_valid_subgrid():
    sps = build_superpotentials([0.0, 1.0], Grid(12.0, 12 / 512), blowup=0.999, min_half_width=1.0)
    assert sps.x[-1] < 12.0 and np.abs(sps.w).max() < 0.999


def test_recurrence_matches_unrolled_sum():
    sps = build_superpotentials(np.log([2, 3, 5, 7, 11, 13]))
    assert np.abs(unrolled_potential(sps) - sps.partner_potentials()[-1]).max() < 1e-12


def test_partner_recurrence_step_by_step():
    sps = build_superpotentials(np.log([1, 2, 3, 4]))
    v = np.zeros_like(sps.x)
    for k in range(sps.m):
        v = 2 * sps.spacings[k] + 2 * sps.w[k] ** 2 - v
        assert np.abs(v - sps.partner_potentials()[k]).max() < 1e-12


@pytest.mark.parametrize(
    "kind, m, refine",
    [("log-primes", 4, 0), ("log-primes", 16, 0), ("log-integers", 16, 0), ("integers", 4, 1), ("integers", 8, 1)],
)
def test_riccati_residual_small(kind, m, refine):
    targets = spectrum_values(SpectrumSpec(kind, m + 1, include_unity=kind == "log-integers"))
    grid = build_superpotentials(targets).grid
    for _ in range(refine):
        grid = grid.refined()
    sps = build_superpotentials(targets, grid)
    assert np.abs(sps.riccati_residuals()).max() < 1e-6


# --- eigensolver ----------------------------------------------------------


def test_harmonic_oscillator():
    x = Grid(10.0, 10 / 1000).nodes
    levels = eigen_solve(table_from(x, x * x), 3)
    np.testing.assert_allclose(levels, [1, 3, 5], atol=1e-3)


def test_reflectionless_well():
    a = 1.3
    x = Grid(16.0, 16 / 1024).nodes
    _, v = closed_form_single_level(a, x)
    level = eigen_solve(table_from(x, v), 1)
    assert abs(level[0] + a * a) < 1e-4


def test_eigen_solve_detects_coarse_grid():
    x = Grid(10.0, 0.5).nodes
    with pytest.raises(NumericalError, match="too coarse"):
        eigen_solve(table_from(x, 50 * x * x), 4)


def test_eigen_solve_level_count_checks():
    pt = build_potential(np.log([2, 3, 5]))
    with pytest.raises(PreconditionError):
        eigen_solve(pt, 0)
    with pytest.raises(PreconditionError):
        eigen_solve(pt, 4)


def test_single_level_assembly():
    pt = build_potential([0.0, math.log(2)], Grid(12.0, 12 / 1024))
    a2 = math.log(2)
    _, v = closed_form_single_level(math.sqrt(a2), pt.x)
    assert abs(pt.offset - a2) < 1e-6
    assert np.abs(pt.v - (v + a2)).max() < 1e-6
    assert abs(pt.threshold - eigen_solve(pt, 1)[0] - a2) < 1e-4


def test_log_primes_eight_levels():
    targets = np.log(np.array([2, 3, 5, 7, 11, 13, 17, 19, 23]))
    pt = build_potential(targets)
    assert spacings_error(pt) < 1e-3


@pytest.mark.parametrize("m", [4, 8, 16])
@pytest.mark.parametrize("kind", ["log-primes", "log-integers", "integers"])
def test_spectrum_closure(kind, m):
    targets = spectrum_values(SpectrumSpec(kind, m, include_unity=kind != "log-primes"))
    pt = build_potential(targets)
    got = recovered_spectrum(pt)
    assert abs(got[0] - targets[0]) < 1e-9
    assert np.abs(got - targets).max() < 1e-4


def test_step_halving_is_stable():
    targets = np.log(np.arange(1, 10))
    coarse = build_potential(targets)
    fine = build_potential(targets, Grid(coarse.half_width, coarse.step / 2))
    assert np.abs(recovered_spectrum(coarse) - recovered_spectrum(fine)).max() < 1e-4


def test_unbound_levels_are_reported():
    # sixteen log-prime levels do not fit in a box of half-width 12
    pt = build_potential(spectrum_values(SpectrumSpec("log-primes", 17)), Grid(12.0, 12 / 512))
    with pytest.raises(NumericalError):
        recovered_spectrum(pt)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.2, 1.5), min_size=1, max_size=4))
def test_random_spectra_close(gaps):
    targets = np.concatenate([[0.0], np.cumsum(gaps)])
    pt = build_potential(targets)
    assert np.abs(recovered_spectrum(pt) - targets).max() < 1e-4


# --- potential table I/O --------------------------------------------------


def test_csv_round_trip(tmp_path):
    pt = build_potential(np.log([2, 3, 5, 7]))
    pt.write_csv(tmp_path / "v.csv")
    pt.write_metadata(tmp_path / "v.json")
    meta = json.loads((tmp_path / "v.json").read_text())
    again = PotentialTable.read_csv(tmp_path / "v.csv", meta)
    assert np.array_equal(again.x, pt.x) and np.array_equal(again.v, pt.v)
    assert again.offset == pt.offset and np.array_equal(again.targets, pt.targets)
    assert np.array_equal(recovered_spectrum(again), recovered_spectrum(pt))


def test_metadata_fields():
    meta = build_potential(np.log([2, 3, 5])).metadata()
    assert meta["schema"] == 1 and meta["analytic_offset"] == math.log(5)
    assert abs(meta["offset"] - math.log(5)) < 1e-4
    assert meta["riccati_residual_max"] < 1e-6


def test_read_csv_rejects_bad_files(tmp_path):
    (tmp_path / "a.csv").write_text("a,b\n1,2\n")
    with pytest.raises(PreconditionError):
        PotentialTable.read_csv(tmp_path / "a.csv")
    (tmp_path / "b.csv").write_text("x,V\n0,1\n1,1\n3,1\n4,1\n5,1\n")
    with pytest.raises(PreconditionError):
        PotentialTable.read_csv(tmp_path / "b.csv")


# --- Lloyd form -----------------------------------------------------------


def lloyd_b_by_loop(e):
    out = []
    for k in range(1, len(e) + 1):
        total = e[k - 1]
        for i in range(1, k):
            total += (-1) ** i * 2 * e[k - i - 1]
        out.append(total)
    return out


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_lloyd_matrix_structure(m):
    w = np.arange(1.0, m + 1)
    f = lloyd_matrix(w, "upper")
    assert np.array_equal(np.diag(f), -w)
    assert np.all(np.tril(f, -1) == 0)
    for a in range(1, m + 1):
        for b in range(a + 1, m + 1):
            assert f[a - 1, b - 1] == (-1) ** a * 2 * w[b - 1]


def test_lloyd_matrix_vectorised_over_nodes():
    w = np.random.default_rng(0).normal(size=(3, 7))
    f = lloyd_matrix(w, "riccati")
    for n in range(7):
        assert np.array_equal(f[..., n], lloyd_matrix(w[:, n], "riccati"))


def test_lloyd_matrix_rejects_unknown_variant():
    with pytest.raises(PreconditionError):
        lloyd_matrix(np.ones(2), "other")


@pytest.mark.parametrize("e", [[-1.0], [-3.0, -1.0], [-5.0, -4.0, -2.5, -1.0]])
def test_lloyd_vector_formula(e):
    np.testing.assert_allclose(lloyd_vector(e), lloyd_b_by_loop(e), rtol=0, atol=1e-15)


def test_lloyd_single_level_all_variants_hold():
    sps = build_superpotentials([0.0, math.log(2)])
    for variant in ("upper", "transposed", "riccati"):
        assert np.abs(lloyd_residuals(sps, variant)).max() < 1e-6


def test_lloyd_two_levels_at_origin():
    # at x = 0 every W vanishes, so the system reduces to W'(0) = b
    sps = build_superpotentials(np.log([2, 3, 5]))
    sys = build_lloyd_system(sps, 0.0, "upper")
    assert np.abs(sys.w).max() == 0.0
    assert np.abs(sys.residual).max() < 1e-6
    assert set(sys.to_dict()) >= {"f", "b", "W", "dW", "residual"}


def test_lloyd_system_requires_grid_node():
    sps = build_superpotentials(np.log([2, 3, 5]))
    with pytest.raises(PreconditionError):
        build_lloyd_system(sps, 0.001)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_lloyd_equivalence(m):
    sps = build_superpotentials(np.log(np.arange(1, m + 2)))
    report = lloyd_equivalence_report(sps)
    assert "riccati" in report["satisfied"]
    assert "upper" not in report["satisfied"]
    assert report["variant_residual_max"]["riccati"] < 1e-4
    assert report["variant_residual_max"]["upper"] > 1e-2


# --- well shape -----------------------------------------------------------


def test_well_profile_log_integers():
    pt = build_potential(spectrum_values(SpectrumSpec("log-integers", 17, include_unity=True)))
    prof = well_profile(pt)
    assert prof["strictly_monotone"] and prof["coarse_monotone"]
    assert prof["argmin_x"] == 0.0 and prof["parity_error"] < 1e-12
    assert prof["max_above_threshold"] < 1e-6
