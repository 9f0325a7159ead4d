"""Catalogue correctness: closures, potentials, grids, and error metrics.

The curl-identity and zero-source checks are the oracles that freeze the
hand-derived potentials and the Hartmann coefficient mapping; everything
downstream (training targets, evaluation) trusts them.
"""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdpinn.benchmarks import (
    ARCHITECTURES,
    CASE_IDS,
    HARTMANN_SETS,
    METRICS_COLUMNS,
    REYNOLDS_SWEEP,
    SAMPLING_VARIANTS,
    BenchmarkCase,
    MetricsReport,
    NetworkDefaults,
    benchmark_case,
    build_network,
    build_problem,
    evaluation_grid,
    exact_solution,
    hartmann_case,
    metrics_report,
    metrics_to_rows,
    predict_fields,
    relative_l2,
    run_benchmark,
    sampling_variant,
    steady2d_case,
    write_grid_csv,
    write_metrics_csv,
)
from mhdpinn.benchmarks import _ETA
from mhdpinn.geometry import Domain, NoiseSpec, latin_hypercube
from mhdpinn.network import init_params
from mhdpinn.operators import (
    PhysParams,
    divergence,
    formulation_space,
    head_names,
    manufactured_sources,
    pde_residuals,
    reader_from_closure,
)
from mhdpinn.tape import Tensor
from mhdpinn.training import Schedule, read_runlog

FORMULATIONS = ("b", "a1", "a2")


def data_of(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def interior_points(case, n, seed=0):
    return latin_hypercube(n, case.domain, seed=seed).points


# ---------------------------------------------------------------------------
# catalogue


def test_case_ids_and_unknown():
    for cid in CASE_IDS:
        assert benchmark_case(cid).id == cid
    with pytest.raises(ValueError, match="unknown benchmark"):
        benchmark_case("channel9")


def test_case_catalogue_numbers():
    s = benchmark_case("steady2d")
    assert (s.n_interior, s.n_per_face, s.n_initial) == (2500, 100, 0)
    assert s.defaults.width == 50 and s.defaults.subnets == 4
    assert s.domain.steady and s.domain.bounds == ((-0.5, 1.0), (-0.5, 0.5))
    assert s.notes

    u = benchmark_case("unsteady2d")
    assert u.n_initial == 100 and u.domain.duration == 1.0

    h = benchmark_case("hartmann")
    assert h.defaults.width == 100
    assert h.ambient_magnetic == (0.0, 1.0)
    assert h.domain.bounds == ((0.0, 4.0), (-1.0, 1.0))

    t = benchmark_case("unsteady3d")
    assert (t.n_interior, t.n_per_face, t.n_initial) == (500, 67, 100)
    assert t.domain.dim == 3 and t.domain.duration == 1.0


def test_hartmann_parameter_sets():
    assert HARTMANN_SETS == ((1.0, 1.0, 1.0), (20.0, 20.0, 4.0),
                             (40.0, 40.0, 2.0), (50.0, 50.0, 2.0))
    h = hartmann_case(20.0, 20.0, 4.0)
    assert h.phys.reynolds == 20.0
    assert h.phys.permeability == 0.25
    assert h.phys.conductivity == 80.0
    # the mapping keeps the induction coefficient at 1/Rm
    assert h.phys.permeability * h.phys.conductivity == pytest.approx(20.0)


def test_eta_frozen():
    assert _ETA == 20.0 - math.sqrt(400.0 + 4.0 * math.pi ** 2)
    assert abs(_ETA + 0.96374) < 1e-5


def test_with_supervision():
    case = benchmark_case("steady2d").with_supervision("middle")
    assert case.mask == "middle" and case.id == "steady2d"


# ---------------------------------------------------------------------------
# exact solutions


@pytest.mark.parametrize("cid", CASE_IDS)
def test_exact_solution_shapes(cid):
    case = benchmark_case(cid)
    pts = interior_points(case, 6, seed=3)
    sol = exact_solution(case, pts)
    dim = case.domain.dim
    expected = set(head_names("b", dim)) | set(head_names("a2", dim))
    assert expected <= set(sol)
    for name, values in sol.items():
        assert values.shape == (6,), name
        assert np.all(np.isfinite(values)), name
    with pytest.raises(ValueError, match="points"):
        exact_solution(case, pts[:, :1])


def test_hartmann_pointwise_values():
    case = hartmann_case(1.0, 1.0, 1.0)
    sol = exact_solution(case, np.array([[0.0, 0.0]]))
    assert sol["u1"][0] == pytest.approx(0.1 / math.tanh(1.0)
                                         * (1.0 - 1.0 / math.cosh(1.0)))
    assert abs(sol["u1"][0] - 0.0462) < 1e-4
    walls = exact_solution(case, np.array([[0.5, 1.0], [3.0, -1.0]]))
    assert np.all(walls["b1"] == 0.0)
    assert np.all(walls["u1"] == 0.0)
    anywhere = exact_solution(case, interior_points(case, 20, seed=1))
    assert np.all(anywhere["u2"] == 0.0)
    assert np.all(anywhere["b2"] == 1.0)


@pytest.mark.parametrize("cid", CASE_IDS)
def test_potentials_curl_to_fields(cid):
    # the a2 formulation reads u and b off the potentials, so its reader
    # against the direct closure values checks every hand-derived potential
    case = benchmark_case(cid)
    dim = case.domain.dim
    pts = interior_points(case, 40, seed=7)
    space = formulation_space("a2", dim, unsteady=not case.domain.steady)
    reader = reader_from_closure(case.closure, "a2", space, pts)
    direct = exact_solution(case, pts)
    for name in head_names("b", dim):
        if name == "p":
            continue
        got = data_of(reader.d(name))
        assert np.max(np.abs(got - direct[name])) < 1e-10, name


@pytest.mark.parametrize("cid", CASE_IDS)
def test_exact_fields_divergence_free(cid):
    case = benchmark_case(cid)
    dim = case.domain.dim
    pts = interior_points(case, 1000, seed=11)
    space = formulation_space("b", dim, unsteady=not case.domain.steady)
    reader = reader_from_closure(case.closure, "b", space, pts)
    names_u = tuple(f"u{i}" for i in range(1, dim + 1))
    names_b = tuple(f"b{i}" for i in range(1, dim + 1))
    assert np.max(np.abs(data_of(divergence(reader, names_u)))) < 1e-10
    assert np.max(np.abs(data_of(divergence(reader, names_b)))) < 1e-10


@pytest.mark.parametrize("cid", CASE_IDS)
@pytest.mark.parametrize("formulation", FORMULATIONS)
def test_manufactured_residuals_vanish(cid, formulation):
    case = benchmark_case(cid)
    dim = case.domain.dim
    pts = interior_points(case, 50, seed=13)
    space = formulation_space(formulation, dim, unsteady=not case.domain.steady)
    sources = manufactured_sources(case.closure, formulation, space, pts,
                                   case.phys)
    res = pde_residuals(
        reader_from_closure(case.closure, formulation, space, pts),
        formulation, case.phys, sources=sources,
    )
    for key, val in res.items():
        assert np.max(np.abs(data_of(val))) < 1e-8, (cid, formulation, key)


@pytest.mark.parametrize("params", HARTMANN_SETS)
def test_hartmann_solves_primitive_system_without_sources(params):
    # the permeability = 1/s, conductivity = Rm*s mapping makes the channel
    # profiles an exact solution; both manufactured sources must vanish
    case = hartmann_case(*params)
    pts = interior_points(case, 60, seed=17)
    space = formulation_space("b", 2, unsteady=False)
    sources = manufactured_sources(case.closure, "b", space, pts, case.phys)
    assert np.max(np.abs(sources.f)) < 1e-10
    assert np.max(np.abs(sources.g)) < 1e-10


def test_hartmann_gauge_source_is_constant():
    # the potential induction equation picks up a constant from the gauge
    # chosen for a1; the momentum source stays coupled through the Lorentz
    # term, so only g is pinned here
    re, rm, s = 20.0, 20.0, 4.0
    g_drive = 0.1
    case = hartmann_case(re, rm, s)
    ha = math.sqrt(s * re * rm)
    expected = (g_drive * re / ha) * (1.0 / ha - 1.0 / math.tanh(ha))
    pts = interior_points(case, 30, seed=19)
    space = formulation_space("a1", 2, unsteady=False)
    sources = manufactured_sources(case.closure, "a1", space, pts, case.phys)
    assert np.max(np.abs(sources.g - expected)) < 1e-12


def test_hartmann_pressure_gradient_matches_drive():
    case = hartmann_case(40.0, 40.0, 2.0)
    pts = interior_points(case, 100, seed=23)
    space = formulation_space("b", 2, unsteady=False)
    reader = reader_from_closure(case.closure, "b", space, pts)
    dpdx = data_of(reader.d("p", "x"))
    assert np.max(np.abs(dpdx + case.phys.pressure_gradient)) < 1e-12
    # and the y-gradient balances the magnetic pressure of b1
    b1 = data_of(reader.d("b1"))
    db1 = data_of(reader.d("b1", "y"))
    dpdy = data_of(reader.d("p", "y"))
    s = case.phys.coupling
    assert np.max(np.abs(dpdy + s * b1 * db1)) < 1e-11


# ---------------------------------------------------------------------------
# metrics


def test_relative_l2_basics():
    u = np.array([3.0, 4.0])
    assert relative_l2(u, u) == (0.0, False)
    assert relative_l2(2.0 * u, u) == (1.0, False)
    err, flagged = relative_l2(np.ones(4), np.zeros(4))
    assert flagged and err == 2.0
    with pytest.raises(ValueError, match="shape"):
        relative_l2(np.ones(3), np.ones(4))


def test_relative_l2_constant_offset():
    rng = np.random.default_rng(5)
    u = rng.normal(size=50)
    u /= np.linalg.norm(u)
    c = 0.37
    err, _ = relative_l2(u + c, u)
    assert err == pytest.approx(np.linalg.norm(c * np.ones(50)))


@settings(deadline=None, max_examples=40)
@given(c=st.floats(-3.0, 3.0), seed=st.integers(0, 2 ** 16))
def test_relative_l2_scaling_property(c, seed):
    u = np.random.default_rng(seed).normal(size=17)
    if np.linalg.norm(u) == 0.0:
        return
    err, flagged = relative_l2(c * u, u)
    assert not flagged
    assert err == pytest.approx(abs(c - 1.0), abs=1e-12)


def test_evaluation_grid_defaults_2d():
    g = evaluation_grid(benchmark_case("steady2d"))
    assert g.points.shape == (10201, 2)
    assert g.resolution == (101, 101) and g.time_slices == ()
    assert g.slice_size == 10201

    gu = evaluation_grid(benchmark_case("unsteady2d"))
    assert gu.time_slices == (0.25, 0.5, 0.75, 1.0)
    assert gu.points.shape == (4 * 10201, 3)
    assert set(np.unique(gu.points[:, 2])) == {0.25, 0.5, 0.75, 1.0}


def test_evaluation_grid_corners():
    g = evaluation_grid(benchmark_case("unsteady2d"), resolution=2,
                        time_slices=(1.0,))
    assert g.points.shape == (4, 3)
    corners = {(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)}
    assert {(p[0], p[1]) for p in g.points} == corners
    assert np.all(g.points[:, 2] == 1.0)
    with pytest.raises(ValueError, match="resolution"):
        evaluation_grid(benchmark_case("steady2d"), resolution=1)


def test_evaluation_grid_3d_slices():
    g = evaluation_grid(benchmark_case("unsteady3d"), resolution=5)
    assert g.resolution == (5, 5, 5)
    assert g.slice_size == 125
    assert g.points.shape == (500, 4)
    assert g.time_slices == (0.25, 0.5, 0.75, 1.0)


def test_metrics_report_exact_is_zero():
    case = benchmark_case("steady2d")
    grid = evaluation_grid(case, resolution=9)
    sol = exact_solution(case, grid.points)
    report = metrics_report(case, grid, sol, sol)
    assert set(report.errors) == set(sol)
    assert all(v == 0.0 for v in report.errors.values())
    assert "p" in report.aligned
    assert report.grid == grid.description


def test_metrics_report_pressure_alignment():
    case = benchmark_case("steady2d")
    grid = evaluation_grid(case, resolution=9)
    sol = exact_solution(case, grid.points)
    shifted = dict(sol)
    shifted["p"] = sol["p"] + 12.5
    shifted["u1"] = sol["u1"] + 12.5
    report = metrics_report(case, grid, shifted, sol)
    # alignment cancels the shift up to rounding in the two means
    assert report.errors["p"] < 1e-12
    assert report.errors["u1"] > 1.0


def test_metrics_report_zero_component_flagged():
    case = benchmark_case("hartmann")
    grid = evaluation_grid(case, resolution=9)
    sol = exact_solution(case, grid.points)
    report = metrics_report(case, grid, sol, sol)
    assert "u2" in report.absolute_norm
    assert report.errors["u2"] == 0.0


def test_metrics_report_pooled_and_slices():
    case = benchmark_case("unsteady2d")
    grid = evaluation_grid(case, resolution=4, time_slices=(0.5, 1.0))
    sol = exact_solution(case, grid.points)
    bad = dict(sol)
    m = grid.slice_size
    perturbed = sol["u1"].copy()
    perturbed[:m] += 1.0  # spoil only the first slice
    bad["u1"] = perturbed
    report = metrics_report(case, grid, bad, sol)
    assert set(report.per_slice) == {0.5, 1.0}
    assert report.per_slice[1.0]["u1"] == 0.0
    first = np.linalg.norm(np.ones(m)) / np.linalg.norm(sol["u1"][:m])
    assert report.per_slice[0.5]["u1"] == pytest.approx(first)
    pooled = np.linalg.norm(np.ones(m)) / np.linalg.norm(sol["u1"])
    assert report.errors["u1"] == pytest.approx(pooled)
    # pooling is not averaging the slice errors
    mean_of_slices = 0.5 * (report.per_slice[0.5]["u1"]
                            + report.per_slice[1.0]["u1"])
    assert report.errors["u1"] != pytest.approx(mean_of_slices)


def test_metrics_report_rejects_negative():
    with pytest.raises(ValueError, match="nonnegative"):
        MetricsReport(errors={"u1": -0.1}, per_slice={},
                      absolute_norm=frozenset(), aligned=frozenset(),
                      grid="g")


def test_metrics_to_rows():
    report = MetricsReport(errors={"u1": 0.5, "p": 0.25},
                           per_slice={0.5: {"u1": 0.4}},
                           absolute_norm=frozenset({"u1"}),
                           aligned=frozenset({"p"}), grid="g")
    rows = metrics_to_rows(report)
    pooled = [r for r in rows if r["time"] == ""]
    assert [r["component"] for r in pooled] == ["p", "u1"]
    assert pooled[0]["aligned"] == 1 and pooled[1]["absolute"] == 1
    sliced = [r for r in rows if r["time"] != ""]
    assert sliced == [{"component": "u1", "time": 0.5, "error": 0.4,
                       "absolute": 1, "aligned": 0}]


# ---------------------------------------------------------------------------
# problem and network assembly


def test_steady2d_reynolds_parametrization():
    low = steady2d_case(1.0)
    assert low.phys.reynolds == 1.0
    eta = 0.5 - math.sqrt(0.25 + 4.0 * math.pi ** 2)
    got = exact_solution(low, np.array([[1.0, 0.125]]))
    expect = 1.0 - math.exp(eta) * math.cos(2.0 * math.pi * 0.125)
    assert got["u1"][0] == pytest.approx(expect, rel=1e-14)
    base = exact_solution(steady2d_case(), np.array([[1.0, 0.125]]))
    assert got["u1"][0] != base["u1"][0]
    with pytest.raises(ValueError, match="positive"):
        steady2d_case(0.0)


def test_sweep_constants_pinned():
    assert REYNOLDS_SWEEP == (1.0, 10.0, 20.0, 30.0, 40.0)
    assert SAMPLING_VARIANTS == ((2500, 400), (2500, 1000),
                                 (5000, 400), (5000, 1000))
    assert ARCHITECTURES == ("mhdnet", "pinn_baseline")
    for re in REYNOLDS_SWEEP:
        assert steady2d_case(re).phys.reynolds == re


def test_sampling_variant_arithmetic():
    case = benchmark_case("steady2d")
    v = sampling_variant(case, 5000, 1000)
    assert (v.n_interior, v.n_per_face) == (5000, 250)
    assert v.id == case.id and v.defaults == case.defaults
    t = sampling_variant(benchmark_case("unsteady3d"), 500, 402)
    assert t.n_per_face == 67
    with pytest.raises(ValueError, match="evenly"):
        sampling_variant(case, 2500, 402)
    with pytest.raises(ValueError, match="evenly"):
        sampling_variant(case, 2500, 2)


def test_build_problem_standard_batches():
    case = sampling_variant(benchmark_case("steady2d"), 100, 40)
    prob = build_problem(case, "b", seed=0)
    assert prob.interior.shape == (100, 2)
    assert prob.sources is not None
    assert [b.kind for b in prob.boundary] == ["velocity_dirichlet",
                                               "magnetic_dirichlet"]
    assert all(len(b) == 40 for b in prob.boundary)
    assert prob.initial is None and prob.data is None
    # targets are exact traces at the sampled points
    vd = prob.boundary[0]
    expect = exact_solution(case, vd.points)
    assert np.array_equal(vd.targets["u1"], expect["u1"])

    prob_a = build_problem(case, "a2", seed=0)
    assert [b.kind for b in prob_a.boundary] == [
        "velocity_dirichlet", "magnetic_dirichlet", "potential_dirichlet"]
    assert all(len(b) == 40 for b in prob_a.boundary)


def test_build_problem_partial_mask_drops_faces():
    case = sampling_variant(benchmark_case("steady2d"), 50, 40)
    prob = build_problem(case.with_supervision("right"), "b", seed=1)
    # x_hi unsupervised: only three faces are sampled at all
    assert all(len(b) == 30 for b in prob.boundary)
    assert all(not np.any(b.points[:, 0] == 1.0) for b in prob.boundary)
    mid = build_problem(case.with_supervision("middle"), "b", seed=1)
    assert all(len(b) == 20 for b in mid.boundary)
    assert all(np.all(np.abs(b.points[:, 1]) == 0.5) for b in mid.boundary)


def test_build_problem_stagger_splits_supervision():
    case = sampling_variant(benchmark_case("steady2d"), 50, 40)
    prob = build_problem(case.with_supervision("stagger"), "a1", seed=2)
    sizes = {b.kind: len(b) for b in prob.boundary}
    # velocity skips y_lo, magnetic skips y_hi, potentials need both traces
    assert sizes == {"velocity_dirichlet": 30, "magnetic_dirichlet": 30,
                     "potential_dirichlet": 20}
    pot = next(b for b in prob.boundary if b.kind == "potential_dirichlet")
    assert np.all(np.isin(pot.points[:, 0], (-0.5, 1.0)))


def test_build_problem_hartmann_conditions():
    case = sampling_variant(hartmann_case(), 50, 40)
    prob = build_problem(case, "b", seed=0)
    assert [b.kind for b in prob.boundary] == [
        "velocity_dirichlet", "traction", "magnetic_tangential"]
    walls, ends, tang = prob.boundary
    assert (len(walls), len(ends), len(tang)) == (20, 20, 40)
    assert np.all(np.abs(walls.points[:, 1]) == 1.0)
    assert np.all(np.isin(ends.points[:, 0], (0.0, 4.0)))
    # no-slip walls and the exact pressure trace at inflow/outflow
    assert np.all(walls.targets["u1"] == 0.0)
    assert np.all(walls.targets["u2"] == 0.0)
    assert np.array_equal(ends.targets["p"], exact_solution(case, ends.points)["p"])
    # the tangential condition pins the ambient field on every face
    assert np.all(tang.targets["b1"] == 0.0)
    assert np.all(tang.targets["b2"] == 1.0)

    prob_a = build_problem(case, "a1", seed=0)
    kinds_a = [b.kind for b in prob_a.boundary]
    assert kinds_a[-1] == "potential_dirichlet"
    assert len(prob_a.boundary[-1]) == 40


def test_build_problem_initial_batch():
    case = sampling_variant(benchmark_case("unsteady2d"), 60, 40)
    prob = build_problem(case, "b", seed=3)
    assert prob.unsteady and prob.interior.shape == (60, 3)
    ini = prob.initial
    assert ini is not None and len(ini) == 100
    assert np.all(ini.points[:, 2] == 0.0)
    expect = exact_solution(case, ini.points)
    assert np.array_equal(ini.targets["b1"], expect["b1"])
    # boundary samples live strictly after t = 0
    for b in prob.boundary:
        assert np.all(b.points[:, 2] > 0.0)


def test_build_problem_noise_hits_noisy_faces_only():
    base = sampling_variant(benchmark_case("steady2d"), 50, 40)
    clean = build_problem(base.with_supervision("middle_noisy"), "b", seed=4)
    noisy = build_problem(
        base.with_supervision("middle_noisy", NoiseSpec(amplitude_ratio=0.1,
                                                        seed=9)), "b", seed=4)
    vc, vn = clean.boundary[0], noisy.boundary[0]
    assert np.array_equal(vc.points, vn.points)
    on_x = np.isin(vc.points[:, 0], (-0.5, 1.0))
    diff = vc.targets["u1"] != vn.targets["u1"]
    assert diff.any()
    assert not np.any(diff & ~on_x)


def test_build_network_architectures():
    case = benchmark_case("steady2d")
    net = build_network(case, "a2")
    assert net.input_dim == 2 and net.output_dim == 3
    assert net.n_subnets == 4 and net.subnets[0].width == 50
    stds = [e.stddev for e in net.embeddings]
    assert stds == [pytest.approx(0.1 * (i + 1)) for i in range(4)]

    base = build_network(case, "b", architecture="pinn_baseline")
    assert base.n_subnets == 1 and base.subnets[0].width == 200
    assert base.output_dim == 5
    assert base.embeddings[0].variant == "identity"

    assert build_network(hartmann_case(), "b").subnets[0].width == 100
    net3 = build_network(benchmark_case("unsteady3d"), "a1")
    assert net3.input_dim == 4 and net3.output_dim == 7
    with pytest.raises(ValueError, match="architecture"):
        build_network(case, "b", architecture="resnet")


def _toy_case():
    """Tiny constant-field case: cheap training, exactly representable."""
    consts = {"u1": 0.3, "u2": -0.2, "b1": 0.5, "b2": 1.0, "p": 0.7}

    def closure(c):
        one = np.ones_like(c["x"])
        return {k: v * one for k, v in consts.items()}

    case = BenchmarkCase(
        id="toy", domain=Domain(bounds=((0.0, 1.0), (0.0, 1.0))),
        phys=PhysParams(reynolds=1.0, magnetic_reynolds=1.0,
                        conductivity=1.0, permeability=1.0),
        closure=closure, n_interior=30, n_per_face=4, n_initial=0,
        defaults=NetworkDefaults(subnets=2, width=8, hidden_layers=2, modes=4,
                                 baseline_width=8),
    )
    return case, consts


def test_predict_fields_shapes_and_chunking():
    case, _ = _toy_case()
    pts = latin_hypercube(23, case.domain, seed=5).points
    for form in FORMULATIONS:
        net = build_network(case, form, seed=1)
        params = init_params(net, seed=2)
        full = predict_fields(net, params, form, case, pts)
        assert set(full) == {"u1", "u2", "b1", "b2", "p"}
        assert all(v.shape == (23,) for v in full.values())
        parts = predict_fields(net, params, form, case, pts, chunk=7)
        for n in full:
            assert np.max(np.abs(full[n] - parts[n])) < 1e-12, (form, n)
    with pytest.raises(ValueError, match="chunk"):
        predict_fields(net, params, "a2", case, pts, chunk=0)


def test_run_benchmark_zero_epochs_exact_constants():
    # all-zero weights push the merge bias straight to the output, so a
    # constant exact solution is representable and every error is exactly 0
    case, consts = _toy_case()
    net = build_network(case, "b", seed=0)
    params = init_params(net, seed=0)
    params = params.with_values(np.zeros(len(params)))
    params.view("merge.b")[:] = [consts[n] for n in head_names("b", 2)]
    res = run_benchmark(case, "b", schedule=Schedule(n_adam=0, n_lbfgs_max=0),
                        params=params, resolution=5)
    assert not res.log.aborted and res.log.records == []
    assert set(res.report.errors) == set(consts)
    assert all(v == 0.0 for v in res.report.errors.values())


def test_run_benchmark_smoke_and_csv_roundtrip(tmp_path):
    case, _ = _toy_case()
    log_path = tmp_path / "log.csv"
    res = run_benchmark(case, "b", schedule=Schedule(n_adam=5, n_lbfgs_max=3),
                        seed=0, log_path=log_path, resolution=4)
    assert res.log.records
    phases = {r.phase for r in res.log.records}
    assert "adam" in phases and phases <= {"adam", "lbfgs"}
    assert all(math.isfinite(r.breakdown.total) for r in res.log.records)
    assert all(math.isfinite(v) for v in res.report.errors.values())
    disk = read_runlog(log_path)
    assert len(disk.records) == len(res.log.records)
    assert disk.records[-1].breakdown.total == res.log.records[-1].breakdown.total

    mpath = tmp_path / "metrics.csv"
    write_metrics_csv(res.report, mpath)
    with open(mpath, newline="") as fh:
        reader = csv.DictReader(fh)
        assert tuple(reader.fieldnames) == METRICS_COLUMNS
        rows = list(reader)
    pooled = {r["component"]: float(r["error"]) for r in rows if r["time"] == ""}
    assert pooled == pytest.approx(res.report.errors)

    gpath = tmp_path / "grid.csv"
    write_grid_csv(case, res.grid, res.predicted, res.exact, gpath)
    with open(gpath, newline="") as fh:
        grows = list(csv.reader(fh))
    header = grows[0]
    assert header[:2] == ["x", "y"]
    assert {"u1_pred", "u1_exact", "u1_abserr", "p_pred"} <= set(header)
    assert len(grows) == 1 + res.grid.points.shape[0]
    # %.17g output round-trips the prediction bit-exactly
    assert float(grows[1][header.index("u1_pred")]) == res.predicted["u1"][0]
    with pytest.raises(ValueError, match="shared"):
        write_grid_csv(case, res.grid, {"zz": np.zeros(3)}, res.exact, gpath)
