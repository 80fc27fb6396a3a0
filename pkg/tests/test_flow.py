"""Flow module: charts, frames, the field, integration, brackets."""

import math

import numpy as np
import pytest

from okkit.degeneration import build_family, build_projection
from okkit.embedding import (
    embed_point,
    enumerate_vd_basis,
    sample_intrinsic,
    toric_moment,
)
from okkit.flow import (
    ChartPoint,
    CriticalPointError,
    EvalResult,
    FlowConfig,
    FlowError,
    FlowResult,
    SingularPointError,
    ambient_metric,
    ambient_symplectic,
    diagnostics_dict,
    flow_to,
    gradient_hamiltonian,
    integrable_system_eval,
    poisson_bracket,
    run_batch,
    symplectic_residual,
    tangent_frame,
    trajectory_csv,
)

from presentations import relation_set_for


def pipeline(name):
    rels = relation_set_for(name)
    fam = build_family(rels, build_projection(rels))
    basis = enumerate_vd_basis(rels.datum, fam)
    return rels.datum, fam, basis


@pytest.fixture(scope="module")
def p1():
    return pipeline("p1")


@pytest.fixture(scope="module")
def p1xp1():
    return pipeline("p1xp1")


@pytest.fixture(scope="module")
def elliptic():
    return pipeline("elliptic")


@pytest.fixture(scope="module")
def gl3():
    return pipeline("gl3-flag")


def embedded_chart_point(pipe, x, t=0.5):
    datum, fam, basis = pipe
    return ChartPoint.from_projective(embed_point(x, datum, fam, t, basis))


def relative_residual(polys, z):
    worst = 0.0
    for g in polys:
        num = 0.0 + 0.0j
        den = 0.0
        for exps, c in g.terms.items():
            term = complex(c)
            for zv, e in zip(z, exps):
                term *= zv**e
            num += term
            den += abs(term)
        if den > 1e-300:
            worst = max(worst, abs(num) / den)
    return worst


class TestChartPoint:
    def test_from_projective_picks_dominant_pivot(self, elliptic):
        cp = embedded_chart_point(elliptic, (4.0, _root(4.0)))
        full = np.abs(cp.full_coords())
        assert full[cp.chart] == pytest.approx(full.max())

    def test_full_coords_inserts_unit_pivot(self):
        cp = ChartPoint(1, (2.0 + 1.0j, 0.5), 0.3)
        assert cp.full_coords() == (2.0 + 1.0j, 1.0 + 0.0j, 0.5 + 0.0j)

    def test_chart_round_trip(self):
        cp = ChartPoint(0, (0.4 + 0.1j, 2.0 - 1.0j), 0.25)
        back = cp.to_chart(2).to_chart(0)
        assert back.chart == 0
        np.testing.assert_allclose(back.as_real(), cp.as_real(), atol=1e-15)

    def test_rechart_through_zero_coordinate_fails(self):
        cp = ChartPoint(0, (0.0, 1.0), 0.25)
        with pytest.raises(FlowError, match="vanishes"):
            cp.to_chart(1)

    def test_real_round_trip(self):
        cp = ChartPoint(2, (1.0 + 2.0j, -0.5j), 0.1 + 0.01j)
        again = ChartPoint.from_real(2, cp.as_real())
        assert again == cp

    def test_chart_index_range_checked(self):
        with pytest.raises(ValueError, match="out of range"):
            ChartPoint(3, (1.0, 2.0), 0.5)


class TestFlowConfig:
    def test_defaults_valid(self):
        cfg = FlowConfig()
        assert 0 < cfg.delta < cfg.epsilon < 1

    @pytest.mark.parametrize(
        "kw",
        [
            {"epsilon": 1.5},
            {"delta": 0.9, "epsilon": 0.5},
            {"delta": 0.0},
            {"rtol": 0.0},
            {"retraction_tol": -1.0},
            {"max_steps": 0},
            {"alpha": 0.0},
            {"alpha": 1.0},
        ],
    )
    def test_bad_parameters_rejected(self, kw):
        with pytest.raises(ValueError):
            FlowConfig(**kw)


class TestMetric:
    def test_identity_at_chart_origin(self):
        cp = ChartPoint(0, (0.0, 0.0), 0.5)
        np.testing.assert_allclose(ambient_metric(cp), np.eye(6), atol=1e-15)

    def test_symmetric_positive_definite(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            cp = ChartPoint(0, tuple(w), 0.4)
            G = ambient_metric(cp)
            np.testing.assert_allclose(G, G.T, atol=1e-15)
            assert np.linalg.eigvalsh(G).min() > 0

    def test_symplectic_antisymmetric_and_compatible(self):
        rng = np.random.default_rng(4)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        cp = ChartPoint(1, tuple(w), 0.3)
        G = ambient_metric(cp)
        W = ambient_symplectic(cp)
        np.testing.assert_allclose(W, -W.T, atol=1e-15)
        # compatibility g(Ja, Jb) = g(a, b) via exact block structure
        J = np.zeros_like(G)
        for k in range(0, G.shape[0], 2):
            J[k, k + 1] = -1.0
            J[k + 1, k] = 1.0
        np.testing.assert_allclose(J.T @ G @ J, G, atol=1e-15)


class TestTangentFrame:
    def test_trivial_family_frame_dimension(self, p1):
        _, fam, basis = p1
        cp = embedded_chart_point(p1, (0.7,))
        E = tangent_frame(cp, fam, basis)
        assert E.shape == (4, 4)

    def test_elliptic_frame_dimension(self, elliptic):
        _, fam, basis = elliptic
        cp = embedded_chart_point(elliptic, (1.5, _root(1.5)))
        E = tangent_frame(cp, fam, basis)
        assert E.shape == (6, 4)

    def test_fiber_frame_drops_time_direction(self, elliptic):
        _, fam, basis = elliptic
        cp = embedded_chart_point(elliptic, (1.5, _root(1.5)))
        E = tangent_frame(cp, fam, basis, fiber_only=True)
        assert E.shape == (6, 2)
        # fiber vectors have no t component
        np.testing.assert_allclose(E[4:, :], 0.0, atol=1e-12)

    def test_frame_orthonormal_in_product_metric(self, elliptic):
        _, fam, basis = elliptic
        cp = embedded_chart_point(elliptic, (1.5, _root(1.5)))
        E = tangent_frame(cp, fam, basis)
        G = ambient_metric(cp)
        np.testing.assert_allclose(E.T @ G @ E, np.eye(4), atol=1e-10)

    def test_cusp_of_special_fiber_is_singular(self, elliptic):
        _, fam, basis = elliptic
        with pytest.raises(SingularPointError, match="rank"):
            tangent_frame(ChartPoint(2, (0.0, 0.0), 0.0), fam, basis)

    def test_gl3_frame_dimension(self, gl3):
        datum, fam, basis = gl3
        x = sample_intrinsic(datum, 1, np.random.default_rng(11))[0]
        cp = embedded_chart_point(gl3, x)
        E = tangent_frame(cp, fam, basis)
        assert E.shape == (16, 8)


def _root(x):
    """A point on the plane cubic fiber over first coordinate x."""
    roots = np.roots([1.0, 0.0, -1.0, x**3])
    return complex(roots[0])


class TestGradient:
    def test_trivial_family_flows_straight_down(self, p1):
        _, fam, basis = p1
        cp = embedded_chart_point(p1, (0.3 - 0.8j,))
        V = gradient_hamiltonian(cp, fam, basis)
        assert abs(V[2] + 1.0) < 1e-12
        assert max(abs(V[0]), abs(V[1]), abs(V[3])) < 1e-10

    def test_unit_speed_in_time(self, elliptic):
        datum, fam, basis = elliptic
        rng = np.random.default_rng(9)
        for x in sample_intrinsic(datum, 10, rng):
            cp = embedded_chart_point(elliptic, x)
            V = gradient_hamiltonian(cp, fam, basis)
            assert abs(V[len(V) - 2] + 1.0) < 1e-8

    def test_projection_matches_finite_differences(self, elliptic):
        datum, fam, basis = elliptic
        x = sample_intrinsic(datum, 1, np.random.default_rng(13))[0]
        cp = embedded_chart_point(elliptic, x)
        E = tangent_frame(cp, fam, basis)
        G = ambient_metric(cp)
        slot = E.shape[0] - 2
        h = 1e-6
        y = cp.as_real()
        for k in range(E.shape[1]):
            fd = ((y + h * E[:, k])[slot] - (y - h * E[:, k])[slot]) / (2 * h)
            assert abs(float(G[slot] @ E[:, k]) - fd) < 1e-6


class TestFlowTo:
    def test_trivial_family_keeps_chart_coordinates(self, p1):
        _, fam, basis = p1
        cfg = FlowConfig()
        cp = embedded_chart_point(p1, (0.7 + 0.2j,), t=cfg.epsilon)
        res = flow_to(cp, cfg.delta, cfg, fam, basis)
        assert res.ok
        assert res.terminal.chart == cp.chart
        drift = np.abs(
            np.asarray(res.terminal.w) - np.asarray(cp.w)
        ).max()
        assert drift < 1e-10
        assert abs(res.terminal.t.real - cfg.delta) < 1e-12
        direct = toric_moment(cp.full_coords(), basis)
        assert max(abs(a - b) for a, b in zip(res.moment, direct)) < 1e-9

    def test_elliptic_reaches_special_fiber_equations(self, elliptic):
        datum, fam, basis = elliptic
        cfg = FlowConfig()
        x = sample_intrinsic(datum, 1, np.random.default_rng(17))[0]
        cp = embedded_chart_point(elliptic, x, t=cfg.epsilon)
        res = flow_to(cp, cfg.delta, cfg, fam, basis)
        assert res.ok
        assert relative_residual(fam.initial_forms, res.terminal.full_coords()) < 1e-4

    def test_conservation_diagnostics_tight(self, elliptic):
        datum, fam, basis = elliptic
        cfg = FlowConfig()
        x = sample_intrinsic(datum, 1, np.random.default_rng(19))[0]
        cp = embedded_chart_point(elliptic, x, t=cfg.epsilon)
        res = flow_to(cp, cfg.delta, cfg, fam, basis)
        assert res.ok
        assert res.max_im_pi < 1e-8
        assert res.max_re_lin_err < 1e-6
        assert all(s.residual < 1e-8 for s in res.samples)

    def test_deterministic_repetition(self, elliptic):
        datum, fam, basis = elliptic
        cfg = FlowConfig()
        x = sample_intrinsic(datum, 1, np.random.default_rng(23))[0]
        cp = embedded_chart_point(elliptic, x, t=cfg.epsilon)
        first = flow_to(cp, cfg.delta, cfg, fam, basis)
        second = flow_to(cp, cfg.delta, cfg, fam, basis)
        assert first.samples == second.samples
        assert first.terminal == second.terminal

    def test_target_validation(self, p1):
        _, fam, basis = p1
        cfg = FlowConfig()
        cp = embedded_chart_point(p1, (0.5,), t=cfg.epsilon)
        with pytest.raises(ValueError, match="target"):
            flow_to(cp, 0.9, cfg, fam, basis)
        with pytest.raises(ValueError, match="target"):
            flow_to(cp, -0.1, cfg, fam, basis)

    def test_imaginary_start_rejected(self, p1):
        _, fam, basis = p1
        cfg = FlowConfig()
        cp = ChartPoint(0, (0.5,), 0.5 + 0.1j)
        with pytest.raises(ValueError, match="Im t"):
            flow_to(cp, cfg.delta, cfg, fam, basis)

    def test_off_family_start_fails_loudly(self, elliptic):
        _, fam, basis = elliptic
        cfg = FlowConfig()
        cp = ChartPoint(0, (0.7, 0.9), 0.5)
        res = flow_to(cp, cfg.delta, cfg, fam, basis)
        assert not res.ok
        assert "misses the family" in res.failure

    def test_step_budget_failure_keeps_samples(self, elliptic):
        datum, fam, basis = elliptic
        cfg = FlowConfig(max_steps=3)
        x = sample_intrinsic(datum, 1, np.random.default_rng(29))[0]
        cp = embedded_chart_point(elliptic, x, t=cfg.epsilon)
        res = flow_to(cp, cfg.delta, cfg, fam, basis)
        assert not res.ok
        assert "budget" in res.failure
        assert res.samples
        assert res.terminal is not None
        assert res.moment is None

    def test_gl3_short_flow(self, gl3):
        datum, fam, basis = gl3
        cfg = FlowConfig()
        x = sample_intrinsic(datum, 1, np.random.default_rng(31))[0]
        cp = embedded_chart_point(gl3, x, t=cfg.epsilon)
        res = flow_to(cp, 0.3, cfg, fam, basis)
        assert res.ok
        assert res.max_im_pi < 1e-8


class TestIntegrableSystemEval:
    def test_p1_matches_direct_moment(self, p1):
        datum, fam, basis = p1
        cfg = FlowConfig()
        rng = np.random.default_rng(37)
        for x in sample_intrinsic(datum, 10, rng):
            out = integrable_system_eval(x, cfg, datum, fam, basis)
            assert out.ok
            direct = toric_moment(
                embed_point(x, datum, fam, cfg.epsilon, basis), basis
            )
            assert abs(out.F[0] - direct[0]) < 1e-6
            assert -1e-6 <= out.F[0] <= 1.0 + 1e-6

    def test_elliptic_values_land_in_segment(self, elliptic):
        datum, fam, basis = elliptic
        cfg = FlowConfig()
        rng = np.random.default_rng(41)
        for x in sample_intrinsic(datum, 5, rng, log10_spread=2.0):
            out = integrable_system_eval(x, cfg, datum, fam, basis)
            assert out.ok
            assert -1e-2 <= out.F[0] <= 3.0 + 1e-2
            assert out.convergence < 1e-6

    def test_off_variety_point_reported_not_raised(self, elliptic):
        datum, fam, basis = elliptic
        cfg = FlowConfig()
        out = integrable_system_eval((1.0, 5.0), cfg, datum, fam, basis)
        assert not out.ok
        assert "embedding failed" in out.failure
        assert out.F is None


class TestRunBatch:
    def test_results_carry_input_order(self, elliptic):
        datum, fam, basis = elliptic
        cfg = FlowConfig()
        xs = sample_intrinsic(datum, 4, np.random.default_rng(43))
        results = run_batch(xs, cfg, datum, fam, basis)
        assert [r.index for r in results] == [0, 1, 2, 3]

    def test_thread_count_does_not_change_values(self, elliptic, monkeypatch):
        datum, fam, basis = elliptic
        cfg = FlowConfig()
        xs = sample_intrinsic(datum, 4, np.random.default_rng(47))
        sequential = run_batch(xs, cfg, datum, fam, basis)
        monkeypatch.setenv("OKKIT_THREADS", "3")
        threaded = run_batch(xs, cfg, datum, fam, basis)
        assert [r.F for r in sequential] == [r.F for r in threaded]


class TestPoissonBracket:
    def test_segre_moments_commute(self, p1xp1):
        datum, fam, basis = p1xp1
        cfg = FlowConfig()
        rng = np.random.default_rng(53)
        for x in sample_intrinsic(datum, 2, rng):
            value = poisson_bracket(1, 2, x, cfg, datum, fam, basis)
            assert abs(value) < 1e-3

    def test_self_bracket_exactly_zero(self, p1xp1):
        datum, fam, basis = p1xp1
        cfg = FlowConfig()
        x = sample_intrinsic(datum, 1, np.random.default_rng(59))[0]
        assert poisson_bracket(1, 1, x, cfg, datum, fam, basis) == 0.0

    def test_antisymmetry_exact(self, p1xp1):
        datum, fam, basis = p1xp1
        cfg = FlowConfig()
        x = sample_intrinsic(datum, 1, np.random.default_rng(61))[0]
        ab = poisson_bracket(1, 2, x, cfg, datum, fam, basis)
        ba = poisson_bracket(2, 1, x, cfg, datum, fam, basis)
        assert ab == -ba

    def test_component_indices_validated(self, p1xp1):
        datum, fam, basis = p1xp1
        cfg = FlowConfig()
        x = sample_intrinsic(datum, 1, np.random.default_rng(67))[0]
        with pytest.raises(ValueError, match="1..2"):
            poisson_bracket(0, 1, x, cfg, datum, fam, basis)
        with pytest.raises(ValueError, match="1..2"):
            poisson_bracket(1, 3, x, cfg, datum, fam, basis)


class TestSymplecticResidual:
    def test_elliptic_transport_preserves_form(self, elliptic):
        datum, fam, basis = elliptic
        cfg = FlowConfig()
        x = sample_intrinsic(datum, 1, np.random.default_rng(71))[0]
        cp = embedded_chart_point(elliptic, x, t=cfg.epsilon)
        E = tangent_frame(cp, fam, basis, fiber_only=True)
        value = symplectic_residual(cp, E[:, 0], E[:, 1], cfg, fam, basis)
        assert value < 1e-4

    def test_zero_vectors_give_zero(self, elliptic):
        _, fam, basis = elliptic
        cfg = FlowConfig()
        cp = ChartPoint(2, (0.5, 0.5), 0.5)
        zero = np.zeros(6)
        assert symplectic_residual(cp, zero, zero, cfg, fam, basis) == 0.0


class TestExport:
    def make_results(self, pipe, count=2, seed=73):
        datum, fam, basis = pipe
        cfg = FlowConfig()
        xs = sample_intrinsic(datum, count, np.random.default_rng(seed))
        return run_batch(xs, cfg, datum, fam, basis), cfg

    def test_csv_header_and_shape(self, elliptic):
        results, _ = self.make_results(elliptic)
        text = trajectory_csv(results)
        lines = text.strip().split("\n")
        assert lines[0] == "sample_id,s,t_re,t_im,chart,residual,Impi,ReLinErr,F_1"
        assert len(lines) > 2
        for line in lines[1:]:
            fields = line.split(",")
            assert len(fields) == 9
            int(fields[0])
            int(fields[4])
            for f in fields[1:4] + fields[5:]:
                float(f)

    def test_csv_bit_identical_across_runs(self, elliptic):
        first, _ = self.make_results(elliptic)
        second, _ = self.make_results(elliptic)
        assert trajectory_csv(first) == trajectory_csv(second)

    def test_diagnostics_summary(self, elliptic):
        results, cfg = self.make_results(elliptic)
        diag = diagnostics_dict(results, cfg)
        assert diag["total"] == 2
        assert diag["succeeded"] == 2
        assert diag["config"]["epsilon"] == cfg.epsilon
        assert all(e["ok"] for e in diag["samples"])
        assert all(len(e["F"]) == 1 for e in diag["samples"])
