import json
import math
from fractions import Fraction

import numpy as np
import pytest

from fampack.copies import Copy
from fampack.exact import verify_integer_packing
from fampack.graph import Family, Graph, VertexPartition, named_pattern
from fampack.lp import FractionalPacking, solve_fractional_packing
from fampack.pipeline import (
    PipelineConfig,
    PrecondError,
    build_color_subgraph,
    compute_constants,
    concentration_check,
    random_coloring,
    restrict_to_good,
    run_pipeline,
)
from fampack.regularity import ASSUME, build_reduced_graph

from conftest import gnp
from test_regularity import multipartite

K3 = Family.of("K3")
SPEC_CONFIG = PipelineConfig(m_prime=6, factor=2, delta=0.2, gamma=0.25, beta=0.1)


class TestConstants:
    def test_k3_eps_tenth(self):
        c = compute_constants(0.1, K3)
        assert c.k0 == 3 and c.delta == c.beta == Fraction(1, 40)
        assert c.refinement_factor == 2250

    def test_unbounded_family(self):
        assert compute_constants(0.1, None).k0 == 200
        assert compute_constants(0.1, math.inf).k0 == 200

    def test_zeta(self):
        c = compute_constants(0.5, 3, mu=0.1)
        assert c.delta == c.beta == Fraction(1, 8)
        assert c.zeta == Fraction(1, 10) * Fraction(1, 8) ** 9 / 2

    def test_gamma_prime_and_threshold(self):
        c = compute_constants(0.5, 3, gamma=0.2)
        assert c.gamma_prime == Fraction(1, 5) * Fraction(1, 2) / 225
        assert c.psi_threshold(4) == Fraction(1, 16)

    @pytest.mark.parametrize("eps", [0, 1, -0.5, 2])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ValueError):
            compute_constants(eps, K3)

    def test_json_flags_non_constructive(self):
        obj = compute_constants(0.1, None).to_json_obj()
        assert obj["k_infinity"] == "inf" and obj["log10_zeta"] < -1000
        assert any("non-constructive" in n for n in obj["notes"])


def test_restrict_to_good():
    g = Graph.complete(6)
    p = VertexPartition(((0, 1), (2, 3), (4, 5)))
    psi = FractionalPacking(g, K3, {Copy(0, (0, 2, 4)): Fraction(1, 2), Copy(0, (0, 1, 2)): Fraction(1, 3)}, labeled=True)
    good = restrict_to_good(psi, p, 3)
    assert good.weights == {Copy(0, (0, 2, 4)): Fraction(1, 2)}
    singletons = VertexPartition(tuple((v,) for v in range(6)))
    assert restrict_to_good(psi, singletons, 3).weights == psi.weights
    assert restrict_to_good(psi, singletons, 2).weights == {}


def _tripartite_setup(t=4, p=1.0, seed=0):
    g, classes = multipartite([t, t, t], p, seed)
    part = VertexPartition(tuple(classes))
    r = build_reduced_graph(g, part, 0.2, 0.01, method=ASSUME)
    return g, part, r


class TestColoring:
    def test_zero_packing_leaves_everything_uncolored(self):
        g, part, r = _tripartite_setup()
        col = random_coloring(g, r, FractionalPacking(r.base, K3, {}, labeled=True), 0)
        assert col.colors == {}

    def test_full_mass_colors_everything(self):
        g, part, r = _tripartite_setup()
        h = Copy(0, (0, 1, 2))
        col = random_coloring(g, r, FractionalPacking(r.base, K3, {h: Fraction(1)}, labeled=True), 0)
        assert len(col.colors) == g.m and set(col.colors.values()) == {h}
        x = build_color_subgraph(col, h, K3)
        assert x.edges == g.edges

    def test_overload_rejected(self):
        g, part, r = _tripartite_setup()
        psi = FractionalPacking(r.base, K3, {Copy(0, (0, 1, 2)): Fraction(2, 3), Copy(0, (1, 0, 2)): Fraction(2, 3)}, labeled=True)
        with pytest.raises(PrecondError, match="coloring"):
            random_coloring(g, r, psi, 0)

    def test_uncolored_color_subgraph_empty(self):
        g, part, r = _tripartite_setup()
        h = Copy(0, (0, 1, 2))
        col = random_coloring(g, r, FractionalPacking(r.base, K3, {}, labeled=True), 0)
        assert build_color_subgraph(col, h, K3).m == 0

    def test_colors_only_on_their_pairs(self):
        pk, rep = run_pipeline(gnp(40, 0.5, 1), K3, PipelineConfig(m_prime=1, factor=4, psi_threshold=0), 1)
        col = rep.trace.coloring
        for e, h in col.colors.items():
            assert col.pair_of(e) in set(h.edges(K3))


    def test_frequencies_calibrated(self):
        # z-scores of per-pair color counts over many coloring seeds behave like N(0, 1)
        g = gnp(60, 0.5, 1)
        _, rep = run_pipeline(g, K3, PipelineConfig(m_prime=2, factor=2, final_greedy=False), 0)
        tr = rep.trace
        per_pair = {}
        for e in tr.g_star.sorted_edges:
            per_pair.setdefault(tr.coloring.pair_of(e), []).append(e)
        zs = []
        for s in range(150):
            col = random_coloring(tr.g_star, tr.reduced, tr.psi_prime, s)
            for pair, edges in per_pair.items():
                for h, prob in col.probabilities.get(pair, []):
                    n, pr = len(edges), float(prob)
                    hits = sum(col.colors.get(e) == h for e in edges)
                    zs.append((hits - n * pr) / math.sqrt(n * pr * (1 - pr)))
        zs = np.asarray(zs)
        assert abs(zs.mean()) < 0.05 and 0.93 < zs.var() < 1.07


class TestConcentration:
    def test_empty(self):
        _, part, _ = _tripartite_setup()
        rep = concentration_check(Graph.empty(12), named_pattern("K3"), part.classes, Fraction(1, 2), 0.1, 4)
        assert rep.fraction_ok == 1 and rep.n_edges == 0

    def test_complete_tripartite(self):
        g, part, _ = _tripartite_setup(t=5)
        rep = concentration_check(g, named_pattern("K3"), part.classes, 1, 0.1, 5)
        assert rep.fraction_ok == 1 and rep.max_rel_deviation == 0 and rep.expected == 5


class TestRunPipeline:
    def test_single_triangle(self):
        pk, rep = run_pipeline(Graph.complete(3), K3, PipelineConfig(m_prime=1, factor=3), 0)
        assert pk.size <= 1 and rep.verified

    def test_triangle_free(self):
        pk, rep = run_pipeline(named_pattern("C5"), K3, PipelineConfig(m_prime=1, factor=5), 0)
        assert pk.size == 0 and rep.w_psi == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_gnp60(self, seed):
        g = gnp(60, 0.5, seed)
        pk, rep = run_pipeline(g, K3, SPEC_CONFIG, seed)
        assert verify_integer_packing(g, K3, pk)
        assert rep.verified and rep.m == 12
        assert pk.size <= rep.lp_value + 1e-9
        # stage monotonicity and the projection identity, exactly
        assert rep.w_psi >= rep.w_psi_good >= rep.w_psi_star
        assert rep.w_psi_star == rep.pair_volume * rep.w_psi_prime
        assert rep.projection_identity and rep.reduced_load_ok

    def test_exact_lp_bounds_output(self):
        g = gnp(14, 0.6, 4)
        cfg = PipelineConfig(m_prime=1, factor=3, lp_mode="exact", psi_threshold=0)
        pk, rep = run_pipeline(g, K3, cfg, 2)
        assert isinstance(rep.lp_value, Fraction)
        assert pk.size <= rep.lp_value == solve_fractional_packing(g, K3).value

    def test_pipeline_only_part_is_valid(self):
        g = gnp(60, 0.7, 2)
        cfg = PipelineConfig(m_prime=1, factor=3, psi_threshold=0, final_greedy=False)
        pk, rep = run_pipeline(g, K3, cfg, 0)
        assert rep.greedy_extra == 0 and pk.size == rep.pipeline_size > 0
        assert verify_integer_packing(g, K3, pk)

    def test_deterministic_report(self):
        g = gnp(30, 0.5, 5)
        a = run_pipeline(g, K3, PipelineConfig(m_prime=2, factor=2), 8)
        b = run_pipeline(g, K3, PipelineConfig(m_prime=2, factor=2), 8)
        assert a[1].to_json() == b[1].to_json() and a[0].dump() == b[0].dump()

    def test_theoretical_mode_reports_infeasible(self):
        pk, rep = run_pipeline(gnp(30, 0.5, 0), K3, PipelineConfig(mode="theoretical", epsilon=0.1), 0)
        assert rep.status == "infeasible" and "parameters infeasible at this n" in rep.message
        assert pk.size == 0 and json.loads(rep.to_json())["constants"]["refinement_factor"] == 2250

    def test_refinement_error_names_stage(self):
        with pytest.raises(Exception, match=r"\[refine\]"):
            run_pipeline(Graph.complete(5), K3, PipelineConfig(m_prime=1, factor=6), 0)

    def test_regularity_partition_option(self):
        g = gnp(40, 0.5, 0)
        cfg = PipelineConfig(m_prime=4, factor=2, gamma=0.25, partition="regularity", pair_check="sampling")
        pk, rep = run_pipeline(g, K3, cfg, 0)
        assert rep.partition_verdict is not None and rep.verified


class TestConfig:
    def test_round_trip(self):
        cfg = PipelineConfig(m_prime=3, psi_threshold=0.5)
        assert PipelineConfig.from_json(cfg.to_json()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            PipelineConfig.from_json('{"m_prime": 2, "bogus": 1}')

    @pytest.mark.parametrize("kw", [{"mode": "x"}, {"pair_check": "x"}, {"partition": "x"}, {"lp_mode": "x"}, {"factor": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PipelineConfig(**kw)
