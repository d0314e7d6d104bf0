"""Recommenders: reduction granularity ladder and barrier mechanism advisor."""

import random

import pytest

from syncperf import fixtures
from syncperf.errors import ValidationError
from syncperf.model import CostPoint, ScenarioKind, SyncCost, SyncLevel
from syncperf.recommend import (
    BarrierCostTable,
    MechanismCost,
    ReductionQuery,
    multi_grid_config_ok,
    recommend_barrier,
    recommend_reduction_config,
)

V100 = fixtures.device_profile("v100")


def scenery_query(device: str, scenery: int, n_bytes: float) -> ReductionQuery:
    spec = next(s for s in fixtures.scenery_specs(device) if s.scenery == scenery)
    no_sync = SyncCost(spec.sync.level, 0.0, 1)
    return ReductionQuery(n_bytes, 8, fixtures.device_profile(device),
                          ((spec.basic, no_sync), (spec.more, spec.sync)))


class TestReductionRecommendation:
    def test_32_doubles_use_a_warp(self):
        rec = recommend_reduction_config(scenery_query("v100", 1, 256.0))
        assert rec.chosen == "1 warp"

    def test_1024_doubles_stay_on_32_threads(self):
        rec = recommend_reduction_config(scenery_query("v100", 2, 8192.0))
        assert rec.chosen == "32 thrd."
        assert rec.scenario.kind is ScenarioKind.ABOVE_MORE
        assert rec.n_l is not None and rec.n_l > 8192.0

    def test_zero_bytes_picks_smallest_candidate(self):
        rec = recommend_reduction_config(scenery_query("v100", 1, 0.0))
        assert rec.chosen == "1 thrd."

    def test_merged_ladder_walks_past_the_first_rung(self):
        ladder = fixtures.reduction_ladder("v100")
        query = ReductionQuery(256.0, 8, V100, ladder)
        assert recommend_reduction_config(query).chosen == "1 warp"
        big = ReductionQuery(100_000.0, 8, V100, ladder)
        assert recommend_reduction_config(big).chosen == "1024 thrd"

    def test_rationale_is_stable(self):
        first = recommend_reduction_config(scenery_query("v100", 1, 256.0))
        second = recommend_reduction_config(scenery_query("v100", 1, 256.0))
        assert first.rationale == second.rationale

    def test_agrees_with_exhaustive_cost_evaluation(self):
        # Brute-force oracle over two-candidate queries: evaluate the decision
        # inequality's sides as absolute times and take the argmin.
        rng = random.Random(808)
        for _ in range(500):
            latency = rng.uniform(1.0, 300.0)
            thr_basic = rng.uniform(0.05, 30.0)
            thr_more = thr_basic * rng.uniform(1.01, 40.0)
            sync_total = rng.uniform(0.1, 4000.0)
            n = rng.uniform(0.0, 3.0) * latency * thr_more
            basic = CostPoint("small", latency, thr_basic)
            more = CostPoint("big", latency, thr_more)
            query = ReductionQuery(n, 8, V100, (
                (basic, SyncCost(SyncLevel.BLOCK, 0.0, 1)),
                (more, SyncCost(SyncLevel.BLOCK, sync_total, 1)),
            ))
            time_small = latency + max(0.0, n - basic.concurrency) / thr_basic
            time_big = latency + sync_total + max(0.0, n - more.concurrency) / thr_more
            expected = "small" if time_small < time_big else "big"
            assert recommend_reduction_config(query).chosen == expected

    def test_time_unit_rescaling_leaves_choice_unchanged(self):
        # Expressing every time in a different unit (latencies and sync costs
        # scale by k, throughputs by 1/k) must not move any decision.
        rng = random.Random(909)
        for _ in range(200):
            latency = rng.uniform(1.0, 300.0)
            thr_basic = rng.uniform(0.05, 30.0)
            thr_more = thr_basic * rng.uniform(1.01, 40.0)
            sync_total = rng.uniform(0.1, 4000.0)
            n = rng.uniform(0.0, 3.0) * latency * thr_more
            scale = rng.choice([0.125, 0.5, 3.0, 1000.0])

            def build(k):
                return ReductionQuery(n, 8, V100, (
                    (CostPoint("small", latency * k, thr_basic / k),
                     SyncCost(SyncLevel.BLOCK, 0.0, 1)),
                    (CostPoint("big", latency * k, thr_more / k),
                     SyncCost(SyncLevel.BLOCK, sync_total * k, 1)),
                ))

            assert recommend_reduction_config(build(1.0)).chosen \
                == recommend_reduction_config(build(scale)).chosen

    def test_decreasing_concurrency_rejected(self):
        shrinking = (
            (CostPoint("a", 10.0, 5.0), SyncCost(SyncLevel.BLOCK, 0.0, 1)),
            (CostPoint("b", 10.0, 1.0), SyncCost(SyncLevel.BLOCK, 10.0, 1)),
        )
        with pytest.raises(ValidationError):
            ReductionQuery(64.0, 8, V100, shrinking)

    def test_needs_two_candidates(self):
        single = ((CostPoint("a", 10.0, 5.0), SyncCost(SyncLevel.BLOCK, 0.0, 1)),)
        with pytest.raises(ValidationError):
            ReductionQuery(64.0, 8, V100, single)


class TestMultiGridConfig:
    def test_published_thresholds(self):
        assert multi_grid_config_ok(V100, 8, 128) is True     # 32 warps exactly
        assert multi_grid_config_ok(V100, 32, 64) is False    # slowest case
        assert multi_grid_config_ok(V100, 1, 32) is True      # fastest case

    def test_warp_budget_enforced(self):
        assert multi_grid_config_ok(V100, 8, 129) is False    # 40 warps
        assert multi_grid_config_ok(V100, 2, 512) is True     # 32 warps
        assert multi_grid_config_ok(V100, 9, 32) is False     # too many blocks


class TestBarrierAdvisor:
    def test_single_gpu_implicit_wins_with_small_margin(self):
        rec = recommend_barrier(1, 1, fixtures.BARRIER_COSTS)
        assert rec.chosen == "implicit_launch"
        assert rec.margins_ns["grid"] <= 2500.0
        assert rec.total_ns["grid"] == pytest.approx(1063.0 + 2500.0)

    def test_eight_gpu_cpu_side_wins_multi_grid_within_slack(self):
        rec = recommend_barrier(1, 8, fixtures.BARRIER_COSTS)
        assert rec.chosen == "cpu_side"
        assert rec.margins_ns["multi_grid"] == pytest.approx(16_000.0)
        assert "multi_grid" in rec.within_slack
        assert "implicit_launch" not in rec.within_slack
        assert "programmability" in rec.rationale

    def test_many_iterations_make_ordering_ignore_one_time_overhead(self):
        iterations = 10 ** 6
        rec = recommend_barrier(iterations, 8, fixtures.BARRIER_COSTS)
        for name, total in rec.total_ns.items():
            per_iteration = total / iterations
            assert per_iteration == pytest.approx(rec.per_iteration_ns[name], rel=1e-3)
        ordering_by_total = sorted(rec.total_ns, key=rec.total_ns.get)
        ordering_by_steady = sorted(rec.per_iteration_ns, key=rec.per_iteration_ns.get)
        assert ordering_by_total == ordering_by_steady

    def test_raising_multi_grid_latency_never_selects_it(self):
        base = fixtures.BARRIER_COSTS
        baseline = recommend_barrier(10, 8, base)
        assert baseline.chosen != "multi_grid"
        for bump in (1.0, 2.0, 10.0):
            mechanisms = []
            for m in base.mechanisms:
                if m.mechanism == "multi_grid":
                    per = {g: v * bump for g, v in m.per_barrier_ns.items()}
                    mechanisms.append(MechanismCost("multi_grid", per, m.one_time_ns))
                else:
                    mechanisms.append(m)
            rec = recommend_barrier(10, 8, BarrierCostTable(tuple(mechanisms)))
            assert rec.chosen != "multi_grid"

    def test_missing_mechanism_yields_insufficient_data(self):
        rec = recommend_barrier(1, 8, fixtures.BARRIER_COSTS, mechanisms=["grid"])
        assert rec.chosen is None
        assert rec.missing == ("grid",)
        assert "insufficient data" in rec.rationale

    def test_unrequested_missing_mechanisms_are_skipped(self):
        # grid has no 8-GPU entry; the default mechanism set simply omits it.
        rec = recommend_barrier(1, 8, fixtures.BARRIER_COSTS)
        assert "grid" not in rec.total_ns
        assert rec.missing == ()

    def test_bad_arguments_rejected(self):
        with pytest.raises(ValidationError):
            recommend_barrier(0, 1, fixtures.BARRIER_COSTS)
        with pytest.raises(ValidationError):
            recommend_barrier(1, 1, fixtures.BARRIER_COSTS, mechanisms=["warp"])
        with pytest.raises(ValidationError):
            recommend_barrier(1, 1, fixtures.BARRIER_COSTS, slack_factor=0.0)
