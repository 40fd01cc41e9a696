import random

import pytest

from dgfdist.campaign import (
    CampaignConfig,
    CampaignLog,
    DistanceStats,
    Seed,
    assign_energy,
    choose_next,
    is_interesting,
    mutate,
    run_campaign,
    trace_edges,
)
from dgfdist.distances import (
    AggregationMethod,
    DistanceConfig,
    Granularity,
    compute_distance_map,
)
from dgfdist.errors import LogFormatError
from dgfdist.graph import parse_targets
from dgfdist.subject import ExecutionResult, load_subject

CRASHY = """
func main entry=m0
block m0 in=main
block yes in=main
block no in=main
edge m0 -> yes
edge m0 -> no
rule m0 if byte[0]==0x42 goto yes
rule m0 default goto no
crash yes
entry main
"""

DC = DistanceConfig(AggregationMethod.ARITHMETIC, Granularity.APPR)


def crashy_setup():
    subject = load_subject(CRASHY)
    targets = parse_targets("yes\n", subject.graph)
    dmap = compute_distance_map(subject.graph, targets, DC)
    return subject, targets, dmap


def mk_seed(i, dist, parent=None):
    return Seed(id=i, parent_id=parent, data=b"", distance=dist,
                coverage=frozenset(), discovered_at=0)


def test_choose_next_single_seed_repeats():
    queue = [mk_seed(0, 1.0)]
    cursor = 0
    for _ in range(5):
        seed, cursor = choose_next(queue, cursor)
        assert seed.id == 0


def test_choose_next_cycles_in_admission_order():
    queue = [mk_seed(i, 1.0) for i in range(3)]
    picked = []
    cursor = 0
    for _ in range(7):
        seed, cursor = choose_next(queue, cursor)
        picked.append(seed.id)
    assert picked == [0, 1, 2, 0, 1, 2, 0]


def test_choose_next_sees_admissions_on_the_next_pass():
    queue = [mk_seed(0, 1.0), mk_seed(1, 2.0)]
    cursor = 0
    seed, cursor = choose_next(queue, cursor)
    assert seed.id == 0
    queue.append(mk_seed(2, 3.0))  # admitted while fuzzing seed 0
    order = []
    for _ in range(4):
        seed, cursor = choose_next(queue, cursor)
        order.append(seed.id)
    assert order == [1, 2, 0, 1]


def test_choose_next_empty_queue():
    with pytest.raises(ValueError, match="empty"):
        choose_next([], 0)


def energy_config(**kw):
    defaults = dict(rng_seed=0, budget=1000, distance_config=DC,
                    exploration_fraction=0.5, max_power_exponent=4.0,
                    base_energy=16)
    defaults.update(kw)
    return CampaignConfig(**defaults)


def stats(lo, hi):
    s = DistanceStats()
    s.update(lo)
    s.update(hi)
    return s


def test_energy_is_flat_before_any_progress():
    config = energy_config()
    for dist in (0.0, 5.0, 10.0, None):
        assert assign_energy(mk_seed(0, dist), stats(0.0, 10.0), 0.0, config) == 16


def test_energy_spread_after_warmup():
    config = energy_config()
    closest = assign_energy(mk_seed(0, 0.0), stats(0.0, 10.0), 0.5, config)
    farthest = assign_energy(mk_seed(0, 10.0), stats(0.0, 10.0), 0.5, config)
    assert closest == 256  # 16 * 2**4
    assert farthest == 1   # 16 * 2**-4, floored at 1
    assert assign_energy(mk_seed(0, 5.0), stats(0.0, 10.0), 1.0, config) == 16


def test_energy_degenerate_stats_and_undefined_distance():
    config = energy_config()
    assert assign_energy(mk_seed(0, 7.0), stats(7.0, 7.0), 1.0, config) == 16
    assert assign_energy(mk_seed(0, None), stats(0.0, 10.0), 1.0, config) == 16


def test_energy_monotone_in_distance_after_warmup():
    config = energy_config()
    dstats = stats(0.0, 100.0)
    energies = [assign_energy(mk_seed(0, d), dstats, 0.7, config)
                for d in range(0, 101, 5)]
    assert energies == sorted(energies, reverse=True)
    assert all(e >= 1 for e in energies)


def test_mutate_is_deterministic():
    out1 = mutate(b"hello world", random.Random(99))
    out2 = mutate(b"hello world", random.Random(99))
    assert out1 == out2


def test_mutate_empty_input_only_grows_by_insertion():
    rng = random.Random(0)
    lengths = set()
    for _ in range(300):
        out = mutate(b"", rng)
        lengths.add(len(out))
        assert len(out) <= 8  # at most 8 ops, each inserting one byte
    assert lengths != {0}


def test_mutate_can_empty_a_single_byte():
    # byte delete or chunk erase may fire on a 1-byte input
    rng = random.Random(3)
    assert any(mutate(b"x", rng) == b"" for _ in range(200))


def test_trace_edges_include_virtual_entry():
    assert trace_edges(("a",)) == {(None, "a")}
    assert trace_edges(("a", "b", "a")) == {(None, "a"), ("a", "b"), ("b", "a")}


def test_is_interesting_updates_coverage_exactly_on_true():
    coverage = set()
    first = ExecutionResult(trace=("a", "b"), crashed=False, crash_block=None)
    assert is_interesting(first, coverage)
    snapshot = set(coverage)
    assert not is_interesting(first, coverage)
    assert coverage == snapshot
    longer = ExecutionResult(trace=("a", "b", "c"), crashed=False, crash_block=None)
    assert is_interesting(longer, coverage)
    assert ("b", "c") in coverage


def test_budget_one_runs_exactly_one_execution():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=1, budget=1, distance_config=DC)
    log = run_campaign(subject, targets, dmap, config)
    assert sum(1 for e in log.events if e.kind == "exec") == 1


def test_campaign_is_byte_identical_across_runs():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=7, budget=2000, distance_config=DC)
    first = run_campaign(subject, targets, dmap, config).to_csv()
    second = run_campaign(subject, targets, dmap, config).to_csv()
    assert first == second


def test_campaign_finds_single_byte_crash():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=5, budget=50_000, distance_config=DC,
                            initial_seeds=(b"\x00",))
    log = run_campaign(subject, targets, dmap, config)
    pocs = [e for e in log.events if e.kind == "crash" and e.poc]
    assert pocs, "havoc should solve a one-byte guard within the budget"


def test_first_batch_size_is_base_energy():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=2, budget=16, distance_config=DC)
    log = run_campaign(subject, targets, dmap, config)
    execs = [e for e in log.events if e.kind == "exec"]
    assert len(execs) == 16
    assert all(e.parent_id == 0 for e in execs)  # flat energy, one batch


def test_energy_conservation_replay():
    # reconstruct the schedule from the log alone: each batch of exec events
    # must belong to the round-robin seed and have exactly the energy its
    # distance earned at that moment
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=3, budget=400, distance_config=DC)
    log = run_campaign(subject, targets, dmap, config)
    events = log.events
    queue = []
    dstats = DistanceStats()
    idx = 0
    while idx < len(events) and events[idx].tick == 0 \
            and events[idx].kind in ("seed", "crash"):
        if events[idx].kind == "seed":
            queue.append(events[idx])
            dstats.update(events[idx].distance)
        idx += 1
    cursor = 0
    tick = 0
    while idx < len(events):
        if cursor >= len(queue):
            cursor = 0
        current = queue[cursor]
        cursor += 1
        energy = assign_energy(mk_seed(current.id, current.distance), dstats,
                               tick / config.budget, config)
        for _ in range(energy):
            if tick >= config.budget:
                break
            e = events[idx]
            idx += 1
            assert e.kind == "exec" and e.parent_id == current.id
            tick += 1
            while idx < len(events) and events[idx].tick == tick \
                    and events[idx].kind in ("seed", "crash"):
                follow = events[idx]
                idx += 1
                if follow.kind == "seed":
                    queue.append(follow)
                    dstats.update(follow.distance)
    assert tick == config.budget


def test_log_referential_integrity():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=11, budget=5000, distance_config=DC)
    log = run_campaign(subject, targets, dmap, config)
    seed_ids = set()
    last_tick = 0
    for e in log.events:
        assert e.tick >= last_tick
        last_tick = e.tick
        if e.kind == "seed":
            if e.parent_id is not None:
                assert e.parent_id in seed_ids
            seed_ids.add(e.id)
        elif e.kind in ("exec", "crash"):
            assert e.parent_id in seed_ids or e.parent_id is None
        if e.poc:
            assert e.crashed


def test_admitted_seeds_strictly_grow_coverage():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=11, budget=5000, distance_config=DC)
    log = run_campaign(subject, targets, dmap, config)
    # every admitted seed (beyond the initial one) pairs with an interesting
    # execution at the same tick
    interesting_ticks = {e.tick for e in log.events
                         if e.kind == "exec" and e.interesting}
    for e in log.events:
        if e.kind == "seed" and e.parent_id is not None:
            assert e.tick in interesting_ticks


def test_crashing_initial_seed_logged_at_tick_zero():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=1, budget=10, distance_config=DC,
                            initial_seeds=(b"\x42",))
    log = run_campaign(subject, targets, dmap, config)
    crash = next(e for e in log.events if e.kind == "crash")
    assert crash.tick == 0 and crash.poc


def test_crashing_testcases_are_not_admitted():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=5, budget=50_000, distance_config=DC,
                            initial_seeds=(b"\x00",))
    log = run_campaign(subject, targets, dmap, config)
    crash_ids = {e.id for e in log.events if e.kind == "crash"}
    seed_ids = {e.id for e in log.events if e.kind == "seed"}
    assert crash_ids and not (crash_ids & seed_ids)


def test_config_validation():
    with pytest.raises(ValueError, match="budget"):
        CampaignConfig(rng_seed=0, budget=0, distance_config=DC)
    with pytest.raises(ValueError, match="exploration_fraction"):
        CampaignConfig(rng_seed=0, budget=1, distance_config=DC,
                       exploration_fraction=1.0)
    with pytest.raises(ValueError, match="initial seed"):
        CampaignConfig(rng_seed=0, budget=1, distance_config=DC,
                       initial_seeds=())


def test_log_csv_roundtrip():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=13, budget=300, distance_config=DC)
    log = run_campaign(subject, targets, dmap, config)
    text = log.to_csv()
    again = CampaignLog.from_csv(text)
    assert again.header == log.header
    assert again.events == log.events
    assert again.to_csv() == text


def test_log_csv_rejects_malformed_rows():
    subject, targets, dmap = crashy_setup()
    config = CampaignConfig(rng_seed=13, budget=5, distance_config=DC)
    text = run_campaign(subject, targets, dmap, config).to_csv()
    broken = text + "not,a,row\n"
    lineno = len(broken.splitlines())
    with pytest.raises(LogFormatError, match=f"line {lineno}"):
        CampaignLog.from_csv(broken)
    with pytest.raises(LogFormatError, match="column header"):
        CampaignLog.from_csv("tick,event\n")


def test_stop_on_first_poc_truncates_log():
    subject, targets, dmap = crashy_setup()
    kw = dict(rng_seed=5, budget=50_000, distance_config=DC,
              initial_seeds=(b"\x00",))
    full = run_campaign(subject, targets, dmap, CampaignConfig(**kw))
    stopped = run_campaign(subject, targets, dmap,
                           CampaignConfig(stop_on_first_poc=True, **kw))
    assert stopped.events[-1].kind == "crash" and stopped.events[-1].poc
    # identical prefix behavior: the stopped log is a prefix of the full one
    full_rows = full.to_csv().splitlines()
    stopped_rows = stopped.to_csv().splitlines()
    overlap = [r for r in full_rows[:len(stopped_rows)]
               if not r.startswith("#")]
    stopped_data = [r for r in stopped_rows if not r.startswith("#")]
    assert overlap[1:len(stopped_data)] == stopped_data[1:]
