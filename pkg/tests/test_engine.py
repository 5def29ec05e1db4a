import random

import pytest
from hypothesis import given, settings, strategies as st

from pcnsim.engine import END_OF_SIMULATION, Engine, EventQueue, stream_seed
from pcnsim.errors import SchedulingError
from pcnsim.payments import FIXED_7S
from pcnsim.synthetic import two_path_fixture


def test_equal_times_fire_in_insertion_order():
    q = EventQueue()
    fired = []
    for tag in "abc":
        q.schedule(10, fired.append, tag)
    q.run()
    assert fired == ["a", "b", "c"]


def test_empty_queue_marker():
    assert EventQueue().advance() is END_OF_SIMULATION


def test_past_scheduling_raises():
    q = EventQueue()
    q.schedule(5, lambda: None)
    q.run()
    with pytest.raises(SchedulingError):
        q.schedule(4, lambda: None)


def test_sort_oracle_large():
    rng = random.Random(11)
    q = EventQueue()
    times = [rng.randint(0, 10**6) for _ in range(100_000)]
    for i, t in enumerate(times):
        q.schedule(t, lambda i: None, i)
    popped = []
    while True:
        ev = q.advance()
        if ev is END_OF_SIMULATION:
            break
        popped.append((ev.time, ev.args[0]))
    assert popped == sorted((t, i) for i, t in enumerate(times))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 50), max_size=40))
def test_clock_never_decreases(delays):
    q = EventQueue()
    seen = []
    for d in delays:
        q.schedule_in(d, lambda: seen.append(q.now))
    q.run()
    assert seen == sorted(seen)


def test_sleep_fires_due_events():
    q = EventQueue()
    fired = []
    q.schedule(100, fired.append, 1)
    q.schedule(300, fired.append, 2)
    q.sleep(200)
    assert fired == [1] and q.now == 200


def test_stream_seeds_independent():
    assert stream_seed(1, "a") != stream_seed(1, "b")
    e1 = Engine(two_path_fixture(), seed=3)
    e2 = Engine(two_path_fixture(), seed=3)
    e2.rng("other").random()
    assert e1.rng("latency").random() == e2.rng("latency").random()


def test_keysend_receipt_arrives_later():
    e = Engine(two_path_fixture(), seed=1, latency=FIXED_7S)
    got = []
    e.on_receipt("CnC", lambda r: got.append((e.now, r.amount_msat)))
    res = e.keysend("BM", "CnC", 5_000)
    assert res.success and got == []
    e.run()
    assert got == [(7_000, 5_000)]
    assert e.received_msat["CnC"] == 5_000


def test_injected_failure():
    e = Engine(two_path_fixture(), seed=1, latency=FIXED_7S)
    e.inject_failures(1)
    assert not e.keysend("BM", "CnC", 5_000).success
    assert e.keysend("BM", "CnC", 5_000).success


def test_failure_rate_bounds():
    with pytest.raises(ValueError):
        Engine(two_path_fixture(), failure_rate=1.5)
