import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from pcnsim.errors import NoRouteError, PayloadTooLargeError, RouteConstraintError
from pcnsim.routing import (
    FeeModel,
    build_onion,
    build_route,
    compute_fee,
    find_route,
    hints_for,
)
from pcnsim.synthetic import two_path_fixture
from pcnsim.topology import Channel, ChannelGraph


def chan(base, ppm):
    return Channel("x", "a", "b", 1, {"a": 0, "b": 0}, base, ppm)


def test_compute_fee_formula():
    assert compute_fee(chan(1, 1), 100_000) == 1
    assert compute_fee(chan(0, 0), 1) == 0
    assert compute_fee(chan(1000, 2500), 1_000_000) == 1000 + 2500
    with pytest.raises(ValueError):
        compute_fee(chan(1, 1), 0)


def test_direct_route_pays_nothing():
    g = ChannelGraph()
    g.add_node("a")
    g.add_node("b")
    g.add_existing_channel("a", "b", 100_000)
    r = find_route(g, "a", "b", 5_000)
    assert len(r) == 1 and r.total_fee_msat == 0


def test_route_over_the_middle_node():
    g = ChannelGraph()
    for n in ("alice", "charlie", "bob"):
        g.add_node(n)
    g.add_existing_channel("alice", "charlie", 100_000)
    g.add_existing_channel("charlie", "bob", 100_000)
    r = find_route(g, "alice", "bob", 10_000)
    assert r.nodes == ["alice", "charlie", "bob"]
    assert r.total_fee_msat == compute_fee(g.channel(r.hops[1].chan_id), 10_000)


def test_private_destination_needs_hint():
    g = two_path_fixture()
    with pytest.raises(NoRouteError):
        find_route(g, "BM", "CnC", 100_000)
    r = find_route(g, "BM", "CnC", 100_000, hints=hints_for(g, "CnC"))
    assert r.destination == "CnC" and len(r) == 4


def test_fixed_fee_split():
    g = two_path_fixture()
    r = find_route(g, "BM", "CnC", 100_000, hints=hints_for(g, "CnC"), fee_model=FeeModel.fixed(4))
    assert r.total_fee_msat == 4_000
    assert [h.fee_msat for h in r.hops] == [1334, 1333, 1333, 0]
    assert r.total_amt_msat == 104_000


def test_hop_cap_and_fee_cap():
    g = two_path_fixture()
    hints = hints_for(g, "CnC")
    with pytest.raises(RouteConstraintError, match="hops"):
        find_route(g, "BM", "CnC", 100_000, hints=hints, max_hops=3)
    with pytest.raises(RouteConstraintError, match="fee"):
        find_route(g, "BM", "CnC", 100_000, hints=hints, max_fee_msat=0)


def test_liquidity_bottleneck_reported():
    g = ChannelGraph()
    for n in "abc":
        g.add_node(n)
    g.add_existing_channel("a", "b", 100_000)
    g.add_existing_channel("b", "c", 20_000, balance1_msat=1_000)
    with pytest.raises(NoRouteError) as info:
        find_route(g, "a", "c", 50_000)
    assert info.value.bottleneck == 2


def test_onion_sizes_and_opacity():
    g = two_path_fixture()
    r = find_route(g, "BM", "CnC", 100_000, hints=hints_for(g, "CnC"))
    empty = build_onion(r)
    assert len(empty.per_hop) == 4 and empty.payload_for("CnC") is None
    pkt = build_onion(r, b"x" * 45)
    assert pkt.size == 1300
    for node in r.nodes[:-1]:
        assert pkt.payload_for(node) is None
    assert pkt.payload_for("CnC") == b"x" * 45
    build_onion(r, b"x" * 1300)
    with pytest.raises(PayloadTooLargeError):
        build_onion(r, b"x" * 1301)


# ---------- exhaustive oracle ----------

def random_graph(rng, n, p):
    g = ChannelGraph()
    names = [f"n{i}" for i in range(n)]
    for x in names:
        g.add_node(x)
    for a, b in itertools.combinations(names, 2):
        if rng.random() < p:
            g.add_existing_channel(a, b, rng.randint(20, 200) * 1000,
                                   balance1_msat=None,
                                   base_fee_msat=rng.randint(0, 3000),
                                   prop_fee_ppm=rng.randint(0, 5000))
    return g, names


def brute_min_fee(g, src, dst, amount):
    best = None

    def walk(node, path, chans):
        nonlocal best
        if node == src:
            try:
                r = build_route(g, src, list(reversed(chans)), amount)
            except NoRouteError:
                return
            if all(g.channel(h.chan_id).balance(h.from_node) >= h.amount_msat for h in r.hops):
                best = r.total_fee_msat if best is None else min(best, r.total_fee_msat)
            return
        for c in g.channels_of(node):
            u = c.peer(node)
            if u not in path:
                walk(u, path | {u}, chans + [c.chan_id])

    walk(dst, {dst}, [])
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(4, 7))
def test_route_is_fee_optimal(seed, n):
    rng = random.Random(seed)
    g, names = random_graph(rng, n, 0.5)
    src, dst = rng.sample(names, 2)
    amount = rng.randint(1, 30) * 1000 * 1000
    oracle = brute_min_fee(g, src, dst, amount)
    if oracle is None:
        with pytest.raises(NoRouteError):
            find_route(g, src, dst, amount)
        return
    r = find_route(g, src, dst, amount)
    assert r.total_fee_msat == oracle
    # each intermediary charges on the full amount its outgoing channel carries
    fees = [compute_fee(g.channel(h.chan_id), h.amount_msat) for h in r.hops[1:]]
    assert fees == [h.fee_msat for h in r.hops[:-1]]
    assert sum(fees) == r.total_fee_msat


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_hints_do_not_change_public_routes(seed):
    rng = random.Random(seed)
    g, names = random_graph(rng, 6, 0.6)
    g.add_node("hidden")
    g.add_existing_channel(names[0], "hidden", 50_000, is_private=True)
    src, dst = rng.sample(names, 2)
    try:
        plain = find_route(g, src, dst, 1_000_000)
    except NoRouteError:
        return
    hinted = find_route(g, src, dst, 1_000_000, hints=hints_for(g, "hidden"))
    assert plain == hinted
