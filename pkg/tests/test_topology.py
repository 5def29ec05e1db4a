import random

import pytest
from hypothesis import given, settings, strategies as st

from pcnsim.errors import (
    ChannelClosedError,
    InsufficientFundsError,
    PolicyError,
    SnapshotError,
    UnknownChannelError,
)
from pcnsim.payments import FIXED_7S, send_payment
from pcnsim.routing import build_route
from pcnsim.synthetic import two_path_fixture
from pcnsim.topology import (
    SAT_PER_BTC,
    ChannelGraph,
    Role,
    load_snapshot,
    replay_wallets,
    sat_to_btc,
)


def two_path_document():
    g = two_path_fixture()
    nodes = [{"pub_key": n.pubkey, "alias": n.id} for n in g.nodes.values()]
    edges = []
    for c in g.channels.values():
        edges.append({"channel_id": c.chan_id, "node1_pub": g.nodes[c.node1].pubkey,
                      "node2_pub": g.nodes[c.node2].pubkey, "capacity": str(c.capacity_sat),
                      "private": c.is_private})
    return {"nodes": nodes, "edges": edges}


def test_load_two_path_snapshot():
    g = load_snapshot(two_path_document())
    assert len(g.nodes) == 8
    assert len(g.channels) == 9
    assert sum(c.is_private for c in g.channels.values()) == 2


def test_load_empty_snapshot():
    g = load_snapshot({"nodes": [], "edges": []})
    assert g.nodes == {} and g.channels == {}


def test_snapshot_single_channel_balances():
    doc = {"nodes": [{"pub_key": "a"}, {"pub_key": "b"}],
           "edges": [{"channel_id": "1", "node1_pub": "a", "node2_pub": "b", "capacity": "20000"}]}
    g = load_snapshot(doc)
    c = g.channel("1")
    assert sum(c.balances.values()) == 20_000_000
    assert c.balances["a"] == c.balances["b"]


def test_snapshot_errors_name_the_record():
    with pytest.raises(SnapshotError, match="edge #0"):
        load_snapshot({"nodes": [{"pub_key": "a"}], "edges": [{"channel_id": "9"}]})
    with pytest.raises(SnapshotError, match="channel 9"):
        load_snapshot({"nodes": [{"pub_key": "a"}],
                       "edges": [{"channel_id": "9", "node1_pub": "a", "node2_pub": "zz",
                                  "capacity": 1}]})
    with pytest.raises(SnapshotError, match="node #1"):
        load_snapshot({"nodes": [{"pub_key": "a"}, {"alias": "x"}], "edges": []})
    with pytest.raises(SnapshotError, match="integer"):
        load_snapshot({"nodes": [{"pub_key": "a"}, {"pub_key": "b"}],
                       "edges": [{"channel_id": "1", "node1_pub": "a", "node2_pub": "b",
                                  "capacity": "lots"}]})


def test_three_opens_cost():
    g = ChannelGraph()
    g.add_node("cnc", wallet_sat=70_000, role=Role.CNC)
    for p in "xyz":
        g.add_node(p)
    for p in "xyz":
        g.open_channel("cnc", p, 20_000, is_private=True)
    assert g.nodes["cnc"].wallet_sat == 9_538
    assert sum(e.fee_sat for e in g.ledger) == 462
    g.check_conservation()


def test_hundred_servers_fee_sum():
    g = ChannelGraph()
    g.add_node("peer")
    for i in range(100):
        g.add_node(f"c{i}", wallet_sat=3 * 20_154)
        for _ in range(3):
            g.open_channel(f"c{i}", "peer", 20_000)
    total = sum(e.fee_sat for e in g.ledger)
    assert total == 46_200
    assert sat_to_btc(total) == "0.000462"


def test_open_with_exact_wallet():
    g = ChannelGraph()
    g.add_node("a", wallet_sat=20_154)
    g.add_node("b")
    g.open_channel("a", "b", 20_000)
    assert g.nodes["a"].wallet_sat == 0


def test_open_rejections():
    g = ChannelGraph()
    g.add_node("a", wallet_sat=20_153)
    g.add_node("b")
    with pytest.raises(InsufficientFundsError):
        g.open_channel("a", "b", 20_000)
    with pytest.raises(PolicyError, match="floor"):
        g.open_channel("a", "b", 19_999)
    with pytest.raises(PolicyError):
        g.open_channel("a", "a", 20_000)
    assert g.ledger == []


def test_close_fresh_channel_returns_capacity():
    g = ChannelGraph(close_fee_sat=0)
    g.add_node("a", wallet_sat=20_154)
    g.add_node("b")
    cid = g.open_channel("a", "b", 20_000)
    g.close_channel(cid, "a")
    assert g.nodes["a"].wallet_sat == 20_000
    with pytest.raises(ChannelClosedError):
        g.close_channel(cid, "a")
    with pytest.raises(UnknownChannelError):
        g.close_channel("nope", "a")


def test_alice_bob_settlement():
    # 5 BTC channel, payments of 1, 2 and 1 BTC to the peer, then close
    g = ChannelGraph(close_fee_sat=0)
    g.add_node("alice", wallet_sat=5 * SAT_PER_BTC + 154)
    g.add_node("bob")
    cid = g.open_channel("alice", "bob", 5 * SAT_PER_BTC)
    rng = random.Random(0)
    for btc in (1, 2, 1):
        amt = btc * SAT_PER_BTC * 1000
        send_payment(g, build_route(g, "alice", [cid], amt), amt, FIXED_7S, rng)
    settlement = g.close_channel(cid, "bob")
    assert settlement == {"alice": SAT_PER_BTC, "bob": 4 * SAT_PER_BTC}
    assert g.nodes["alice"].wallet_sat == SAT_PER_BTC


def test_close_fee_replay_oracle():
    g = ChannelGraph(close_fee_sat=154)
    initial = {"a": 100_000, "b": 50_000}
    for n, w in initial.items():
        g.add_node(n, wallet_sat=w)
    c1 = g.open_channel("a", "b", 30_000, push_sat=1_000)
    c2 = g.open_channel("b", "a", 25_000)
    g.close_channel(c1, "a")
    g.close_channel(c2, "a")
    live = {n: g.nodes[n].wallet_sat for n in initial}
    assert replay_wallets(g, initial) == live
    assert live["a"] == 100_000 - 30_154 + 29_000 - 154 + 0 - 154
    g.check_conservation()


def test_most_connected_star_and_truncation():
    g = ChannelGraph()
    g.add_node("hub")
    for i in range(7):
        g.add_node(f"s{i}")
        g.add_existing_channel("hub", f"s{i}", 100_000)
    assert g.most_connected(1) == ["hub"]
    assert len(g.most_connected(50)) == 8


def test_most_connected_matches_degree_count():
    g = two_path_fixture()
    degree = {n: 0 for n in g.nodes}
    for c in g.channels.values():
        if not c.is_private:
            degree[c.node1] += 1
            degree[c.node2] += 1
    oracle = sorted(g.nodes, key=lambda n: (-degree[n], g.nodes[n].pubkey))[:3]
    assert g.most_connected(3) == oracle


def test_announcements_skip_private_and_broadcast():
    g = ChannelGraph()
    g.add_node("a", wallet_sat=1_000_000)
    g.add_node("b")
    s1, s2 = g.subscribe_announcements(), g.subscribe_announcements()
    g.open_channel("a", "b", 20_000, is_private=True)
    assert s1.poll() == []
    g.open_channel("a", "b", 20_000)
    e1, e2 = s1.poll(), s2.poll()
    assert len(e1) == 1 and e1 == e2
    exported = g.export_snapshot()
    assert len(exported["edges"]) == 1


def test_role_is_fixed():
    g = ChannelGraph()
    n = g.add_node("a")
    with pytest.raises(AttributeError):
        n.role = Role.CNC


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(1, 5_000)), max_size=30),
       st.integers(0, 2**32))
def test_money_conserved_under_random_activity(ops, seed):
    rng = random.Random(seed)
    g = ChannelGraph(close_fee_sat=154)
    for n in "abcd":
        g.add_node(n, wallet_sat=200_000)
    for op, x in ops:
        nodes = list(g.nodes)
        try:
            if op == 0:
                a, b = rng.sample(nodes, 2)
                g.open_channel(a, b, 20_000 + x, push_sat=x)
            elif op == 1 and g.public_channels():
                c = rng.choice(g.public_channels())
                g.close_channel(c.chan_id, c.node1)
            elif g.public_channels():
                c = rng.choice(g.public_channels())
                frm = rng.choice(c.endpoints)
                amt = min(x * 1000, c.balance(frm))
                if amt > 0:
                    send_payment(g, build_route(g, frm, [c.chan_id], amt), amt, FIXED_7S, rng)
        except (InsufficientFundsError, PolicyError):
            pass
        g.check_conservation()
