import random

import pytest

from pcnsim.commands import (
    SendPolicy,
    pack_command,
    reimburse_collector,
    send_command,
    send_command_noise,
    unpack_command,
)
from pcnsim.covert_codec import SYN_FLOOD_COMMAND, decode_stream
from pcnsim.engine import Engine
from pcnsim.errors import AbandonedCommandError, EncodingError, PayloadTooLargeError
from pcnsim.payments import FIXED_7S, LatencyModel
from pcnsim.routing import FeeModel
from pcnsim.synthetic import lnbot_network, two_path_fixture


def engine(latency=FIXED_7S, **kw):
    return Engine(two_path_fixture(), seed=1, latency=latency, **kw)


def test_huffman_s_stream():
    e = engine()
    rep = send_command(e, "BM", "CnC", "s", "huffman")
    assert rep.stream == [5, 2, 3, 4, 6]
    assert rep.payment_attempts == 5 and rep.payments == 3
    e.run()
    amounts = [r.amount_msat // 1000 for r in e.graph.receipts["CnC"]]
    assert decode_stream(amounts, "huffman") == ["s"]


def test_single_failure_retried():
    e = engine()
    e.inject_failures(1)
    rep = send_command(e, "BM", "CnC", "s", "huffman", SendPolicy(k=3))
    assert rep.stream == [5, 2, 3, 4, 6] and rep.payment_attempts == 6
    assert rep.reschedules == 0


def test_exhausted_retries_reschedule_from_start():
    e = engine()
    e.inject_failures(4)  # k=3 allows 3 retries; the 4th failure aborts
    rep = send_command(e, "BM", "CnC", "s", "huffman", SendPolicy(k=3))
    assert rep.reschedules == 1 and rep.delivered
    assert rep.wall_clock_ms >= 3_600_000


def test_abandoned_after_r_reschedules():
    e = engine()
    e.graph.nodes["CnC"].online = False
    with pytest.raises(AbandonedCommandError) as info:
        send_command(e, "BM", "CnC", "s", "huffman", SendPolicy(max_reschedules=2))
    assert info.value.report.reschedules == 2
    assert info.value.report.payment_attempts == 0


def test_ascii_duration_excludes_sentinels():
    e = engine()
    rep = send_command(e, "BM", "CnC", SYN_FLOOD_COMMAND, "ascii")
    assert rep.payments == 44 and rep.total_sat == 2813
    assert rep.duration_s == 308
    assert rep.wall_clock_ms == 46 * 7_000


def test_fixed_fee_accounting():
    e = engine(fee_model=FeeModel.fixed(4))
    rep = send_command(e, "BM", "CnC", SYN_FLOOD_COMMAND, "huffman")
    assert rep.fee_sat == 108 * 4
    assert rep.fee_msat_all == 110 * 4_000


def test_noise_scheme_rejected_by_amount_sender():
    with pytest.raises(EncodingError):
        send_command(engine(), "BM", "CnC", "x", "noise")


def test_noise_single_payment():
    e = engine(latency=LatencyModel.fixed(2), fee_model=FeeModel.fixed(2))
    rep = send_command_noise(e, "BM", "CnC", SYN_FLOOD_COMMAND)
    assert (rep.payments, rep.fee_sat, rep.duration_s) == (1, 2, 2)
    e.run()
    assert e.graph.receipts["CnC"][-1].message.body == SYN_FLOOD_COMMAND.encode()


def test_noise_to_hundred_cncs():
    net = lnbot_network(100, random.Random(2))
    e = Engine(net.graph, seed=2, latency=LatencyModel.fixed(2), fee_model=FeeModel.fixed(2))
    fee = dur = 0
    for c in net.cncs:
        rep = send_command_noise(e, net.botmaster, c, SYN_FLOOD_COMMAND)
        fee += rep.fee_sat
        dur += rep.duration_s
    assert (fee, dur) == (200, 200)


def test_noise_empty_and_oversize():
    e = engine()
    rep = send_command_noise(e, "BM", "CnC", "")
    e.run()
    assert rep.payments == 1 and e.graph.receipts["CnC"][-1].message.body == b""
    with pytest.raises(PayloadTooLargeError):
        send_command_noise(e, "BM", "CnC", "x" * 1300)


def test_pack_roundtrip():
    assert unpack_command(pack_command(42, b"go")) == (42, b"go")
    with pytest.raises(EncodingError):
        unpack_command(b"abc")


def test_reimburse_collector_ledger():
    net = lnbot_network(1, random.Random(3))
    e = Engine(net.graph, seed=3, latency=FIXED_7S)
    cnc = net.cncs[0]
    assert reimburse_collector(e, cnc, net.collector, 2500) is None
    send_command(e, net.botmaster, cnc, SYN_FLOOD_COMMAND, "ascii")
    e.run()
    received = e.received_msat[cnc]
    assert received == (2813 + 11) * 1000
    before_cnc = sum(c.balance(cnc) for c in e.graph.channels_of(cnc))
    before_col = sum(c.balance(net.collector) for c in e.graph.channels_of(net.collector))
    res = reimburse_collector(e, cnc, net.collector, 2500)
    e.run()
    assert res.success
    after_col = sum(c.balance(net.collector) for c in e.graph.channels_of(net.collector))
    assert after_col - before_col == received - res.fee_paid_msat
    assert before_cnc - sum(c.balance(cnc) for c in e.graph.channels_of(cnc)) == received
    assert e.received_msat[cnc] == 0


def test_reimburse_collector_offline_retains():
    net = lnbot_network(1, random.Random(3))
    e = Engine(net.graph, seed=3, latency=FIXED_7S)
    cnc = net.cncs[0]
    send_command(e, net.botmaster, cnc, SYN_FLOOD_COMMAND, "ascii")
    e.run()
    e.graph.nodes[net.collector].online = False
    held = sum(c.balance(cnc) for c in e.graph.channels_of(cnc))
    res = reimburse_collector(e, cnc, net.collector, 2500)
    assert not res.success
    assert sum(c.balance(cnc) for c in e.graph.channels_of(cnc)) == held
    assert e.received_msat[cnc] > 0
