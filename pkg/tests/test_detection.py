import random

import pytest

from pcnsim.covert_codec import SYN_FLOOD_COMMAND
from pcnsim.detection import (
    ObserverSet,
    PoisonPlan,
    fee_slack_msat,
    poison_stream,
    single_injection_sweep,
    timing_correlation,
    verify_auth_rejection,
    wilson_lower,
)
from pcnsim.engine import Engine
from pcnsim.formation import FormationParams, arrival_times, derive_capacities, form_network
from pcnsim.payments import FIXED_7S, LatencyModel, send_payment
from pcnsim.propagation import CncNetwork, CommandInstance
from pcnsim.routing import route_from_path
from pcnsim.scenarios import ScenarioConfig, two_path_timing_run
from pcnsim.synthetic import hub_tree, lnbot_network, two_path_fixture


def test_wilson_bounds():
    assert wilson_lower(0, 0) == 0.0
    assert wilson_lower(1, 1) == pytest.approx(0.2065, abs=1e-4)
    assert wilson_lower(5, 5) == pytest.approx(0.5655, abs=1e-4)
    assert wilson_lower(50, 100) < 0.5 < wilson_lower(90, 100)


def test_fee_slack():
    assert fee_slack_msat(1_000_000) == 20 * (1000 + 1000)


def test_observer_sees_only_its_own_logs():
    g = two_path_fixture()
    route = route_from_path(g, ["BM", "D", "E", "F", "CnC"], 50_000)
    send_payment(g, route, 50_000, FIXED_7S, random.Random(0))
    obs = ObserverSet.from_graph(g, ["A"])
    assert obs.forward_log == ()
    assert {p for _, _, p in obs.channel_peers} == {"BM", "B"}
    obs = ObserverSet.from_graph(g, ["D"], cnc="CnC")
    assert len(obs.forward_log) == 1 and obs.upstream(obs.forward_log[0]) == "BM"
    assert len(obs.cnc_receipt_log) == 1


def test_five_frames_rank_botmaster_first():
    rep = two_path_timing_run(ScenarioConfig(), frames=5, decoys=20, seed=1)
    assert rep.top() == "BM"
    assert rep.max_score() > 0.5


def test_single_receipt_stays_below_half():
    rep = two_path_timing_run(ScenarioConfig(), frames=1, decoys=20, seed=1)
    assert rep.max_score() <= 0.5


def test_window_excludes_stale_forwards():
    g = two_path_fixture()
    route = route_from_path(g, ["BM", "A", "B", "C", "CnC"], 100_000)
    send_payment(g, route, 100_000, LatencyModel.fixed(30), random.Random(0))
    rep = timing_correlation(ObserverSet.from_graph(g, ["A"], cnc="CnC"), window_s=15)
    assert rep.matched == 0 and rep.top() is None


def test_injection_sweep_rates():
    cases, silent = single_injection_sweep("sudo", "ascii", range(1, 130))
    assert silent == 0
    cases, silent = single_injection_sweep("sudo", "huffman", range(1, 130))
    # only an END placed directly before the real END leaves the frame intact
    assert silent == 1
    assert 1 - silent / cases >= 0.99


def test_poison_plan_validates_trigger():
    with pytest.raises(ValueError):
        PoisonPlan("x", (1,), trigger="whenever")


def test_live_poison_disrupts_amount_stream():
    net = lnbot_network(1, random.Random(6))
    eng = Engine(net.graph, seed=6, latency=FIXED_7S)
    attacker = net.innocents[3]
    plan = PoisonPlan(net.cncs[0], (5,))
    out = poison_stream(eng, plan, net.botmaster, attacker, "sudo", "huffman")
    assert out.corrupted and out.injected_ok == 1 and out.attacker_cost_msat >= 5_000


def test_live_poison_cannot_touch_signed_message():
    net = lnbot_network(1, random.Random(6))
    eng = Engine(net.graph, seed=6, latency=FIXED_7S)
    plan = PoisonPlan(net.cncs[0], (5, 6, 65))
    out = poison_stream(eng, plan, net.botmaster, net.innocents[3], SYN_FLOOD_COMMAND, "noise")
    assert out.result == "original"


def auth_setup(seed=7):
    eng = Engine(hub_tree(random.Random(seed)), seed=seed, latency=LatencyModel.per_hop())
    res = form_network(eng, arrival_times(eng.rng("arrivals"), 6), FormationParams(m=2),
                       derive_capacities("unit", 10))
    net = CncNetwork(eng, res.topology())
    return eng, res, net


def test_forgeries_rejected_neighbor_accepted():
    eng, res, net = auth_setup()
    target = res.order[3]
    attacker = next(x for x, n in eng.graph.nodes.items() if n.role.value == "innocent")
    for i in range(20):
        assert verify_auth_rejection(eng, net, attacker, target, "rm -rf", command_id=1000 + i)
        claim = res.topology()[target][0]
        assert verify_auth_rejection(eng, net, attacker, target, "rm -rf",
                                     command_id=2000 + i, claim=claim)
    neighbor = res.topology()[target][0]
    assert not verify_auth_rejection(eng, net, neighbor, target, "ok", command_id=5)


def test_replay_rejected():
    eng, res, net = auth_setup()
    net.flood(res.order[0], CommandInstance(11, "legit"))
    target = res.order[3]
    captured = next(r.message for r in eng.graph.receipts[target] if r.message is not None)
    attacker = next(x for x, n in eng.graph.nodes.items() if n.role.value == "innocent")
    assert verify_auth_rejection(eng, net, attacker, target, "", message=captured)
