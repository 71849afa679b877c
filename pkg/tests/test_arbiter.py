import threading
import time
from collections import Counter

import pytest

from streamfarm import EOS, NetworkError, OnDemand, RoundRobin, StrictRoundRobin, UserDefined
from streamfarm.arbiter import FirstAvailable, _policy, make_mpmc, make_mpsc, make_spmc


def drain_all(outlets):
    results = [[] for _ in outlets]

    def drain(k):
        results[k].extend(outlets[k])

    threads = [threading.Thread(target=drain, args=(k,)) for k in range(len(outlets))]
    for t in threads:
        t.start()
    return results, threads


def feed(inlet, items):
    with inlet:
        for x in items:
            inlet.put(x)


def test_spmc_single_consumer_is_a_relay():
    q = make_spmc(1, 4).start()
    res, ts = drain_all(q.outputs)
    feed(q.input, range(1, 101))
    for t in ts:
        t.join(30)
    q.join(30)
    assert res[0] == list(range(1, 101))


def test_spmc_round_robin_trace():
    q = make_spmc(4, 8, RoundRobin())
    with q:
        feed(q.input, range(1, 9))
        res, ts = drain_all(q.outputs)
        for t in ts:
            t.join(30)
        q.join(30)
    assert res == [[i + 1, i + 5] for i in range(4)]


def test_spmc_round_robin_is_cyclic_over_long_runs():
    q = make_spmc(3, 64).start()
    res, ts = drain_all(q.outputs)
    feed(q.input, range(3000))
    for t in ts:
        t.join(30)
    q.join(30)
    assert res == [list(range(k, 3000, 3)) for k in range(3)]


def test_spmc_ondemand_starves_slow_consumer():
    n = 100_000
    q = make_spmc(4, 16, OnDemand()).start()
    counts = [0] * 4

    def consume(k):
        for _ in q.outputs[k]:
            counts[k] += 1
            if k == 0:
                time.sleep(0.0005)

    ts = [threading.Thread(target=consume, args=(k,)) for k in range(4)]
    for t in ts:
        t.start()
    feed(q.input, range(n))
    for t in ts:
        t.join(120)
    q.join(120)
    assert sum(counts) == n
    assert counts[0] < min(counts[1:])


def test_ondemand_ties_pick_lowest_index():
    from streamfarm.spsc import new
    outs = [new(4) for _ in range(3)]
    p = OnDemand()
    assert p.select(None, outs) == 0
    outs[0].push(1)
    assert p.select(None, outs) == 1
    outs[1].push(1)
    outs[2].push(1)
    assert p.select(None, outs) == 0


def test_user_defined_policy_routes_by_key():
    q = make_spmc(2, 16, UserDefined(lambda item, occ: item % 2)).start()
    res, ts = drain_all(q.outputs)
    feed(q.input, range(50))
    for t in ts:
        t.join(30)
    q.join(30)
    assert res == [list(range(0, 50, 2)), list(range(1, 50, 2))]


def test_user_defined_bad_index_surfaces():
    q = make_spmc(2, 16, UserDefined(lambda item, occ: 7)).start()
    q.input.put(1)
    with pytest.raises(ValueError):
        q.join(30)
    with pytest.raises(NetworkError):
        q.outputs[0].get()


@pytest.mark.parametrize("maker,args", [(make_spmc, (0,)), (make_mpsc, (0,)),
                                        (make_mpmc, (0, 1)), (make_mpmc, (1, 0))])
def test_zero_counts_rejected(maker, args):
    with pytest.raises(ValueError):
        maker(*args)


def test_policy_names():
    assert isinstance(_policy("rr", OnDemand), RoundRobin)
    assert isinstance(_policy("ondemand", RoundRobin), OnDemand)
    assert isinstance(_policy(None, FirstAvailable), FirstAvailable)
    assert isinstance(_policy("strict", FirstAvailable), StrictRoundRobin)
    with pytest.raises(ValueError):
        _policy("lifo", RoundRobin)


def test_mpsc_single_producer_preserves_sequence():
    q = make_mpsc(1, 4).start()
    t = threading.Thread(target=feed, args=(q.inputs[0], range(500)))
    t.start()
    got = list(q.output)
    t.join(30)
    q.join(30)
    assert got == list(range(500))


@pytest.mark.parametrize("gather", [FirstAvailable(), StrictRoundRobin()])
def test_mpsc_per_origin_order_and_single_eos(gather):
    n, k = 100_000, 4
    q = make_mpsc(k, 64, gather).start()
    ts = [threading.Thread(target=feed, args=(q.inputs[p], [(p, s) for s in range(n // k)]))
          for p in range(k)]
    for t in ts:
        t.start()
    got = []
    while (item := q.output.get()) is not EOS:
        got.append(item)
    assert q.output.get() is EOS
    for t in ts:
        t.join(60)
    stats = q.join(60)
    assert len(got) == n
    for p in range(k):
        assert [s for (o, s) in got if o == p] == list(range(n // k))
    assert stats["collector"].items_out == n


def test_strict_round_robin_gather_alternates():
    q = make_mpsc(3, 64, StrictRoundRobin())
    for p in range(3):
        for s in range(5):
            q.inputs[p].put((p, s))
        q.inputs[p].close()
    q.start()
    got = list(q.output)
    q.join(30)
    assert got == [(p, s) for s in range(5) for p in range(3)]


@pytest.mark.parametrize("np_,nc", [(1, 1), (4, 4), (3, 5)])
def test_mpmc_multiset_and_per_origin_order(np_, nc):
    per = 20_000
    q = make_mpmc(np_, nc, 64).start()
    res, ts = drain_all(q.outputs)
    ps = [threading.Thread(target=feed, args=(q.inputs[p], [(p, s) for s in range(per)]))
          for p in range(np_)]
    for t in ps:
        t.start()
    for t in ps + ts:
        t.join(120)
    q.join(120)
    merged = [x for r in res for x in r]
    assert Counter(merged) == Counter((p, s) for p in range(np_) for s in range(per))
    for r in res:
        for p in range(np_):
            seq = [s for (o, s) in r if o == p]
            assert seq == sorted(seq)
    if np_ == nc == 1:
        assert res[0] == [(0, s) for s in range(per)]


def test_composed_queues_have_no_shared_channels():
    for q in (make_spmc(4), make_mpsc(4), make_mpmc(4, 4)):
        assert q.audit() == []
        rings = [e.ring for e in q.network.edges]
        assert len({id(r) for r in rings}) == len(rings)
