import json
import math
import threading

import pytest

from stcav.coordinator import (
    Coordinator,
    DuplicateId,
    OffGrid,
    PrematureExit,
    TimeRegression,
    UnknownId,
)
from stcav.dynamics import MAIN, RAMP, StaleRecord


def make():
    c = Coordinator(T_d=0.05, L=400.0, trace=True)
    c.register_arrival(0, MAIN, 0.0, 0.0, 20.0)
    c.register_arrival(1, RAMP, 1.0, 0.0, 18.0)
    c.register_arrival(2, RAMP, 2.0, 0.0, 17.0)
    return c


def test_fifo_order_and_resolution():
    c = make()
    assert c.order == [0, 1, 2]
    assert c.resolve(0) == (None, None)
    assert c.resolve(1) == (None, 0)
    # predecessor on the same lane: only the rear-end partner
    assert c.resolve(2) == (1, None)
    assert c.lane_tail(MAIN) == 0 and c.lane_tail(RAMP) == 2


def test_simultaneous_arrivals_main_first():
    c = Coordinator(0.05, 400.0)
    c.register_arrival(5, RAMP, 1.0, 0.0, 18.0)
    c.register_arrival(6, MAIN, 1.0, 0.0, 18.0)
    assert c.order == [6, 5]


def test_arrival_errors():
    c = make()
    with pytest.raises(DuplicateId):
        c.register_arrival(1, MAIN, 3.0, 0.0, 15.0)
    with pytest.raises(OffGrid):
        c.register_arrival(9, MAIN, 3.01, 0.0, 15.0)
    with pytest.raises(ValueError):
        c.register_arrival(9, "left", 3.0, 0.0, 15.0)


def test_publish_and_neighbors():
    c = make()
    c.publish(0, 2.0, 40.0, 20.0, 1.0, 2.5)
    c.publish(1, 2.0, 18.0, 18.0, 0.0, 3.0)
    c.publish(2, 2.0, 0.0, 17.0, 0.0, 2.05)
    hood = c.neighbors(1, 2.5)
    assert hood.view.ip is None
    assert hood.j_id == 0 and hood.j_next == 2.5
    assert hood.view.j.x == pytest.approx(40.0 + 10.0 + 0.125)
    with pytest.raises(StaleRecord):
        c.neighbors(1, 2.55)


def test_publish_errors():
    c = make()
    c.publish(0, 2.0, 40.0, 20.0, 1.0, 2.5)
    with pytest.raises(TimeRegression):
        c.publish(0, 1.0, 40.0, 20.0, 1.0, 2.5)
    with pytest.raises(TimeRegression):
        c.publish(0, 2.5, 40.0, 20.0, 1.0, 2.0)
    with pytest.raises(OffGrid):
        c.publish(0, 2.5, 40.0, 20.0, 1.0, 2.52)
    with pytest.raises(UnknownId):
        c.publish(42, 2.5, 0.0, 0.0, 0.0, 3.0)


def test_retire_keeps_departed_as_predecessor():
    c = make()
    c.publish(0, 10.0, 390.0, 20.0, 0.0, 11.0)
    with pytest.raises(PrematureExit):
        c.retire(0, 10.0)
    c.retire(0, 10.5)
    assert c.order == [1, 2]
    assert c.departed == 0
    assert c.fifo_predecessor(1) == 0
    assert c.resolve(1) == (None, 0)
    # departed CAV cruises past the merging point
    hood = c.neighbors(1, 12.0)
    assert hood.view.j.x == pytest.approx(400.0 + 20.0 * 1.5)
    assert hood.j_next is None
    with pytest.raises(UnknownId):
        c.publish(0, 11.0, 0.0, 0.0, 0.0, 12.0)
    with pytest.raises(UnknownId):
        c.retire(0, 11.0)


def test_next_exit_drops_previous_departed():
    c = make()
    c.publish(0, 10.0, 400.0, 20.0, 0.0, 11.0)
    c.retire(0, 10.0)
    c.publish(1, 10.0, 400.0, 20.0, 0.0, 11.0)
    c.retire(1, 10.0)
    assert c.departed == 1
    with pytest.raises(UnknownId):
        c.record(0)
    assert c.resolve(2) == (1, None)


def test_trace_dump(tmp_path):
    c = make()
    c.publish(0, 2.0, 40.0, 20.0, 1.0, 2.5)
    path = tmp_path / "coord.ndjson"
    c.dump_trace(path)
    events = [json.loads(line) for line in path.read_text().splitlines()]
    assert [e["kind"] for e in events] == ["arrival"] * 3 + ["publish"]
    assert events[-1]["fields"]["t_next"] == 2.5


def test_concurrent_publishers_are_serialised():
    c = Coordinator(0.05, 400.0)
    for i in range(8):
        c.register_arrival(i, MAIN, 0.0, 0.0, 20.0)

    def worker(i):
        for k in range(1, 200):
            c.publish(i, k * 0.05, 0.0, 20.0, 0.0, (k + 1) * 0.05)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert all(math.isclose(c.record(i).t_last, 199 * 0.05) for i in range(8))
