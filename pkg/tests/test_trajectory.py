import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmrl.trajectory import (PhaseOutcome, PhaseRecord, ResetCause, ResetLog, TrajectoryBuffer, as_state,
                             phases_partition)


def test_append_to_empty():
    buf = TrajectoryBuffer(capacity=600)
    buf.append((0.1, 0.2))
    assert len(buf) == 1
    assert buf.dim == 2


def test_capacity_evicts_oldest():
    buf = TrajectoryBuffer(capacity=600)
    for t in range(601):
        buf.append((t, 0.0))
    assert len(buf) == 600
    assert buf.window(600)[0][0] == 1.0


def test_wrong_dimension_rejected():
    buf = TrajectoryBuffer(capacity=4)
    buf.append((0.0, 0.0))
    with pytest.raises(ValueError, match="dimension"):
        buf.append((0.0, 0.0, 0.0))


@pytest.mark.parametrize("bad", [(np.nan, 0.0), (0.0, np.inf)])
def test_non_finite_rejected(bad):
    with pytest.raises(ValueError, match="non-finite"):
        TrajectoryBuffer(4).append(bad)


def test_step_indices_must_increase():
    buf = TrajectoryBuffer(4)
    buf.append((0.0,), step=5)
    with pytest.raises(ValueError):
        buf.append((1.0,), step=5)


def test_window():
    buf = TrajectoryBuffer(10)
    for v in "abc":
        buf.append((ord(v),))
    assert [s[0] for s in buf.window(2)] == [ord("b"), ord("c")]
    assert [s[0] for s in buf.window(3)] == [ord("a"), ord("b"), ord("c")]
    one = TrajectoryBuffer(10).append((1.0,))
    with pytest.raises(ValueError):
        one.window(2)



def test_clear():
    buf = TrajectoryBuffer(5)
    for t in range(3):
        buf.append((t,))
    buf.clear()
    assert len(buf) == 0 and buf.capacity == 5
    buf.clear()
    assert len(buf) == 0
    buf.append((1.0,))
    assert len(buf) == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.lists(st.floats(-5, 5), min_size=0, max_size=60))
def test_contents_equal_replay(capacity, values):
    buf = TrajectoryBuffer(capacity)
    for v in values:
        buf.append((v, -v))
    expected = [(v, -v) for v in values][-capacity:] if values else []
    assert [tuple(s) for s in buf.states()] == expected


def test_table_round_trip():
    buf = TrajectoryBuffer(10)
    for t in range(4):
        buf.append((t * 0.1, 1 - t * 0.1), step=10 + t)
    text = buf.to_table()
    assert text.splitlines()[0] == "step\tdim0\tdim1"
    back = TrajectoryBuffer.from_table(text)
    np.testing.assert_array_equal(back.states(), buf.states())
    np.testing.assert_array_equal(back.steps(), buf.steps())


def test_phase_records_partition():
    recs = [PhaseRecord(0, (0.5, 0.5), 0).close(120, PhaseOutcome.SUCCESS),
            PhaseRecord(1, (0.3, 0.3), 120).close(420, PhaseOutcome.TIMEOUT)]
    assert recs[0].length == 120
    assert phases_partition(recs)
    recs.append(PhaseRecord(2, (0.3, 0.3), 421).close(500, PhaseOutcome.INTERRUPTED))
    assert not phases_partition(recs)
    with pytest.raises(ValueError):
        PhaseRecord(3, (0, 0), 10).close(5, PhaseOutcome.SUCCESS)


def test_reset_log_counts_initial():
    log = ResetLog()
    log.add(0, 0, ResetCause.INITIAL)
    log.add(1000, 0, ResetCause.PERIODIC)
    assert len(log) == 2
    assert log.count(ResetCause.INITIAL) == 1


def test_as_state_copies():
    src = np.array([1.0, 2.0])
    s = as_state(src)
    s[0] = 5
    assert src[0] == 1.0
