import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import MIN_MS, minute_weights, random_series
from wfcarbon.ci_store import (
    LBS_PER_MWH_TO_G_PER_KWH,
    CISeries,
    ci_at,
    format_ci,
    load_ci,
    overlap_weights,
    parse_ci,
    rebase_year,
)
from wfcarbon.errors import EmptyCISeries, MissingColumn, NegativeIntensity, NonUniformInterval, OutOfRange
from wfcarbon.timeutil import from_ms, to_ms

UTC = timezone.utc
T0 = datetime(2023, 5, 1, tzinfo=UTC)


def hourly_csv(values, start=T0, step=timedelta(hours=1)):
    lines = ["timestamp_utc,ci_gco2e_per_kwh"]
    lines += [f"{(start + i * step):%Y-%m-%dT%H:%M:%SZ},{v}" for i, v in enumerate(values)]
    return "\n".join(lines) + "\n"


def test_constant_hourly():
    s = parse_ci(hourly_csv([100] * 24), "average", "DE")
    assert s.interval_s == 3600
    assert len(s) == 24
    assert set(s.values) == {100.0}
    assert s.start == T0
    assert s.zone == "DE" and s.signal.value == "average"


def test_gap_is_rejected():
    text = "timestamp_utc,ci_gco2e_per_kwh\n2023-05-01T00:00:00Z,1\n2023-05-01T01:00:00Z,2\n2023-05-01T03:00:00Z,3\n"
    with pytest.raises(NonUniformInterval) as exc:
        parse_ci(text, "average", "DE")
    assert exc.value.at == datetime(2023, 5, 1, 3, tzinfo=UTC)


def test_gap_fill_carries_forward():
    text = "timestamp_utc,ci_gco2e_per_kwh\n2023-05-01T00:00:00Z,1\n2023-05-01T01:00:00Z,2\n2023-05-01T04:00:00Z,3\n"
    s = parse_ci(text, "average", "DE", fill_gaps=True)
    assert s.values == (1.0, 2.0, 2.0, 2.0, 3.0)
    assert s.filled == (2, 3)


def test_misaligned_row_rejected_even_when_filling():
    text = "timestamp_utc,ci_gco2e_per_kwh\n2023-05-01T00:00:00Z,1\n2023-05-01T01:00:00Z,2\n2023-05-01T02:30:00Z,3\n"
    with pytest.raises(NonUniformInterval):
        parse_ci(text, "average", "DE", fill_gaps=True)


def test_negative_and_empty():
    with pytest.raises(NegativeIntensity):
        parse_ci(hourly_csv([1, -2]), "average", "DE")
    with pytest.raises(EmptyCISeries):
        parse_ci("timestamp_utc,ci_gco2e_per_kwh\n", "average", "DE")
    with pytest.raises(MissingColumn):
        parse_ci("when,value_x\n", "average", "DE")


def test_five_minute_fixture(fixtures):
    s = load_ci(fixtures / "moer_5min.csv", "marginal", "CAISO_NORTH")
    assert s.interval_s == 300
    # hand-read of the file
    assert s.values == (180.5, 182.0, 179.25, 181.0, 185.0, 190.0, 188.75, 192.0, 195.5, 260.0, 410.0, 455.0)
    assert s.start == datetime(2023, 11, 26, 21, 0, tzinfo=UTC)
    assert s.end == datetime(2023, 11, 26, 22, 0, tzinfo=UTC)


def test_watttime_adapter_converts_units(fixtures):
    s = load_ci(fixtures / "watttime_5min.csv", "marginal", "NL")
    assert s.interval_s == 300
    assert s.values[0] == pytest.approx(20.0 * 0.453592)
    assert s.values[2] == pytest.approx(453.592)
    assert LBS_PER_MWH_TO_G_PER_KWH == pytest.approx(0.453592)


def test_electricity_maps_adapter_prefers_direct(fixtures):
    s = load_ci(fixtures / "emaps_hourly.csv", "average", "DE")
    assert s.values == (301.5, 295.0, 290.25)
    assert s.start == datetime(2023, 1, 1, tzinfo=UTC)


def test_canonical_round_trip():
    s = random_series(random.Random(3), 30, start=T0)
    assert parse_ci(format_ci(s), "average", "ZZ") == s


def test_ci_at_slot_boundaries():
    s = parse_ci(hourly_csv([10, 20, 30]), "average", "DE")
    assert ci_at(s, T0 + timedelta(hours=1)) == 20
    assert ci_at(s, T0 + timedelta(hours=2) - timedelta(milliseconds=1)) == 20
    with pytest.raises(OutOfRange):
        ci_at(s, T0 - timedelta(milliseconds=1))
    with pytest.raises(OutOfRange):
        ci_at(s, T0 + timedelta(hours=3))


def test_overlap_weights_examples():
    s = parse_ci(hourly_csv([1] * 24), "average", "DE")
    w = overlap_weights(s, T0 + timedelta(hours=10, minutes=30), T0 + timedelta(hours=12, minutes=30))
    assert w == [(T0 + timedelta(hours=10), 0.25), (T0 + timedelta(hours=11), 0.5), (T0 + timedelta(hours=12), 0.25)]
    inner = overlap_weights(s, T0 + timedelta(hours=3, minutes=5), T0 + timedelta(hours=3, minutes=50))
    assert inner == [(T0 + timedelta(hours=3), 1.0)]
    with pytest.raises(OutOfRange):
        overlap_weights(s, T0 + timedelta(hours=23), T0 + timedelta(hours=25))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), interval=st.sampled_from([300, 900, 3600]))
def test_overlap_weights_match_minute_oracle(seed, interval):
    rng = random.Random(seed)
    n = rng.randint(1, 48)
    s = random_series(rng, n, start=T0, interval_s=interval)
    total_min = n * interval // 60
    a = rng.randint(0, total_min - 1)
    b = rng.randint(a + 1, total_min)
    start, end = T0 + timedelta(minutes=a), T0 + timedelta(minutes=b)
    got = {to_ms(t): f for t, f in overlap_weights(s, start, end)}
    want = minute_weights(s, to_ms(start), to_ms(end))
    assert got.keys() == want.keys()
    for k in want:
        assert got[k] == pytest.approx(want[k], rel=1e-9, abs=1e-12)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-9)
    # fractions times the interval reconstruct the covered duration
    dur_s = (b - a) * 60
    assert sum(f * dur_s for f in got.values()) == pytest.approx(dur_s, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ci_at_agrees_with_one_second_overlap(seed):
    rng = random.Random(seed)
    s = random_series(rng, 24, start=T0)
    t_ms = rng.randrange(s.start_ms, s.end_ms - 1000)
    t = from_ms(t_ms)
    (slot, frac), *rest = overlap_weights(s, t, t + timedelta(seconds=1))
    if rest:
        # the second straddles a boundary; the containing slot still comes first
        assert slot == from_ms(s.slot_start_ms(s.slot_index(t_ms)))
    else:
        assert frac == 1.0
    assert ci_at(s, t) == s.values[s.slot_index(to_ms(slot))]


@pytest.mark.parametrize("t,year,expected", [
    (datetime(2024, 5, 10, 12, tzinfo=UTC), 2023, datetime(2023, 5, 10, 12, tzinfo=UTC)),
    (datetime(2024, 2, 29, 8, tzinfo=UTC), 2023, datetime(2023, 2, 28, 8, tzinfo=UTC)),
    (datetime(2023, 1, 1, tzinfo=UTC), 2023, datetime(2023, 1, 1, tzinfo=UTC)),
    (datetime(2023, 3, 1, 0, 0, 0, 123000, tzinfo=UTC), 2024, datetime(2024, 3, 1, 0, 0, 0, 123000, tzinfo=UTC)),
])
def test_rebase_year(t, year, expected):
    assert rebase_year(t, year) == expected


@given(st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2030, 12, 31), timezones=st.just(UTC)))
def test_rebase_idempotent(t):
    assert rebase_year(t, t.year) == t
    once = rebase_year(t, 2023)
    assert rebase_year(once, 2023) == once


def test_resample():
    s = CISeries("Z", "marginal", 3600, to_ms(T0), (10.0, 20.0))
    fine = s.resample(900)
    assert fine.values == (10.0,) * 4 + (20.0,) * 4
    assert fine.resample(3600) == s
    five = CISeries("Z", "marginal", 300, to_ms(T0), tuple(float(i) for i in range(13)))
    hourly = five.resample(3600)
    assert hourly.values == (5.5,)
