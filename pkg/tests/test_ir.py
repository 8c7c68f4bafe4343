import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulseforge.ir import (
    Acquire,
    AcquireChannel,
    Barrier,
    ChannelTypeError,
    Constant,
    ControlChannel,
    Delay,
    Drag,
    DriveChannel,
    Gaussian,
    GaussianSquare,
    MeasureChannel,
    OverlapError,
    Play,
    PulseError,
    SampledPulse,
    Schedule,
    SetFrequency,
    ShiftPhase,
    parse_channel,
    sample_parametric,
    time_averaged_amplitude,
    validate,
)
from pulseforge.ir.serialize import dumps, loads

d0, d1, u1 = DriveChannel(0), DriveChannel(1), ControlChannel(1)


def flat(n, amp=0.1):
    return SampledPulse([amp] * n)


# --- channels ---------------------------------------------------------------------


def test_channel_aliases():
    assert [c.name for c in (d0, MeasureChannel(2), ControlChannel(7), AcquireChannel(3))] == ["d0", "m2", "u7", "a3"]
    assert parse_channel("u12") == ControlChannel(12)
    with pytest.raises(ValueError):
        parse_channel("x1")
    with pytest.raises(ValueError):
        DriveChannel(-1)


def test_channel_kinds_enforced():
    with pytest.raises(ChannelTypeError):
        Play(flat(4), AcquireChannel(0))
    with pytest.raises(ChannelTypeError):
        ShiftPhase(0.1, AcquireChannel(0))
    with pytest.raises(ChannelTypeError):
        SetFrequency(5e9, AcquireChannel(0))
    with pytest.raises(ChannelTypeError):
        Acquire(10, MeasureChannel(0), 0)


def test_instruction_durations():
    assert Play(flat(7), d0).duration == 7
    assert Delay(11, d0).duration == 11
    assert Acquire(13, AcquireChannel(0), 0).duration == 13
    assert ShiftPhase(1.0, d0).duration == 0
    assert SetFrequency(1e9, d0).duration == 0
    assert Barrier([d0, d1]).duration == 0


# --- pulses -----------------------------------------------------------------------


def test_gaussian_peak_at_center():
    g = sample_parametric(Gaussian(128, 0.2, 16)).to_array()
    assert len(g) == 128
    assert np.isclose(np.abs(g).max(), 0.2 * np.exp(-0.25 / (2 * 16**2)))
    # with an even length the two central samples tie for the maximum
    assert np.argmax(np.abs(g)) in (63, 64)


def test_gaussian_closed_form_oracle():
    # independent evaluation of amp * exp(-(j - c)^2 / (2 sigma^2))
    got = sample_parametric(Gaussian(8, 0.5, 2)).to_array()
    want = [0.5 * np.exp(-((j - 3.5) ** 2) / 8.0) for j in range(8)]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)


def test_constant_zero():
    np.testing.assert_array_equal(sample_parametric(Constant(4, 0)).to_array(), np.zeros(4))


def test_gaussian_square_flat_top():
    env = sample_parametric(GaussianSquare(848, 0.3, 32, 720)).to_array()
    c = 423.5
    flat_idx = [j for j in range(848) if abs(j - c) <= 360]
    np.testing.assert_allclose(env[flat_idx], 0.3)
    assert np.all(np.abs(env) <= 0.3 + 1e-15)
    # zero width reproduces the plain Gaussian
    np.testing.assert_allclose(
        sample_parametric(GaussianSquare(64, 0.4, 8, 0)).to_array(), sample_parametric(Gaussian(64, 0.4, 8)).to_array()
    )


def test_drag_central_difference():
    p = Drag(16, 0.3, 3, 0.7)
    g = sample_parametric(Gaussian(16, 0.3, 3)).to_array()
    env = sample_parametric(p).to_array()
    j = 5
    assert np.isclose(env[j], g[j] + 1j * 0.7 * (g[j + 1] - g[j - 1]) / 2)
    assert np.isclose(env[0], g[0] + 1j * 0.7 * (g[1] - g[0]))


def test_pulse_bounds():
    with pytest.raises(PulseError):
        Gaussian(16, 1.2, 3)
    with pytest.raises(PulseError):
        Gaussian(16, 0.5, 0)
    with pytest.raises(PulseError):
        Constant(0, 0.1)
    with pytest.raises(PulseError):
        GaussianSquare(16, 0.5, 3, 20)
    with pytest.raises(PulseError):
        SampledPulse([0.5, 1.5j])


def test_time_averaged_amplitude():
    assert np.isclose(time_averaged_amplitude(Constant(10, -0.3)), -0.3)
    gs = GaussianSquare(848, 0.2, 32, 720)
    assert np.isclose(time_averaged_amplitude(gs), np.mean(np.abs(sample_parametric(gs).to_array())))


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 300),
    st.floats(0, 1),
    st.floats(-np.pi, np.pi),
    st.floats(0.5, 80),
    st.floats(0, 1),
)
def test_sampled_length_matches_duration(n, mag, phase, sigma, frac):
    amp = mag * np.exp(1j * phase)
    for p in (Gaussian(n, amp, sigma), GaussianSquare(n, amp, sigma, frac * n), Constant(n, amp)):
        s = sample_parametric(p)
        assert s.duration == n
        assert np.max(np.abs(s.to_array())) <= 1 + 1e-12


# --- schedule algebra -------------------------------------------------------------


def test_append_fifo():
    s = Schedule().append(Play(flat(128), d0))
    assert s.entries[0][0] == 0 and s.duration == 128
    s2 = s.append(Play(flat(64), d0))
    assert s2.entries[1][0] == 128 and s2.duration == 192
    assert len(s) == 1  # original untouched


def test_append_disjoint_channels_start_at_zero():
    s = Schedule().append(Play(flat(100), d0)).append(Play(flat(10), d1))
    assert dict((inst.channel, t) for t, inst in s.entries)[d1] == 0


def test_insert_and_overlap():
    assert Schedule().insert(5, Delay(3, d0)).duration == 8
    s = Schedule().insert(0, Play(flat(128), d0))
    with pytest.raises(OverlapError) as err:
        s.insert(100, Play(flat(8), d0))
    assert err.value.channel == d0 and err.value.existing == (0, 128)
    # zero-duration instructions may sit inside another interval
    s.insert(50, ShiftPhase(0.3, d0))


def test_shift():
    s = Schedule().append(Play(flat(4), d0))
    assert s.shift(0) == s
    t = s.shift(10)
    assert t.entries[0][0] == 10 and t.duration == 14
    with pytest.raises(ValueError):
        t.shift(-11)


def test_barrier_fences_later_appends():
    s = Schedule().append(Play(flat(50), d0)).append(Barrier([d0, d1])).append(Play(flat(5), d1))
    assert s.entries[-1][0] == 50


def test_cr2_listing_layout(demo_backend):
    from pulseforge.cr import build_cr
    from pulseforge.gates import cr_entry

    entry = cr_entry(demo_backend, "u1")
    s = build_cr(demo_backend, entry, echo=True)
    cr_starts = sorted(t for t, i in s.entries if isinstance(i, Play) and i.channel == u1)
    pi_dur = demo_backend.calibration["qubits"][1]["duration"]
    assert cr_starts == [0, 848 + pi_dur]
    d1_ops = [(t, type(i).__name__) for t, i in s.timed() if i.channels == frozenset({d1})]
    assert d1_ops == [(0, "Delay"), (848, "Play"), (848 + pi_dur, "Delay"), (2 * 848 + pi_dur, "Play")]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(1, 40)), min_size=1, max_size=12), st.integers(0, 50), st.integers(0, 50))
def test_schedule_algebra_properties(ops, a, b):
    chans = [d0, d1, u1]
    s = Schedule()
    last = 0
    for ch, n in ops:
        s = s.append(Play(flat(n), chans[ch]))
        assert s.duration >= last  # monotone
        last = s.duration
    assert s.shift(a + b) == s.shift(a).shift(b)
    # shift then append equals append of a shifted operand on disjoint channels
    other = Schedule().append(Play(flat(7), DriveChannel(5)))
    assert s.shift(a).append(other.shift(b)).entries == s.shift(a).entries + other.shift(b).entries
    assert (s + other).entries[-1][0] == 0


def test_append_associative_on_disjoint_channels():
    x = Schedule().append(Play(flat(10), d0))
    y = Schedule().append(Play(flat(20), d1))
    z = Schedule().append(Play(flat(30), u1))
    assert set(((x + y) + z).entries) == set((x + (y + z)).entries)


# --- validation -------------------------------------------------------------------


def test_validate_diagnostics():
    assert validate(Schedule()) == []
    s = Schedule(((0, Acquire(100, AcquireChannel(0), 0)),))
    diags = validate(s)
    assert [d.kind for d in diags] == ["MisalignedAcquire"]
    bad = Schedule(((0, Play(flat(10), d0)), (5, Play(flat(10), d0))))
    assert [d.kind for d in validate(bad)] == ["OverlapError"]
    ok = Schedule(((0, Play(flat(100), MeasureChannel(0))), (0, Acquire(100, AcquireChannel(0), 0))))
    assert validate(ok) == []


# --- serialization ----------------------------------------------------------------


def test_serialization_roundtrip_bytes():
    s = Schedule(
        (
            (0, Play(Gaussian(64, 0.1 + 0.05j, 8, name="g"), d0)),
            (0, ShiftPhase(1 / 3, u1)),
            (3, SetFrequency(4.857e9, u1)),
            (64, Play(Drag(32, 0.2, 4, 0.5), d0)),
            (10, Play(GaussianSquare(848, 0.3, 32, 720), u1)),
            (96, Delay(10, d1)),
            (0, Play(Constant(1200, 0.2), MeasureChannel(0))),
            (0, Acquire(1200, AcquireChannel(0), 0)),
            (858, Barrier([d0, u1])),
            (200, Play(SampledPulse([0.1, 0.2j, -0.3]), d1)),
        ),
        name="mixed",
    )
    text = dumps(s)
    assert loads(text) == s
    assert dumps(loads(text)) == text
    first = json.loads(text)["entries"][0]["inst"]
    assert list(first) == ["op", "ch", "pulse"] and first["pulse"]["shape"] == "gaussian"
