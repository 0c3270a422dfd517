import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from oracles import q_by_quadrature
from tcmdesign.bounds import (
    ChannelConfig,
    NonConvergedSpectrumWarning,
    ber_bound,
    db_to_linear,
    event_bound,
    fer_bound,
    linear_to_db,
    q_function,
)
from tcmdesign.constellations import mpam
from tcmdesign.encoder import EncoderSpec
from tcmdesign.labelings import nbc
from tcmdesign.spectrum import DistanceSpectrum, SpectrumLine, TcmEncoder, distance_spectrum


def _ds(*terms, converged=True):
    return DistanceSpectrum(tuple(SpectrumLine(d, Fraction(a), Fraction(b)) for d, a, b in terms), len(terms), converged)


def _pam4(g, K):
    return distance_spectrum(TcmEncoder(EncoderSpec.parse(g), nbc(2), mpam(4)), K=K)


def test_q_trivial_values():
    assert q_function(0.0) == 0.5
    for x in (0.3, 1.7, 4.2):
        assert math.isclose(q_function(-x), 1 - q_function(x), rel_tol=1e-14)


@pytest.mark.parametrize("x", [0.0, 0.5, 1.0, 2.5, 5.0, 10.0, 20.0, 37.0])
def test_q_matches_quadrature(x):
    ref = q_by_quadrature(x)
    assert math.isclose(q_function(x), ref, rel_tol=1e-9)


def test_q_one():
    assert math.isclose(q_function(1.0), 0.15865525393145707, rel_tol=1e-12)
    assert math.isclose(q_by_quadrature(1.0), 0.15865525393145707, rel_tol=1e-10)


def test_q_vectorized():
    xs = np.array([-1.0, 0.0, 1.0, 3.0])
    np.testing.assert_allclose(q_function(xs), [q_function(float(x)) for x in xs], rtol=1e-15)


def test_db_round_trip():
    assert math.isclose(linear_to_db(db_to_linear(7.3)), 7.3)
    ch = ChannelConfig.from_db(10.0, 5)
    assert math.isclose(ch.es_over_n0, 10.0)
    assert math.isclose(ch.noise_std, math.sqrt(0.05))


def test_channel_validation():
    with pytest.raises(ValueError):
        ChannelConfig(0.0)
    with pytest.raises(ValueError):
        ChannelConfig(1.0, 0)


def test_single_term_event_bound():
    ch = ChannelConfig(1.0)
    assert math.isclose(event_bound(_ds((4.0, 1, 1)), ch), q_by_quadrature(math.sqrt(2)), rel_tol=1e-9)
    assert math.isclose(event_bound(_ds((4.0, 1, 1)), ch), 0.0786496, rel_tol=1e-5)


def test_single_term_ber_bound():
    ch = ChannelConfig(3.0)
    ds = _ds((2.0, 1, Fraction(5, 4)))
    assert math.isclose(ber_bound(ds, ch), 1.25 * q_function(math.sqrt(2.0 * 3.0 / 2)), rel_tol=1e-14)


def test_empty_spectrum():
    ch = ChannelConfig(2.0, 10)
    empty = _ds()
    assert event_bound(empty, ch) == ber_bound(empty, ch) == fer_bound(empty, ch) == 0


def test_bounds_decrease_with_snr():
    ds = _pam4("[23,10]", 20)
    prev = None
    for db in np.arange(0, 20, 0.5):
        ch = ChannelConfig.from_db(db, 1000)
        now = (event_bound(ds, ch), ber_bound(ds, ch), fer_bound(ds, ch))
        if prev:
            assert all(a < b for a, b in zip(now, prev))
        prev = now
    assert prev[1] < 1e-30


def test_high_snr_dominated_by_first_term():
    ds = _pam4("[13,4]", 5)
    ch = ChannelConfig.from_db(18.0)
    lead = 0.5 * q_function(math.sqrt(8 * ch.es_over_n0 / 2))
    assert math.isclose(ber_bound(ds, ch), lead, rel_tol=0.05)


def test_truncation_20_vs_5():
    ds20 = _pam4("[13,4]", 20)
    ds5 = ds20.truncated(5)
    for db in (12.0, 14.0, 16.0):
        ch = ChannelConfig.from_db(db)
        assert abs(ber_bound(ds5, ch) / ber_bound(ds20, ch) - 1) < 0.01
        assert abs(event_bound(ds5, ch) / event_bound(ds20, ch) - 1) < 0.01


def test_ber_equals_event_when_every_event_has_k_bits():
    ds = _ds((1.0, Fraction(1, 2), Fraction(1, 2)), (2.0, 3, 3))
    ch = ChannelConfig(4.0)
    assert ber_bound(ds, ch) == event_bound(ds, ch)
    heavy = _ds((1.0, Fraction(1, 2), Fraction(3, 2)), (2.0, 3, 9))
    assert ber_bound(heavy, ch) <= 3 * event_bound(heavy, ch) + 1e-15


def test_fer_scaling():
    ds = _pam4("[23,10]", 20)
    assert fer_bound(ds, ChannelConfig(5.0, 1)) == event_bound(ds, ChannelConfig(5.0, 1))
    # bisection for the SNR where the event bound is 1e-5
    lo, hi = 1.0, 100.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if event_bound(ds, ChannelConfig(mid)) > 1e-5:
            lo = mid
        else:
            hi = mid
    ch = ChannelConfig(hi, 1000)
    assert math.isclose(event_bound(ds, ch), 1e-5, rel_tol=1e-9)
    assert math.isclose(fer_bound(ds, ch), 1e-2, rel_tol=1e-9)
    for db in (2.0, 8.0, 14.0):
        c = ChannelConfig.from_db(db, 1000)
        assert fer_bound(ds, c) >= event_bound(ds, c)


def test_non_converged_spectrum_warns():
    ds = _ds((1.0, 1, 1), converged=False)
    with pytest.warns(NonConvergedSpectrumWarning):
        ber_bound(ds, ChannelConfig(1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ber_bound(_ds((1.0, 1, 1)), ChannelConfig(1.0))
