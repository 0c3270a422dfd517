import json
import random
from fractions import Fraction

import pytest

from oracles import brute_force_spectrum
from tcmdesign.constellations import mpam, mpsk
from tcmdesign.encoder import EncoderSpec, enumerate_encoders
from tcmdesign.gf2 import BitMatrix, enumerate_invertible
from tcmdesign.labelings import Labeling, brgc, mflsa, nbc
from tcmdesign.search import reference_rows
from tcmdesign.spectrum import (
    DegenerateEncoderError,
    DistanceSpectrum,
    SpectrumError,
    SpectrumLine,
    TcmEncoder,
    display_round,
    distance_spectrum,
    free_distance,
    is_superior,
    spectra_match,
    spectrum_key,
)


def tcm(g, labeling, x):
    if isinstance(labeling, str):
        labeling = Labeling.parse(labeling)
    return TcmEncoder(EncoderSpec.parse(g), labeling, x)


def _row(table, nu, encoder):
    return next(r for r in reference_rows(table, nu) if r["encoder"] == encoder)


def test_table3_nu3_row():
    row = _row("table3", 3, "[13,4]")
    ds = distance_spectrum(tcm("[13,4]", nbc(2), mpam(4)), K=5)
    assert spectra_match(ds, row["spectrum"]) == []
    assert [t.rounded() for t in ds.terms] == [
        (8.00, 0.25, 0.50), (8.80, 1.00, 3.00), (9.60, 1.56, 6.25), (10.40, 2.75, 9.75), (11.20, 3.14, 16.84)
    ]
    assert ds.converged


def test_table5_nu2_row():
    ds = distance_spectrum(tcm("[1,0,0;0,5,2]", nbc(3), mpsk(8)), K=3)
    assert [t.rounded() for t in ds.terms] == [(4.00, 1.00, 0.50), (4.59, 4.00, 4.00), (5.17, 8.00, 14.00)]
    row = _row("table5", 2, "[1,0,0;0,5,2]")
    assert spectra_match(ds, row["spectrum"][:3]) == []


def test_table4_nu1_row():
    ds = distance_spectrum(tcm("[1,1,1;1,3,0]", "1 2 4 0 6 5 3 7", mpam(8)), K=2)
    assert [t.rounded() for t in ds.terms] == [(0.95, 1.13, 0.84), (1.14, 1.13, 1.69)]


def test_exact_dyadic_multiplicities():
    ds = distance_spectrum(tcm("[13,4]", nbc(2), mpam(4)), K=5)
    for t in ds.terms:
        assert isinstance(t.A, Fraction) and t.A.denominator & (t.A.denominator - 1) == 0
        assert t.B >= t.A  # every event carries at least one bit error (k = 1)
    assert ds.terms[0].A == Fraction(1, 4) and ds.terms[0].B == Fraction(1, 2)


def test_spectrum_display_and_json_round_trip():
    ds = distance_spectrum(tcm("[13,4]", nbc(2), mpam(4)), K=3)
    assert str(ds).startswith("{8.00, 0.25, 0.50}, {8.80, 1.00, 3.00}")
    back = DistanceSpectrum.from_json(json.loads(ds.dumps()))
    assert back.same_as(ds)
    row = ds.to_json()[0]
    assert row["A_exact"] == "1/4" and row["A_2dp"] == 0.25


def test_display_round_half_up():
    assert display_round(Fraction(1, 8)) == 0.13
    assert display_round(Fraction(9, 8)) == 1.13
    assert display_round(0.125) == 0.13


def test_k_must_be_positive():
    with pytest.raises(SpectrumError):
        distance_spectrum(tcm("[3,1]", nbc(2), mpam(4)), K=0)


def test_mismatched_encoder_rejected():
    with pytest.raises(SpectrumError):
        tcm("[3,1]", nbc(3), mpam(8))


def test_degenerate_encoder():
    # both inputs drive the same output bit, so inputs 01 and 10 give the same point
    spec = EncoderSpec.from_octal([[1, 0, 0], [1, 0, 0]], memories=[0, 0])
    with pytest.raises(DegenerateEncoderError):
        distance_spectrum(TcmEncoder(spec, nbc(3), mpsk(8)), K=1)


def test_superiority_examples():
    a = distance_spectrum(tcm("[7,2]", nbc(2), mpam(4)), K=5)
    b = distance_spectrum(tcm("[5,2]", nbc(2), mpam(4)), K=5)
    assert round(a.d2_min, 9) == round(b.d2_min, 9) == 7.2
    assert is_superior(a, b)
    assert not is_superior(b, a)
    assert not is_superior(a, a)


def test_split_pair_mutually_non_superior():
    a = distance_spectrum(tcm("[45,10]", nbc(2), mpam(4)), K=5)
    b = distance_spectrum(tcm("[55,4]", nbc(2), mpam(4)), K=5)
    assert not is_superior(a, b) and not is_superior(b, a)
    assert spectrum_key(a, "B") < spectrum_key(b, "B")
    assert spectrum_key(b, "A") < spectrum_key(a, "A")


def _line(d, a, b):
    return SpectrumLine(d, Fraction(a), Fraction(b))


def test_superiority_definition_cases():
    base = DistanceSpectrum((_line(4, 1, 1), _line(5, 2, 2)), 2)
    farther = DistanceSpectrum((_line(4.5, 9, 9),), 1)
    both_better = DistanceSpectrum((_line(4, Fraction(1, 2), Fraction(1, 2)),), 1)
    mixed = DistanceSpectrum((_line(4, Fraction(1, 2), 2),), 1)
    later = DistanceSpectrum((_line(4, 1, 1), _line(5.5, 9, 9)), 2)
    assert is_superior(farther, base)
    assert is_superior(both_better, base)
    assert not is_superior(mixed, base) and not is_superior(base, mixed)
    assert is_superior(later, base)


def test_distances_strictly_increase():
    with pytest.raises(SpectrumError):
        DistanceSpectrum((_line(4, 1, 1), _line(4, 1, 1)), 2)


def test_spectra_match_reports_difference():
    ds = distance_spectrum(tcm("[13,4]", nbc(2), mpam(4)), K=5)
    ref = [list(t) for t in _row("table3", 3, "[13,4]")["spectrum"]]
    ref[2][2] += 0.5
    issues = spectra_match(ds, ref)
    assert len(issues) == 1 and "term 3 B" in issues[0]


def _oracle_check(enc, max_len=12, d_cap=None, K=6):
    ds = distance_spectrum(enc, K=K)
    tr = enc.spec.trellis()
    sed = enc.label_sed()
    cap = d_cap if d_cap is not None else ds.terms[-1].d2
    lines, d_open = brute_force_spectrum(
        tr.next_state.tolist(), tr.output.tolist(), sed.tolist(), enc.spec.k, enc.spec.nu, max_len, cap
    )
    limit = min(d_open, cap)
    # the oracle keys distances rounded to 9 decimals
    complete = sorted((d, v) for d, v in lines.items() if d < limit - 1e-7)
    ours = [t for t in ds.terms if t.d2 < limit - 1e-7]
    assert complete, "oracle found nothing complete"
    assert len(ours) == len(complete)
    for t, (d, (a, b)) in zip(ours, complete):
        assert abs(t.d2 - d) < 1e-7
        assert t.A == a and t.B == b
    return len(ours)


@pytest.mark.parametrize("labeling", ["0 1 2 3", "1 0 2 3"])
@pytest.mark.parametrize("nu", [1, 2])
def test_brute_force_oracle_k1(labeling, nu):
    x = mpam(4)
    checked = 0
    for spec in enumerate_encoders(1, 2, nu):
        enc = TcmEncoder(spec, Labeling.parse(labeling), x)
        checked += _oracle_check(enc)
    assert checked > 0


def test_brute_force_oracle_k2_8psk():
    enc = tcm("[1,0,0;0,5,2]", nbc(3), mpsk(8))
    assert _oracle_check(enc, d_cap=5.2, K=3) == 3


def test_brute_force_oracle_k2_8pam():
    enc = tcm("[1,1,1;1,3,0]", "1 2 4 0 6 5 3 7", mpam(8))
    assert _oracle_check(enc, d_cap=1.2, K=2) == 2


def test_transform_equivalence_spectrum():
    rng = random.Random(2)
    mats = list(enumerate_invertible(2))
    for spec in list(enumerate_encoders(1, 2, 3))[::7]:
        l = brgc(2) if rng.random() < 0.5 else nbc(2)
        t = rng.choice(mats)
        a = distance_spectrum(TcmEncoder(spec, l, mpam(4)), K=5)
        b = distance_spectrum(TcmEncoder(spec.transformed(t), l.transformed(t), mpam(4)), K=5)
        assert a.same_as(b)


def test_gray_pam4_equivalent_to_natural():
    t = BitMatrix.parse("11/01")
    a = distance_spectrum(tcm("[13,17]", brgc(2), mpam(4)), K=5)
    b = distance_spectrum(tcm("[13,4]", nbc(2), mpam(4)), K=5)
    assert brgc(2).transformed(t) == nbc(2)
    assert a.same_as(b)


def test_pam_reversal_invariance():
    l = Labeling.parse("1 2 4 0 6 5 3 7")
    a = distance_spectrum(tcm("[1,0,0;0,7,2]", l, mpam(8)), K=5)
    b = distance_spectrum(tcm("[1,0,0;0,7,2]", l.reversed(), mpam(8)), K=5)
    assert a.same_as(b)


def test_psk_rotation_invariance():
    l = Labeling.parse("0 5 2 7 4 1 6 3")
    a = distance_spectrum(tcm("[1,2,0;4,5,2]", l, mpsk(8)), K=5)
    for shift in (1, 3):
        b = distance_spectrum(tcm("[1,2,0;4,5,2]", l.rotated(shift), mpsk(8)), K=5)
        assert a.same_as(b)


def test_scaling():
    enc = tcm("[23,10]", nbc(2), mpam(4))
    a = distance_spectrum(enc, K=5)
    b = distance_spectrum(TcmEncoder(enc.spec, enc.labeling, mpam(4).scaled(3.0)), K=5)
    for x, y in zip(a.terms, b.terms):
        assert abs(y.d2 - 9 * x.d2) < 1e-9
        assert x.A == y.A and x.B == y.B


def test_free_distance_and_truncation():
    enc = tcm("[23,10]", nbc(2), mpam(4))
    full = distance_spectrum(enc, K=8)
    assert free_distance(enc) == full.d2_min
    assert distance_spectrum(enc, K=3).same_as(full.truncated(3))


@pytest.mark.parametrize("nu", [1, 2])
def test_brute_force_oracle_k2_sampled(nu):
    rng = random.Random(nu)
    labelings = list(mflsa(3, "psk"))
    specs = list(enumerate_encoders(2, 3, nu))
    for spec in rng.sample(specs, min(40, len(specs))):
        x = rng.choice([mpsk(8), mpam(8)])
        enc = TcmEncoder(spec, rng.choice(labelings), x)
        _oracle_check(enc, K=5)
