"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N ...: PASS|FAIL (seconds)`` line, shown
even when pytest captures output.
"""

import itertools
import math
import random
import time

import numpy as np

from oracles import all_codeword_symbols, brute_force_spectrum, exhaustive_ml
from tcmdesign.bounds import ChannelConfig, ber_bound, fer_bound
from tcmdesign.constellations import by_name, mpam, mpsk
from tcmdesign.encoder import EncoderSpec, encode_array, enumerate_encoders
from tcmdesign.gf2 import BitMatrix, enumerate_invertible, invertible_count, rce_factorize
from tcmdesign.labelings import Labeling, brgc, labeling_class_count, mflsa, nbc
from tcmdesign.search import ods_search, reference_tables, verify_against_reference
from tcmdesign.simulate import CONFIDENCE_Z, simulate, viterbi_decode
from tcmdesign.spectrum import TcmEncoder, distance_spectrum, spectra_match

TOL = 0.005


def _criterion(n, title, capsys, check, budget_s=None):
    t0 = time.perf_counter()
    err = None
    try:
        check()
    except AssertionError as exc:
        err = exc
    dt = time.perf_counter() - t0
    if err is None and budget_s is not None and dt > budget_s:
        err = AssertionError(f"runtime {dt:.1f} s exceeds {budget_s} s")
    status = "PASS" if err is None else "FAIL"
    detail = "" if err is None else f" - {str(err).splitlines()[0] if str(err) else 'assertion failed'}"
    with capsys.disabled():
        print(f"\ncriterion {n} ({title}): {status} ({dt:.1f} s){detail}")
    if err is not None:
        raise err


# -- 1. class counts -----------------------------------------------------------------------


def _invertible_formula(m):
    return math.prod((1 << m) - (1 << i) for i in range(m))


def test_criterion_1_class_counts(capsys):
    def check():
        want = {1: (2, 1), 2: (4, 6), 3: (240, 168)}
        for m, (classes, transforms) in want.items():
            reps = list(mflsa(m))
            mats = list(enumerate_invertible(m))
            assert (len(reps), len(mats)) == (classes, transforms), m
            assert len({l.integer_view for l in reps}) == classes
            assert labeling_class_count(m) == classes and invertible_count(m) == transforms
            assert classes * transforms == math.factorial(1 << m)
        t1 = reference_tables()["table1"]
        for m, classes, transforms in zip(t1["m"], t1["classes"], t1["transforms"]):
            mt = _invertible_formula(m)
            mr = math.factorial(1 << m) // mt
            assert math.factorial(1 << m) % mt == 0
            assert invertible_count(m) == mt and labeling_class_count(m) == mr
            # the table prints four significant digits
            assert math.isclose(mt, transforms, rel_tol=1e-3) and math.isclose(mr, classes, rel_tol=1e-3)

    _criterion(1, "class counts", capsys, check, budget_s=1.0)


# -- 2. MFLSA fidelity ---------------------------------------------------------------------


def test_criterion_2_mflsa_table(capsys):
    def check():
        table = [list(r) for r in reference_tables()["table2"]]
        assert len(table) == 240
        assert [list(l.integer_view) for l in mflsa(3)] == table
        # row by row, 8 cells per row
        cols = lambda cs: [table[r * 8 + c] for r in range(30) for c in cs]
        assert [list(l.integer_view) for l in mflsa(3, "pam")] == cols(range(4))
        assert [list(l.integer_view) for l in mflsa(3, "psk")] == cols([0])

    _criterion(2, "MFLSA vs bundled labeling table", capsys, check, budget_s=1.0)


# -- 3. factorization grid -----------------------------------------------------------------


def test_criterion_3_factorization_m2(capsys):
    def check():
        reps = list(mflsa(2))
        mats = list(enumerate_invertible(2))
        assert [str(l) for l in reps] == ["0 1 2 3", "1 0 2 3", "1 2 0 3", "1 2 3 0"]
        assert [str(t) for t in mats] == ["01/10", "01/11", "10/01", "10/11", "11/01", "11/10"]
        grid = {}
        for i, r in enumerate(reps):
            for j, t in enumerate(mats):
                grid[r.transformed(t).integer_view] = (i, j)
        assert sorted(grid) == sorted(itertools.permutations(range(4)))
        for view, (i, j) in grid.items():
            l = Labeling.from_integers(view)
            f = rce_factorize(l.matrix)
            assert f.echelon == reps[i].matrix and f.transform == mats[j]
            assert Labeling(f.echelon).transformed(f.transform) == l

    _criterion(3, "m=2 factorization grid", capsys, check, budget_s=1.0)


# -- 4. spectrum reproduction --------------------------------------------------------------


def test_criterion_4_spectra(capsys):
    def check():
        data = reference_tables()
        rows = 0
        for name in ("table3", "table4", "table5"):
            x = by_name(data[name]["constellation"])
            for row in data[name]["rows"]:
                if row["encoder_mark"] == "U":
                    continue
                t0 = time.perf_counter()
                enc = TcmEncoder(EncoderSpec.parse(row["encoder"]), Labeling.from_integers(row["labeling"]), x)
                ds = distance_spectrum(enc, K=len(row["spectrum"]))
                dt = time.perf_counter() - t0
                assert spectra_match(ds, row["spectrum"], tol=TOL) == [], f"{name} {row['encoder']}"
                assert len(ds.terms) == len(row["spectrum"]) == 5
                assert dt < 30, f"{name} {row['encoder']} took {dt:.1f} s"
                rows += 1
        assert rows == 24

    _criterion(4, "bundled reference spectra", capsys, check, budget_s=20 * 60)


# -- 5. equivalence ------------------------------------------------------------------------


def test_criterion_5_equivalence(capsys):
    def check():
        rng = random.Random(2024)
        pools = {}
        for k, m in ((1, 2), (2, 3)):
            for nu in (1, 2, 3):
                pools[(k, m, nu)] = list(enumerate_encoders(k, m, nu))
        mats = {m: list(enumerate_invertible(m)) for m in (2, 3)}
        keys = sorted(pools)
        for trial in range(1000):
            k, m, nu = keys[trial % len(keys)]
            spec = rng.choice(pools[(k, m, nu)])
            perm = list(range(1 << m))
            rng.shuffle(perm)
            l = Labeling.from_integers(perm)
            t = rng.choice(mats[m])
            x = mpam(1 << m) if rng.random() < 0.5 else mpsk(1 << m)
            a = TcmEncoder(spec, l, x)
            b = TcmEncoder(spec.transformed(t), l.transformed(t), x)
            words = np.array([rng.randrange(1 << k) for _ in range(1000 // k)])
            la, _ = encode_array(a.spec.trellis(), words[None])
            lb, _ = encode_array(b.spec.trellis(), words[None])
            sa = np.asarray(a.labeling.symbol_of_label())[la]
            sb = np.asarray(b.labeling.symbol_of_label())[lb]
            assert (sa == sb).all(), f"symbols differ for {spec.octal()} / {l} / {t}"
            assert distance_spectrum(a, K=5).same_as(distance_spectrum(b, K=5)), spec.octal()
        # the worked instance: ([13,17], BRGC) and ([13,4], NBC)
        t = BitMatrix.parse("11/01")
        assert brgc(2).transformed(t) == nbc(2)
        assert EncoderSpec.parse("[13,17]").transformed(t).octal() == "[13,4]"
        e1 = TcmEncoder(EncoderSpec.parse("[13,17]"), brgc(2), mpam(4))
        e2 = TcmEncoder(EncoderSpec.parse("[13,4]"), nbc(2), mpam(4))
        assert distance_spectrum(e1, K=5).same_as(distance_spectrum(e2, K=5))

    _criterion(5, "transform equivalence", capsys, check)


# -- 6. search reproduction ----------------------------------------------------------------


def test_criterion_6_search(capsys):
    def check():
        for table, k, m, family, nus in (
            ("table3", 1, 2, "pam", (1, 2, 3, 4)),
            ("table5", 2, 3, "psk", (1, 2, 3)),
            ("table4", 2, 3, "pam", (1, 2)),
        ):
            t0 = time.perf_counter()
            for nu in nus:
                r = ods_search(k, m, nu, family)
                rep = verify_against_reference(r)
                assert rep.matched, f"{table} nu={nu}: {rep}"
                ab = next(row for row in reference_tables()[table]["rows"]
                          if row["nu"] == nu and "AB" in row["encoder_mark"])
                assert r.verdict == "ods_found" and r.best_ab.spec.octal() == ab["encoder"], f"{table} nu={nu}"
            assert time.perf_counter() - t0 < 3600, f"{table} searches exceed one hour"
        r = ods_search(1, 2, 5, "pam")
        assert r.verdict == "split_optimum"
        assert (r.best_a.spec.octal(), r.best_b.spec.octal()) == ("[55,4]", "[45,10]")
        assert verify_against_reference(r).matched

    _criterion(6, "ODS search", capsys, check)


# -- 7. bounds vs simulation ---------------------------------------------------------------


def test_criterion_7_bounds_vs_simulation(capsys):
    cases = (
        ("[23,10]", nbc(2), mpam(4), (5.0, 6.0, 6.5, 7.0)),
        ("[1,0,0;0,5,2]", nbc(3), mpsk(8), (9.0, 9.5, 10.0, 10.5)),
    )

    def check():
        assert CONFIDENCE_Z == 3.0  # reported half-widths are 3 sigma
        tight = 0
        for g, l, x, snrs in cases:
            enc = TcmEncoder(EncoderSpec.parse(g), l, x)
            ds = distance_spectrum(enc, K=20)
            for db in snrs:
                ch = ChannelConfig.from_db(db, 1000)
                r = simulate(enc, ch, target_frame_errors=100, seed=1, max_frames=200_000)
                assert r.frame_errors == 100, f"{g} {db} dB stopped early"
                bb, fb = ber_bound(ds, ch), fer_bound(ds, ch)
                # below the bound at 3 sigma confidence
                assert r.ber - r.ber_ci <= bb, f"{g} {db} dB: BER {r.ber:.3g} > {bb:.3g}"
                assert r.fer - r.fer_ci <= fb, f"{g} {db} dB: FER {r.fer:.3g} > {fb:.3g}"
                if r.ber <= 1e-5:
                    tight += 1
                    assert 0.5 <= bb / r.ber <= 2.0, f"{g} {db} dB: BER bound/sim {bb / r.ber:.2f}"
                    assert 0.5 <= fb / r.fer <= 2.0, f"{g} {db} dB: FER bound/sim {fb / r.fer:.2f}"
        assert tight >= 2

    _criterion(7, "bounds vs simulation", capsys, check, budget_s=30 * 60)


# -- 8. brute-force oracle -----------------------------------------------------------------


def test_criterion_8_oracle(capsys):
    def check():
        checked = 0
        for lab in ("0 1 2 3", "1 0 2 3"):
            for nu in (1, 2):
                for spec in enumerate_encoders(1, 2, nu):
                    enc = TcmEncoder(spec, Labeling.parse(lab), mpam(4))
                    ds = distance_spectrum(enc, K=6)
                    tr = spec.trellis()
                    cap = ds.terms[-1].d2
                    lines, d_open = brute_force_spectrum(
                        tr.next_state.tolist(), tr.output.tolist(), enc.label_sed().tolist(), 1, nu, 12, cap
                    )
                    limit = min(d_open, cap)
                    complete = sorted((d, v) for d, v in lines.items() if d < limit - 1e-7)
                    ours = [t for t in ds.terms if t.d2 < limit - 1e-7]
                    assert complete and len(ours) == len(complete), f"{spec.octal()} {lab}"
                    for t, (d, (a, b)) in zip(ours, complete):
                        assert abs(t.d2 - d) < 1e-7 and t.A == a and t.B == b, f"{spec.octal()} {lab}"
                    checked += len(ours)
        assert checked > 0

    _criterion(8, "brute-force spectrum oracle", capsys, check, budget_s=5 * 60)


# -- 9. ML decoding ------------------------------------------------------------------------


def test_criterion_9_viterbi_is_ml(capsys):
    cases = (
        ("[3,1]", "0 1 2 3", mpam(4)),
        ("[7,2]", "1 0 2 3", mpam(4)),
        ("[1,0,0;0,5,2]", "0 1 2 3 4 5 6 7", mpsk(8)),
        ("[1,0,0;0,7,2]", "1 2 4 0 6 5 3 7", mpam(8)),
    )

    def check():
        rng = np.random.default_rng(9)
        done = 0
        for g, lab, x in cases:
            enc = TcmEncoder(EncoderSpec.parse(g), Labeling.parse(lab), x)
            assert enc.spec.nu <= 2
            words, symbols = all_codeword_symbols(enc, 8)
            std = 0.5 * math.sqrt(x.energy())
            for _ in range(125):
                truth = rng.integers(len(words))
                rx = symbols[truth] + std * rng.standard_normal(symbols.shape[1:])
                best, _ = exhaustive_ml(words, symbols, rx)
                got = viterbi_decode(enc, rx, tail=enc.spec.nu)
                assert got[:8].tolist() == best.tolist(), g
                done += 1
        assert done == 500

    _criterion(9, "Viterbi equals exhaustive ML", capsys, check, budget_s=60)
