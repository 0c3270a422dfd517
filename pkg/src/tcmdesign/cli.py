"""Command-line front end: ``tcmdesign <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 verification mismatch, 3 spectrum not
converged.  Whenever a result is written with ``--out`` a run manifest is
written next to it and the result names that manifest.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .constellations import Constellation, ConstellationError, by_name, load
from .encoder import EncoderError, EncoderSpec
from .gf2 import GF2Error, rce_factorize
from .labelings import Labeling, LabelingError, mflsa
from .search import (
    REFERENCE_TABLES,
    TABLE_FOR,
    Candidate,
    SearchError,
    SearchResult,
    VerificationReport,
    compare_candidate,
    ods_search,
    reference_tables,
    verify_against_reference,
)
from .simulate import rows_to_csv, sweep
from .spectrum import DistanceSpectrum, SpectrumError, TcmEncoder, distance_spectrum, spectra_match

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_NONCONVERGED = 0, 1, 2, 3

log = logging.getLogger("tcmdesign")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- manifests ------------------------------------------------------------------


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command_line: list[str]
    config: dict
    seed: int | None
    tool_version: str
    started: str
    finished: str = ""
    input_digests: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, default=str) + "\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _emit(args, text: str, manifest: RunManifest) -> None:
    """Print to stdout, or write ``--out`` plus its manifest."""
    out = getattr(args, "out", None)
    if not out:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text if text.endswith("\n") else text + "\n")
    manifest.outputs.append(str(out))
    manifest.finished = _now()
    manifest.write(_manifest_path(out))
    log.info("wrote %s", out)


def _with_manifest_ref(args, payload: dict) -> dict:
    if getattr(args, "out", None):
        payload = {"manifest": _manifest_path(Path(args.out)).name, **payload}
    return payload


# -- shared argument parsing --------------------------------------------------------


def _labeling(text: str) -> Labeling:
    try:
        return Labeling.parse(text)
    except (LabelingError, GF2Error) as exc:
        raise UsageError(str(exc)) from exc


def _encoder(text: str) -> EncoderSpec:
    try:
        return EncoderSpec.parse(text)
    except EncoderError as exc:
        raise UsageError(str(exc)) from exc


def _constellation(text: str, manifest: RunManifest) -> Constellation:
    try:
        if Path(text).is_file():
            manifest.input_digests[text] = _digest(text)
            return load(text)
        return by_name(text)
    except ConstellationError as exc:
        raise UsageError(str(exc)) from exc


def _tcm(args, manifest: RunManifest) -> TcmEncoder:
    try:
        return TcmEncoder(_encoder(args.encoder), _labeling(args.labeling), _constellation(args.constellation, manifest))
    except SpectrumError as exc:
        raise UsageError(str(exc)) from exc


def _snr_grid(args) -> list[float]:
    if args.snr_list:
        return [float(v) for v in args.snr_list.split(",")]
    start, stop, step = args.snr
    if step <= 0 or stop < start:
        raise UsageError("--snr needs START STOP STEP with STEP > 0 and STOP >= START")
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n)]


# -- commands ------------------------------------------------------------------------


def cmd_labelings(args, manifest: RunManifest) -> int:
    try:
        labs = list(mflsa(args.m, args.mode, args.limit))
    except LabelingError as exc:
        raise UsageError(str(exc)) from exc
    if args.format == "json":
        text = json.dumps(_with_manifest_ref(args, {"m": args.m, "mode": args.mode,
                                                    "labelings": [list(l.integer_view) for l in labs]}), indent=2)
    else:
        text = "\n".join(str(l) for l in labs)
    _emit(args, text, manifest)
    return EXIT_OK


def cmd_factor(args, manifest: RunManifest) -> int:
    lab = _labeling(args.labeling)
    f = rce_factorize(lab.matrix)
    echelon = Labeling(f.echelon)
    if args.format == "json":
        text = json.dumps(_with_manifest_ref(args, {
            "labeling": str(lab), "echelon": str(echelon), "transform": str(f.transform),
            "transform_rows": [list(r) for r in f.transform.to_lists()],
        }), indent=2)
    else:
        text = f"echelon:   {echelon}\ntransform: {f.transform}"
    _emit(args, text, manifest)
    return EXIT_OK


def cmd_spectrum(args, manifest: RunManifest) -> int:
    enc = _tcm(args, manifest)
    ds = distance_spectrum(enc, K=args.K, max_event_length=args.max_event_length)
    if args.format == "json":
        payload = {"encoder": enc.spec.octal(), "labeling": str(enc.labeling),
                   "constellation": args.constellation, **json.loads(ds.dumps())}
        text = json.dumps(_with_manifest_ref(args, payload), indent=2)
    else:
        lines = [f"{'d2':>8} {'A':>10} {'B':>10}   exact A, B"]
        for t in ds.terms:
            d2, a, b = t.rounded()
            lines.append(f"{d2:8.2f} {a:10.2f} {b:10.2f}   {t.A}, {t.B}")
        if not ds.converged:
            lines.append(f"# not converged, residual <= {ds.residual:.3g}")
        text = "\n".join(lines)
    _emit(args, text, manifest)
    return EXIT_OK if ds.converged else EXIT_NONCONVERGED


def _search_payload(result: SearchResult) -> dict:
    payload = result.to_json()
    payload.pop("runtime_s", None)  # timings live in the manifest
    return payload


def cmd_search(args, manifest: RunManifest) -> int:
    try:
        result = ods_search(
            args.k, args.m, args.nu, args.family, args.K,
            workers=args.workers, checkpoint=args.checkpoint, resume=args.resume,
            checkpoint_interval=args.checkpoint_interval,
        )
    except SearchError as exc:
        raise UsageError(str(exc)) from exc
    manifest.config["runtime_s"] = round(result.runtime, 3)
    if args.format == "json":
        text = json.dumps(_with_manifest_ref(args, _search_payload(result)), indent=2)
    else:
        text = result.table()
    _emit(args, text, manifest)
    if args.verify:
        report = verify_against_reference(result)
        print(f"verify: {report}", file=sys.stderr)
        if not report.matched:
            return EXIT_MISMATCH
    return EXIT_OK


def cmd_sweep(args, manifest: RunManifest) -> int:
    enc = _tcm(args, manifest)
    ds = distance_spectrum(enc, K=args.K)
    rows = sweep(enc, ds, _snr_grid(args), args.block_length, args.simulate, args.target_frame_errors,
                 args.seed, args.max_frames, args.workers)
    comment = None
    if args.out:
        comment = f"manifest: {_manifest_path(Path(args.out)).name}"
    _emit(args, rows_to_csv(rows, comment), manifest)
    return EXIT_OK if ds.converged else EXIT_NONCONVERGED


def _verify_result_file(path: str, manifest: RunManifest) -> VerificationReport:
    manifest.input_digests[path] = _digest(path)
    obj = json.loads(Path(path).read_text())
    family = obj["family"]
    table = TABLE_FOR.get((obj["k"], obj["m"], family))
    if table is None:
        raise UsageError(f"no bundled reference for k={obj['k']}, m={obj['m']}, {family}")
    winners = {"AB": obj.get("best_ab"), "A": obj.get("best_a"), "B": obj.get("best_b")}
    report = VerificationReport(True)
    for row in reference_tables()[table]["rows"]:
        if row["nu"] != obj["nu"]:
            continue
        mark = row["encoder_mark"].replace("U", "")
        if not mark:
            report.skipped.append(f"Ungerboeck-only row {row['encoder']}")
            continue
        cand = winners.get(mark)
        if cand is None:
            report.matched = False
            report.differences.append(f"no {mark} winner in result for row {row['encoder']}")
            continue
        diffs = compare_candidate(Candidate.from_json(cand), row, family)
        if diffs:
            report.matched = False
            report.differences.extend(f"[{mark}] {d}" for d in diffs)
    return report


def _verify_spectra(tables: list[str], nus: list[int] | None) -> VerificationReport:
    data = reference_tables()
    report = VerificationReport(True)
    for name in tables:
        tab = data[name]
        x = by_name(tab["constellation"])
        for row in tab["rows"]:
            if nus and row["nu"] not in nus:
                continue
            if row["encoder_mark"] == "U":
                report.skipped.append(f"{name} nu={row['nu']} Ungerboeck-only row {row['encoder']}")
                continue
            enc = TcmEncoder(EncoderSpec.parse(row["encoder"]), Labeling.from_integers(row["labeling"]), x)
            ds = distance_spectrum(enc, K=len(row["spectrum"]))
            diffs = spectra_match(ds, row["spectrum"])
            if diffs:
                report.matched = False
                report.differences.extend(f"{name} nu={row['nu']} {row['encoder']}: {d}" for d in diffs)
    return report


def cmd_verify(args, manifest: RunManifest) -> int:
    manifest.input_digests[str(REFERENCE_TABLES.name)] = _digest(REFERENCE_TABLES)
    if args.result:
        report = _verify_result_file(args.result, manifest)
    else:
        tables = [args.table] if args.table else ["table3", "table4", "table5"]
        report = _verify_spectra(tables, args.nu)
    if args.format == "json":
        text = json.dumps(_with_manifest_ref(args, asdict(report)), indent=2)
    else:
        text = str(report)
    _emit(args, text, manifest)
    return EXIT_OK if report.matched else EXIT_MISMATCH


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tcmdesign", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON file of option defaults (flags override it)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, formats=("text", "json")):
        sp.add_argument("--out", help="write the result here (a manifest is written alongside)")
        sp.add_argument("--format", choices=formats, default=formats[0])

    sp = sub.add_parser("labelings", help="one labeling per class (MFLSA order)")
    sp.add_argument("-m", type=int, required=True)
    sp.add_argument("--mode", choices=("full", "pam", "psk"), default="full")
    sp.add_argument("--limit", type=int)
    common(sp)
    sp.set_defaults(func=cmd_labelings)

    sp = sub.add_parser("factor", help="class representative and transform of a labeling")
    sp.add_argument("labeling", help='integer notation, e.g. "0 1 3 2"')
    common(sp)
    sp.set_defaults(func=cmd_factor)

    def tcm_args(sp):
        sp.add_argument("--encoder", "-G", required=True, help='octal, e.g. "[13,4]" or "[1,0,0;0,5,2]"')
        sp.add_argument("--labeling", "-L", required=True)
        sp.add_argument("--constellation", "-X", required=True, help="4pam, 8psk, ... or a point file")

    sp = sub.add_parser("spectrum", help="distance spectrum of one TCM encoder")
    tcm_args(sp)
    sp.add_argument("-K", type=int, default=5)
    sp.add_argument("--max-event-length", type=int, default=64)
    common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("search", help="exhaustive ODS search")
    sp.add_argument("-k", type=int, required=True)
    sp.add_argument("-m", type=int, required=True)
    sp.add_argument("--nu", type=int, required=True)
    sp.add_argument("--family", choices=("pam", "psk"), required=True)
    sp.add_argument("-K", type=int, default=5)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--checkpoint")
    sp.add_argument("--checkpoint-interval", type=float, default=60.0)
    sp.add_argument("--resume", action="store_true")
    sp.add_argument("--verify", action="store_true", help="compare with the bundled published table")
    common(sp)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("sweep", help="BER/FER bounds (and simulation) over an SNR grid, as CSV")
    tcm_args(sp)
    grid = sp.add_mutually_exclusive_group(required=True)
    grid.add_argument("--snr", type=float, nargs=3, metavar=("START", "STOP", "STEP"), help="Es/N0 in dB")
    grid.add_argument("--snr-list", help="comma-separated Es/N0 values in dB")
    sp.add_argument("--block-length", "-N", type=int, default=1000)
    sp.add_argument("-K", type=int, default=20)
    sp.add_argument("--simulate", action="store_true")
    sp.add_argument("--target-frame-errors", type=int, default=100)
    sp.add_argument("--max-frames", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep, format="csv")

    sp = sub.add_parser("verify", help="check spectra or a search result against the bundled tables")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--result", help="JSON written by 'search --format json'")
    src.add_argument("--table", choices=("table3", "table4", "table5"))
    sp.add_argument("--nu", type=int, action="append", help="restrict to these memories (repeatable)")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return p


def _parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    # the config must be applied before required flags are checked
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((a for a in rest if a in subparsers), None)
    if known.config and command:
        try:
            cfg = json.loads(Path(known.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.exit(EXIT_USAGE, f"tcmdesign: cannot read config {known.config}: {exc}\n")
        # flags > config file > defaults
        sub = subparsers[command]
        known_keys = {a.dest for a in sub._actions}
        unknown = set(cfg) - known_keys
        if unknown:
            parser.exit(EXIT_USAGE, f"tcmdesign: unknown config keys {sorted(unknown)}\n")
        for a in sub._actions:
            if a.dest in cfg:
                a.required = False
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _parse(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = RunManifest(["tcmdesign", *argv], config, getattr(args, "seed", None), __version__, _now())
    if args.config:
        manifest.input_digests[args.config] = _digest(args.config)
    try:
        return args.func(args, manifest)
    except UsageError as exc:
        print(f"tcmdesign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
