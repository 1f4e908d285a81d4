"""Command-line entry point.

Subcommands cover the whole pipeline: ``synth`` (seeded datasets),
``extract`` (image -> fingerprint hex), ``match`` (two fingerprints),
``eval`` (dataset metrics), ``keygen`` and the ``enroll``/``verify``
pairs for the online store and the offline signed payload.

Exit codes: 0 success or accept, 1 reject, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import biometric, protocol, pufmetrics, synth
from .config import dump_config, load_config
from .fingerprint import Fingerprint, decide
from .imaging import load_pgm
from .pipeline import manifest_fingerprints, note_fingerprint

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_ERROR = 2


def _read_fingerprint(path) -> Fingerprint:
    return Fingerprint.from_hex(Path(path).read_text(encoding="ascii").strip())


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    rows = synth.generate_dataset(
        args.out,
        notes=args.notes,
        samples=args.samples,
        condition=args.condition,
        master_seed=args.seed,
    )
    print(json.dumps({"files": len(rows), "manifest": str(Path(args.out) / "manifest.jsonl")}))
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = load_config(args.config)
    img = load_pgm(args.image)
    fp = note_fingerprint(img, cfg, align=not args.no_align)
    text = fp.to_hex()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="ascii")
    else:
        print(text)
    return EXIT_OK


def cmd_match(args) -> int:
    f1 = _read_fingerprint(args.fingerprint1)
    f2 = _read_fingerprint(args.fingerprint2)
    result = decide(f1, f2, args.threshold)
    verdict = "ACCEPT" if result.accepted else "REJECT"
    print(f"HD={result.hd:.6f} {verdict}")
    return EXIT_OK if result.accepted else EXIT_REJECT


def _group_stats(scores: np.ndarray):
    if scores.size < 2:
        return None
    return {
        "mean": float(scores.mean()),
        "std": float(scores.std(ddof=1)),
        "n": int(scores.size),
    }


def _metrics_document(scores: biometric.ScoreSet) -> dict:
    # Single-sample datasets have no intra pairs; the intra-dependent
    # metrics are reported as null rather than failing the whole report.
    intra = _group_stats(scores.intra)
    inter = _group_stats(scores.inter)
    doc = {
        "intra": intra,
        "inter": inter,
        "d_prime": None,
        "dof": None,
        "eer": None,
        "eer_threshold": None,
        "table_vi": None,
        "sphere_packing": None,
    }
    if intra and inter:
        doc["d_prime"] = biometric.decidability(scores)
        curve = biometric.error_curves(scores, np.round(np.linspace(0.0, 0.5, 101), 3))
        doc["eer"] = curve.eer
        doc["eer_threshold"] = curve.eer_threshold
    if inter and inter["std"] > 0:
        dof = biometric.degrees_of_freedom(scores.inter)
        n = int(round(dof))
        w = math.floor(0.33 * n)
        attempts = biometric.sphere_packing_attempts(n, w)
        doc["dof"] = dof
        doc["table_vi"] = [
            {"theta": theta, "p": p} for theta, p in biometric.false_match_table(n)
        ]
        doc["sphere_packing"] = {
            "N": n,
            "w": w,
            "attempts": attempts if math.isfinite(attempts) else None,
        }
    return doc


def _write_histogram_csv(path, fit: biometric.BinomialFit, scores: biometric.ScoreSet) -> None:
    intra_counts, _ = np.histogram(scores.intra, bins=fit.bin_edges)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_center", "intra_count", "inter_count", "binomial_expected"])
        for center, ic, oc, exp in zip(
            fit.bin_centers, intra_counts, fit.observed, fit.expected
        ):
            writer.writerow([repr(float(center)), int(ic), int(oc), repr(float(exp))])


def _write_puf_csv(path, report: pufmetrics.PufReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["note", "randomness", "reliability", "steadiness", "uniqueness", "uniqueness_ordered_pairs"]
        )
        for s in range(report.randomness.size):
            rel = "" if report.reliability is None else repr(float(report.reliability[s]))
            writer.writerow(
                [
                    s,
                    repr(float(report.randomness[s])),
                    rel,
                    repr(float(report.steadiness[s])),
                    repr(float(report.uniqueness_mean_hd[s])),
                    repr(float(report.uniqueness_eq[s])),
                ]
            )


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    fingerprints, _ = manifest_fingerprints(args.manifest, cfg)
    dataset = pufmetrics.NoteDataset.from_fingerprints(fingerprints)
    scores = biometric.score_set(fingerprints)
    report = pufmetrics.puf_report(dataset)
    doc = _metrics_document(scores)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    (out / "puf.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    if scores.inter.size >= 100:
        fit = biometric.binomial_fit(scores.inter)
        _write_histogram_csv(out / "histogram.csv", fit, scores)
    _write_puf_csv(out / "puf_per_note.csv", report)
    if args.table_vi:
        for row in doc["table_vi"]:
            print(f"{row['theta']:.2f} {row['p']:.2e}")
    else:
        print(json.dumps(doc))
    return EXIT_OK


def cmd_keygen(args) -> int:
    protocol.keygen(args.private, args.public)
    print(json.dumps({"private": str(args.private), "public": str(args.public)}))
    return EXIT_OK


def cmd_enroll_online(args) -> int:
    store = protocol.NoteStore(args.store)
    record = protocol.NoteRecord(
        serial=args.serial,
        denomination=args.denomination,
        fingerprint=_read_fingerprint(args.fingerprint),
    )
    store.enroll(record)
    print(json.dumps({"enrolled": record.serial}))
    return EXIT_OK


def cmd_enroll_offline(args) -> int:
    record = protocol.NoteRecord(
        serial=args.serial,
        denomination=args.denomination,
        fingerprint=_read_fingerprint(args.fingerprint),
    )
    payload = protocol.register_offline(record, protocol.load_private_key(args.key))
    text = payload.to_base64()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="ascii")
    else:
        print(text)
    return EXIT_OK


def cmd_verify_online(args) -> int:
    store = protocol.NoteStore(args.store)
    result = store.verify(args.serial, _read_fingerprint(args.fingerprint), args.threshold)
    verdict = "ACCEPT" if result.accepted else "REJECT"
    print(f"HD={result.hd:.6f} {verdict}")
    return EXIT_OK if result.accepted else EXIT_REJECT


def cmd_verify_offline(args) -> int:
    outcome = protocol.verify_offline(
        Path(args.payload).read_text(encoding="ascii"),
        _read_fingerprint(args.fingerprint),
        protocol.load_public_key(args.public),
        args.threshold,
    )
    if not outcome.signature_valid:
        print("REJECT signature invalid")
        return EXIT_REJECT
    if not outcome.match.accepted:
        print(f"REJECT fingerprint mismatch (HD={outcome.match.hd:.6f})")
        return EXIT_REJECT
    print(f"ACCEPT serial={outcome.record.serial} HD={outcome.match.hd:.6f}")
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(dump_config(load_config(args.config)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_config_flag(parser) -> None:
    parser.add_argument("--config", metavar="FILE", default=None, help="JSON config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polymerfp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--notes", type=int, default=100)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--condition", choices=synth.CONDITIONS, default="benchmark")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract a fingerprint from a PGM capture")
    p.add_argument("image")
    p.add_argument("--no-align", action="store_true", help="input is a pre-cropped feature area")
    p.add_argument("--out", default=None, help="write hex fingerprint here instead of stdout")
    _add_config_flag(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("match", help="compare two fingerprint hex files")
    p.add_argument("fingerprint1")
    p.add_argument("fingerprint2")
    p.add_argument("--threshold", type=float, default=0.33)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", help="evaluate a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="eval-out", help="directory for metric reports")
    p.add_argument("--table-vi", action="store_true", help="print the false-match table")
    _add_config_flag(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("keygen", help="generate an issuer signing key pair")
    p.add_argument("--private", required=True)
    p.add_argument("--public", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("enroll", help="register a note")
    esub = p.add_subparsers(dest="mode", required=True)
    q = esub.add_parser("online", help="append to the serial-keyed store")
    q.add_argument("--store", required=True)
    q.add_argument("--serial", required=True)
    q.add_argument("--denomination", type=int, required=True)
    q.add_argument("--fingerprint", required=True)
    q.set_defaults(func=cmd_enroll_online)
    q = esub.add_parser("offline", help="produce a signed Base64 payload")
    q.add_argument("--key", required=True, help="issuer private key (PEM)")
    q.add_argument("--serial", required=True)
    q.add_argument("--denomination", type=int, required=True)
    q.add_argument("--fingerprint", required=True)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_enroll_offline)

    p = sub.add_parser("verify", help="verify a note")
    vsub = p.add_subparsers(dest="mode", required=True)
    q = vsub.add_parser("online", help="one-to-one comparison against the store")
    q.add_argument("--store", required=True)
    q.add_argument("--serial", required=True)
    q.add_argument("--fingerprint", required=True)
    q.add_argument("--threshold", type=float, default=0.33)
    q.set_defaults(func=cmd_verify_online)
    q = vsub.add_parser("offline", help="check a signed payload against a fresh fingerprint")
    q.add_argument("--payload", required=True)
    q.add_argument("--public", required=True)
    q.add_argument("--fingerprint", required=True)
    q.add_argument("--threshold", type=float, default=0.33)
    q.set_defaults(func=cmd_verify_offline)

    p = sub.add_parser("config", help="print the effective configuration")
    _add_config_flag(p)
    p.set_defaults(func=cmd_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except protocol.NotEnrolledError as exc:
        return _fail(str(exc))
    except (ValueError, OSError, KeyError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
