"""Online and offline note-authentication protocols.

Offline payloads are laid out as

    magic "PSF1" | version u8 | denomination u16 BE | serial_len u8 |
    serial bytes | fingerprint (256 bytes) | ECDSA signature (DER)

signed over everything before the signature, Base64-encoded with the
standard alphabet and padding.  Keys are ECDSA over brainpoolP512r1
(512-bit keys, 256-bit security) with RFC 6979 deterministic nonces, so
registering the same record twice yields identical payload bytes.  The
encoded text must fit the binary capacity of a version-18 QR code at
medium error correction.

The online store is an append-only JSON-lines file keyed by serial,
loaded into a hash map on open; duplicates are construction errors.
"""

from __future__ import annotations

import base64
import binascii
import fcntl
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec

from .fingerprint import DEFAULT_THRESHOLD, FINGERPRINT_BYTES, Fingerprint, MatchResult, decide

MAGIC = b"PSF1"
VERSION = 1
MAX_SERIAL_LENGTH = 32

#: Binary-mode capacity (bytes) of a QR code, version 18, medium error
#: correction: 721 data codewords minus the byte-mode header.
QR_V18_M_CAPACITY = 718

_CURVE = ec.BrainpoolP512R1()
_SIGNING = ec.ECDSA(hashes.SHA512(), deterministic_signing=True)
_VERIFYING = ec.ECDSA(hashes.SHA512())


class PayloadError(ValueError):
    pass


class DuplicateSerialError(ValueError):
    pass


class NotEnrolledError(KeyError):
    def __str__(self):  # KeyError quotes its message by default
        return self.args[0] if self.args else ""


@dataclass(frozen=True)
class NoteRecord:
    """Serial, denomination in minor units, and the reference fingerprint."""

    serial: str
    denomination: int
    fingerprint: Fingerprint

    def __post_init__(self):
        if not 1 <= len(self.serial) <= MAX_SERIAL_LENGTH:
            raise ValueError(f"serial must be 1..{MAX_SERIAL_LENGTH} chars")
        if not all(0x20 <= ord(c) <= 0x7E for c in self.serial):
            raise ValueError("serial must be printable ASCII")
        if not 0 <= self.denomination <= 0xFFFF:
            raise ValueError("denomination must fit an unsigned 16-bit integer")


@dataclass(frozen=True)
class SignedPayload:
    record: NoteRecord
    signature: bytes

    def signed_bytes(self) -> bytes:
        return _message_bytes(self.record)

    def encode(self) -> bytes:
        raw = self.signed_bytes() + self.signature
        if len(raw) > QR_V18_M_CAPACITY:
            raise PayloadError(
                f"payload of {len(raw)} bytes exceeds QR v18/M capacity "
                f"({QR_V18_M_CAPACITY})"
            )
        return raw

    def to_base64(self) -> str:
        return base64.b64encode(self.encode()).decode("ascii")

    @classmethod
    def decode(cls, raw: bytes) -> "SignedPayload":
        header = struct.calcsize(">4sBHB")
        if len(raw) < header:
            raise PayloadError("payload too short")
        magic, version, denomination, serial_len = struct.unpack(">4sBHB", raw[:header])
        if magic != MAGIC:
            raise PayloadError(f"bad magic {magic!r}")
        if version != VERSION:
            raise PayloadError(f"unsupported version {version}")
        fp_end = header + serial_len + FINGERPRINT_BYTES
        if len(raw) <= fp_end:
            raise PayloadError("payload truncated")
        try:
            serial = raw[header : header + serial_len].decode("ascii")
        except UnicodeDecodeError:
            raise PayloadError("serial is not ASCII") from None
        fingerprint = Fingerprint.from_bytes(raw[header + serial_len : fp_end])
        try:
            record = NoteRecord(serial=serial, denomination=denomination, fingerprint=fingerprint)
        except ValueError as exc:
            raise PayloadError(str(exc)) from None
        return cls(record=record, signature=raw[fp_end:])


def _message_bytes(record: NoteRecord) -> bytes:
    serial = record.serial.encode("ascii")
    return (
        struct.pack(">4sBHB", MAGIC, VERSION, record.denomination, len(serial))
        + serial
        + record.fingerprint.to_bytes()
    )


# ---------------------------------------------------------------------------
# Keys and signatures
# ---------------------------------------------------------------------------

def keygen(private_path, public_path) -> None:
    """Write a fresh brainpoolP512r1 key pair as PEM files.

    The private key file is created with owner-only permissions.
    """
    key = ec.generate_private_key(_CURVE)
    priv_pem = key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )
    pub_pem = key.public_key().public_bytes(
        serialization.Encoding.PEM,
        serialization.PublicFormat.SubjectPublicKeyInfo,
    )
    private_path = Path(private_path)
    private_path.write_bytes(priv_pem)
    os.chmod(private_path, 0o600)
    Path(public_path).write_bytes(pub_pem)


def load_private_key(path):
    return serialization.load_pem_private_key(Path(path).read_bytes(), password=None)


def load_public_key(path):
    return serialization.load_pem_public_key(Path(path).read_bytes())


def register_offline(record: NoteRecord, private_key) -> SignedPayload:
    """Sign a record for offline verification; payload bytes are reproducible."""
    signature = private_key.sign(_message_bytes(record), _SIGNING)
    payload = SignedPayload(record=record, signature=signature)
    payload.encode()  # oversize is a construction-time error
    return payload


@dataclass(frozen=True)
class OfflineVerification:
    signature_valid: bool
    record: Optional[NoteRecord]
    match: Optional[MatchResult]  # None whenever the signature failed

    @property
    def accepted(self) -> bool:
        return self.signature_valid and self.match is not None and self.match.accepted


def verify_offline(
    payload_text: str,
    fresh: Fingerprint,
    public_key,
    threshold: float = DEFAULT_THRESHOLD,
) -> OfflineVerification:
    """Decode, check the signature first, then compare fingerprints.

    Structural problems (bad Base64, magic, version, truncation) raise
    PayloadError; a failed signature or a Hamming-distance rejection is
    reported in the result, distinctly from one another.
    """
    try:
        raw = base64.b64decode(payload_text.strip().encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise PayloadError(f"invalid base64 payload: {exc}") from None
    payload = SignedPayload.decode(raw)
    try:
        public_key.verify(payload.signature, payload.signed_bytes(), _VERIFYING)
    except InvalidSignature:
        return OfflineVerification(signature_valid=False, record=payload.record, match=None)
    return OfflineVerification(
        signature_valid=True,
        record=payload.record,
        match=decide(payload.record.fingerprint, fresh, threshold),
    )


# ---------------------------------------------------------------------------
# Online enrollment store
# ---------------------------------------------------------------------------

class NoteStore:
    """Append-only file-backed store of enrolled notes, keyed by serial."""

    def __init__(self, path):
        self.path = Path(path)
        self._records: Dict[str, NoteRecord] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    record = NoteRecord(
                        serial=obj["serial"],
                        denomination=int(obj["denomination"]),
                        fingerprint=Fingerprint.from_hex(obj["fingerprint_hex"]),
                    )
                    if record.serial in self._records:
                        raise DuplicateSerialError(
                            f"store corrupt: duplicate serial {record.serial!r}"
                        )
                    self._records[record.serial] = record

    def __len__(self) -> int:
        return len(self._records)

    def enroll(self, record: NoteRecord) -> None:
        if record.serial in self._records:
            raise DuplicateSerialError(f"serial already enrolled: {record.serial!r}")
        line = json.dumps(
            {
                "serial": record.serial,
                "denomination": record.denomination,
                "fingerprint_hex": record.fingerprint.to_hex(),
            }
        )
        with open(self.path, "a", encoding="utf-8") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.write(line + "\n")
                fh.flush()
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)
        self._records[record.serial] = record

    def lookup(self, serial: str) -> NoteRecord:
        try:
            return self._records[serial]
        except KeyError:
            raise NotEnrolledError(f"not enrolled: {serial!r}") from None

    def verify(self, serial: str, fresh: Fingerprint, threshold: float = DEFAULT_THRESHOLD) -> MatchResult:
        return decide(self.lookup(serial).fingerprint, fresh, threshold)
