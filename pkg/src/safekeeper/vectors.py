"""Interop test vectors.

`harness vectors --out FILE` writes a JSON file that other
implementations (the browser overlay's test suite in particular) check
themselves against: tag math, framing, quote/report parsing and
signature verification, and a full client channel with a decryptable
credential. Everything derives from a fixed seed; signatures are the
one run-to-run variable, and they are self-consistent with the public
keys in the same file.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path
from random import Random

from . import codec, crypto
from .attestation import Quote
from .client import (
    Revoked,
    UntrustedMeasurement,
    establish_channel,
    encrypt_field,
    verify_and_bind,
)
from .cmac import aes_cmac
from .crypto import PlainCredential
from .scenarios import rogue_stack, sim_stack

# Published reference vectors for the tag primitive (key, message, tag).
RFC_CMAC_VECTORS = [
    {
        "key": "2b7e151628aed2a6abf7158809cf4f3c",
        "message": "",
        "tag": "bb1d6929e95937287fa37d129b756746",
    },
    {
        "key": "2b7e151628aed2a6abf7158809cf4f3c",
        "message": "6bc1bee22e409f96e93d7e117393172a",
        "tag": "070a16b46b4d4144f79bdd9dd04a287c",
    },
    {
        "key": "2b7e151628aed2a6abf7158809cf4f3c",
        "message": "6bc1bee22e409f96e93d7e117393172aae2d8a571e03ac9c9eb76fac45af8e51"
        "30c81c46a35ce411",
        "tag": "dfa66747de9ae63030ca32611497c827",
    },
    {
        "key": "2b7e151628aed2a6abf7158809cf4f3c",
        "message": "6bc1bee22e409f96e93d7e117393172aae2d8a571e03ac9c9eb76fac45af8e51"
        "30c81c46a35ce411e5fbc1191a0a52eff69f2445df4f9b17ad2b417be66c3710",
        "tag": "51f0bebf7e3b9d92fc49741779363cfe",
    },
]


def _jwk_private(key) -> dict:
    """P-256 private key as a JWK, the import format browsers accept."""
    numbers = key.private_numbers()
    pub = numbers.public_numbers

    def b64url(value: int) -> str:
        return (
            base64.urlsafe_b64encode(value.to_bytes(32, "big"))
            .rstrip(b"=")
            .decode("ascii")
        )

    return {
        "kty": "EC",
        "crv": "P-256",
        "x": b64url(pub.x),
        "y": b64url(pub.y),
        "d": b64url(numbers.private_value),
        "ext": True,
    }


def build_vectors(seed: int = 424242) -> dict:
    rng = Random(seed)
    stack = sim_stack(seed)
    enclave = stack.enclave

    quote_bytes = enclave.quote_bytes()
    quote = Quote.from_bytes(quote_bytes)
    report_bytes = stack.proxy.request(quote_bytes)

    # Sanity: the vectors must pass our own verifier before export.
    verified = verify_and_bind(
        quote_bytes,
        report_bytes,
        stack.client_config.whitelist,
        enclave.dh_public_key,
        ias_root_public_key=stack.client_config.ias_root_public_key,
    )

    client_private = crypto.generate_private_key(rng)
    session_key = crypto.derive_shared_key(
        client_private, enclave.dh_public_key, crypto.SESSION_LABEL
    )
    channel_password = "tr0ub4dor&3"
    cred = crypto.encrypt_credential(
        session_key,
        crypto.public_bytes(client_private),
        channel_password.encode(),
        rng,
    )
    # Round-trip through the enclave so the ciphertext is known-good.
    salt = rng.randbytes(8)
    tag_via_enclave = enclave.process(cred, salt)
    tag_direct = aes_cmac(enclave._safe_key, channel_password.encode() + salt)
    assert tag_via_enclave == tag_direct

    extra_cmac = []
    for i in range(8):
        key = rng.randbytes(16)
        msg = rng.randbytes(rng.randrange(0, 80))
        extra_cmac.append(
            {"key": key.hex(), "message": msg.hex(), "tag": aes_cmac(key, msg).hex()}
        )

    framing_fields = [b"", b"a", b"safekeeper", bytes(range(7))]

    # A genuine-hardware enclave running code that is NOT on the
    # whitelist: its evidence verifies cryptographically but must still
    # be refused on the measurement check.
    rogue = rogue_stack(stack, seed, code_identity="lookalike/0.1")
    rogue_quote = rogue.enclave.quote_bytes()
    rogue_report = stack.proxy.request(rogue_quote)
    try:
        verify_and_bind(
            rogue_quote,
            rogue_report,
            stack.client_config.whitelist,
            rogue.enclave.dh_public_key,
            ias_root_public_key=stack.client_config.ias_root_public_key,
        )
    except UntrustedMeasurement:
        pass
    else:  # pragma: no cover - export-time sanity check
        raise AssertionError("rogue vector unexpectedly passed verification")

    # A separate deployment whose platform has been revoked, so other
    # verifiers can exercise their revocation branch from fixed bytes.
    revoked = sim_stack(seed + 1)
    revoked_quote = revoked.enclave.quote_bytes()
    revoked.service.revoke_platform(Quote.from_bytes(revoked_quote).platform_id)
    revoked_report = revoked.proxy.request(revoked_quote)
    try:
        verify_and_bind(
            revoked_quote,
            revoked_report,
            revoked.client_config.whitelist,
            revoked.enclave.dh_public_key,
            ias_root_public_key=revoked.client_config.ias_root_public_key,
        )
    except Revoked:
        pass
    else:  # pragma: no cover - export-time sanity check
        raise AssertionError("revoked vector unexpectedly passed verification")

    return {
        "seed": seed,
        "cmac": RFC_CMAC_VECTORS + extra_cmac,
        "framing": {
            "fields_hex": [f.hex() for f in framing_fields],
            "encoded_hex": codec.write_fields(*framing_fields).hex(),
            "seq_encoded_hex": codec.write_seq(framing_fields).hex(),
        },
        "session_label_utf8": crypto.SESSION_LABEL.decode(),
        "attestation": {
            "authority_public_key_hex": stack.authority.public_key.hex(),
            "ias_root_public_key_hex": stack.client_config.ias_root_public_key.hex(),
            "whitelist_measurements_hex": sorted(
                m.hex() for m in stack.client_config.whitelist.measurements
            ),
            "quote_b64": codec.b64e(quote_bytes),
            "report_b64": codec.b64e(report_bytes),
            "enclave_dh_public_key_hex": enclave.dh_public_key.hex(),
            "measurement_hex": quote.measurement.hex(),
            "bound_key_digest_hex": quote.bound_key_digest.hex(),
            "platform_id_hex": quote.platform_id.hex(),
            "report_verdict": "OK",
            "rogue_quote_b64": codec.b64e(rogue_quote),
            "rogue_report_b64": codec.b64e(rogue_report),
            "rogue_dh_public_key_hex": rogue.enclave.dh_public_key.hex(),
            "rogue_measurement_hex": Quote.from_bytes(rogue_quote).measurement.hex(),
            "revoked": {
                "authority_public_key_hex": revoked.authority.public_key.hex(),
                "ias_root_public_key_hex": revoked.client_config.ias_root_public_key.hex(),
                "whitelist_measurements_hex": sorted(
                    m.hex() for m in revoked.client_config.whitelist.measurements
                ),
                "quote_b64": codec.b64e(revoked_quote),
                "report_b64": codec.b64e(revoked_report),
                "enclave_dh_public_key_hex": revoked.enclave.dh_public_key.hex(),
            },
        },
        "channel": {
            "client_private_jwk": _jwk_private(client_private),
            "client_public_key_hex": cred.client_public_key.hex(),
            "enclave_dh_public_key_hex": enclave.dh_public_key.hex(),
            "session_key_hex": session_key.hex(),
            "password_utf8": channel_password,
            "nonce_hex": cred.nonce.hex(),
            "ciphertext_hex": cred.ciphertext.hex(),
            "salt_hex": salt.hex(),
            "expected_tag_hex": tag_via_enclave.hex(),
        },
        "verified_measurement_hex": verified.measurement.hex(),
    }


def export_vectors(path: str | Path, seed: int = 424242) -> dict:
    vectors = build_vectors(seed)
    Path(path).write_text(json.dumps(vectors, indent=2) + "\n")
    return vectors
