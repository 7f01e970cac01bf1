/**
 * Wire objects the client consumes during attestation: the quote from
 * the X-SafeKeeper-Quote header and the signed report the proxy
 * returns for it. Byte layouts match the server's framing exactly.
 */

import { ascii, readFields, readU32, readU64, writeFields, u32 } from "./codec.js";

export const QUOTE_CONTEXT = "attest-quote";
export const REPORT_CONTEXT = "attest-report";
export const CERT_CONTEXT = "attest-cert";
export const REPORT_KEY_ROLE = "report-signing";

export const MEASUREMENT_BYTES = 32;
export const DIGEST_BYTES = 32;
export const PLATFORM_ID_BYTES = 16;

export enum Verdict {
  OK = 0,
  QUOTE_INVALID = 1,
  PLATFORM_REVOKED = 2,
}

function u64be(value: bigint): Uint8Array {
  const out = new Uint8Array(8);
  new DataView(out.buffer).setBigUint64(0, value);
  return out;
}

export class Quote {
  constructor(
    readonly measurement: Uint8Array,
    readonly boundKeyDigest: Uint8Array,
    readonly platformId: Uint8Array,
    readonly signature: Uint8Array
  ) {}

  static fromBytes(data: Uint8Array): Quote {
    const [m, k, p, sig] = readFields(data, 4);
    if (
      m.length !== MEASUREMENT_BYTES ||
      k.length !== DIGEST_BYTES ||
      p.length !== PLATFORM_ID_BYTES
    ) {
      throw new Error("bad quote field width");
    }
    return new Quote(m, k, p, sig);
  }

  signedPayload(): Uint8Array {
    return writeFields(ascii(QUOTE_CONTEXT), this.measurement, this.boundKeyDigest, this.platformId);
  }
}

export class Certificate {
  constructor(
    readonly subjectPublicKey: Uint8Array,
    readonly role: Uint8Array,
    readonly signature: Uint8Array
  ) {}

  static fromBytes(data: Uint8Array): Certificate {
    const [subject, role, sig] = readFields(data, 3);
    return new Certificate(subject, role, sig);
  }

  signedPayload(): Uint8Array {
    return writeFields(ascii(CERT_CONTEXT), this.subjectPublicKey, this.role);
  }
}

export class AttestationReport {
  constructor(
    readonly verdict: Verdict,
    readonly quoteDigest: Uint8Array,
    readonly measurement: Uint8Array,
    readonly boundKeyDigest: Uint8Array,
    readonly timestamp: bigint,
    readonly certificate: Certificate,
    readonly signature: Uint8Array
  ) {}

  static fromBytes(data: Uint8Array): AttestationReport {
    const fields = readFields(data, 7);
    const verdict = readU32(fields[0]);
    if (!(verdict in Verdict)) throw new Error(`unknown verdict ${verdict}`);
    return new AttestationReport(
      verdict as Verdict,
      fields[1],
      fields[2],
      fields[3],
      readU64(fields[4]),
      Certificate.fromBytes(fields[5]),
      fields[6]
    );
  }

  signedPayload(): Uint8Array {
    return writeFields(
      ascii(REPORT_CONTEXT),
      u32(this.verdict),
      this.quoteDigest,
      this.measurement,
      this.boundKeyDigest,
      u64be(this.timestamp)
    );
  }
}
