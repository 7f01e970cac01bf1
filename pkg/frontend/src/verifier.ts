/**
 * The verification the overlay runs before showing a lock: certificate
 * chain, report signature, verdict, report-to-quote binding, whitelist
 * membership, and finally the DH key binding. Check order and error
 * taxonomy match the reference client so both sides fail identically
 * on the same inputs.
 */

import { AttestationReport, Quote, REPORT_KEY_ROLE, Verdict } from "./attestation.js";
import { ascii, bytesEqual, hexd, hexe } from "./codec.js";
import { sha256, verifyP1363 } from "./webcrypto.js";

export class VerificationError extends Error {}

/** A signature, certificate, or binding between artifacts is bad. */
export class SignatureError extends VerificationError {}

/** The verifier says this platform is on the revocation list. */
export class Revoked extends VerificationError {}

/** Valid attestation, but not code the whitelist accepts. */
export class UntrustedMeasurement extends VerificationError {}

/** The offered DH key is not the one inside the quote. */
export class KeyBindingMismatch extends VerificationError {}

export interface Whitelist {
  version: number;
  measurementsHex: Set<string>;
}

export interface ClientConfig {
  whitelist: Whitelist;
  iasRootPublicKey: Uint8Array;
}

/** Parse the /client-config.json distribution bundle. */
export function parseClientConfig(raw: unknown): ClientConfig {
  const obj = raw as { version: number; measurements: string[]; ias_root_public_key: string };
  if (
    typeof obj !== "object" ||
    obj === null ||
    !Number.isInteger(obj.version) ||
    !Array.isArray(obj.measurements) ||
    typeof obj.ias_root_public_key !== "string"
  ) {
    throw new Error("malformed client config");
  }
  return {
    whitelist: {
      version: obj.version,
      // Round-tripping through bytes both validates and canonicalizes.
      measurementsHex: new Set(obj.measurements.map((m) => hexe(hexd(m)))),
    },
    iasRootPublicKey: hexd(obj.ias_root_public_key),
  };
}

export function whitelistAllows(whitelist: Whitelist, measurement: Uint8Array): boolean {
  return whitelist.measurementsHex.has(hexe(measurement));
}

export interface VerifiedEnclave {
  measurement: Uint8Array;
  enclavePublicKey: Uint8Array;
  report: AttestationReport;
}

/**
 * Full client-side check; throws a VerificationError subclass at the
 * first failed step, returns the bound identity on success.
 */
export async function verifyAndBind(
  quoteBytes: Uint8Array,
  reportBytes: Uint8Array,
  whitelist: Whitelist,
  enclaveDhPublicKey: Uint8Array,
  iasRootPublicKey: Uint8Array
): Promise<VerifiedEnclave> {
  let report: AttestationReport;
  try {
    report = AttestationReport.fromBytes(reportBytes);
  } catch (exc) {
    throw new SignatureError(`unparseable report: ${exc}`);
  }

  const cert = report.certificate;
  if (!bytesEqual(cert.role, ascii(REPORT_KEY_ROLE))) {
    throw new SignatureError("report certificate has wrong role");
  }
  if (!(await verifyP1363(iasRootPublicKey, cert.signedPayload(), cert.signature))) {
    throw new SignatureError("report certificate not signed by pinned root");
  }
  if (!(await verifyP1363(cert.subjectPublicKey, report.signedPayload(), report.signature))) {
    throw new SignatureError("report signature invalid");
  }

  if (report.verdict === Verdict.PLATFORM_REVOKED) {
    throw new Revoked("platform is revoked");
  }
  if (report.verdict !== Verdict.OK) {
    throw new SignatureError("verifier rejected the quote");
  }

  let quote: Quote;
  try {
    quote = Quote.fromBytes(quoteBytes);
  } catch (exc) {
    throw new SignatureError(`unparseable quote: ${exc}`);
  }
  if (!bytesEqual(report.quoteDigest, await sha256(quoteBytes))) {
    throw new SignatureError("report was issued for a different quote");
  }
  if (!bytesEqual(report.measurement, quote.measurement)) {
    throw new SignatureError("report and quote disagree on measurement");
  }
  if (!bytesEqual(report.boundKeyDigest, quote.boundKeyDigest)) {
    throw new SignatureError("report and quote disagree on bound key");
  }

  if (!whitelistAllows(whitelist, quote.measurement)) {
    throw new UntrustedMeasurement("measurement not in whitelist");
  }

  if (!bytesEqual(await sha256(enclaveDhPublicKey), quote.boundKeyDigest)) {
    throw new KeyBindingMismatch("offered key is not the attested key");
  }

  return {
    measurement: quote.measurement,
    enclavePublicKey: enclaveDhPublicKey,
    report,
  };
}
