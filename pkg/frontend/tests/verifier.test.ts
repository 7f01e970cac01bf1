/**
 * The full client check against the fixed vectors: the honest bundle
 * must pass, and every mutation, substitution, or downgrade must land
 * on the matching error class. No corruption may verify.
 */

import { describe, expect, it } from "vitest";

import { b64d, hexd, hexe } from "../src/codec.js";
import {
  KeyBindingMismatch,
  parseClientConfig,
  Revoked,
  SignatureError,
  UntrustedMeasurement,
  VerificationError,
  verifyAndBind,
  Whitelist,
} from "../src/verifier.js";
import { clientConfigJson, vectors } from "./helpers.js";

const att = vectors.attestation;
const config = parseClientConfig(clientConfigJson(att));
const quoteBytes = b64d(att.quote_b64);
const reportBytes = b64d(att.report_b64);
const enclaveKey = hexd(att.enclave_dh_public_key_hex);
const rootKey = hexd(att.ias_root_public_key_hex);

function verify(overrides: {
  quote?: Uint8Array;
  report?: Uint8Array;
  whitelist?: Whitelist;
  key?: Uint8Array;
  root?: Uint8Array;
} = {}) {
  return verifyAndBind(
    overrides.quote ?? quoteBytes,
    overrides.report ?? reportBytes,
    overrides.whitelist ?? config.whitelist,
    overrides.key ?? enclaveKey,
    overrides.root ?? rootKey
  );
}

describe("happy path", () => {
  it("accepts the honest bundle and returns the bound identity", async () => {
    const verified = await verify();
    expect(hexe(verified.measurement)).toBe(vectors.verified_measurement_hex);
    expect(hexe(verified.enclavePublicKey)).toBe(att.enclave_dh_public_key_hex);
  });
});

describe("error taxonomy", () => {
  it("off-whitelist measurement from genuine hardware", async () => {
    await expect(
      verify({ quote: b64d(att.rogue_quote_b64), report: b64d(att.rogue_report_b64), key: hexd(att.rogue_dh_public_key_hex) })
    ).rejects.toThrow(UntrustedMeasurement);
  });

  it("revoked platform", async () => {
    const r = att.revoked;
    const rConfig = parseClientConfig(clientConfigJson(r));
    await expect(
      verifyAndBind(
        b64d(r.quote_b64),
        b64d(r.report_b64),
        rConfig.whitelist,
        hexd(r.enclave_dh_public_key_hex),
        rConfig.iasRootPublicKey
      )
    ).rejects.toThrow(Revoked);
  });

  it("swapped DH key", async () => {
    await expect(verify({ key: hexd(att.rogue_dh_public_key_hex) })).rejects.toThrow(
      KeyBindingMismatch
    );
  });

  it("wrong pinned root", async () => {
    await expect(verify({ root: hexd(att.authority_public_key_hex) })).rejects.toThrow(
      SignatureError
    );
  });

  it("report issued for a different quote", async () => {
    await expect(verify({ quote: b64d(att.revoked.quote_b64) })).rejects.toThrow(
      SignatureError
    );
  });

  it("empty whitelist", async () => {
    const empty: Whitelist = { version: 1, measurementsHex: new Set() };
    await expect(verify({ whitelist: empty })).rejects.toThrow(UntrustedMeasurement);
  });

  it("unparseable inputs", async () => {
    await expect(verify({ report: new Uint8Array(0) })).rejects.toThrow(SignatureError);
    await expect(verify({ report: new Uint8Array(40) })).rejects.toThrow(SignatureError);
    await expect(verify({ quote: new Uint8Array([9, 9, 9]) })).rejects.toThrow(SignatureError);
    await expect(verify({ report: reportBytes.subarray(0, reportBytes.length - 3) })).rejects.toThrow(
      SignatureError
    );
  });
});

describe("no single byte flip verifies", () => {
  it("rejects every sampled report corruption", async () => {
    for (let i = 0; i < reportBytes.length; i += 7) {
      const bent = reportBytes.slice();
      bent[i] ^= 0x01;
      await expect(verify({ report: bent }), `report byte ${i}`).rejects.toThrow(
        VerificationError
      );
    }
  });

  it("rejects every sampled quote corruption", async () => {
    for (let i = 0; i < quoteBytes.length; i += 5) {
      const bent = quoteBytes.slice();
      bent[i] ^= 0x01;
      await expect(verify({ quote: bent }), `quote byte ${i}`).rejects.toThrow(VerificationError);
    }
  });

  it("rejects every sampled enclave key corruption", async () => {
    for (let i = 0; i < enclaveKey.length; i += 3) {
      const bent = enclaveKey.slice();
      bent[i] ^= 0x01;
      await expect(verify({ key: bent }), `key byte ${i}`).rejects.toThrow(VerificationError);
    }
  });
});

describe("client config parsing", () => {
  it("accepts the server shape", () => {
    const parsed = parseClientConfig(clientConfigJson(att));
    expect(parsed.whitelist.measurementsHex.has(att.measurement_hex)).toBe(true);
  });

  it("rejects malformed documents", () => {
    expect(() => parseClientConfig(null)).toThrow();
    expect(() => parseClientConfig({ version: "x" })).toThrow();
    expect(() =>
      parseClientConfig({ version: 1, measurements: ["zz"], ias_root_public_key: "00" })
    ).toThrow();
    expect(() =>
      parseClientConfig({ version: 1, measurements: [], ias_root_public_key: 5 })
    ).toThrow();
  });
});
