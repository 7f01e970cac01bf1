/**
 * WebCrypto bindings for the server's cipher suite.
 *
 * Everything lives on one curve so the browser side needs nothing
 * beyond crypto.subtle: P-256 for both ECDSA and ECDH, signatures as
 * raw 64-byte r||s, public keys as 65-byte uncompressed points,
 * HKDF-SHA256 with an empty salt for session keys, AES-128-GCM with
 * the client's ephemeral public key as associated data.
 */

import { ascii } from "./codec.js";

export const SESSION_LABEL = "safekeeper-v1-session";

export const PUBLIC_KEY_BYTES = 65;
export const SIGNATURE_BYTES = 64;
export const KEY_BYTES = 16;
export const NONCE_BYTES = 12;

const EC_PARAMS = { name: "ECDSA", namedCurve: "P-256" } as const;
const DH_PARAMS = { name: "ECDH", namedCurve: "P-256" } as const;

// Copy to a fresh, offset-free view. Engines check typed arrays by
// internal slot but bare ArrayBuffers by realm-bound instanceof, so a
// view is the only BufferSource shape that survives realm crossings.
function buf(data: Uint8Array): Uint8Array<ArrayBuffer> {
  const out = new Uint8Array(data.length);
  out.set(data);
  return out;
}

export async function sha256(data: Uint8Array): Promise<Uint8Array> {
  return new Uint8Array(await crypto.subtle.digest("SHA-256", buf(data)));
}

/** ECDSA P-256 / SHA-256 over a raw r||s signature; false, never throws. */
export async function verifyP1363(
  publicKey: Uint8Array,
  message: Uint8Array,
  signature: Uint8Array
): Promise<boolean> {
  if (signature.length !== SIGNATURE_BYTES) return false;
  let key: CryptoKey;
  try {
    key = await crypto.subtle.importKey("raw", buf(publicKey), EC_PARAMS, false, ["verify"]);
  } catch {
    return false;
  }
  return crypto.subtle.verify(
    { name: "ECDSA", hash: "SHA-256" },
    key,
    buf(signature),
    buf(message)
  );
}

export interface EphemeralKeyPair {
  publicKey: Uint8Array;
  privateKey: CryptoKey;
}

export async function generateEphemeralKeyPair(): Promise<EphemeralKeyPair> {
  const pair = await crypto.subtle.generateKey(DH_PARAMS, false, ["deriveBits"]);
  const raw = await crypto.subtle.exportKey("raw", pair.publicKey);
  return { publicKey: new Uint8Array(raw), privateKey: pair.privateKey };
}

/** Test fixture path: load a known private key from a JWK. */
export async function importPrivateJwk(jwk: JsonWebKey): Promise<CryptoKey> {
  return crypto.subtle.importKey("jwk", jwk, DH_PARAMS, false, ["deriveBits"]);
}

/** ECDH, then HKDF-SHA256(salt empty, info=label) down to 16 bytes. */
export async function deriveSessionKeyBytes(
  privateKey: CryptoKey,
  peerPublic: Uint8Array,
  label: string
): Promise<Uint8Array> {
  const peer = await crypto.subtle.importKey("raw", buf(peerPublic), DH_PARAMS, false, []);
  const shared = await crypto.subtle.deriveBits({ name: "ECDH", public: peer }, privateKey, 256);
  const hkdfKey = await crypto.subtle.importKey("raw", new Uint8Array(shared), "HKDF", false, [
    "deriveBits",
  ]);
  const bits = await crypto.subtle.deriveBits(
    { name: "HKDF", hash: "SHA-256", salt: new Uint8Array(0), info: buf(ascii(label)) },
    hkdfKey,
    KEY_BYTES * 8
  );
  return new Uint8Array(bits);
}

export async function importAesKey(keyBytes: Uint8Array): Promise<CryptoKey> {
  return crypto.subtle.importKey("raw", buf(keyBytes), { name: "AES-GCM" }, false, [
    "encrypt",
    "decrypt",
  ]);
}

export async function aeadSeal(
  key: CryptoKey,
  nonce: Uint8Array,
  plaintext: Uint8Array,
  aad: Uint8Array
): Promise<Uint8Array> {
  const ct = await crypto.subtle.encrypt(
    { name: "AES-GCM", iv: buf(nonce), additionalData: buf(aad) },
    key,
    buf(plaintext)
  );
  return new Uint8Array(ct);
}

export class AeadError extends Error {}

export async function aeadOpen(
  key: CryptoKey,
  nonce: Uint8Array,
  ciphertext: Uint8Array,
  aad: Uint8Array
): Promise<Uint8Array> {
  try {
    const pt = await crypto.subtle.decrypt(
      { name: "AES-GCM", iv: buf(nonce), additionalData: buf(aad) },
      key,
      buf(ciphertext)
    );
    return new Uint8Array(pt);
  } catch {
    throw new AeadError("ciphertext failed authentication");
  }
}

export function randomNonce(): Uint8Array {
  const nonce = new Uint8Array(NONCE_BYTES);
  crypto.getRandomValues(nonce);
  return nonce;
}
