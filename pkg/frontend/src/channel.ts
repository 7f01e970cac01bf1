/**
 * Encrypted channel to an attested enclave: an ephemeral ECDH exchange
 * against the key the quote vouched for, then AES-GCM per field. The
 * JSON field names here are the auth server's POST body contract.
 */

import { ascii, b64e } from "./codec.js";
import {
  aeadSeal,
  deriveSessionKeyBytes,
  generateEphemeralKeyPair,
  importAesKey,
  randomNonce,
  SESSION_LABEL,
} from "./webcrypto.js";

export interface Channel {
  clientPublicKey: Uint8Array;
  key: CryptoKey;
}

export async function establishChannel(enclavePublicKey: Uint8Array): Promise<Channel> {
  const pair = await generateEphemeralKeyPair();
  const bits = await deriveSessionKeyBytes(pair.privateKey, enclavePublicKey, SESSION_LABEL);
  return { clientPublicKey: pair.publicKey, key: await importAesKey(bits) };
}

/** One encrypted credential, keyed the way /api/login expects it. */
export interface EncryptedFieldBody {
  client_dh_public_key: string;
  nonce: string;
  ciphertext: string;
}

export async function encryptField(channel: Channel, value: string): Promise<EncryptedFieldBody> {
  const nonce = randomNonce();
  const ciphertext = await aeadSeal(channel.key, nonce, ascii(value), channel.clientPublicKey);
  return {
    client_dh_public_key: b64e(channel.clientPublicKey),
    nonce: b64e(nonce),
    ciphertext: b64e(ciphertext),
  };
}
