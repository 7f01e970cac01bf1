/** Shared fixtures: the exported vector file and a canned fetch. */

import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";

import { b64e, hexd } from "../src/codec.js";
import { FetchLike } from "../src/page.js";

const here = dirname(fileURLToPath(import.meta.url));

export interface AttestationVectors {
  authority_public_key_hex: string;
  ias_root_public_key_hex: string;
  whitelist_measurements_hex: string[];
  quote_b64: string;
  report_b64: string;
  enclave_dh_public_key_hex: string;
  measurement_hex: string;
  bound_key_digest_hex: string;
  platform_id_hex: string;
  report_verdict: string;
  rogue_quote_b64: string;
  rogue_report_b64: string;
  rogue_dh_public_key_hex: string;
  rogue_measurement_hex: string;
  revoked: {
    authority_public_key_hex: string;
    ias_root_public_key_hex: string;
    whitelist_measurements_hex: string[];
    quote_b64: string;
    report_b64: string;
    enclave_dh_public_key_hex: string;
  };
}

export interface Vectors {
  seed: number;
  cmac: Array<{ key: string; message: string; tag: string }>;
  framing: { fields_hex: string[]; encoded_hex: string; seq_encoded_hex: string };
  session_label_utf8: string;
  attestation: AttestationVectors;
  channel: {
    client_private_jwk: JsonWebKey;
    client_public_key_hex: string;
    enclave_dh_public_key_hex: string;
    session_key_hex: string;
    password_utf8: string;
    nonce_hex: string;
    ciphertext_hex: string;
    salt_hex: string;
    expected_tag_hex: string;
  };
  verified_measurement_hex: string;
}

export const vectors: Vectors = JSON.parse(
  readFileSync(join(here, "vectors.json"), "utf-8")
);

export function clientConfigJson(att: {
  whitelist_measurements_hex: string[];
  ias_root_public_key_hex: string;
}): object {
  return {
    version: 1,
    measurements: att.whitelist_measurements_hex,
    ias_root_public_key: att.ias_root_public_key_hex,
  };
}

export interface Tap {
  url: string;
  method: string;
  body?: string;
}

export type RouteTable = Record<string, (init?: RequestInit) => Response | Promise<Response>>;

/** Path-keyed fetch stub; records every request it serves. */
export function makeFetch(routes: RouteTable, taps: Tap[] = []): { fetchFn: FetchLike; taps: Tap[] } {
  const fetchFn: FetchLike = async (url, init) => {
    taps.push({
      url,
      method: init?.method ?? "GET",
      body: typeof init?.body === "string" ? init.body : undefined,
    });
    const path = new URL(url, "http://demo.local").pathname;
    const route = routes[path];
    if (route === undefined) return new Response("no such route", { status: 404 });
    return route(init);
  };
  return { fetchFn, taps };
}

/** Routes for a well-behaved page backed by the vector fixtures. */
export function honestRoutes(pagePath = "/"): RouteTable {
  const att = vectors.attestation;
  return {
    [pagePath]: () =>
      new Response("<!doctype html><title>page</title>", {
        headers: {
          "X-SafeKeeper-Quote": att.quote_b64,
          "X-SafeKeeper-Key": b64e(hexd(att.enclave_dh_public_key_hex)),
        },
      }),
    "/client-config.json": () =>
      new Response(JSON.stringify(clientConfigJson(att)), {
        headers: { "Content-Type": "application/json" },
      }),
    "/proxy/verify": () => new Response(att.report_b64),
    "/api/login": () =>
      new Response(JSON.stringify({ status: "accepted" }), {
        headers: { "Content-Type": "application/json" },
      }),
    "/api/register": () =>
      new Response(JSON.stringify({ status: "accepted" }), {
        headers: { "Content-Type": "application/json" },
      }),
  };
}

export function readServerInfo(): { baseUrl: string } {
  return JSON.parse(readFileSync(join(here, "setup", ".server.json"), "utf-8"));
}
