/**
 * Page-level plumbing: read the protected-field claim from the
 * safekeeper metatag, find the attestation evidence in the response
 * headers, and run the full verification against the pinned config.
 */

import { b64d } from "./codec.js";
import { ClientConfig, parseClientConfig, VerifiedEnclave, verifyAndBind } from "./verifier.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export const DEFAULT_PROXY_ENDPOINT = "/proxy/verify";
export const CLIENT_CONFIG_PATH = "/client-config.json";

/** Field names the server declares as enclave-protected, or empty. */
export function protectedFieldSet(doc: Document): Set<string> {
  const meta = doc.querySelector('meta[name="safekeeper"]');
  if (meta === null) return new Set();
  const content = meta.getAttribute("content") ?? "";
  return new Set(
    content
      .split(",")
      .map((name) => name.trim())
      .filter((name) => name.length > 0)
  );
}

/** Demo pages may point the overlay at another proxy via ?proxy=. */
export function proxyEndpoint(pageUrl: string): string {
  const params = new URL(pageUrl).searchParams;
  return params.get("proxy") ?? DEFAULT_PROXY_ENDPOINT;
}

export interface AttestationEvidence {
  quoteB64: string;
  enclaveKeyB64: string;
}

/**
 * Content scripts never see the navigation response, so ask for the
 * page again and read the headers off that response.
 */
export async function fetchEvidence(
  pageUrl: string,
  fetchFn: FetchLike
): Promise<AttestationEvidence | null> {
  const resp = await fetchFn(pageUrl, { method: "GET" });
  const quote = resp.headers.get("X-SafeKeeper-Quote");
  const key = resp.headers.get("X-SafeKeeper-Key");
  if (quote === null || key === null) return null;
  return { quoteB64: quote, enclaveKeyB64: key };
}

export async function fetchClientConfig(fetchFn: FetchLike): Promise<ClientConfig> {
  const resp = await fetchFn(CLIENT_CONFIG_PATH, { method: "GET" });
  if (!resp.ok) throw new Error(`client config fetch failed: ${resp.status}`);
  return parseClientConfig(await resp.json());
}

export type AttestOutcome =
  | { ok: true; verified: VerifiedEnclave; evidence: AttestationEvidence }
  | { ok: false; reason: string };

/**
 * The whole load-time flow. Every failure collapses to a single
 * unprotected outcome; there is no partially-trusted state.
 */
export async function attestPage(
  pageUrl: string,
  fetchFn: FetchLike,
  evidence?: AttestationEvidence | null
): Promise<AttestOutcome> {
  try {
    if (evidence === undefined) {
      evidence = await fetchEvidence(pageUrl, fetchFn);
    }
    if (evidence === null) {
      return { ok: false, reason: "no attestation headers" };
    }
    const config = await fetchClientConfig(fetchFn);
    const proxyUrl = proxyEndpoint(pageUrl);
    const resp = await fetchFn(proxyUrl, { method: "POST", body: evidence.quoteB64 });
    if (!resp.ok) {
      return { ok: false, reason: `proxy returned ${resp.status}` };
    }
    const reportB64 = (await resp.text()).trim();
    const verified = await verifyAndBind(
      b64d(evidence.quoteB64),
      b64d(reportB64),
      config.whitelist,
      b64d(evidence.enclaveKeyB64),
      config.iasRootPublicKey
    );
    return { ok: true, verified, evidence };
  } catch (exc) {
    return { ok: false, reason: exc instanceof Error ? exc.message : String(exc) };
  }
}
