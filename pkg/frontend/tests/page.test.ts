// @vitest-environment jsdom

import "./setup/crypto-shim.js";

import { describe, expect, it } from "vitest";

import { hexe } from "../src/codec.js";
import {
  attestPage,
  fetchEvidence,
  protectedFieldSet,
  proxyEndpoint,
} from "../src/page.js";
import { honestRoutes, makeFetch, vectors } from "./helpers.js";

function setHead(html: string): void {
  document.head.innerHTML = html;
}

describe("protected field metatag", () => {
  it("absent tag means nothing is protected", () => {
    setHead("");
    expect(protectedFieldSet(document).size).toBe(0);
  });

  it("reads a single field", () => {
    setHead('<meta name="safekeeper" content="password">');
    expect([...protectedFieldSet(document)]).toEqual(["password"]);
  });

  it("splits and trims multiple fields", () => {
    setHead('<meta name="safekeeper" content=" username ,password, ">');
    const fields = protectedFieldSet(document);
    expect(fields).toEqual(new Set(["username", "password"]));
  });

  it("empty content means nothing is protected", () => {
    setHead('<meta name="safekeeper" content="">');
    expect(protectedFieldSet(document).size).toBe(0);
  });
});

describe("proxy endpoint selection", () => {
  it("defaults to the bundled proxy", () => {
    expect(proxyEndpoint("http://demo.local/login")).toBe("/proxy/verify");
  });

  it("honors the query parameter override", () => {
    expect(proxyEndpoint("http://demo.local/demo/class1?proxy=/ias/verify")).toBe("/ias/verify");
    expect(proxyEndpoint("http://demo.local/x?proxy=http://other:9/v")).toBe("http://other:9/v");
  });
});

describe("evidence extraction", () => {
  it("returns both headers or nothing", async () => {
    const { fetchFn } = makeFetch(honestRoutes("/page"));
    const evidence = await fetchEvidence("http://demo.local/page", fetchFn);
    expect(evidence).not.toBeNull();
    expect(evidence!.quoteB64).toBe(vectors.attestation.quote_b64);

    const { fetchFn: bare } = makeFetch({ "/page": () => new Response("plain") });
    expect(await fetchEvidence("http://demo.local/page", bare)).toBeNull();

    const { fetchFn: half } = makeFetch({
      "/page": () =>
        new Response("", { headers: { "X-SafeKeeper-Quote": "QQ==" } }),
    });
    expect(await fetchEvidence("http://demo.local/page", half)).toBeNull();
  });
});

describe("attestPage", () => {
  it("verifies the honest fixture end to end", async () => {
    const { fetchFn } = makeFetch(honestRoutes("/page"));
    const outcome = await attestPage("http://demo.local/page", fetchFn);
    expect(outcome.ok).toBe(true);
    if (outcome.ok) {
      expect(hexe(outcome.verified.measurement)).toBe(vectors.verified_measurement_hex);
    }
  });

  it("collapses to unprotected when headers are missing", async () => {
    const { fetchFn } = makeFetch({ "/page": () => new Response("hi") });
    const outcome = await attestPage("http://demo.local/page", fetchFn);
    expect(outcome).toEqual({ ok: false, reason: "no attestation headers" });
  });

  it("collapses to unprotected when the proxy errors", async () => {
    const routes = honestRoutes("/page");
    routes["/proxy/verify"] = () => new Response("down", { status: 503 });
    const { fetchFn } = makeFetch(routes);
    const outcome = await attestPage("http://demo.local/page", fetchFn);
    expect(outcome.ok).toBe(false);
    if (!outcome.ok) expect(outcome.reason).toContain("503");
  });

  it("collapses to unprotected on garbage headers", async () => {
    const routes = honestRoutes("/page");
    routes["/page"] = () =>
      new Response("", {
        headers: { "X-SafeKeeper-Quote": "!!", "X-SafeKeeper-Key": "!!" },
      });
    const { fetchFn } = makeFetch(routes);
    const outcome = await attestPage("http://demo.local/page", fetchFn);
    expect(outcome.ok).toBe(false);
  });

  it("routes the verification through the overridden proxy", async () => {
    const routes = honestRoutes("/page");
    routes["/alt/verify"] = routes["/proxy/verify"];
    delete routes["/proxy/verify"];
    const { fetchFn, taps } = makeFetch(routes);
    const outcome = await attestPage("http://demo.local/page?proxy=/alt/verify", fetchFn);
    expect(outcome.ok).toBe(true);
    expect(taps.some((tap) => tap.url === "/alt/verify")).toBe(true);
    expect(taps.some((tap) => tap.url === "/proxy/verify")).toBe(false);
  });
});
