/**
 * Content-script-style overlay for the demo pages.
 *
 * On load it attests the page (headers -> proxy -> verify), shows a
 * badge with the result, and takes over the auth form. Clicking the
 * badge dims the page and shows clones of exactly the server-declared
 * protected fields; clicking again restores the page and copies typed
 * text back. Submitting encrypts protected fields to the attested
 * enclave key; if the evidence is gone or changed at submit time the
 * submission is blocked and the page drops back to unprotected.
 *
 * A real extension would run this in an isolated world and use a
 * toolbar icon; the demo injects a plain script tag and a fixed badge,
 * which is enough to judge the behavior.
 */

import { Channel, encryptField, establishChannel } from "./channel.js";
import { b64d } from "./codec.js";
import { Indicator, IndicatorState } from "./indicator.js";
import {
  AttestationEvidence,
  FetchLike,
  attestPage,
  fetchEvidence,
  protectedFieldSet,
} from "./page.js";

const Z_DIM = 2147483644;
const Z_PANEL = 2147483645;
const Z_BADGE = 2147483646;

const TOOLTIP_TEXT =
  "Typed here, this value is encrypted to verified secure hardware " +
  "before the website's own code can read it.";

export interface SubmitResult {
  blocked: boolean;
  reason?: string;
  status?: string;
}

interface Session {
  evidence: AttestationEvidence;
  channel: Channel;
}

export interface OverlayOptions {
  doc?: Document;
  fetchFn?: FetchLike;
}

export class Overlay {
  readonly indicator = new Indicator();
  readonly protectedFields: Set<string>;
  lastSubmit: SubmitResult | null = null;

  private readonly doc: Document;
  private readonly fetchFn: FetchLike;
  private session: Session | null = null;
  private badge: HTMLElement | null = null;
  private dim: HTMLElement | null = null;
  private panel: HTMLElement | null = null;
  private clones = new Map<string, HTMLInputElement>();
  private submitWaiters: Array<(result: SubmitResult) => void> = [];

  constructor(options: OverlayOptions = {}) {
    this.doc = options.doc ?? document;
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.protectedFields = protectedFieldSet(this.doc);
  }

  get state(): IndicatorState {
    return this.indicator.state;
  }

  /** Per-field verdict, the thing a user is supposed to read off the UI. */
  fieldStatus(name: string): "PROTECTED" | "UNPROTECTED" {
    const covered =
      this.session !== null &&
      this.indicator.state !== IndicatorState.UNPROTECTED &&
      this.protectedFields.has(name);
    return covered ? "PROTECTED" : "UNPROTECTED";
  }

  highlightedFields(): string[] {
    return [...this.clones.keys()];
  }

  /** Resolves with the outcome of the next (possibly blocked) submit. */
  nextSubmit(): Promise<SubmitResult> {
    return new Promise((resolve) => this.submitWaiters.push(resolve));
  }

  async start(): Promise<void> {
    this.badge = this.buildBadge();
    this.indicator.onChange(() => this.renderBadge());
    const form = this.doc.querySelector<HTMLFormElement>("form#auth-form");
    if (form !== null) {
      form.addEventListener("submit", (event) => this.handleSubmit(event, form), true);
    }
    await this.attest();
    this.renderBadge();
  }

  private pageUrl(): string {
    return this.doc.location.href;
  }

  private async attest(evidence?: AttestationEvidence | null): Promise<void> {
    const outcome = await attestPage(this.pageUrl(), this.fetchFn, evidence);
    if (!outcome.ok) {
      this.revertToUnprotected();
      return;
    }
    this.session = {
      evidence: outcome.evidence,
      channel: await establishChannel(b64d(outcome.evidence.enclaveKeyB64)),
    };
    this.indicator.attestationSucceeded();
  }

  private revertToUnprotected(): void {
    this.session = null;
    if (this.indicator.state === IndicatorState.HIGHLIGHTING) {
      this.teardownHighlight();
    }
    this.indicator.attestationFailed();
  }

  // --- badge ---

  private buildBadge(): HTMLElement {
    const badge = this.doc.createElement("div");
    badge.id = "sk-badge";
    badge.style.cssText = `
      position: fixed; top: 12px; right: 12px; z-index: ${Z_BADGE};
      padding: 8px 14px; border-radius: 18px; cursor: pointer;
      font-family: -apple-system, sans-serif; font-size: 13px; color: white;
      box-shadow: 0 2px 6px rgba(0,0,0,0.35); user-select: none;
    `;
    badge.addEventListener("click", () => this.handleBadgeClick());
    this.doc.body.appendChild(badge);
    return badge;
  }

  private renderBadge(): void {
    if (this.badge === null) return;
    const state = this.indicator.state;
    this.badge.dataset.skState = state;
    if (state === IndicatorState.PROTECTED) {
      this.badge.style.background = "#1e8e3e";
      this.badge.textContent = "\u{1F512} SafeKeeper: protected";
      this.badge.title = "Attestation verified. Click to highlight the protected fields.";
    } else if (state === IndicatorState.HIGHLIGHTING) {
      this.badge.style.background = "#185abc";
      this.badge.textContent = "\u{1F512} Showing protected fields";
      this.badge.title = "Click to restore the page.";
    } else {
      this.badge.style.background = "#5f6368";
      this.badge.textContent = "⚠ SafeKeeper: not protected";
      this.badge.title = "This page has no verified enclave protection.";
    }
  }

  // --- highlighting ---

  private handleBadgeClick(): void {
    const outcome = this.indicator.userClick();
    if (outcome === "highlight-on") this.buildHighlight();
    else if (outcome === "highlight-off") this.teardownHighlight();
  }

  private originalField(name: string): HTMLInputElement | null {
    const form = this.doc.querySelector<HTMLFormElement>("form#auth-form");
    if (form === null) return null;
    const element = form.elements.namedItem(name);
    return element instanceof HTMLInputElement ? element : null;
  }

  private buildHighlight(): void {
    this.dim = this.doc.createElement("div");
    this.dim.id = "sk-dim";
    this.dim.style.cssText = `
      position: fixed; inset: 0; z-index: ${Z_DIM};
      background: rgba(0, 0, 0, 0.55);
    `;
    this.doc.body.appendChild(this.dim);

    this.panel = this.doc.createElement("div");
    this.panel.id = "sk-panel";
    this.panel.style.cssText = `
      position: fixed; top: 15%; left: 50%; transform: translateX(-50%);
      z-index: ${Z_PANEL}; background: white; color: #202124;
      padding: 20px 24px; border-radius: 8px; min-width: 320px;
      font-family: -apple-system, sans-serif; font-size: 14px;
      box-shadow: 0 4px 18px rgba(0,0,0,0.5);
    `;
    const heading = this.doc.createElement("div");
    heading.textContent = "Fields protected by secure hardware";
    heading.style.cssText = "font-weight: 600; margin-bottom: 12px;";
    this.panel.appendChild(heading);

    // Clone exactly the declared set; anything the page styled up on
    // its own stays dimmed underneath, which is the point of the demo.
    for (const name of [...this.protectedFields].sort()) {
      const original = this.originalField(name);
      if (original === null) continue;
      const row = this.doc.createElement("label");
      row.style.cssText = "display: block; margin-bottom: 12px;";
      row.appendChild(this.doc.createTextNode(`${name} `));

      const clone = original.cloneNode(true) as HTMLInputElement;
      clone.removeAttribute("id");
      clone.dataset.skClone = name;
      clone.value = original.value;
      clone.title = TOOLTIP_TEXT;
      clone.style.cssText = "outline: 3px solid #27ae60; display: block; margin-top: 4px;";
      row.appendChild(clone);

      const tip = this.doc.createElement("div");
      tip.className = "sk-tooltip";
      tip.textContent = TOOLTIP_TEXT;
      tip.style.cssText = "font-size: 11px; color: #5f6368; margin-top: 4px; max-width: 320px;";
      row.appendChild(tip);

      this.panel.appendChild(row);
      this.clones.set(name, clone);
    }
    this.doc.body.appendChild(this.panel);
  }

  private teardownHighlight(): void {
    for (const [name, clone] of this.clones) {
      const original = this.originalField(name);
      if (original !== null) original.value = clone.value;
    }
    this.clones.clear();
    this.panel?.remove();
    this.dim?.remove();
    this.panel = null;
    this.dim = null;
  }

  // --- submission ---

  private handleSubmit(event: Event, form: HTMLFormElement): void {
    // Never attested: not our form, let the page behave as it likes.
    if (this.session === null) return;
    event.preventDefault();
    event.stopImmediatePropagation();
    void this.submitFlow(form)
      .catch((exc): SubmitResult => ({ blocked: true, reason: String(exc) }))
      .then((result) => this.settleSubmit(result));
  }

  private settleSubmit(result: SubmitResult): void {
    this.lastSubmit = result;
    const waiters = this.submitWaiters;
    this.submitWaiters = [];
    for (const resolve of waiters) resolve(result);
    this.doc.dispatchEvent(new CustomEvent("safekeeper:submit", { detail: result }));
  }

  private async submitFlow(form: HTMLFormElement): Promise<SubmitResult> {
    const session = this.session;
    if (session === null) return { blocked: true, reason: "no channel" };

    // The page may have turned on us since load; re-read the evidence
    // and require the exact bytes the channel was bound to.
    let fresh: AttestationEvidence | null;
    try {
      fresh = await fetchEvidence(this.pageUrl(), this.fetchFn);
    } catch {
      fresh = null;
    }
    if (fresh === null) {
      this.revertToUnprotected();
      return { blocked: true, reason: "channel lost" };
    }
    if (
      fresh.quoteB64 !== session.evidence.quoteB64 ||
      fresh.enclaveKeyB64 !== session.evidence.enclaveKeyB64
    ) {
      this.revertToUnprotected();
      // Whatever is serving the page now must prove itself from scratch.
      await this.attest(fresh);
      return { blocked: true, reason: "attestation changed, re-attested" };
    }

    if (this.indicator.state === IndicatorState.HIGHLIGHTING) {
      this.indicator.userClick();
      this.teardownHighlight();
    }

    const inputs = [...form.querySelectorAll<HTMLInputElement>("input[name]")];
    const unprotectedSecret = inputs.find(
      (input) => input.type === "password" && !this.protectedFields.has(input.name)
    );
    if (unprotectedSecret !== undefined) {
      // The enclave never sees this field, so sending it in clear would
      // silently downgrade the user; refuse instead.
      return { blocked: true, reason: `field ${unprotectedSecret.name} is not protected` };
    }

    const body: Record<string, unknown> = {};
    for (const input of inputs) {
      const key = input.name === "username" ? "user_id" : input.name;
      if (!this.protectedFields.has(input.name)) {
        body[key] = input.value;
      } else if (input.name === "password") {
        // The auth API carries one credential at the top level.
        Object.assign(body, await encryptField(session.channel, input.value));
      } else {
        body[key] = await encryptField(session.channel, input.value);
      }
    }

    const action = form.getAttribute("action") ?? "/api/login";
    const resp = await this.fetchFn(action, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      return { blocked: true, reason: `server returned ${resp.status}` };
    }
    const reply = (await resp.json()) as { status?: string; reason?: string };
    return { blocked: false, status: reply.status, reason: reply.reason };
  }
}

export async function bootOverlay(options: OverlayOptions = {}): Promise<Overlay> {
  const overlay = new Overlay(options);
  await overlay.start();
  return overlay;
}

// Classic script-tag execution (the demo pages): boot immediately and
// leave a handle for humans poking around in devtools. Module imports
// (the tests) get no side effects.
if (typeof document !== "undefined" && document.currentScript !== null) {
  void bootOverlay().then((overlay) => {
    (window as unknown as Record<string, unknown>).__safekeeper = overlay;
    document.dispatchEvent(new CustomEvent("safekeeper:ready"));
  });
}
