/**
 * The three-state trust indicator. Two rules are load-bearing and the
 * tests hold them as invariants: PROTECTED is only ever entered by a
 * successful attestation, and HIGHLIGHTING is only ever entered from
 * PROTECTED by an explicit user click.
 */

export enum IndicatorState {
  UNPROTECTED = "UNPROTECTED",
  PROTECTED = "PROTECTED",
  HIGHLIGHTING = "HIGHLIGHTING",
}

export type ClickOutcome = "highlight-on" | "highlight-off" | "ignored";

export class Indicator {
  private current: IndicatorState = IndicatorState.UNPROTECTED;
  private listeners: Array<(state: IndicatorState) => void> = [];

  get state(): IndicatorState {
    return this.current;
  }

  onChange(listener: (state: IndicatorState) => void): void {
    this.listeners.push(listener);
  }

  private moveTo(state: IndicatorState): void {
    if (state === this.current) return;
    this.current = state;
    for (const listener of this.listeners) listener(state);
  }

  /** Called only after verifyAndBind resolved. No effect mid-highlight. */
  attestationSucceeded(): void {
    if (this.current === IndicatorState.HIGHLIGHTING) return;
    this.moveTo(IndicatorState.PROTECTED);
  }

  /** Any verification failure, at load or pre-submit. */
  attestationFailed(): void {
    this.moveTo(IndicatorState.UNPROTECTED);
  }

  /** The one entry point into HIGHLIGHTING. */
  userClick(): ClickOutcome {
    if (this.current === IndicatorState.PROTECTED) {
      this.moveTo(IndicatorState.HIGHLIGHTING);
      return "highlight-on";
    }
    if (this.current === IndicatorState.HIGHLIGHTING) {
      this.moveTo(IndicatorState.PROTECTED);
      return "highlight-off";
    }
    return "ignored";
  }
}
