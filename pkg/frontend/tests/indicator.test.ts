import { describe, expect, it } from "vitest";

import { Indicator, IndicatorState } from "../src/indicator.js";

const { UNPROTECTED, PROTECTED, HIGHLIGHTING } = IndicatorState;

describe("transitions", () => {
  it("starts unprotected", () => {
    expect(new Indicator().state).toBe(UNPROTECTED);
  });

  it("clicks toggle highlighting only from protected", () => {
    const ind = new Indicator();
    expect(ind.userClick()).toBe("ignored");
    expect(ind.state).toBe(UNPROTECTED);

    ind.attestationSucceeded();
    expect(ind.state).toBe(PROTECTED);
    expect(ind.userClick()).toBe("highlight-on");
    expect(ind.state).toBe(HIGHLIGHTING);
    expect(ind.userClick()).toBe("highlight-off");
    expect(ind.state).toBe(PROTECTED);
  });

  it("failure collapses any state to unprotected", () => {
    for (const prep of [
      () => {},
      (ind: Indicator) => ind.attestationSucceeded(),
      (ind: Indicator) => {
        ind.attestationSucceeded();
        ind.userClick();
      },
    ]) {
      const ind = new Indicator();
      prep(ind);
      ind.attestationFailed();
      expect(ind.state).toBe(UNPROTECTED);
    }
  });

  it("a late attestation result does not interrupt highlighting", () => {
    const ind = new Indicator();
    ind.attestationSucceeded();
    ind.userClick();
    ind.attestationSucceeded();
    expect(ind.state).toBe(HIGHLIGHTING);
  });

  it("notifies listeners on real transitions only", () => {
    const ind = new Indicator();
    const seen: IndicatorState[] = [];
    ind.onChange((state) => seen.push(state));
    ind.attestationFailed();
    ind.attestationSucceeded();
    ind.attestationSucceeded();
    ind.userClick();
    ind.userClick();
    expect(seen).toEqual([PROTECTED, HIGHLIGHTING, PROTECTED]);
  });
});

describe("highlighting is click-gated", () => {
  // Every way into HIGHLIGHTING must be a userClick taken in PROTECTED;
  // churn through random call sequences and check each transition.
  it("holds over random call sequences", () => {
    let rng = 0x5eed;
    const next = () => {
      rng = (rng * 1103515245 + 12345) & 0x7fffffff;
      return rng;
    };
    for (let run = 0; run < 200; run++) {
      const ind = new Indicator();
      for (let step = 0; step < 50; step++) {
        const before = ind.state;
        const op = next() % 3;
        if (op === 0) ind.attestationSucceeded();
        else if (op === 1) ind.attestationFailed();
        else ind.userClick();
        if (ind.state === HIGHLIGHTING && before !== HIGHLIGHTING) {
          expect(op).toBe(2);
          expect(before).toBe(PROTECTED);
        }
      }
    }
  });
});
