import { describe, expect, it } from "vitest";

import { SplitMix64 } from "../src/rng.js";

describe("SplitMix64", () => {
  it("matches the reference first output for seed 0", () => {
    expect(new SplitMix64(0).nextU64()).toBe(16294208416658607535n);
  });

  it("replays identically for equal seeds", () => {
    const a = new SplitMix64(42);
    const b = new SplitMix64(42);
    for (let i = 0; i < 100; i++) {
      expect(a.nextU64()).toBe(b.nextU64());
    }
  });

  it("keeps nextBelow inside its bound", () => {
    const rng = new SplitMix64(7);
    for (let i = 0; i < 1000; i++) {
      const v = rng.nextBelow(13);
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThan(13);
    }
  });

  it("rejects non-positive and fractional bounds", () => {
    expect(() => new SplitMix64(0).nextBelow(0)).toThrow(RangeError);
    expect(() => new SplitMix64(0).nextBelow(-3)).toThrow(RangeError);
    expect(() => new SplitMix64(0).nextBelow(2.5)).toThrow(RangeError);
  });

  it("shuffles into a seed-determined permutation", () => {
    const base = Array.from({ length: 20 }, (_, i) => i);
    const a = [...base];
    const b = [...base];
    new SplitMix64(9).shuffle(a);
    new SplitMix64(9).shuffle(b);
    expect(a).toEqual(b);
    expect([...a].sort((x, y) => x - y)).toEqual(base);
    expect(a).not.toEqual(base);
  });
});
