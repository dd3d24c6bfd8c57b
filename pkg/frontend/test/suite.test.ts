import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { OracleSuite } from "../src/suite.js";

const here = dirname(fileURLToPath(import.meta.url));
const suite = OracleSuite.load(join(here, "fixtures", "suite.json"));
const expected = JSON.parse(
  readFileSync(join(here, "fixtures", "expected.json"), "utf-8")
) as {
  probes: number[][];
  labels: number[];
  latents: number[][];
  images: number[][];
  encodings: number[][];
};

const fround = (xs: number[]) => xs.map((v) => Math.fround(v));

describe("OracleSuite numerics vs the reference implementation", () => {
  it("classifies every reference probe identically", () => {
    expected.probes.forEach((probe, i) => {
      expect(suite.classify(probe).label).toBe(expected.labels[i]);
    });
  });

  it("reproduces generator outputs to 32-bit rounding", () => {
    expected.latents.forEach((w, i) => {
      const got = fround(suite.generate(w));
      got.forEach((v, j) => {
        expect(Math.abs(v - expected.images[i][j])).toBeLessThan(1e-6);
      });
    });
  });

  it("reproduces encoder outputs to 32-bit rounding", () => {
    expected.latents.forEach((w, i) => {
      const got = fround(suite.encode(fround(expected.images[i])));
      got.forEach((v, j) => {
        expect(Math.abs(v - expected.encodings[i][j])).toBeLessThan(1e-5);
      });
    });
  });

  it("encode inverts generate up to wire rounding", () => {
    const w = new Array(suite.fixture.latent_dim).fill(0).map((_, i) => (i + 1) / 10);
    const back = suite.encode(suite.generate(w));
    back.forEach((v, i) => expect(Math.abs(v - w[i])).toBeLessThan(1e-9));
  });

  it("is deterministic and breaks distance ties toward the lowest index", () => {
    const x = new Array(suite.fixture.image_dim).fill(0.5);
    const a = suite.classify(x);
    const b = suite.classify(x);
    expect(a).toEqual(b);
    expect(a.label).toBeGreaterThanOrEqual(0);
    expect(a.label).toBeLessThan(suite.fixture.num_classes);
    expect(a.confidence).toBeGreaterThan(0);
    expect(a.confidence).toBeLessThanOrEqual(1);
  });

  it("rejects inconsistent fixtures", () => {
    const bad = JSON.parse(JSON.stringify(suite.fixture));
    bad.offset = [0];
    expect(() => new OracleSuite(bad)).toThrow();
  });
});
