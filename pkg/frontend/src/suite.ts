/**
 * Analytic oracle suite loaded from the engine's suite JSON fixture:
 * a linear generator x = A w + b, a nearest-centroid classifier with
 * softmax confidence, and the exact transpose encoder w = A^T (x - b)
 * (valid because A has orthonormal columns).
 *
 * All arithmetic is sequential float64 so labels agree with the Python
 * implementation on 32-bit wire payloads.
 */

import { readFileSync } from "node:fs";

export interface SuiteFixture {
  seed: number;
  latent_dim: number;
  image_dim: number;
  num_classes: number;
  matrix: number[][]; // image_dim x latent_dim
  offset: number[];
  squash: boolean;
  latent_low: number;
  latent_high: number;
  centroids: number[][]; // num_classes x image_dim
  temperature: number;
}

export interface Classification {
  label: number;
  confidence: number;
}

export class OracleSuite {
  readonly fixture: SuiteFixture;

  constructor(fixture: SuiteFixture) {
    const f = fixture;
    if (
      f.matrix.length !== f.image_dim ||
      f.matrix[0].length !== f.latent_dim ||
      f.offset.length !== f.image_dim ||
      f.centroids.length !== f.num_classes
    ) {
      throw new Error("suite fixture dimensions are inconsistent");
    }
    this.fixture = fixture;
  }

  static load(path: string): OracleSuite {
    return new OracleSuite(JSON.parse(readFileSync(path, "utf-8")) as SuiteFixture);
  }

  generate(w: number[]): number[] {
    const { matrix, offset, image_dim, latent_dim, squash } = this.fixture;
    const out = new Array<number>(image_dim);
    for (let i = 0; i < image_dim; i++) {
      let acc = 0;
      const row = matrix[i];
      for (let k = 0; k < latent_dim; k++) {
        acc += row[k] * w[k];
      }
      acc += offset[i];
      out[i] = squash ? Math.min(1, Math.max(0, acc)) : acc;
    }
    return out;
  }

  encode(x: number[]): number[] {
    // pinv(A) == A^T for orthonormal columns; encode = A^T (x - b)
    const { matrix, offset, image_dim, latent_dim } = this.fixture;
    const out = new Array<number>(latent_dim).fill(0);
    for (let i = 0; i < image_dim; i++) {
      const v = x[i] - offset[i];
      const row = matrix[i];
      for (let k = 0; k < latent_dim; k++) {
        out[k] += row[k] * v;
      }
    }
    return out;
  }

  classify(x: number[]): Classification {
    const { centroids, temperature } = this.fixture;
    const dists = centroids.map((c) => {
      let acc = 0;
      for (let i = 0; i < c.length; i++) {
        const d = x[i] - c[i];
        acc += d * d;
      }
      return Math.sqrt(acc);
    });
    let label = 0;
    for (let k = 1; k < dists.length; k++) {
      if (dists[k] < dists[label]) {
        label = k; // strict <: ties keep the lowest index
      }
    }
    const logits = dists.map((d) => -d / temperature);
    const top = Math.max(...logits);
    const exps = logits.map((l) => Math.exp(l - top));
    const total = exps.reduce((a, b) => a + b, 0);
    return { label, confidence: exps[label] / total };
  }
}
