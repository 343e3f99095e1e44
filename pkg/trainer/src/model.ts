import fs from "node:fs";
import path from "node:path";

import { LABELS, Label } from "./corpus.js";
import { featurize } from "./features.js";

export interface Prediction {
  label: Label;
  scores: Record<Label, number>;
}

/**
 * Softmax regression over hashed bag-of-words features: the desk-scale
 * stand-in for a transformer checkpoint. Weights are one row per label,
 * 3 * hashDim wide, serialized as plain JSON so artifacts are portable
 * and diffable.
 */
export class TinyClassifier {
  constructor(
    readonly hashDim: number,
    readonly weights: Float64Array[],
    readonly bias: Float64Array,
  ) {
    if (weights.length !== LABELS.length || bias.length !== LABELS.length) {
      throw new Error(`expected ${LABELS.length} weight rows and biases`);
    }
    for (const row of weights) {
      if (row.length !== 3 * hashDim) {
        throw new Error(`weight row width ${row.length} does not match hash_dim ${hashDim}`);
      }
    }
  }

  static zeros(hashDim: number): TinyClassifier {
    const weights = LABELS.map(() => new Float64Array(3 * hashDim));
    return new TinyClassifier(hashDim, weights, new Float64Array(LABELS.length));
  }

  static load(modelDir: string): TinyClassifier {
    const file = path.join(modelDir, "model.json");
    if (!fs.existsSync(file)) {
      throw new Error(`no model.json under ${modelDir}`);
    }
    const doc = JSON.parse(fs.readFileSync(file, "utf8"));
    if (doc.encoder !== "hashed-bow" || typeof doc.hash_dim !== "number") {
      throw new Error(`${file}: not a hashed-bow model artifact`);
    }
    const weights = (doc.weights as number[][]).map((row) => Float64Array.from(row));
    return new TinyClassifier(doc.hash_dim, weights, Float64Array.from(doc.bias as number[]));
  }

  save(modelDir: string): void {
    fs.mkdirSync(modelDir, { recursive: true });
    const doc = {
      version: 1,
      encoder: "hashed-bow",
      hash_dim: this.hashDim,
      labels: LABELS,
      weights: this.weights.map((row) => Array.from(row)),
      bias: Array.from(this.bias),
    };
    fs.writeFileSync(path.join(modelDir, "model.json"), JSON.stringify(doc) + "\n");
  }

  logits(x: Float64Array): Float64Array {
    const z = new Float64Array(LABELS.length);
    for (let c = 0; c < LABELS.length; c++) {
      const row = this.weights[c];
      let acc = this.bias[c];
      for (let j = 0; j < x.length; j++) {
        if (x[j] !== 0) acc += row[j] * x[j];
      }
      z[c] = acc;
    }
    return z;
  }

  /** Softmax probabilities in label order. */
  probabilities(x: Float64Array): Float64Array {
    const z = this.logits(x);
    let max = -Infinity;
    for (const v of z) {
      if (v > max) max = v;
    }
    const p = new Float64Array(z.length);
    let sum = 0;
    for (let i = 0; i < z.length; i++) {
      p[i] = Math.exp(z[i] - max);
      sum += p[i];
    }
    for (let i = 0; i < p.length; i++) {
      p[i] /= sum;
    }
    return p;
  }

  /** Classify one pair; ties go to the first label in canonical order. */
  predict(premise: string, hypothesis: string): Prediction {
    const p = this.probabilities(featurize(premise, hypothesis, this.hashDim));
    let best = 0;
    for (let i = 1; i < p.length; i++) {
      if (p[i] > p[best]) best = i;
    }
    const scores = {} as Record<Label, number>;
    LABELS.forEach((label, i) => {
      scores[label] = p[i];
    });
    return { label: LABELS[best], scores };
  }
}
