import fs from "node:fs";
import path from "node:path";

import { Example, LABELS, loadExamples } from "./corpus.js";
import { featurize } from "./features.js";
import { TinyClassifier } from "./model.js";
import { SplitMix64 } from "./rng.js";

export interface TrainSpec {
  train_file: string;
  output_dir: string;
  base_model: string;
  epochs: number;
  learning_rate: number;
  batch_size: number;
  seed: number;
  hash_dim: number;
  init_from?: string;
}

export const SPEC_DEFAULTS = {
  base_model: "roberta-base",
  epochs: 3,
  learning_rate: 2e-5,
  batch_size: 32,
  seed: 0,
  hash_dim: 256,
} as const;

const SPEC_KEYS = new Set([
  "train_file",
  "output_dir",
  "base_model",
  "epochs",
  "learning_rate",
  "batch_size",
  "seed",
  "hash_dim",
  "init_from",
]);

export class SpecError extends Error {}

/** Parse and validate a TrainSpec JSON document. */
export function loadSpec(specPath: string): TrainSpec {
  let doc: unknown;
  try {
    doc = JSON.parse(fs.readFileSync(specPath, "utf8"));
  } catch (err) {
    throw new SpecError(`cannot read spec ${specPath}: ${(err as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new SpecError(`${specPath}: spec must be a JSON object`);
  }
  const d = doc as Record<string, unknown>;
  for (const key of Object.keys(d)) {
    if (!SPEC_KEYS.has(key)) {
      throw new SpecError(`${specPath}: unknown key ${JSON.stringify(key)}`);
    }
  }
  const str = (key: string, fallback?: string): string => {
    const v = d[key] ?? fallback;
    if (typeof v !== "string" || v === "") {
      throw new SpecError(`${specPath}: ${key} must be a non-empty string`);
    }
    return v;
  };
  const posInt = (key: string, fallback: number): number => {
    const v = d[key] ?? fallback;
    if (typeof v !== "number" || !Number.isInteger(v) || v <= 0) {
      throw new SpecError(`${specPath}: ${key} must be a positive integer`);
    }
    return v;
  };
  const seed = d.seed ?? SPEC_DEFAULTS.seed;
  if (typeof seed !== "number" || !Number.isInteger(seed) || seed < 0) {
    throw new SpecError(`${specPath}: seed must be a non-negative integer`);
  }
  const lr = d.learning_rate ?? SPEC_DEFAULTS.learning_rate;
  if (typeof lr !== "number" || !(lr > 0)) {
    throw new SpecError(`${specPath}: learning_rate must be positive`);
  }
  const spec: TrainSpec = {
    train_file: str("train_file"),
    output_dir: str("output_dir"),
    base_model: str("base_model", SPEC_DEFAULTS.base_model),
    epochs: posInt("epochs", SPEC_DEFAULTS.epochs),
    learning_rate: lr,
    batch_size: posInt("batch_size", SPEC_DEFAULTS.batch_size),
    seed,
    hash_dim: posInt("hash_dim", SPEC_DEFAULTS.hash_dim),
  };
  if (d.init_from !== undefined) {
    spec.init_from = str("init_from");
  }
  return spec;
}

export interface FitResult {
  modelDir: string;
  examples: number;
  initialLoss: number;
  epochLosses: number[];
}

function meanLoss(model: TinyClassifier, xs: Float64Array[], ys: number[]): number {
  let total = 0;
  for (let i = 0; i < xs.length; i++) {
    const z = model.logits(xs[i]);
    let max = -Infinity;
    for (const v of z) {
      if (v > max) max = v;
    }
    let sumExp = 0;
    for (const v of z) {
      sumExp += Math.exp(v - max);
    }
    total += max + Math.log(sumExp) - z[ys[i]];
  }
  return total / xs.length;
}

function batchStep(
  model: TinyClassifier,
  xs: Float64Array[],
  ys: number[],
  batch: number[],
  lr: number,
): void {
  const k = LABELS.length;
  const gradW = model.weights.map((row) => new Float64Array(row.length));
  const gradB = new Float64Array(k);
  for (const i of batch) {
    const p = model.probabilities(xs[i]);
    const x = xs[i];
    for (let c = 0; c < k; c++) {
      const delta = p[c] - (c === ys[i] ? 1 : 0);
      gradB[c] += delta;
      const row = gradW[c];
      for (let j = 0; j < x.length; j++) {
        if (x[j] !== 0) row[j] += delta * x[j];
      }
    }
  }
  const scale = lr / batch.length;
  for (let c = 0; c < k; c++) {
    model.bias[c] -= scale * gradB[c];
    const grad = gradW[c];
    const w = model.weights[c];
    for (let j = 0; j < w.length; j++) {
      if (grad[j] !== 0) w[j] -= scale * grad[j];
    }
  }
}

function writeJson(file: string, value: unknown): void {
  fs.writeFileSync(file, JSON.stringify(value, null, 2) + "\n");
}

/**
 * Mini-batch gradient descent on the cross-entropy, from zero weights or
 * from a previous round's checkpoint. Artifacts land in output_dir:
 * model.json, metrics.json (initial and per-epoch training loss), and
 * manifest.json echoing the resolved spec.
 */
export function fit(spec: TrainSpec): FitResult {
  const examples: Example[] = loadExamples(spec.train_file);
  let model: TinyClassifier;
  if (spec.init_from !== undefined) {
    model = TinyClassifier.load(spec.init_from);
    if (model.hashDim !== spec.hash_dim) {
      throw new SpecError(
        `init_from model has hash_dim ${model.hashDim}, spec says ${spec.hash_dim}`,
      );
    }
  } else {
    model = TinyClassifier.zeros(spec.hash_dim);
  }
  const xs = examples.map((ex) => featurize(ex.premise, ex.hypothesis, spec.hash_dim));
  const ys = examples.map((ex) => LABELS.indexOf(ex.label));

  const rng = new SplitMix64(spec.seed);
  const order = examples.map((_, i) => i);
  const initialLoss = meanLoss(model, xs, ys);
  const epochLosses: number[] = [];
  for (let epoch = 0; epoch < spec.epochs; epoch++) {
    rng.shuffle(order);
    for (let start = 0; start < order.length; start += spec.batch_size) {
      batchStep(model, xs, ys, order.slice(start, start + spec.batch_size), spec.learning_rate);
    }
    epochLosses.push(meanLoss(model, xs, ys));
  }

  fs.mkdirSync(spec.output_dir, { recursive: true });
  model.save(spec.output_dir);
  writeJson(path.join(spec.output_dir, "metrics.json"), {
    train_examples: examples.length,
    initial_loss: initialLoss,
    epoch_losses: epochLosses,
  });
  writeJson(path.join(spec.output_dir, "manifest.json"), {
    base_model: spec.base_model,
    encoder: "hashed-bow",
    hash_dim: spec.hash_dim,
    epochs: spec.epochs,
    learning_rate: spec.learning_rate,
    batch_size: spec.batch_size,
    seed: spec.seed,
    train_file: spec.train_file,
    train_examples: examples.length,
    init_from: spec.init_from ?? null,
  });
  return { modelDir: spec.output_dir, examples: examples.length, initialLoss, epochLosses };
}
