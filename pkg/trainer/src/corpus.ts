import fs from "node:fs";

export const LABELS = ["entailment", "neutral", "contradiction"] as const;
export type Label = (typeof LABELS)[number];

export interface Example {
  id: string;
  premise: string;
  hypothesis: string;
  label: Label;
  source?: string;
}

/** Raised when a training or test file violates the corpus JSONL schema. */
export class SchemaError extends Error {}

function isLabel(value: unknown): value is Label {
  return typeof value === "string" && (LABELS as readonly string[]).includes(value);
}

/**
 * Load a corpus JSONL file. Every record must carry a non-empty premise,
 * hypothesis, and one of the three canonical labels; ids must be unique.
 * Blank lines are skipped, unknown keys are ignored.
 */
export function loadExamples(path: string): Example[] {
  let raw: string;
  try {
    raw = fs.readFileSync(path, "utf8");
  } catch {
    throw new SchemaError(`cannot read ${path}`);
  }
  const examples: Example[] = [];
  const seen = new Set<string>();
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    const where = `${path}:${i + 1}`;
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch {
      throw new SchemaError(`${where}: not valid JSON`);
    }
    if (typeof record !== "object" || record === null || Array.isArray(record)) {
      throw new SchemaError(`${where}: expected an object`);
    }
    const r = record as Record<string, unknown>;
    if (typeof r.id !== "string" || r.id === "") {
      throw new SchemaError(`${where}: missing id`);
    }
    if (seen.has(r.id)) {
      throw new SchemaError(`${where}: duplicate id ${JSON.stringify(r.id)}`);
    }
    if (typeof r.premise !== "string" || r.premise.trim() === "") {
      throw new SchemaError(`${where}: record ${r.id} has no premise`);
    }
    if (typeof r.hypothesis !== "string" || r.hypothesis.trim() === "") {
      throw new SchemaError(`${where}: record ${r.id} has no hypothesis`);
    }
    if (!isLabel(r.label)) {
      throw new SchemaError(`${where}: unknown label ${JSON.stringify(r.label)}`);
    }
    seen.add(r.id);
    examples.push({
      id: r.id,
      premise: r.premise,
      hypothesis: r.hypothesis,
      label: r.label,
      ...(typeof r.source === "string" ? { source: r.source } : {}),
    });
  }
  if (examples.length === 0) {
    throw new SchemaError(`${path}: no examples`);
  }
  return examples;
}
