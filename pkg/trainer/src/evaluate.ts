import { LABELS, Label, loadExamples } from "./corpus.js";
import { TinyClassifier } from "./model.js";

export interface FileReport {
  file: string;
  examples: number;
  correct: number;
  accuracy: number;
  /** confusion[gold][predicted] = count */
  confusion: Record<Label, Record<Label, number>>;
}

export interface EvalReport {
  model: string;
  files: FileReport[];
}

function emptyConfusion(): Record<Label, Record<Label, number>> {
  const matrix = {} as Record<Label, Record<Label, number>>;
  for (const gold of LABELS) {
    matrix[gold] = {} as Record<Label, number>;
    for (const predicted of LABELS) {
      matrix[gold][predicted] = 0;
    }
  }
  return matrix;
}

/** Score each test file; pure, so repeated runs give identical reports. */
export function evaluateModel(modelDir: string, testFiles: string[]): EvalReport {
  if (testFiles.length === 0) {
    throw new Error("no test files given");
  }
  const model = TinyClassifier.load(modelDir);
  const files = testFiles.map((file) => {
    const examples = loadExamples(file);
    const confusion = emptyConfusion();
    let correct = 0;
    for (const ex of examples) {
      const { label } = model.predict(ex.premise, ex.hypothesis);
      confusion[ex.label][label] += 1;
      if (label === ex.label) correct += 1;
    }
    return {
      file,
      examples: examples.length,
      correct,
      accuracy: correct / examples.length,
      confusion,
    };
  });
  return { model: modelDir, files };
}
