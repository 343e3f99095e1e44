/** Lowercased runs of letters and digits. */
export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[a-z0-9]+/g) ?? [];
}

/** FNV-1a 32-bit hash over UTF-16 code units. */
export function fnv1a(token: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < token.length; i++) {
    h ^= token.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

/**
 * Hashed bag-of-words features in three blocks of `dim`: premise term
 * counts, hypothesis term counts, and distinct terms the two share.
 * The shared block is what lets a linear head score the pair instead of
 * the two texts independently.
 */
export function featurize(premise: string, hypothesis: string, dim: number): Float64Array {
  const x = new Float64Array(3 * dim);
  const premiseTokens = tokenize(premise);
  const hypothesisTokens = tokenize(hypothesis);
  for (const t of premiseTokens) {
    x[fnv1a(t) % dim] += 1;
  }
  for (const t of hypothesisTokens) {
    x[dim + (fnv1a(t) % dim)] += 1;
  }
  const premiseSet = new Set(premiseTokens);
  for (const t of new Set(hypothesisTokens)) {
    if (premiseSet.has(t)) {
      x[2 * dim + (fnv1a(t) % dim)] += 1;
    }
  }
  return x;
}
