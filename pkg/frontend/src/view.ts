// View model for a verdict: which panel tone to use and the field rows to
// show. Values are passed through verbatim so the page shows exactly what
// the API said, with null rendered as an empty cell.

import type { Verdict, VerdictField } from "./api.js";
import { VERDICT_FIELDS } from "./api.js";

export interface VerdictView {
  tone: "fake" | "clear";
  headline: string;
  fields: Array<{ field: VerdictField; value: string; isNull: boolean }>;
}

export function verdictView(verdict: Verdict): VerdictView {
  const fake = verdict.classification !== "unknown";
  return {
    tone: fake ? "fake" : "clear",
    headline: fake ? "FAKE" : "No evidence",
    fields: VERDICT_FIELDS.map((field) => {
      const value = verdict[field];
      return { field, value: value === null ? "" : value, isNull: value === null };
    }),
  };
}
