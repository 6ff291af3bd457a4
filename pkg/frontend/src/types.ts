/** Payload shapes of the review server's JSON API. */

export type Flag = "groundedness_issue" | "overly_broad";

export const FLAG_LABELS: Record<Flag, string> = {
  groundedness_issue: "Groundedness issue",
  overly_broad: "Overly broad",
};

export interface CodebookSummary {
  approach: string;
  codes: number;
}

export interface CodeExample {
  id: string;
  role: string;
  content: string;
}

export interface CodeEntry {
  label: string;
  normalized: string;
  definition: string | null;
  examples: CodeExample[];
  flags: { verb_nonconforming: boolean };
}

export interface CodebookDoc {
  schema: string;
  approach: string;
  codes: CodeEntry[];
}

export interface AnnotationEntry {
  approach: string;
  label: string;
  flags: Flag[];
  note: string;
}

export interface RaterAnnotations {
  rater: string;
  completed: string[];
  annotations: AnnotationEntry[];
}

export interface Disagreement {
  label: string;
  rater_flags: Record<string, Flag[]>;
  notes: Record<string, string>;
  resolved: boolean;
  final_flags: Flag[] | null;
}

export interface ApproachReport {
  codes: number;
  groundedness_issues: number;
  overly_broad: number;
  groundedness_pct: string;
  overly_broad_pct: string;
  flagged: Record<Flag, string[]>;
  finalized: boolean;
}

export interface Report {
  draft: boolean;
  approaches: Record<string, ApproachReport>;
  table?: string;
}

export interface ConceptGroup {
  keyword: string;
  stem: string;
  members: Record<string, string[]>;
}
