// Payload shapes mirrored from the review service's JSON responses.

export interface TableSummary {
  table_id: string;
  domain: string;
  cell_count: number;
  flagged: number;
  remaining_flagged: number;
  reviewed: number;
  has_image: boolean;
}

export type CellStatus = "pending" | "accepted" | "corrected" | "unresolvable";

export interface CellRecord {
  row: number;
  col: number;
  bbox: [number, number, number, number];
  text: string;
  original_text: string;
  location_confidence: number;
  ocr_confidence: number;
  matched_span_count: number;
  score: number | null;
  uncertainty: number | null;
  flagged: boolean;
  status: CellStatus;
  gt_matched: boolean;
  gt_text: string | null;
  in_eval_split: boolean;
}

export interface TableCellsResponse {
  table_id: string;
  domain: string;
  image: { width: number; height: number };
  warnings: string[];
  unmatched_spans: { bbox: number[]; text: string; confidence: number }[];
  cells: CellRecord[];
}

export type Verdict = "accept" | "correct" | "unresolvable";

export interface CorrectionBody {
  verdict: Verdict;
  reviewer_text?: string | null;
  event_id?: string;
  timestamp?: string;
}

export interface CorrectionAck {
  event_id: string;
  table_id: string;
  cell: CellRecord;
  remaining_flagged: number;
}

export interface ScopeReport {
  accuracy_before: number;
  error_rate_before: number;
  precision_uq: number;
  recall_uq: number;
  f1_uq: number;
  labor_savings: number;
  error_rate_after_hc: number;
  counts: { total: number; flagged: number; incorrect: number; corrected: number };
  degenerate: string[];
}

export type MaybeReport = ScopeReport | { empty_split: true };

export interface LiveReport {
  reviewed: number;
  remaining_flagged: number;
  aggregate: MaybeReport;
  domains: Record<string, MaybeReport>;
  tables: Record<string, MaybeReport>;
}

export interface BatchReport {
  config: Record<string, unknown>;
  model: {
    score_function: { kind: string; hss_weights: number[] | null };
    alpha: number;
    q_hat: number;
    flag_threshold_tau: number;
  };
  aggregate: ScopeReport;
  domains: Record<string, MaybeReport>;
  tables: Record<string, MaybeReport>;
}
