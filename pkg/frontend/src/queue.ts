// Review queue state: ordering, status transitions, and idempotency keys.
// The UI holds no authority of its own; everything here is reconstructible
// from service responses.

import type { CellRecord, CellStatus, TableCellsResponse, Verdict } from "./types.js";

export interface QueueItem {
  tableId: string;
  domain: string;
  row: number;
  col: number;
  bbox: [number, number, number, number];
  text: string;
  gtMatched: boolean;
  gtText: string | null;
  score: number | null;
  uncertainty: number;
  status: CellStatus;
}

const VERDICT_STATUS: Record<Verdict, CellStatus> = {
  accept: "accepted",
  correct: "corrected",
  unresolvable: "unresolvable",
};

export function toQueueItem(tableId: string, domain: string, cell: CellRecord): QueueItem {
  return {
    tableId,
    domain,
    row: cell.row,
    col: cell.col,
    bbox: cell.bbox,
    text: cell.text,
    gtMatched: cell.gt_matched,
    gtText: cell.gt_text,
    score: cell.score,
    uncertainty: cell.uncertainty ?? 0,
    status: cell.status,
  };
}

/** Same ordering the service documents: uncertainty desc, then (table, row, col). */
export function queueCompare(a: QueueItem, b: QueueItem): number {
  if (a.uncertainty !== b.uncertainty) return b.uncertainty - a.uncertainty;
  if (a.tableId !== b.tableId) return a.tableId < b.tableId ? -1 : 1;
  if (a.row !== b.row) return a.row - b.row;
  return a.col - b.col;
}

export function buildQueue(tables: TableCellsResponse[]): QueueItem[] {
  const items: QueueItem[] = [];
  for (const table of tables) {
    for (const cell of table.cells) {
      if (cell.flagged) {
        items.push(toQueueItem(table.table_id, table.domain, cell));
      }
    }
  }
  items.sort(queueCompare);
  return items;
}

/** One stable key per queue item; double submissions collapse server-side. */
export function idempotencyKey(item: QueueItem): string {
  return `ui-${item.tableId}:${item.row},${item.col}`;
}

export class ReviewQueue {
  private items: QueueItem[];
  private cursor = 0;

  constructor(items: QueueItem[]) {
    this.items = [...items].sort(queueCompare);
  }

  all(): readonly QueueItem[] {
    return this.items;
  }

  remaining(): number {
    return this.items.filter((i) => i.status === "pending").length;
  }

  /** The highest-uncertainty pending item at or after the cursor, wrapping once. */
  current(): QueueItem | null {
    const n = this.items.length;
    for (let step = 0; step < n; step++) {
      const item = this.items[(this.cursor + step) % n];
      if (item && item.status === "pending") {
        this.cursor = (this.cursor + step) % n;
        return item;
      }
    }
    return null;
  }

  /** Move past the current item without resolving it. */
  skip(): QueueItem | null {
    if (this.items.length === 0) return null;
    this.cursor = (this.cursor + 1) % this.items.length;
    return this.current();
  }

  /**
   * Record a verdict locally after the service acknowledged it.
   * Only pending items may transition; anything else is a bug in the caller.
   */
  resolve(item: QueueItem, verdict: Verdict, correctedText?: string): void {
    if (item.status !== "pending") {
      throw new Error(
        `cell ${item.tableId}:${item.row},${item.col} already ${item.status}`,
      );
    }
    item.status = VERDICT_STATUS[verdict];
    if (verdict === "correct" && correctedText !== undefined) {
      item.text = correctedText;
    }
  }
}
