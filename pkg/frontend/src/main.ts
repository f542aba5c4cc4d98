// Browser entry point: keyboard-first triage over the flagged-cell queue,
// a canvas overlay on the table image, and a polled live-metrics panel.

import { ApiError, ReviewApiClient } from "./api.js";
import { domainRows, metricsRows } from "./metrics.js";
import {
  drawOverlay,
  fitTransform,
  gridEnvelope,
  hitTest,
  canvasToImage,
  type ViewTransform,
} from "./overlay.js";
import { ReviewQueue, buildQueue, idempotencyKey, type QueueItem } from "./queue.js";
import type { TableCellsResponse, Verdict } from "./types.js";

const POLL_INTERVAL_MS = 2500;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class ReviewApp {
  private api: ReviewApiClient;
  private queue: ReviewQueue = new ReviewQueue([]);
  private tables = new Map<string, TableCellsResponse>();
  private images = new Map<string, HTMLImageElement | null>();
  private canvas = el<HTMLCanvasElement>("overlay");
  private editor = el<HTMLInputElement>("editor");
  private editing = false;
  private submitting = false;

  constructor(baseUrl: string) {
    this.api = new ReviewApiClient(baseUrl);
  }

  async start(): Promise<void> {
    await this.loadRunInfo();
    await this.reload();
    this.bindKeys();
    this.canvas.addEventListener("click", (ev) => this.onCanvasClick(ev));
    window.setInterval(() => void this.refreshMetrics(), POLL_INTERVAL_MS);
    void this.refreshMetrics();
  }

  private async loadRunInfo(): Promise<void> {
    try {
      const report = await this.api.batchReport();
      const model = report.model;
      el("run-info").textContent =
        `${model.score_function.kind.toUpperCase()}  ` +
        `q̂=${model.q_hat.toFixed(4)}  τ=${model.flag_threshold_tau}  ` +
        `α=${model.alpha}`;
    } catch {
      el("run-info").textContent = "no batch report";
    }
  }

  private async reload(): Promise<void> {
    const summaries = await this.api.listTables();
    const responses = await Promise.all(
      summaries.map((t) => this.api.tableCells(t.table_id)),
    );
    this.tables.clear();
    for (const response of responses) this.tables.set(response.table_id, response);
    this.queue = new ReviewQueue(buildQueue(responses));
    this.renderCurrent();
  }

  private currentItem(): QueueItem | null {
    return this.queue.current();
  }

  private async imageFor(tableId: string): Promise<HTMLImageElement | null> {
    if (this.images.has(tableId)) return this.images.get(tableId) ?? null;
    const image = new Image();
    const loaded = await new Promise<HTMLImageElement | null>((resolve) => {
      image.onload = () => resolve(image);
      image.onerror = () => resolve(null);
      image.src = this.api.imageUrl(tableId);
    });
    this.images.set(tableId, loaded);
    return loaded;
  }

  private transformFor(table: TableCellsResponse, hasImage: boolean): ViewTransform {
    const frame = hasImage ? table.image : gridEnvelope(table.cells);
    return fitTransform(frame.width, frame.height, this.canvas.width, this.canvas.height);
  }

  private async renderCurrent(): Promise<void> {
    const item = this.currentItem();
    el("remaining").textContent = String(this.queue.remaining());
    if (!item) {
      el("cell-info").textContent = "Queue empty. All flagged cells are resolved.";
      el("queue-banner").classList.add("done");
      const ctx = this.canvas.getContext("2d");
      if (ctx) ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
      return;
    }
    el("queue-banner").classList.remove("done");
    const table = this.tables.get(item.tableId);
    if (!table) return;
    const image = await this.imageFor(item.tableId);
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    const transform = this.transformFor(table, image !== null);
    if (image) {
      ctx.globalAlpha = 1;
      ctx.drawImage(
        image,
        transform.offsetX,
        transform.offsetY,
        table.image.width * transform.scale,
        table.image.height * transform.scale,
      );
    }
    drawOverlay(ctx, table.cells, transform, { row: item.row, col: item.col });
    const unmatched = table.unmatched_spans.length;
    el("cell-info").innerHTML =
      `<b>${item.tableId}</b> (${item.domain}) cell ${item.row},${item.col}<br>` +
      `text: <code>${escapeHtml(item.text || "∅")}</code><br>` +
      `uncertainty: ${item.uncertainty.toFixed(4)}  score: ${item.score?.toFixed(4) ?? "-"}` +
      (unmatched
        ? `<br><span class="warn">${unmatched} OCR span(s) in this table matched no cell</span>`
        : "");
    this.editor.value = item.text;
  }

  private onCanvasClick(ev: MouseEvent): void {
    const item = this.currentItem();
    if (!item) return;
    const table = this.tables.get(item.tableId);
    if (!table) return;
    const rect = this.canvas.getBoundingClientRect();
    const hasImage = this.images.get(item.tableId) != null;
    const transform = this.transformFor(table, hasImage);
    const point = canvasToImage(ev.clientX - rect.left, ev.clientY - rect.top, transform);
    const hit = hitTest(table.cells, point.x, point.y);
    if (hit && hit.flagged && hit.status === "pending") {
      // jump the queue to the clicked cell by skipping until it is current
      for (let i = 0; i < this.queue.all().length; i++) {
        const current = this.queue.current();
        if (!current || (current.row === hit.row && current.col === hit.col &&
            current.tableId === item.tableId)) {
          break;
        }
        this.queue.skip();
      }
      void this.renderCurrent();
      if (this.editing) this.editor.focus();
    }
  }

  private bindKeys(): void {
    document.addEventListener("keydown", (ev) => {
      if (this.editing) {
        if (ev.key === "Enter") {
          ev.preventDefault();
          void this.submit("correct", this.editor.value);
          this.stopEditing();
        } else if (ev.key === "Escape") {
          this.stopEditing();
        }
        return;
      }
      if (ev.key === "a") void this.submit("accept");
      else if (ev.key === "u") void this.submit("unresolvable");
      else if (ev.key === "s") {
        this.queue.skip();
        void this.renderCurrent();
      } else if (ev.key === "e") {
        ev.preventDefault();
        this.startEditing();
      }
    });
  }

  private startEditing(): void {
    if (!this.currentItem()) return;
    this.editing = true;
    this.editor.disabled = false;
    this.editor.focus();
    this.editor.select();
  }

  private stopEditing(): void {
    this.editing = false;
    this.editor.disabled = true;
  }

  private async submit(verdict: Verdict, text?: string): Promise<void> {
    const item = this.currentItem();
    if (!item || this.submitting) return;
    this.submitting = true;
    el("error-banner").textContent = "";
    try {
      await this.api.submitCorrection(item.tableId, item.row, item.col, {
        verdict,
        reviewer_text: verdict === "correct" ? (text ?? item.text) : null,
        event_id: idempotencyKey(item),
      });
      this.queue.resolve(item, verdict, text);
      await this.renderCurrent();
      void this.refreshMetrics();
    } catch (error) {
      // the item stays pending; surface the failure and let the user retry
      const message =
        error instanceof ApiError ? error.message : `service unreachable: ${error}`;
      el("error-banner").textContent = `${message} (retry when ready)`;
    } finally {
      this.submitting = false;
    }
  }

  private async refreshMetrics(): Promise<void> {
    try {
      const live = await this.api.liveReport();
      el("metrics").innerHTML = metricsRows(live)
        .map((r) => `<tr><td>${r.label}</td><td>${r.value}</td></tr>`)
        .join("");
      el("domains").innerHTML = domainRows(live)
        .map((r) => `<tr><td>${escapeHtml(r.label)}</td><td>${r.value}</td></tr>`)
        .join("");
    } catch {
      // metrics panel goes quiet while the service is down; edits are blocked anyway
    }
  }
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? "http://127.0.0.1:8400";
void new ReviewApp(base).start();
