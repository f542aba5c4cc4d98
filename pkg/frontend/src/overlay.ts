// Canvas overlay math and drawing. The drawing context is a minimal
// interface so the render plan is testable without a DOM.

import type { CellRecord } from "./types.js";

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

/** Letterbox-fit an image into a canvas, preserving aspect ratio. */
export function fitTransform(
  imageWidth: number,
  imageHeight: number,
  canvasWidth: number,
  canvasHeight: number,
): ViewTransform {
  const scale = Math.min(canvasWidth / imageWidth, canvasHeight / imageHeight);
  return {
    scale,
    offsetX: (canvasWidth - imageWidth * scale) / 2,
    offsetY: (canvasHeight - imageHeight * scale) / 2,
  };
}

export function imageToCanvas(
  bbox: readonly [number, number, number, number],
  t: ViewTransform,
): Rect {
  const [x0, y0, x1, y1] = bbox;
  return {
    x: x0 * t.scale + t.offsetX,
    y: y0 * t.scale + t.offsetY,
    width: (x1 - x0) * t.scale,
    height: (y1 - y0) * t.scale,
  };
}

export function canvasToImage(
  x: number,
  y: number,
  t: ViewTransform,
): { x: number; y: number } {
  return { x: (x - t.offsetX) / t.scale, y: (y - t.offsetY) / t.scale };
}

/** Cell containing the image-space point; smallest area wins on overlap. */
export function hitTest(cells: CellRecord[], x: number, y: number): CellRecord | null {
  let best: CellRecord | null = null;
  let bestArea = Infinity;
  for (const cell of cells) {
    const [x0, y0, x1, y1] = cell.bbox;
    if (x < x0 || x > x1 || y < y0 || y > y1) continue;
    const area = (x1 - x0) * (y1 - y0);
    if (area < bestArea) {
      best = cell;
      bestArea = area;
    }
  }
  return best;
}

/** Color ramp from calm teal to alarm red as uncertainty grows. */
export function uncertaintyColor(uncertainty: number, maxUncertainty: number): string {
  const span = maxUncertainty > 0 ? maxUncertainty : 1;
  const v = Math.max(0, Math.min(1, uncertainty / span));
  const hue = 180 - 180 * v; // 180 (teal) down to 0 (red)
  return `hsl(${hue.toFixed(0)}, 85%, 55%)`;
}

/** Synthetic frame for tables with no image: the envelope of the cell boxes. */
export function gridEnvelope(cells: CellRecord[]): { width: number; height: number } {
  let width = 1;
  let height = 1;
  for (const cell of cells) {
    width = Math.max(width, cell.bbox[2]);
    height = Math.max(height, cell.bbox[3]);
  }
  return { width, height };
}

export interface DrawContext {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
}

export function drawOverlay(
  ctx: DrawContext,
  cells: CellRecord[],
  transform: ViewTransform,
  selected: { row: number; col: number } | null,
): void {
  const maxU = Math.max(0, ...cells.map((c) => c.uncertainty ?? 0));
  for (const cell of cells) {
    const rect = imageToCanvas(cell.bbox, transform);
    const u = cell.uncertainty ?? 0;
    ctx.globalAlpha = 0.25;
    ctx.fillStyle = uncertaintyColor(u, maxU);
    ctx.fillRect(rect.x, rect.y, rect.width, rect.height);
    ctx.globalAlpha = 1;
    if (cell.flagged && cell.status === "pending") {
      ctx.strokeStyle = "#ff3b30";
      ctx.lineWidth = 2;
    } else if (cell.flagged) {
      ctx.strokeStyle = "#8e8e93";
      ctx.lineWidth = 1.5;
    } else {
      ctx.strokeStyle = "rgba(120, 120, 128, 0.5)";
      ctx.lineWidth = 1;
    }
    ctx.strokeRect(rect.x, rect.y, rect.width, rect.height);
    if (selected && selected.row === cell.row && selected.col === cell.col) {
      ctx.strokeStyle = "#ffd60a";
      ctx.lineWidth = 3;
      ctx.strokeRect(rect.x - 2, rect.y - 2, rect.width + 4, rect.height + 4);
    }
  }
}
