// Formatting for the live metrics panel. The UI never computes metrics;
// it renders the service's numbers verbatim.

import type { LiveReport, MaybeReport, ScopeReport } from "./types.js";

export interface MetricRow {
  label: string;
  value: string;
}

export function isReport(r: MaybeReport): r is ScopeReport {
  return !("empty_split" in r);
}

export function formatPercent(v: number): string {
  return `${(v * 100).toFixed(1)}%`;
}

export function metricsRows(live: LiveReport): MetricRow[] {
  const rows: MetricRow[] = [
    { label: "Reviewed", value: String(live.reviewed) },
    { label: "Remaining flagged", value: String(live.remaining_flagged) },
  ];
  if (isReport(live.aggregate)) {
    rows.push(
      { label: "Error rate (current)", value: formatPercent(live.aggregate.error_rate_after_hc) },
      { label: "Error rate (before)", value: formatPercent(live.aggregate.error_rate_before) },
      { label: "Labor savings", value: formatPercent(live.aggregate.labor_savings) },
      { label: "Flag precision", value: formatPercent(live.aggregate.precision_uq) },
      { label: "Flag recall", value: formatPercent(live.aggregate.recall_uq) },
    );
  }
  return rows;
}

export function domainRows(live: LiveReport): MetricRow[] {
  return Object.entries(live.domains).map(([domain, report]) => ({
    label: domain,
    value: isReport(report)
      ? `${formatPercent(report.error_rate_after_hc)} err, ${report.counts.flagged} flagged`
      : "no held-out cells",
  }));
}
