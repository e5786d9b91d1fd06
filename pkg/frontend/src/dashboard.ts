// Aggregate dashboard. Every number shown is taken verbatim from the
// /api/report payload — the browser never recomputes a statistic.

import { ApiClient } from "./api.js";
import { AggregateReport, EXPLAINERS, IMAGE_QUALITIES } from "./types.js";

export function formatPercent(fraction: number): string {
  return `${(fraction * 100).toFixed(1)}%`;
}

function qualityTable(report: AggregateReport): string {
  return `
    <table data-role="quality-distribution">
      <caption>Film quality distribution</caption>
      ${IMAGE_QUALITIES.map((q) => `
        <tr><th>${q}</th>
            <td data-quality="${q}">${formatPercent(report.quality_distribution[q])}</td></tr>`).join("")}
    </table>`;
}

function detectionTable(report: AggregateReport): string {
  return `
    <table data-role="detection-rates">
      <caption>Defect highlighted by explainer</caption>
      ${EXPLAINERS.map((tool) => `
        <tr><th>${tool}</th>
            <td data-tool="${tool}">${formatPercent(report.detection_rate[tool])}</td>
            <td data-mean-confidence="${tool}">${report.mean_confidence[tool].toFixed(2)}</td></tr>`).join("")}
    </table>`;
}

function confidenceHistogram(report: AggregateReport): string {
  const max = Math.max(1, ...EXPLAINERS.flatMap((t) => report.confidence_histogram[t]));
  return `
    <div class="histograms" data-role="confidence-histograms">
      ${EXPLAINERS.map((tool) => `
        <div class="histogram" data-tool="${tool}">
          <h3>Confidence: ${tool}</h3>
          ${report.confidence_histogram[tool].map((count, i) => `
            <div class="bar-row">
              <span class="bar-label">${i + 1}</span>
              <span class="bar" style="width:${(count / max) * 100}%"></span>
              <span class="bar-count" data-level="${i + 1}">${count}</span>
            </div>`).join("")}
        </div>`).join("")}
    </div>`;
}

export async function renderDashboard(container: HTMLElement,
                                      api: ApiClient): Promise<void> {
  const report = await api.report();
  if (report.n_records === 0) {
    container.innerHTML = `
      <p class="empty-state" data-role="empty">
        No reviews submitted yet — the dashboard fills in as auditors work.
      </p>`;
    return;
  }
  const full = report as AggregateReport;
  container.innerHTML = `
    <h2>Audit aggregates (<span data-role="n-records">${full.n_records}</span> reviews)</h2>
    ${qualityTable(full)}
    ${detectionTable(full)}
    ${confidenceHistogram(full)}`;
}
