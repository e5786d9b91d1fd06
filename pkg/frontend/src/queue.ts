// Pending-case queue: paginated list with thumbnail, prediction, and a
// quality-at-a-glance probability bar. Selecting a row opens the case view.

import { ApiClient, ApiError } from "./api.js";
import { AuditCase } from "./types.js";

export interface QueueCallbacks {
  onSelect: (caseId: string) => void;
}

function probabilityBar(probs: number[]): string {
  const top = Math.max(...probs);
  return `<span class="prob-bar" title="top probability ${(top * 100).toFixed(1)}%">` +
    `<span class="prob-fill" style="width:${(top * 100).toFixed(1)}%"></span></span>`;
}

function caseRow(c: AuditCase, api: ApiClient): string {
  return `
    <li class="queue-row" data-case-id="${c.case_id}">
      <img class="thumb" src="${api.overlayUrl(c.gradcam_overlay_path)}" alt="${c.case_id}" />
      <span class="case-id">${c.case_id}</span>
      <span class="pred">${c.pred_class}</span>
      ${probabilityBar(c.probabilities)}
    </li>`;
}

export async function renderQueue(container: HTMLElement, api: ApiClient,
                                  callbacks: QueueCallbacks, page = 1,
                                  pageSize = 10): Promise<void> {
  let listing;
  try {
    listing = await api.listCases("pending", page, pageSize);
  } catch (e) {
    const retryable = e instanceof ApiError && e.retryable;
    container.innerHTML = `
      <div class="banner error" data-role="retry-banner">
        Review service unreachable${retryable ? "; will retry" : ""}.
        <button data-role="retry">Retry</button>
      </div>`;
    container.querySelector<HTMLButtonElement>('[data-role="retry"]')!
      .addEventListener("click", () => {
        void renderQueue(container, api, callbacks, page, pageSize);
      });
    return;
  }

  if (listing.total === 0) {
    container.innerHTML = `
      <p class="empty-state" data-role="empty">
        No pending cases — the review queue is clear.
      </p>`;
    return;
  }

  const pager = listing.pages > 1
    ? `<nav class="pager" data-role="pager">
         <button data-role="prev" ${page <= 1 ? "disabled" : ""}>Prev</button>
         <span data-role="page-label">page ${page} of ${listing.pages}</span>
         <button data-role="next" ${page >= listing.pages ? "disabled" : ""}>Next</button>
       </nav>`
    : "";

  container.innerHTML = `
    <h2>Pending cases <span data-role="pending-count">${listing.total}</span></h2>
    <ul class="queue" data-role="queue">
      ${listing.cases.map((c) => caseRow(c, api)).join("")}
    </ul>
    ${pager}`;

  container.querySelectorAll<HTMLLIElement>(".queue-row").forEach((row) => {
    row.addEventListener("click", () => callbacks.onSelect(row.dataset.caseId!));
  });
  container.querySelector<HTMLButtonElement>('[data-role="prev"]')
    ?.addEventListener("click", () => {
      void renderQueue(container, api, callbacks, page - 1, pageSize);
    });
  container.querySelector<HTMLButtonElement>('[data-role="next"]')
    ?.addEventListener("click", () => {
      void renderQueue(container, api, callbacks, page + 1, pageSize);
    });
}
