// Application shell: queue -> case review -> next case, plus the dashboard
// tab. The service is the source of truth; the queue refreshes on focus.

import { ApiClient } from "./api.js";
import { renderDashboard } from "./dashboard.js";
import { renderQueue } from "./queue.js";
import { renderReview } from "./review.js";

export interface AppOptions {
  baseUrl?: string;
  auditorId?: string;
  storage?: Storage;
}

export function startApp(root: HTMLElement, options: AppOptions = {}): void {
  const api = new ApiClient(options.baseUrl ?? "");
  const auditorId = options.auditorId ??
    window.localStorage.getItem("weldlab-auditor") ?? "anonymous";
  const storage = options.storage ?? window.localStorage;

  root.innerHTML = `
    <header>
      <h1>Weld audit workstation</h1>
      <nav>
        <button data-view="queue" class="active">Queue</button>
        <button data-view="dashboard">Dashboard</button>
      </nav>
    </header>
    <main data-role="view"></main>`;
  const view = root.querySelector<HTMLElement>('[data-role="view"]')!;

  const showQueue = () => {
    void renderQueue(view, api, {
      onSelect: (caseId) => {
        void renderReview(view, api, caseId, auditorId, storage, {
          onSubmitted: () => showQueue(),
        });
      },
    });
  };
  const showDashboard = () => void renderDashboard(view, api);

  root.querySelectorAll<HTMLButtonElement>("[data-view]").forEach((btn) => {
    btn.addEventListener("click", () => {
      root.querySelectorAll("[data-view]").forEach((b) =>
        b.classList.toggle("active", b === btn));
      if (btn.dataset.view === "queue") showQueue();
      else showDashboard();
    });
  });
  window.addEventListener("focus", () => {
    if (root.querySelector('[data-view="queue"].active')) showQueue();
  });
  showQueue();
}
