// Case review: radiograph with overlay toggles plus the nine-question
// audit form. Client-side validation mirrors the server's rules; the
// submit button stays disabled until the form is complete and consistent.
// Answers are drafted to local storage on every change.

import { ApiClient, ApiError, CaseDetail } from "./api.js";
import { clearDraft, loadDraft, saveDraft } from "./drafts.js";
import {
  AuditRecordPayload, DEFECT_TYPES, IMAGE_QUALITIES, OverlayMode, VISIBILITIES,
} from "./types.js";
import { validateRecord } from "./validate.js";

export interface ReviewCallbacks {
  onSubmitted: (caseId: string) => void;
}

const OVERLAY_MODES: OverlayMode[] = ["none", "gradcam", "lime", "side_by_side"];

function radioGroup(name: string, options: readonly (string | number)[],
                    selected: unknown): string {
  return options.map((opt) => `
    <label><input type="radio" name="${name}" value="${opt}"
      ${String(opt) === String(selected) ? "checked" : ""} /> ${opt}</label>`).join("");
}

function overlayImages(detail: CaseDetail, api: ApiClient, mode: OverlayMode,
                       opacity: number): string {
  const img = (path: string, cls: string) =>
    `<img class="overlay ${cls}" src="${api.overlayUrl(path)}"
       style="opacity:${opacity}" alt="${cls}" />`;
  switch (mode) {
    case "none":
      return "";
    case "gradcam":
      return img(detail.gradcam_overlay_path, "gradcam");
    case "lime":
      return img(detail.lime_overlay_path, "lime");
    case "side_by_side":
      return img(detail.gradcam_overlay_path, "gradcam") +
        img(detail.lime_overlay_path, "lime");
  }
}

export function formPayload(form: HTMLFormElement, caseId: string,
                            auditorId: string): Record<string, unknown> {
  const data = new FormData(form);
  const radio = (name: string) => (data.get(name) as string | null) ?? undefined;
  const bool = (name: string) => {
    const v = radio(name);
    return v === undefined ? undefined : v === "yes";
  };
  const int = (name: string) => {
    const v = radio(name);
    return v === undefined ? undefined : Number(v);
  };
  return {
    case_id: caseId,
    auditor_id: auditorId,
    detected_gradcam: bool("detected_gradcam"),
    detected_lime: bool("detected_lime"),
    image_quality: radio("image_quality"),
    visibility_gradcam: radio("visibility_gradcam"),
    visibility_lime: radio("visibility_lime"),
    defect_type: radio("defect_type"),
    confidence_gradcam: int("confidence_gradcam"),
    confidence_lime: int("confidence_lime"),
    timestamp: Date.now() / 1000,
  };
}

function showFieldErrors(form: HTMLFormElement,
                         errors: { field: string; message: string }[]): void {
  form.querySelectorAll(".field-error").forEach((el) => (el.textContent = ""));
  for (const e of errors) {
    const slot = form.querySelector(`[data-error-for="${e.field}"]`);
    if (slot) slot.textContent = e.message;
  }
}

export async function renderReview(container: HTMLElement, api: ApiClient,
                                   caseId: string, auditorId: string,
                                   storage: Storage,
                                   callbacks: ReviewCallbacks): Promise<void> {
  const detail = await api.getCase(caseId);
  let overlayMode: OverlayMode = "gradcam";
  let opacity = 0.7;

  container.innerHTML = `
    <h2>Case ${detail.case_id} — predicted <em>${detail.pred_class}</em></h2>
    <div class="viewer">
      <div class="film" data-role="film"></div>
      <div class="viewer-controls">
        ${OVERLAY_MODES.map((m) => `
          <button data-overlay="${m}" class="${m === overlayMode ? "active" : ""}">${m}</button>`).join("")}
        <label>opacity
          <input type="range" data-role="opacity" min="0" max="1" step="0.05" value="${opacity}" />
        </label>
        <label>brightness
          <input type="range" data-role="brightness" min="0.5" max="2" step="0.05" value="1" />
        </label>
      </div>
    </div>
    <form data-role="audit-form">
      <fieldset>
        <legend>Activation map highlighted the defect?</legend>
        ${radioGroup("detected_gradcam", ["yes", "no"], undefined)}
        <span class="field-error" data-error-for="detected_gradcam"></span>
      </fieldset>
      <fieldset>
        <legend>Surrogate map highlighted the defect?</legend>
        ${radioGroup("detected_lime", ["yes", "no"], undefined)}
        <span class="field-error" data-error-for="detected_lime"></span>
      </fieldset>
      <fieldset>
        <legend>Film quality</legend>
        ${radioGroup("image_quality", IMAGE_QUALITIES, undefined)}
        <span class="field-error" data-error-for="image_quality"></span>
      </fieldset>
      <fieldset>
        <legend>Defect visibility (activation map)</legend>
        ${radioGroup("visibility_gradcam", VISIBILITIES, undefined)}
        <span class="field-error" data-error-for="visibility_gradcam"></span>
      </fieldset>
      <fieldset>
        <legend>Defect visibility (surrogate map)</legend>
        ${radioGroup("visibility_lime", VISIBILITIES, undefined)}
        <span class="field-error" data-error-for="visibility_lime"></span>
      </fieldset>
      <fieldset>
        <legend>Defect type seen</legend>
        ${radioGroup("defect_type", DEFECT_TYPES, undefined)}
        <span class="field-error" data-error-for="defect_type"></span>
      </fieldset>
      <fieldset>
        <legend>Confidence in activation map (1–5)</legend>
        ${radioGroup("confidence_gradcam", [1, 2, 3, 4, 5], undefined)}
        <span class="field-error" data-error-for="confidence_gradcam"></span>
      </fieldset>
      <fieldset>
        <legend>Confidence in surrogate map (1–5)</legend>
        ${radioGroup("confidence_lime", [1, 2, 3, 4, 5], undefined)}
        <span class="field-error" data-error-for="confidence_lime"></span>
      </fieldset>
      <button type="submit" data-role="submit" disabled>Submit review</button>
      <span class="banner" data-role="submit-error"></span>
    </form>`;

  const form = container.querySelector<HTMLFormElement>('[data-role="audit-form"]')!;
  const film = container.querySelector<HTMLDivElement>('[data-role="film"]')!;
  const submit = container.querySelector<HTMLButtonElement>('[data-role="submit"]')!;

  const renderFilm = () => {
    film.innerHTML = overlayImages(detail, api, overlayMode, opacity);
  };
  renderFilm();

  container.querySelectorAll<HTMLButtonElement>("[data-overlay]").forEach((btn) => {
    btn.addEventListener("click", (ev) => {
      ev.preventDefault();
      overlayMode = btn.dataset.overlay as OverlayMode;
      container.querySelectorAll("[data-overlay]").forEach((b) =>
        b.classList.toggle("active", b === btn));
      renderFilm();
    });
  });
  container.querySelector<HTMLInputElement>('[data-role="opacity"]')!
    .addEventListener("input", (ev) => {
      opacity = Number((ev.target as HTMLInputElement).value);
      renderFilm();
    });
  container.querySelector<HTMLInputElement>('[data-role="brightness"]')!
    .addEventListener("input", (ev) => {
      film.style.filter = `brightness(${(ev.target as HTMLInputElement).value})`;
    });

  const setRadio = (name: string, value: unknown) => {
    const input = form.querySelector<HTMLInputElement>(
      `input[name="${name}"][value="${value}"]`);
    if (input) input.checked = true;
  };

  // restore a saved draft, if any
  const draft = loadDraft(storage, caseId, auditorId);
  if (draft) {
    for (const name of ["detected_gradcam", "detected_lime"]) {
      if (typeof draft[name] === "boolean") setRadio(name, draft[name] ? "yes" : "no");
    }
    for (const name of ["image_quality", "visibility_gradcam", "visibility_lime",
                        "defect_type", "confidence_gradcam", "confidence_lime"]) {
      if (draft[name] !== undefined) setRadio(name, draft[name]);
    }
  }

  const refresh = () => {
    const payload = formPayload(form, caseId, auditorId);
    // a "no" answer forces the matching visibility to not_visible
    for (const tool of ["gradcam", "lime"]) {
      if (payload[`detected_${tool}`] === false) {
        setRadio(`visibility_${tool}`, "not_visible");
        payload[`visibility_${tool}`] = "not_visible";
      }
    }
    saveDraft(storage, caseId, auditorId, payload);
    const errors = validateRecord(payload);
    submit.disabled = errors.length > 0;
    // unanswered questions are incomplete, not wrong: no inline error yet
    showFieldErrors(form, errors.filter((e) => payload[e.field] !== undefined));
  };
  form.addEventListener("change", refresh);
  refresh();

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const raw = formPayload(form, caseId, auditorId);
    const errors = validateRecord(raw);
    if (errors.length > 0) {
      showFieldErrors(form, errors);
      return;
    }
    const payload = raw as unknown as AuditRecordPayload;
    void api.submitRecord(payload).then(() => {
      clearDraft(storage, caseId, auditorId);
      callbacks.onSubmitted(caseId);
    }).catch((e) => {
      // server rejected or unreachable: keep the form (and the draft) intact
      if (e instanceof ApiError && e.fieldErrors.length > 0) {
        showFieldErrors(form, e.fieldErrors);
      }
      const banner = form.querySelector('[data-role="submit-error"]')!;
      banner.textContent = e instanceof ApiError && e.retryable
        ? "Submission failed; your answers are saved locally. Retry when the service is back."
        : `Submission rejected: ${e.message ?? e}`;
    });
  });
}
