// In-progress questionnaire drafts, persisted per (case, auditor) so a
// network drop or reload never loses an auditor's answers.

const PREFIX = "weldlab-draft";

export type Draft = Record<string, unknown>;

function key(caseId: string, auditorId: string): string {
  return `${PREFIX}:${caseId}:${auditorId}`;
}

export function saveDraft(storage: Storage, caseId: string, auditorId: string,
                          draft: Draft): void {
  storage.setItem(key(caseId, auditorId), JSON.stringify(draft));
}

export function loadDraft(storage: Storage, caseId: string,
                          auditorId: string): Draft | null {
  const raw = storage.getItem(key(caseId, auditorId));
  if (raw === null) return null;
  try {
    return JSON.parse(raw) as Draft;
  } catch {
    return null; // corrupt draft is no draft
  }
}

export function clearDraft(storage: Storage, caseId: string, auditorId: string): void {
  storage.removeItem(key(caseId, auditorId));
}
