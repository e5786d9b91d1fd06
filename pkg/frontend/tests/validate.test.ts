// Client-side validation unit tests plus the parity check: every record the
// server rejects must also be rejected client-side (and vice versa), so a
// form that passes locally never bounces with a 422.

import { execFileSync } from "node:child_process";
import { describe, expect, it } from "vitest";

import { validateRecord } from "../src/validate.js";
import { RECORD_FIXTURES, baseRecord } from "./fixtures.js";

const SERVER_VALIDATE = `
import json, sys
from weldlab.ddia.records import validate_record
payloads = json.load(sys.stdin)
print(json.dumps([sorted({e["field"] for e in validate_record(p)}) for p in payloads]))
`;

function serverErrorFields(payloads: Record<string, unknown>[]): string[][] {
  const out = execFileSync("python3", ["-c", SERVER_VALIDATE], {
    input: JSON.stringify(payloads),
    encoding: "utf-8",
  });
  return JSON.parse(out) as string[][];
}

describe("validateRecord", () => {
  it("accepts a fully valid record", () => {
    expect(validateRecord(baseRecord())).toEqual([]);
  });

  it("flags the offending field", () => {
    const errors = validateRecord(baseRecord({ image_quality: "blurry" }));
    expect(errors.map((e) => e.field)).toContain("image_quality");
  });

  it("reports every broken field at once", () => {
    const errors = validateRecord(
      baseRecord({ case_id: "", defect_type: "x", confidence_gradcam: 0 }));
    const fields = new Set(errors.map((e) => e.field));
    expect(fields).toContain("case_id");
    expect(fields).toContain("defect_type");
    expect(fields).toContain("confidence_gradcam");
  });

  it("enforces the detected/visibility cross-field rule", () => {
    const bad = validateRecord(
      baseRecord({ detected_lime: false, visibility_lime: "clearly_visible" }));
    expect(bad.map((e) => e.field)).toContain("visibility_lime");
    const ok = validateRecord(
      baseRecord({ detected_lime: false, visibility_lime: "not_visible" }));
    expect(ok).toEqual([]);
  });

  it("matches the fixture verdicts", () => {
    for (const fixture of RECORD_FIXTURES) {
      const errors = validateRecord(fixture.payload);
      expect(errors.length === 0, `${fixture.name}: ${JSON.stringify(errors)}`)
        .toBe(fixture.valid);
    }
  });

  it("agrees with the server validator on every fixture, field by field", () => {
    const serverFields = serverErrorFields(RECORD_FIXTURES.map((f) => f.payload));
    RECORD_FIXTURES.forEach((fixture, i) => {
      const clientFields = [...new Set(validateRecord(fixture.payload).map((e) => e.field))]
        .sort();
      expect(clientFields, fixture.name).toEqual(serverFields[i]);
    });
  });
});
