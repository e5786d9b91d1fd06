"""Seed a temporary audit store with pending cases and serve the review API.

Used by the frontend test suite so the UI is exercised against the real
service, not a mock. Usage: python3 serve_fixture.py PORT N_CASES [SEED]
"""

import random
import sys
import tempfile
from pathlib import Path

import uvicorn

from weldlab.ddia.api import create_app
from weldlab.ddia.store import AuditCase, AuditStore

CLASS_NAMES = ("crack", "lack_of_penetration", "no_defect", "porosity")

# 1x1 black PNG, enough for overlay <img> endpoints
PNG = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c489"
    "0000000d4944415478da63640060000000020001e221bc330000000049454e44ae426082")


def main() -> None:
    port = int(sys.argv[1])
    n_cases = int(sys.argv[2])
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 0
    rng = random.Random(seed)

    workdir = Path(tempfile.mkdtemp(prefix="weldlab-ui-fixture-"))
    overlays = workdir / "overlays"
    overlays.mkdir()
    store = AuditStore(workdir / "audit.db")
    for i in range(n_cases):
        case_id = f"case-{i:03d}"
        probs = [rng.random() for _ in CLASS_NAMES]
        total = sum(probs)
        probs = [p / total for p in probs]
        for suffix in ("gradcam", "lime"):
            (overlays / f"{case_id}_{suffix}.png").write_bytes(PNG)
        store.add_case(AuditCase(
            case_id=case_id,
            image_path=f"/films/{case_id}.png",
            pred_class=CLASS_NAMES[probs.index(max(probs))],
            probabilities=probs,
            gradcam_overlay_path=f"{case_id}_gradcam.png",
            lime_overlay_path=f"{case_id}_lime.png"))

    uvicorn.run(create_app(store, overlay_root=overlays),
                host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
