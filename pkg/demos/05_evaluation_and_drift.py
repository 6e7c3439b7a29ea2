"""Evaluation: masked fidelity metrics and cross-turn drift.

Runs the same small benchmark through two editors — the layer-scoped
oracle and a full-frame degrading baseline — and compares per-turn series.
The layer chain keeps background PSNR pinned at the cap with exactly zero
drift from the original. The full-frame chain scores a perfect IF/IC and a
high per-turn PSNR every single turn, yet its distance from the original
image climbs steadily: per-turn fidelity decouples from long-horizon
faithfulness, which is why the drift-from-original series is reported at
all (and why a per-turn PSNR series that only ever rises gets flagged).
"""

import tempfile

from editloop.metrics import drift_report
from editloop.planning import SessionConfig
from editloop.runner import evaluate_benchmark, generate_benchmark, run_benchmark

root = tempfile.mkdtemp(prefix="editloop-drift-")
bench = f"{root}/bench"
generate_benchmark(range(300, 306), bench, n_turns=5, canvas=(128, 128))
print(f"benchmark: 6 sessions x 5 turns under {bench}")

series = {}
for backend in ("symbolic", "degrading"):
    out = f"{root}/out-{backend}"
    run_benchmark(bench, out, SessionConfig(backend=backend, feather_sigma=0.0))
    report = evaluate_benchmark(bench, out)
    series[backend] = report["turn_series"]
    o = report["overall"]
    print(f"\n{backend} backend, overall means:")
    print(f"  IF {o['if_score']:.3f}  IC {o['ic_score']:.3f}  "
          f"PSNR_OM {o['psnr_om']:.2f}  SSIM_OM {o['ssim_om']:.4f}")
    print(f"  per-turn PSNR_OM: "
          f"{['%.2f' % v for v in report['turn_series']['psnr_om']]}")
    print(f"  drift vs original: "
          f"{['%.5f' % v for v in report['turn_series']['drift_from_root']]}")

report = drift_report(series)
for system, entry in report["systems"].items():
    drift = entry["stats"]["drift_from_root"]
    flag = "  << flagged: per-turn PSNR_OM rises every turn" \
        if entry["flagged"] else ""
    print(f"\n{system}: drift slope {drift['slope']:+.6f}, "
          f"max turn delta {drift['max_delta']:.6f}{flag}")
