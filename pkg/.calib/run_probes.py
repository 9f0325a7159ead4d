"""Sequential convergence probes; writes one JSON per probe plus a CSV log."""
import json
import time
import traceback

from mhdpinn.benchmarks import run_benchmark
from mhdpinn.training import Schedule

BASE = "/root/pkg/.calib"

PROBES = [
    ("hartmann_b", dict(case="hartmann", formulation="b",
                        schedule=Schedule(n_adam=2000, n_lbfgs_max=1500))),
    ("unsteady2d_b", dict(case="unsteady2d", formulation="b",
                          schedule=Schedule(n_adam=2000, n_lbfgs_max=1500))),
    ("steady2d_a2_desk", dict(case="steady2d", formulation="a2",
                              schedule=Schedule(n_adam=5000, n_lbfgs_max=2000))),
]

for name, kw in PROBES:
    t0 = time.time()
    out = {"probe": name}
    try:
        res = run_benchmark(architecture="mhdnet", seed=0,
                            log_path=f"{BASE}/{name}_log.csv", **kw)
        out["seconds"] = time.time() - t0
        out["errors"] = {k: float(v) for k, v in res.report.errors.items()}
        out["per_slice"] = {str(t): {k: float(v) for k, v in d.items()}
                            for t, d in res.report.per_slice.items()}
        out["aborted"] = bool(res.log.aborted)
        out["n_records"] = len(res.log.records)
        out["final_total"] = float(res.log.final_total)
    except Exception:
        out["seconds"] = time.time() - t0
        out["error_trace"] = traceback.format_exc()
    with open(f"{BASE}/{name}.json", "w") as fh:
        json.dump(out, fh, indent=1)
    print(name, "done", flush=True)
print("all probes done", flush=True)
