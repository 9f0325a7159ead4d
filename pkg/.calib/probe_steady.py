import json, time
import numpy as np
from mhdpinn.benchmarks import benchmark_case, run_benchmark
from mhdpinn.training import Schedule

t0 = time.time()
res = run_benchmark('steady2d', 'a2', 'mhdnet',
                    schedule=Schedule(n_adam=800, n_lbfgs_max=400),
                    seed=0, log_path='/root/pkg/.calib/probe_steady_log.csv')
out = {
    'seconds': time.time() - t0,
    'errors': res.report.errors,
    'final_total': res.log.records[-1].total if res.log.records else None,
    'aborted': res.log.aborted,
    'n_records': len(res.log.records),
}
with open('/root/pkg/.calib/probe_steady.json', 'w') as fh:
    json.dump(out, fh, indent=1)
print(json.dumps(out, indent=1))
