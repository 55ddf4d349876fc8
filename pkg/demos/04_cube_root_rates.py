"""A reduced Monte Carlo of the n^(-1/3) rate and the finite-n versus limit comparison."""
import json

from levelsets.experiments import ExperimentConfig, collect_records, rate_summary, run_limit_comparison

cfg = ExperimentConfig(model="triangular1d", lam=0.5, n_grid=(1000, 8000, 64000), replications=150,
                       seed=11, experiment_id="demo", limit_draws=2000)
records = collect_records(cfg)
for name, s in rate_summary(records, cfg).items():
    norm = [round(r["median_normalized"], 3) for r in s["per_n"]]
    print(f"{name:12s} shrink factors {[round(f, 2) for f in s['shrink_factors']]}  n^(1/3) medians {norm}")
limit = run_limit_comparison(cfg, records=records)
print(json.dumps({k: round(v, 3) for k, v in limit.items() if k.startswith("ks_")}, indent=1))
