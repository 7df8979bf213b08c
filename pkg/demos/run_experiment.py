"""
A reduced experiment grid
=========================

Run the missing-data study with two seeds and print the per-level medians.
The same run is available from the command line as ``pes-nn run config.json``.
"""
import tempfile

from pesnn.experiments import config_from_dict, emit_reports, results_table, run_experiment, summarize

config = config_from_dict({
    "experiment": "exp1_or",
    "seeds": [0, 1],
    "levels": [0.0, 0.5],
})

outputs = run_experiment(config)
summary = summarize(results_table(outputs))

for row in summary["rows"]:
    print(f"missing {row['level']:.2f}  {row['model']:9s}"
          f"  AUC {row['value']['median']:.4f}"
          f"  sum dShap {row['sum_delta_shap']['median']:.3f}")

# results.csv, summary.json, per-model Shapley tables and a lock file
with tempfile.TemporaryDirectory() as out:
    for name, path in emit_reports(outputs, config, out).items():
        print(name, path.name)
