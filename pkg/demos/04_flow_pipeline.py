"""
The staged pipeline on a small flow table
=========================================

The same stages the command line runs, called from Python on a synthetic
table shaped like UNSW-NB15: cleaning, minority removal, oversampling,
stratified holdout, rankings, the union filter, elimination, training and
evaluation.  Each stage writes its artifacts and a content hash into
``manifest.json``.
"""

# %%
import tempfile
from pathlib import Path

from igrf import pipeline

root = Path(__file__).resolve().parent.parent
out = Path(tempfile.mkdtemp(prefix="igrf-flow-"))
cfg = pipeline.with_overrides(pipeline.load_config(root / "tests" / "data" / "flow.ini"),
                              out_dir=out)

# %%
# Preprocessing reports rows dropped for missing values and the class counts
# of each split.
summary = pipeline.cmd_preprocess(cfg)
print(summary["rows_removed_by_cleaning"])
print(summary["class_counts"]["validation"])

# %%
# Stage 1, then elimination from the union subset.
union = pipeline.cmd_filter(cfg, "union")
print("union:", union.retained)
selected = pipeline.cmd_rfe(cfg)
print("selected:", selected.retained)

# %%
# Train on the selection and score the held-out test half.
pipeline.cmd_train(cfg, "igrf_rfe")
print(pipeline.cmd_evaluate(cfg, "igrf_rfe").table())

# %%
# The markdown report gathers everything above.
print(pipeline.cmd_report(cfg))
print("artifacts in", out)
