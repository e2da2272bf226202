"""
Friedman test and control-method post-hoc p-values
===================================================

Accuracy gains of five method combinations over twelve evaluation units
(made up here). The best-ranked combination becomes the control and every
other combination is compared against it with Holm, Hochberg and Hommel
adjustments.
"""

import numpy as np

from psdselect import ComparisonTable, friedman_test, posthoc_vs_control, significance_report

rng = np.random.default_rng(2)
methods = ("LR + Burg", "mRMR + Burg", "FDR + Burg", "LR + Welch", "FDR + Welch")
shift = np.array([6.0, 4.5, 1.0, 3.0, 0.0])
gains = shift[:, None] + 2.0 * rng.standard_normal((5, 12))
table = ComparisonTable(methods, tuple(f"u{j}" for j in range(12)), gains)

fr = friedman_test(table)
print(f"Friedman chi2 = {fr.statistic:.3f}, df = {fr.df}, p = {fr.pvalue:.3g}")
for m, r in sorted(zip(fr.methods, fr.average_ranks), key=lambda t: t[1]):
    print(f"  {m:12s} average rank {r:.2f}")

ph = posthoc_vs_control(fr)
print()
print(ph.to_csv(), end="")

flags = significance_report(ph, alpha=0.05)
print()
print("differ from", ph.control, "at 0.05 (Hommel):", [c.method for c in flags if c.significant])
