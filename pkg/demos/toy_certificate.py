"""Schedules, the Neumann verdict and the toy end-to-end pipeline."""

from fractions import Fraction

from covergap.certificate import crossing_point, end_to_end_toy, neumann_verdict, rate_schedule

for flavor in ("bundle", "cover"):
    sch = rate_schedule(flavor, 10**9)
    print(f"{flavor}: T = {sch.T:.4f}, kappa = {sch.kappa:.4g}, gap bound {sch.gap_bound:.4g}")
print("kappa < 1/4 from log10 n =", f"{crossing_point('bundle')['log10_n']:.4g}", "(bundles)")

print(neumann_verdict(Fraction(3, 5), Fraction(1, 8)))

rep = end_to_end_toy(seed=0)
print(rep.to_text())
