"""Tour of the verification oracles.

Each check pits an implementation path against an independent route to the
same number: variational derivatives against finite differences of the
energy, the stress-divergence identity against its expanded form, the time
stepper against a closed-form solution of the homogeneous reduction, and
the theta-scheme against its theoretical convergence order.  The same
suite backs `sim verify --all`.
"""

from lcemul.verify import default_suite

for group in ("gradient", "stress", "oracle", "order"):
    print(f"\n=== {group} ===")
    for res in default_suite(group):
        mark = "ok " if res.passed else "FAIL"
        print(f"  [{mark}] {res.name}")
        print(f"        measured {res.measured:.9g}  expected {res.expected:.9g}  "
              f"tolerance {res.tolerance:g}")
        if res.details:
            print(f"        {res.details}")
