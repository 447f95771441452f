"""One-shot generator for stats_fixtures.json.

Run manually (requires scipy); the frozen JSON is committed so the test
suite never imports scipy. Samples cover n in [3, 50] and several shapes of
departure from normality, plus paired t-test cases.
"""

import json

import numpy as np
from scipy import stats as sps


def main() -> None:
    rng = np.random.default_rng(20250815)
    shapiro_cases = []
    for n in (3, 4, 5, 6, 8, 11, 12, 20, 35, 50):
        for dist in ("normal", "uniform", "expon", "lognorm"):
            if dist == "normal":
                x = rng.standard_normal(n)
            elif dist == "uniform":
                x = rng.uniform(-1, 1, n)
            elif dist == "expon":
                x = rng.exponential(1.0, n)
            else:
                x = rng.lognormal(0.0, 1.0, n)
            w, p = sps.shapiro(x)
            shapiro_cases.append(
                {"dist": dist, "n": n, "x": x.tolist(), "w": float(w), "p": float(p)}
            )

    ttest_cases = []
    for n in (4, 6, 10, 25):
        for shift in (0.0, 0.5):
            a = rng.standard_normal(n)
            b = a + shift + 0.3 * rng.standard_normal(n)
            t, p = sps.ttest_rel(a, b)
            ttest_cases.append(
                {"n": n, "a": a.tolist(), "b": b.tolist(), "t": float(t), "p": float(p)}
            )

    with open("stats_fixtures.json", "w") as fh:
        json.dump({"shapiro": shapiro_cases, "ttest_rel": ttest_cases}, fh, indent=1)
    print(f"wrote {len(shapiro_cases)} shapiro + {len(ttest_cases)} ttest cases")


if __name__ == "__main__":
    main()
