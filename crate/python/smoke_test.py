"""Smoke test for the Python extension.

Build and install it first, e.g. ``pip install ./crates/python`` (needs
maturin), then run ``python python/smoke_test.py``.
"""

import math
import os
import sys
import tempfile

import panelgmrf_py as pg

SIM = """
spatial_max_edge = 0.005

[[windows]]
site = 1
location = [0.04, 0.05]
start_day = 1
days = 7
series = 2

[[windows]]
site = 2
location = [0.06, 0.045]
start_day = 50
days = 7
series = 2

[[windows]]
site = 3
location = [0.05, 0.06]
start_day = 1
days = 30
"""

FIT = """
lattice_resolution = 8

[model]
max_edge = 0.01

[optimizer]
schedule = [1e-5]
max_evals = 80
"""


def main() -> int:
    q = pg.penalty_matrix(2, 5)
    assert q[0] == [6, -4, 1, 1, -4], q[0]
    assert all(abs(sum(row)) < 1e-12 for row in pg.weekly_penalty())

    rows = pg.basis([1.0 + i * 364 / 99 for i in range(100)])
    assert all(len(r) == 7 and math.isclose(sum(r), 1.0) for r in rows)

    median, lower, upper = pg.lognormal_summary(8.796, 0.25 / 3.92)
    assert (round(median), round(lower), round(upper)) == (6608, 5831, 7488)

    with tempfile.TemporaryDirectory() as d:
        sim, fit = os.path.join(d, "sim.toml"), os.path.join(d, "fit.toml")
        with open(sim, "w") as f:
            f.write(SIM)
        with open(fit, "w") as f:
            f.write(FIT)
        data = os.path.join(d, "data.csv")
        n = pg.simulate(data, seed=2, config=sim)
        res = pg.fit(data, os.path.join(d, "archive"), config=fit)
        trend = pg.Archive.read(os.path.join(d, "archive")).trend()
        plots = pg.plot(os.path.join(d, "archive"), "hrofweek")
        print(res)
        print(f"{n} rows, {len(trend)} trend rows, {len(plots)} plot(s), sites {res.sites}")
        assert len(trend) == 168 and len(plots) == 1
        assert len(res.trend(site=res.sites[0])) == 168

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
