"""Smoke test for the retroscore Python module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import math
import os
import random
import tempfile

import retroscore as rs


def make_dataset(n=400, seed=5):
    rng = random.Random(seed)
    d, x, y = [], [], []
    for i in range(n):
        d.append(i % 2)
        x.append([rng.uniform(-1, 1)])
        y.append([float(rng.random() < 0.15) for _ in range(3)])
    return rs.Dataset(d, x, y)


def main():
    ds = make_dataset()
    assert (ds.n, ds.n0, ds.n1, ds.q) == (400, 200, 200, 3), ds

    for method, kw in [("fs", {}), ("rs", {"alpha_p": -3.0}), ("ss", {"prevalence": 0.05}),
                       ("rs-max", {}), ("ss-max", {})]:
        r = rs.run_test(ds, method, seed=11, **kw)
        assert 0.0 <= r.p_value <= 1.0, r
        assert r.statistic >= 0.0, r
        assert json.loads(r.to_json())["p_value"] == r.p_value
        print(f"{r.method:8s} statistic={r.statistic:.4f} p={r.p_value:.4f}")

    a = rs.Analysis(ds, alpha_p=-3.0)
    fs, rs_, ss = a.run("fs"), a.run("rs"), a.run("ss")
    assert ss.statistic == rs_.statistic + fs.statistic
    assert len(a.sigma11) == 1 and a.sigma22 > 0.0

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "data.csv")
        ds.write(path)
        back = rs.Dataset.read(path)
        assert back.y == ds.y and back.d == ds.d

    p, err = rs.mvn_cdf([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]])
    assert abs(p - 1.0 / 3.0) < 1e-6 and err >= 0.0
    p1, _ = rs.ssmax_sf(5.0, [[1.0]])
    assert abs(p1 - rs.ss_mixture_sf(5.0)) < 5e-4
    assert rs.rs_mixture_sf(0.0) == 1.0
    assert abs(rs.rs_mixture_sf(2.0) - 0.5 * math.erfc(1.0)) < 1e-10

    try:
        rs.run_test(ds, "rs")
    except ValueError:
        pass
    else:
        raise AssertionError("missing prevalence anchor accepted")

    sim = rs.simulate("C1", 0, reps=20, seed=3, methods="FS,RS(alpha_p)", n0=200, n1=200)
    table = sim.table()
    assert [c["method"] for c in table] == ["FS", "RS(alpha_p)"]
    assert len(sim.p_values("FS")) == 20 - table[0]["skipped"]
    assert all(not math.isnan(p) for p in sim.p_values("RS(alpha_p)"))
    again = rs.simulate("C1", 0, reps=20, seed=3, methods="FS,RS(alpha_p)", n0=200, n1=200)
    assert again.to_json() == sim.to_json()

    print("smoke test OK")


if __name__ == "__main__":
    main()
