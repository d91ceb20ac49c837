#!/usr/bin/env python3
"""Smoke test for the rqmap_py extension module.

Builds nothing itself: run `cargo build -p rqmap-python` (or --release)
first, then `python3 python/smoke_test.py`. The script locates the cdylib
in target/, loads it directly and exercises the bound API.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile


def load_module():
    root = pathlib.Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("librqmap_py.so", "rqmap_py.dll", "librqmap_py.dylib")
    ]
    lib = next((c for c in candidates if c.exists()), None)
    if lib is None:
        sys.exit("build the extension first: cargo build -p rqmap-python")
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="rqmap_py_"))
    target = tmp / ("rqmap_py" + (".so" if lib.suffix != ".dll" else ".pyd"))
    shutil.copyfile(lib, target)
    spec = importlib.util.spec_from_file_location("rqmap_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    rq = load_module()

    # Critical-value chart round trip.
    f = rq.QuadraticMap(1.0, 1.0)
    assert f.critical_values() == (-1.0, 3.0)
    g = rq.QuadraticMap.from_critical_values(0.5, 4.5)
    v1, v2 = g.critical_values()
    approx(v1, 0.5)
    approx(v2, 4.5)
    assert g.classify() == "unimodal"
    assert g.essential_critical_point() == -1.0

    # Frozen moduli coordinates at (a, b) = (2, 1).
    s1, s2 = rq.QuadraticMap(2.0, 1.0).sigma()
    approx(s1, 6.0, 1e-9)
    approx(s2, 10.75, 1e-9)

    # Region tags.
    assert rq.QuadraticMap(2.5, 0.0).classify() == "monotonic"
    assert rq.QuadraticMap(0.1, 5.0).classify().startswith("bimodal")

    # Normal form: admissibility, moduli band, entropy cap.
    assert rq.normal_form_admissible(-1.5, -1.5)
    assert not rq.normal_form_admissible(-0.5, -0.5)
    sigma1, _ = rq.normal_form_sigma(-1.5, -1.5)
    assert -6.0 - 1e-6 <= sigma1 <= 2.0 + 1e-6
    est = rq.normal_form_entropy(-1.5, -1.5)
    assert 0.0 <= est["value"] <= math.log(2.0) + 1e-3
    assert est["method"] == "lap"

    # Entropy of a unimodal rational map.
    est = rq.QuadraticMap.from_critical_values(3.0, 0.25).real_entropy()
    assert 0.0 <= est["value"] <= math.log(2.0) + 1e-3

    # Band partition.
    assert rq.band_classify(0.4812) == 4
    assert rq.band_classify(math.log(2.0)) == 6

    # PCF scan: positive transversality quotients.
    points = rq.scan_pcf(1.5, 6.0, -0.95, 0.95, n_max=2, m_max=4, nx=60, ny=40)
    assert len(points) >= 1
    assert all(p["quotient"] > 0.0 for p in points)

    # The period-2 bone through (2, -2/3) is an arc between the two
    # boundary lines.
    bone = rq.trace_bone(2.0, -2.0 / 3.0, 2)
    assert bone["kind"] == "arc"
    assert set(bone["endpoints"]) == {"sigma_two", "sigma_minus_six"}
    assert bone["arclength"] > 3.0
    assert len(bone["points"]) > 100

    print("smoke test passed:", len(points), "PCF points,",
          len(bone["points"]), "bone nodes")


if __name__ == "__main__":
    main()
