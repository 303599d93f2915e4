"""Smoke test for the pykernelwave extension.

Build and copy the module next to this script first:

    cargo build --release -p kernelwave-py --features extension-module
    cp target/release/libpykernelwave.so python/pykernelwave.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pykernelwave as kw  # noqa: E402


def close(a, b, tol):
    assert abs(a - b) < tol, f"{a} vs {b}"


def main():
    assert "airy-ext" in kw.KERNELS

    v = kw.eval_kernel("sine-ext", 0.0, 0.0, 0.5, 0.0)
    close(v.value.real, 2 / math.pi, 1e-13)
    assert v.converged and v.backend_used == "direct"
    close(float(kw.eval_kernel("s1", 0.0, 0.0, 1.0, 1.0)), 1 / math.pi, 1e-14)

    # Ai'(0)^2 on the diagonal at the origin.
    aip0 = -1 / (3 ** (1 / 3) * math.gamma(1 / 3))
    close(kw.eval_kernel("airy-ext", 0.0, 0.0, 0.0, 0.0).value.real, aip0**2, 1e-12)

    opts = kw.QuadOptions(rel_tol=1e-12)
    d = kw.eval_kernel("pearcey-ext", 0.1, -0.2, 0.3, -0.4, opts=opts)
    s = kw.eval_kernel("pearcey-ext", 0.1, -0.2, 0.3, -0.4, backend="saddle", opts=opts)
    close(d.value, s.value, 1e-10)

    try:
        kw.eval_kernel("transition-a", 0.0, 0.0, 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("missing a should be rejected")

    p = (0.2, -0.1, 0.0, 0.0)
    a = 8.0
    lhs = kw.rescaled_lhs("airy-to-s1", a, p).value.real
    n0 = kw.expansion_partial_sum("airy-to-s1", 0, p, a)
    n2 = kw.expansion_partial_sum("airy-to-s1", 2, p, a)
    close(kw.expansion_partial_sum("airy-to-s1", 1, p, a) - n0, kw.fluc("airy-to-s1", p, a), 1e-14)
    assert abs(lhs - n2) < abs(lhs - n0)

    e = kw.build_amplitudes("airy-to-s1", order=4)
    close(e.b[1][0], -1j / 6, 1e-13)
    assert json.loads(e.to_json())["order"] == 4
    close(kw.gauss_moment_c(0), math.sqrt(math.pi), 1e-14)
    assert kw.gauss_moment_b(1, 1) == 0

    slope, err = kw.fit_loglog_slope([1.0, 2.0, 4.0], [1.0, 0.125, 0.015625])
    close(slope, -3.0, 1e-12)

    t = kw.residual_study("pearcey-to-s2", (0.0, 0.0, 0.0, 0.0), a_values=[6.0, 8.0, 11.0, 15.0], n_max=1, mode="plain")
    assert len(t.residuals) == 2 and len(t.residuals[0]) == 4
    assert t.csv.startswith("transition,u,v,tau1,tau2,N,a,residual")

    pts = kw.level_curve("airy", 0)
    assert any(math.hypot(x, y - 1.0) < 0.03 for x, y in pts)

    print("pykernelwave smoke test passed")


if __name__ == "__main__":
    main()
