import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate

from ambiport import _backend
from ambiport.errors import QuadratureError
from ambiport.quadrature import (
    COL_CLAIM,
    COL_GRAD,
    COL_SCORE,
    COL_UTILITY,
    QuadratureSpec,
    gauss_legendre,
    gaussian_smooth,
)

ALL = COL_CLAIM | COL_UTILITY | COL_GRAD | COL_SCORE

needs_compiled = pytest.mark.skipif(_backend.compiled_integrate is None,
                                    reason="compiled kernel not built")


def test_spec_limits():
    with pytest.raises(ValueError):
        QuadratureSpec(nodes=16)
    with pytest.raises(ValueError):
        QuadratureSpec(tail_width=6)
    with pytest.raises(ValueError):
        QuadratureSpec(panel_width=0)
    QuadratureSpec(nodes=40, tail_width=12)


def test_gauss_legendre_exactness():
    x, w = gauss_legendre(32)
    assert w.sum() == pytest.approx(2.0, rel=1e-14)
    assert np.dot(w, x ** 62) == pytest.approx(2 / 63, rel=1e-12)


@needs_compiled
@pytest.mark.parametrize("s", [1e-3, 0.5, 10.0])
def test_backends_agree(policy, s):
    y = np.linspace(-6, 10, 257)
    args = (y, s, policy.cuts, policy.params, ALL, policy.quadrature)
    a = gaussian_smooth(*args, adaptive=False, integrate=_backend.python_integrate)
    b = gaussian_smooth(*args, adaptive=False, integrate=_backend.compiled_integrate)
    scale = np.maximum(np.abs(a), np.abs(a[:, [0]]))
    assert np.all(np.abs(a - b) <= 1e-12 * scale + 1e-300)


@needs_compiled
def test_backends_agree_linear(merton_policy):
    y = np.linspace(-6, 10, 33)
    args = (y, 2.0, merton_policy.cuts, merton_policy.params, ALL, merton_policy.quadrature)
    a = gaussian_smooth(*args, adaptive=False, integrate=_backend.python_integrate)
    b = gaussian_smooth(*args, adaptive=False, integrate=_backend.compiled_integrate)
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_against_adaptive_scipy(policy):
    s, y = 3.0, 1.5
    p = policy.params
    T = policy.market.horizon
    th, lp = p.thetas, p.logp

    def claim(x):
        lf = np.logaddexp(lp[0] + th[0] * x - 0.5 * th[0] ** 2 * T, lp[1] + th[1] * x - 0.5 * th[1] ** 2 * T)
        yy = math.exp(p.logc - lf)
        if yy >= policy.envelope.y_hat:
            return 0.0
        return ((yy / p.delta) ** (1 / (p.alpha - 1)) - p.C) / p.delta + p.K

    def f(x):
        return claim(x) * math.exp(-(x - y) ** 2 / (2 * s)) / math.sqrt(2 * math.pi * s)

    L = 12 * math.sqrt(s)
    pts = [c for c in policy.cuts if y - L < c < y + L]
    ref, _ = integrate.quad(f, y - L, y + L, points=pts, limit=400, epsabs=1e-13, epsrel=1e-13)
    got = gaussian_smooth([y], s, policy.cuts, p, COL_CLAIM, policy.quadrature)[0, 0]
    assert got == pytest.approx(ref, rel=1e-10)


def test_splitting_matters(policy):
    s, y = 0.05, policy.cuts[0] + 0.01
    spec_split = policy.quadrature
    spec_blind = QuadratureSpec(split_at_breakpoints=False, max_refine=0)
    a = gaussian_smooth([y], s, policy.cuts, policy.params, COL_CLAIM, spec_split)[0, 0]
    b = gaussian_smooth([y], s, policy.cuts, policy.params, COL_CLAIM, spec_blind,
                        adaptive=False)[0, 0]
    assert abs(a - b) > 1e-6 * abs(a)


def test_non_convergence_raises(policy):
    spec = QuadratureSpec(split_at_breakpoints=False, max_refine=1, rtol=1e-15, atol=0)
    with pytest.raises(QuadratureError):
        gaussian_smooth([policy.cuts[0] + 0.003], 0.05, policy.cuts, policy.params, COL_CLAIM,
                        spec)


def test_forced_fallback():
    env = dict(os.environ, AMBIPORT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import ambiport; print(ambiport.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
