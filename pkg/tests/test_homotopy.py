import numpy as np
import pytest

from qwalk import homotopy


def _circle_line(x, p):
    # x^2 + y^2 = p0, x - y = p1 (two solutions for generic p)
    x = np.atleast_2d(x)
    out = np.stack([x[:, 0] ** 2 + x[:, 1] ** 2 - p[0], x[:, 0] - x[:, 1] - p[1]], axis=1)
    return out[0] if out.shape[0] == 1 else out


def test_quadratic_coefficients_exact():
    rng = np.random.default_rng(0)
    H = rng.normal(size=(3, 3, 3))
    H = H + H.transpose(0, 2, 1)
    g = rng.normal(size=(3, 3))
    c = rng.normal(size=3)

    def fn(x, p):
        x = np.atleast_2d(x)
        out = 0.5 * np.einsum("pj,kjl,pl->pk", x, H, x) + x @ g.T + c
        return out[0] if out.shape[0] == 1 else out

    H2, g2, c2 = homotopy.quadratic_coefficients(fn, np.zeros(1), 3)
    assert np.allclose(H2, H) and np.allclose(g2, g) and np.allclose(c2, c)


def test_track_and_monodromy_small_system():
    p0, sols, _ = homotopy.monodromy_solve(_circle_line, 2, 2, seed=3)
    assert len(sols) == 2
    target = np.array([2.0, 0.0])  # x = y = +-1
    seg = homotopy.Segment(_circle_line, p0, target, 2)
    res = homotopy.track(seg, sols)
    assert not res.failed.any()
    ends = homotopy.polish(seg, res.endpoints)
    got = sorted(ends[:, 0].real)
    assert got == pytest.approx([-1, 1], abs=1e-10)
    assert np.abs(ends.imag).max() < 1e-10


def test_unique_rows():
    X = np.array([[0, 0], [1e-9, 0], [1, 1]], dtype=complex)
    kept, merged = homotopy.unique_rows(X, 1e-6)
    assert len(kept) == 2 and merged == 1
