"""Smoke test for the pymtdrot bindings.

Run with `python3 python/smoke_test.py` or `pytest python/`.
"""

import sys

import numpy as np

import pymtdrot as m


def wrapped(x, length):
    return x % length


def test_triple_correlation_against_numpy():
    rng = np.random.default_rng(1)
    n = 3
    f = rng.standard_normal(2 * n)
    v = np.array(m.auto3_v(f.tolist())).reshape(4 * n, 4 * n)
    # Zero-padded copy, averaged over cyclic shifts and pixels.
    expected = np.zeros_like(v)
    for tau in range(2 * n):
        g = np.zeros(8 * n)
        g[:2 * n] = np.roll(f, -tau)
        for x1 in range(-2 * n, 2 * n):
            for x2 in range(-2 * n, 2 * n):
                s = sum(g[x] * g[(x + x1) % (8 * n)] * g[(x + x2) % (8 * n)] for x in range(2 * n))
                expected[wrapped(x1, 4 * n), wrapped(x2, 4 * n)] += s / (2 * n) ** 2
    assert np.max(np.abs(v - expected)) < 1e-12


def test_round_trip():
    f = [0.4, -1.1, 0.9, 1.7, -0.6, 0.2, 0.05, -0.3]
    g = m.invert_v(m.auto3_v(f), 4)
    assert m.align_error_1d(g, f) < 1e-8


def test_autocorrelations_against_numpy():
    rng = np.random.default_rng(2)
    n = 2
    pix = rng.standard_normal(40)
    a = np.array(m.autocorr3_1d(pix.tolist(), n)).reshape(4 * n, 4 * n)
    for x1 in range(-2 * n, 2 * n):
        for x2 in range(-2 * n, 2 * n):
            s = np.mean(pix * np.roll(pix, -x1) * np.roll(pix, -x2))
            assert abs(a[wrapped(x1, 4 * n), wrapped(x2, 4 * n)] - s) < 1e-12

    side = 16
    img = rng.standard_normal((side, side))
    b = np.array(m.autocorr3_2d(img.ravel().tolist(), side, n)).reshape([4 * n] * 4)
    pad = np.zeros((3 * side, 3 * side))
    pad[side:2 * side, side:2 * side] = img

    def shifted(dr, dc):
        return pad[side + dr:2 * side + dr, side + dc:2 * side + dc]

    for x1 in [(0, 0), (1, -2), (-3, 1)]:
        for x2 in [(0, 1), (2, 2), (-1, -3)]:
            s = np.sum(img * shifted(*x1) * shifted(*x2)) / side ** 2
            got = b[wrapped(x1[0], 4 * n), wrapped(x1[1], 4 * n), wrapped(x2[0], 4 * n), wrapped(x2[1], 4 * n)]
            assert abs(got - s) < 1e-12


def test_noiseless_measurement_pipeline():
    f = [0.3, -1.2, 0.8, 2.0, -0.5, 0.1]
    mics = [m.simulate_1d(f, 4096, 60, 0.0, 7, i, balanced=True) for i in range(2)]
    v, _ = m.estimate_v(mics, 3, 0.0, 3 * 60 / 4096)
    assert m.align_error_1d(m.invert_v(v, 3), f) < 1e-6


def test_forward_map():
    basis = m.Basis(3, 10)
    model = m.ForwardModel(basis)
    v = basis.random_coeffs(3)
    s = np.array(model.forward(v)).reshape([basis.side ** 2] * 2)
    assert np.allclose(s, s.T, rtol=0, atol=1e-10 * np.abs(s).max())
    rotated = np.array(model.forward(basis.steer(v, 1.3))).reshape(s.shape)
    assert np.abs(rotated - s).max() <= 1e-10 * np.abs(s).max()
    image = np.array(basis.render(v))
    assert np.all(np.isfinite(image))


def test_errors():
    try:
        m.rotate1d([1.0, 2.0], 5)
    except ValueError:
        pass
    else:
        raise AssertionError("shift out of range accepted")


def test_selftest():
    for name, value, tol, passed in m.selftest():
        assert passed, (name, value, tol)


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            try:
                fn()
                print(f"ok   {name}")
            except Exception as e:  # noqa: BLE001
                failed += 1
                print(f"FAIL {name}: {e!r}")
    sys.exit(1 if failed else 0)
