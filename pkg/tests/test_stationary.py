import numpy as np
import pytest

from convgp.stationary import StationaryKernel, load_kernel, save_kernel


def _toy_kernel(dims=1, half=4):
    lags = np.arange(-half, half + 1)
    if dims == 1:
        vals = np.exp(-(lags**2) / 8.0)
    else:
        vals = np.exp(-(lags[:, None] ** 2 + lags[None, :] ** 2) / 8.0)
    return StationaryKernel(dims, half, 2.0 * vals)


class TestInvariants:
    def test_variance_is_lag_zero(self):
        k = _toy_kernel()
        assert k.variance == k.at(0) == 2.0

    def test_asymmetric_values_rejected(self):
        vals = np.zeros(5)
        vals[2] = 1.0
        vals[3] = 0.5
        with pytest.raises(ValueError, match="K\\(r\\) = K\\(-r\\)"):
            StationaryKernel(1, 2, vals)

    def test_bound_violation_rejected(self):
        vals = np.zeros(5)
        vals[2] = 1.0
        vals[1] = vals[3] = 1.5
        with pytest.raises(ValueError, match="K\\(0\\)"):
            StationaryKernel(1, 2, vals)

    def test_nonpositive_variance_rejected(self):
        with pytest.raises(ValueError):
            StationaryKernel(1, 2, np.zeros(5))

    def test_values_read_only(self):
        k = _toy_kernel()
        with pytest.raises(ValueError):
            k.values[0] = 3.0

    def test_out_of_support_lag(self):
        k = _toy_kernel(half=4)
        with pytest.raises(ValueError, match="support"):
            k.at(5)


class TestGram:
    def test_white_gram_is_scaled_identity(self):
        vals = np.zeros(17)
        vals[8] = 3.0
        k = StationaryKernel(1, 8, vals)
        pts = np.array([0, 2, 3, 7])
        np.testing.assert_array_equal(k.gram(pts), 3.0 * np.eye(4))

    def test_two_point_gram(self):
        k = _toy_kernel()
        g = k.gram(np.array([0, 3]))
        assert g[0, 0] == g[1, 1] == k.variance
        assert g[0, 1] == g[1, 0] == k.at(3)

    def test_gram_2d(self):
        k = _toy_kernel(dims=2)
        pts = np.array([[0, 0], [1, 2], [3, 3]])
        g = k.gram(pts)
        assert g.shape == (3, 3)
        assert g[0, 1] == k.at((-1, -2))
        np.testing.assert_allclose(g, g.T)

    def test_gram_psd_on_random_point_sets(self):
        k = _toy_kernel(half=8)
        rng = np.random.default_rng(0)
        for _ in range(50):
            pts = rng.integers(0, 8, size=6)
            w = np.linalg.eigvalsh(k.gram(pts))
            assert w.min() >= -1e-8 * k.variance

    def test_span_beyond_support_rejected(self):
        k = _toy_kernel(half=4)
        with pytest.raises(ValueError, match="support"):
            k.gram(np.array([0, 5]))

    def test_cross_matches_gram_blocks(self):
        k = _toy_kernel(half=6)
        a = np.array([0, 1, 4])
        b = np.array([2, 3])
        full = k.gram(np.concatenate([a, b]))
        np.testing.assert_array_equal(k.cross(a, b), full[:3, 3:])


class TestSerialization:
    @pytest.mark.parametrize("dims", [1, 2])
    def test_text_roundtrip_exact(self, dims, tmp_path):
        k = _toy_kernel(dims=dims)
        path = tmp_path / "k.kern"
        save_kernel(k, path)
        k2 = load_kernel(path)
        assert k2.dims == k.dims and k2.half_width == k.half_width
        np.testing.assert_array_equal(k2.values, k.values)

    def test_json_roundtrip(self):
        k = _toy_kernel(dims=2)
        k2 = StationaryKernel.from_json_dict(k.to_json_dict())
        np.testing.assert_array_equal(k2.values, k.values)

    def test_reject_garbage(self, tmp_path):
        path = tmp_path / "bad.kern"
        path.write_text("not a kernel\n1 2 3\n")
        with pytest.raises(ValueError):
            load_kernel(path)
