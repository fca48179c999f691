import numpy as np
import pytest

from lrkrylov.linops import unvec
from lrkrylov.lowrank import svd
from lrkrylov.problems import (
    export_problem,
    inpainting_problem,
    normalized_spectrum,
    phantom_problem,
    read_pgm,
    relative_error,
    star_problem,
    write_pgm,
)


def numeric_rank(x, n):
    s = svd(unvec(x, n)).sigma
    return int(np.sum(s > 1e-10 * s[0]))


class TestStar:
    def test_exact_rank_two(self):
        prob = star_problem(32, seed=0)
        assert numeric_rank(prob.x_exact, 32) == 2

    def test_noise_level_exact(self):
        prob = star_problem(32, noise_level=1e-3, seed=1)
        got = np.linalg.norm(prob.b - prob.b_exact)
        want = 1e-3 * np.linalg.norm(prob.b_exact)
        assert abs(got - want) <= 1e-12 * want

    def test_consistent_data(self):
        prob = star_problem(32, seed=2)
        assert np.allclose(prob.op.matvec(prob.x_exact), prob.b_exact,
                           atol=1e-12)

    def test_zero_noise(self):
        prob = star_problem(32, noise_level=0.0, seed=3)
        assert np.array_equal(prob.b, prob.b_exact)

    def test_deterministic(self):
        a = star_problem(32, seed=4)
        b = star_problem(32, seed=4)
        assert np.array_equal(a.b, b.b)
        assert np.array_equal(a.x_exact, b.x_exact)

    def test_different_seeds_differ(self):
        a = star_problem(32, seed=5)
        b = star_problem(32, seed=6)
        assert not np.array_equal(a.b, b.b)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            star_problem(8)

    def test_noise_is_white(self):
        # adjacent noise samples should be uncorrelated
        prob = star_problem(100, noise_level=1e-2, seed=7)
        eta = prob.b - prob.b_exact
        eta = eta / np.linalg.norm(eta)
        assert abs(float(eta[:-1] @ eta[1:])) <= 0.05


class TestPhantom:
    def test_exact_rank_four(self):
        prob = phantom_problem(64, seed=0)
        assert numeric_rank(prob.x_exact, 64) == 4

    def test_limited_angle_underdetermined(self):
        prob = phantom_problem(32, n_angles=20, seed=1)
        assert prob.op.rows == 20 * 32
        assert prob.op.rows < prob.op.cols

    def test_angle_span_validated(self):
        with pytest.raises(ValueError):
            phantom_problem(32, angle_span_degrees=0.0)
        with pytest.raises(ValueError):
            phantom_problem(32, angle_span_degrees=180.0)

    def test_detector_count_override(self):
        prob = phantom_problem(32, n_angles=10, detector_count=48, seed=2)
        assert prob.op.rows == 480


class TestInpainting:
    def test_rank_cap_enforced(self):
        prob = inpainting_problem("peppers-like", n=48, rank_cap=10, seed=0)
        assert numeric_rank(prob.x_exact, 48) <= 10

    def test_missing_fraction_random(self):
        prob = inpainting_problem("house-like", n=64,
                                  missing_fraction=0.4, seed=1)
        frac = 1.0 - prob.op.rows / prob.op.cols
        assert abs(frac - 0.4) <= 0.05

    def test_structured_pattern(self):
        prob = inpainting_problem("house-like", n=64,
                                  missing_fraction=0.3,
                                  pattern="structured", seed=2)
        assert prob.op.rows < prob.op.cols

    def test_unknown_pattern_rejected(self):
        with pytest.raises(ValueError):
            inpainting_problem("house-like", n=32, pattern="swirl")

    def test_rank_cap_above_n_rejected(self):
        with pytest.raises(ValueError):
            inpainting_problem("house-like", n=32, rank_cap=64)

    def test_image_from_pgm_file(self, tmp_path):
        X = np.random.default_rng(3).random((32, 32))
        path = tmp_path / "img.pgm"
        write_pgm(path, X)
        prob = inpainting_problem(str(path), n=32, rank_cap=20, seed=4)
        assert prob.op.cols == 1024

    def test_wrong_image_size_rejected(self, tmp_path):
        path = tmp_path / "img.pgm"
        write_pgm(path, np.zeros((16, 16)))
        with pytest.raises(ValueError):
            inpainting_problem(str(path), n=32)


class TestMetrics:
    def test_relative_error_examples(self):
        assert relative_error([1.0, 0.0], [1.0, 0.0]) == 0.0
        assert np.isclose(relative_error([2.0, 0.0], [1.0, 0.0]), 1.0)

    def test_relative_error_validation(self):
        with pytest.raises(ValueError):
            relative_error([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            relative_error([1.0, 0.0], [0.0, 0.0])

    def test_normalized_spectrum(self):
        x = np.zeros(16)
        x[0], x[5] = 3.0, 1.5  # diag entries of unvec
        s = normalized_spectrum(x)
        assert np.isclose(s[0], 1.0) and np.isclose(s[1], 0.5)
        assert normalized_spectrum(x, drop_below=0.6).size == 1


class TestPgm:
    def test_round_trip(self, tmp_path):
        X = np.random.default_rng(0).random((12, 17))
        path = tmp_path / "x.pgm"
        write_pgm(path, X)
        Y = read_pgm(path)
        assert Y.shape == X.shape
        # 16-bit quantization of the [min, max] range
        want = (X - X.min()) / (X.max() - X.min())
        assert np.abs(Y - want).max() <= 1.0 / 65535

    def test_constant_image(self, tmp_path):
        path = tmp_path / "c.pgm"
        write_pgm(path, np.full((4, 4), 3.7))
        assert np.all(read_pgm(path) == 0.0)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00")
        with pytest.raises(ValueError):
            read_pgm(path)


def test_export_problem(tmp_path):
    prob = star_problem(16, seed=0)
    export_problem(prob, tmp_path / "out", params={"n": 16})
    assert (tmp_path / "out" / "problem.json").exists()
    b = np.loadtxt(tmp_path / "out" / "b.txt")
    assert np.array_equal(b, prob.b)
