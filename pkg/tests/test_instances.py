import json

import numpy as np
import pytest

from rpdhg_lab.errors import CertificationError, InstanceParseError, InstanceValidationError
from rpdhg_lab.instances import (LpInstance, MatrixDistribution, SolutionDistribution,
                                 assemble, disparity_ratio_level, gen_disparity,
                                 gen_instance, load_instance, sample_matrix,
                                 sample_solution, save_instance, validate_instance,
                                 write_mps)

GAUSS = MatrixDistribution(kind="gaussian")
FOLDED = SolutionDistribution(kind="folded_gaussian")


class TestSampleMatrix:
    def test_rademacher_support(self):
        A = sample_matrix(2, 4, MatrixDistribution(kind="rademacher"), seed=7)
        assert set(np.unique(A)) <= {-1.0, 1.0}

    def test_gaussian_moments(self):
        # law-of-large-numbers bounds at 4 sigma for 50x100 = 5000 entries
        A = sample_matrix(50, 100, GAUSS, seed=11)
        assert abs(A.mean()) <= 4.0 / np.sqrt(A.size)
        assert abs(A.var() - 1.0) <= 0.1

    def test_uniform_unit_variance(self):
        A = sample_matrix(40, 80, MatrixDistribution(kind="uniform_unit_var"), seed=3)
        assert np.all(np.abs(A) <= np.sqrt(3.0) + 1e-12)
        assert abs(A.var() - 1.0) <= 0.1

    def test_deterministic(self):
        A1 = sample_matrix(5, 9, GAUSS, seed=123)
        A2 = sample_matrix(5, 9, GAUSS, seed=123)
        assert A1.tobytes() == A2.tobytes()

    def test_seed_changes_stream(self):
        A1 = sample_matrix(5, 9, GAUSS, seed=123)
        A2 = sample_matrix(5, 9, GAUSS, seed=124)
        assert A1.tobytes() != A2.tobytes()

    def test_shape_precondition(self):
        with pytest.raises(ValueError):
            sample_matrix(4, 4, GAUSS, seed=0)
        with pytest.raises(ValueError):
            sample_matrix(0, 4, GAUSS, seed=0)


class TestSampleSolution:
    def test_folded_gaussian_pattern(self):
        x_hat, s_hat = sample_solution(3, 5, FOLDED, seed=5)
        assert np.all(x_hat[:3] > 0)
        assert np.array_equal(x_hat[3:], np.zeros(5))
        assert np.array_equal(s_hat[:3], np.zeros(3))
        assert np.all(s_hat[3:] > 0)

    def test_fixed_vector(self):
        dist = SolutionDistribution(kind="fixed_vector", fixed_values=np.ones(3))
        x_hat, s_hat = sample_solution(2, 1, dist, seed=0)
        assert np.array_equal(x_hat, [1.0, 1.0, 0.0])
        assert np.array_equal(s_hat, [0.0, 0.0, 1.0])

    def test_fixed_vector_wrong_length(self):
        dist = SolutionDistribution(kind="fixed_vector", fixed_values=np.ones(4))
        with pytest.raises(ValueError):
            sample_solution(2, 1, dist, seed=0)

    def test_disparity_level_blocks(self):
        dist = SolutionDistribution(kind="disparity_level", level_l=1)
        x_hat, s_hat = sample_solution(4, 4, dist, seed=0)
        assert np.array_equal(x_hat[:4], [0.25, 0.25, 1.0, 1.0])
        assert np.array_equal(s_hat[4:], [0.25, 0.25, 1.0, 1.0])

    def test_disparity_requires_square_split(self):
        dist = SolutionDistribution(kind="disparity_level", level_l=1)
        with pytest.raises(ValueError):
            sample_solution(4, 3, dist, seed=0)


class TestAssemble:
    def test_hand_products(self):
        A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        inst = assemble(A, np.array([1.0, 2.0, 0.0]), np.array([0.0, 0.0, 3.0]))
        assert np.array_equal(inst.b, [1.0, 2.0])
        assert np.array_equal(inst.c, [0.0, 0.0, 3.0])
        assert np.array_equal(inst.y_star, [0.0, 0.0])
        assert inst.certified

    def test_presolve_residual_and_dual_feasibility(self):
        A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        inst = assemble(A, np.array([1.0, 2.0, 0.0]), np.array([0.0, 0.0, 3.0]),
                        presolve=True)
        assert np.linalg.norm(A @ inst.c) <= 1e-8 * np.linalg.norm(A) * (1 + np.linalg.norm(inst.c))
        assert np.linalg.norm(A.T @ inst.y_star + inst.s_star - inst.c) <= 1e-10 * (1 + np.linalg.norm(inst.c))

    def test_complementarity_exact(self):
        inst = gen_instance(6, 13, GAUSS, FOLDED, seed=2, presolve=True)
        assert float(inst.x_star @ inst.s_star) == 0.0

    def test_disjoint_support_required(self):
        A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        with pytest.raises(ValueError):
            assemble(A, np.array([1.0, 2.0, 0.5]), np.array([0.0, 0.0, 3.0]))

    def test_singular_basis_rejected(self):
        A = np.array([[1.0, 1.0, 0.5, 0.2], [2.0, 2.0, 0.1, 0.3]])  # B has rank 1
        with pytest.raises(CertificationError):
            assemble(A, np.array([1.0, 1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0, 1.0]))

    def test_zero_component_not_certified(self):
        A = sample_matrix(2, 4, GAUSS, seed=9)
        inst = assemble(A, np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0, 1.0]))
        assert not inst.certified  # strict complementarity fails; basis still full-rank

    def test_shuffle_consistency(self):
        inst = gen_instance(4, 9, GAUSS, FOLDED, seed=31, presolve=True, shuffle=True)
        basis = set(int(i) for i in inst.basis)
        assert basis != set(range(4))  # permuted with overwhelming probability
        assert set(np.nonzero(inst.x_star)[0]) == basis
        validate_instance(inst)


class TestGenDisparity:
    def test_phi_level_zero(self):
        assert disparity_ratio_level(10, 0) == 1.0

    def test_phi_level_one_m50(self):
        assert disparity_ratio_level(50, 1) == pytest.approx(2.5)  # mean(u)/min(u) of the generated components

    def test_phi_level_ten_large(self):
        assert disparity_ratio_level(50, 10) >= 5e5

    def test_instance_min_component(self):
        inst, phi = gen_disparity(6, 2, GAUSS, seed=3, presolve=True)
        u = inst.x_star + inst.s_star
        assert u.min() == pytest.approx(4.0**-2)
        assert phi == pytest.approx(disparity_ratio_level(6, 2))
        assert inst.n == 12 and inst.certified

    def test_preconditions(self):
        with pytest.raises(ValueError):
            gen_disparity(1, 0, GAUSS, seed=0)
        with pytest.raises(ValueError):
            gen_disparity(4, -1, GAUSS, seed=0)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        inst = gen_instance(5, 11, GAUSS, FOLDED, seed=77, presolve=True)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        loaded = load_instance(path)
        for name in ("A", "b", "c", "x_star", "s_star", "y_star"):
            assert getattr(inst, name).tobytes() == getattr(loaded, name).tobytes()
        assert np.array_equal(inst.basis, loaded.basis)
        assert loaded.seed == inst.seed and loaded.presolved == inst.presolved

    def test_save_deterministic_bytes(self, tmp_path):
        inst = gen_instance(3, 7, GAUSS, FOLDED, seed=5)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_instance(inst, p1)
        save_instance(inst, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_file_parse_error(self, tmp_path):
        inst = gen_instance(3, 7, GAUSS, FOLDED, seed=5)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(InstanceParseError):
            load_instance(path)

    def test_missing_field_parse_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format_version": 1, "m": 2, "n": 4}))
        with pytest.raises(InstanceParseError):
            load_instance(path)

    def test_corrupted_b_validation_error(self):
        inst = gen_instance(3, 7, GAUSS, FOLDED, seed=6)
        inst.b[0] += 1.0  # breaks b = A x_star
        with pytest.raises(InstanceValidationError):
            validate_instance(inst)

    def test_corrupted_file_validation_error(self, tmp_path):
        inst = gen_instance(3, 7, GAUSS, FOLDED, seed=8)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        doc = json.loads(path.read_text())
        doc["b"]["hex"][0] = (3.5).hex()  # b no longer equals A x_star
        path.write_text(json.dumps(doc))
        with pytest.raises(InstanceValidationError):
            load_instance(path)

    def test_mps_export_shape(self, tmp_path):
        inst = gen_instance(3, 6, GAUSS, FOLDED, seed=4)
        path = tmp_path / "inst.mps"
        write_mps(inst, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("NAME")
        assert "ROWS" in lines and "COLUMNS" in lines and "RHS" in lines
        assert lines[-1] == "ENDATA"
        assert " N  COST" in lines
        assert sum(1 for l in lines if l.startswith(" E  R")) == 3


class TestGeneratorProperties:
    def test_invariants_over_seeds(self):
        for seed in range(25):
            inst = gen_instance(4, 9, GAUSS, FOLDED, seed=seed, presolve=(seed % 2 == 0))
            validate_instance(inst)
            assert inst.certified
            u = inst.x_star + inst.s_star
            assert u.min() > 0  # strict complementarity

    def test_certification_rate_small_batch(self):
        # full 1000-instance sweep lives in the acceptance suite
        failures = 0
        for seed in range(100):
            try:
                gen_instance(25, 50, GAUSS, FOLDED, seed=seed, presolve=True)
            except CertificationError:
                failures += 1
        assert failures == 0

    def test_identical_seeds_identical_instances(self, tmp_path):
        a = gen_instance(6, 12, GAUSS, FOLDED, seed=99, presolve=True)
        b = gen_instance(6, 12, GAUSS, FOLDED, seed=99, presolve=True)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        save_instance(a, pa)
        save_instance(b, pb)
        assert pa.read_bytes() == pb.read_bytes()
