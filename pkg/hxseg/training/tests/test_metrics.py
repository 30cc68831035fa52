"""
Tests for accuracy metrics.
"""
import numpy as np
import numpy.testing as npt
import unittest

from hxseg import ShapeError
from ..metrics import (comparison_table, compute_metrics, confusion_matrix,
                       format_report, metrics_from_confusion)


def direct_metrics(confusion):
    """Loop-based OA, AA, kappa and PA."""
    k = len(confusion)
    total = 0.
    correct = 0.
    for i in range(k):
        for j in range(k):
            total += confusion[i][j]
        correct += confusion[i][i]
    pa = []
    for i in range(k):
        row = sum(confusion[i][j] for j in range(k))
        if row:
            pa.append(confusion[i][i] / float(row))
    p_e = 0.
    for i in range(k):
        row = sum(confusion[i][j] for j in range(k))
        col = sum(confusion[j][i] for j in range(k))
        p_e += row * col / (total * total)
    oa = correct / total
    return oa, sum(pa) / len(pa), (oa - p_e) / (1 - p_e), pa


class TestMetrics(unittest.TestCase):
    """
    Tests for compute_metrics.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(8)

    def test_perfect(self):
        """
        Perfect predictions give OA = AA = kappa = 1.
        """
        gt = self.rng.randint(4, size=(6, 6))
        report = compute_metrics(gt, gt, 4)
        assert report.oa == report.aa == report.kappa == 1.
        npt.assert_array_equal(report.pa, 1.)

    def test_hand_case(self):
        """
        [[2, 0], [1, 1]] gives OA 0.75 and kappa 0.5.
        """
        gt = np.array([0, 0, 1, 1])
        pred = np.array([0, 0, 0, 1])
        report = compute_metrics(pred, gt, 2)
        npt.assert_array_equal(report.confusion, [[2, 0], [1, 1]])
        assert report.oa == 0.75
        assert report.kappa == 0.5
        npt.assert_allclose(report.pa, [1., 0.5])
        assert report.aa == 0.75

    def test_oracle(self):
        """
        Random confusion matrices match a loop-based evaluation.
        """
        for _ in range(100):
            k = self.rng.randint(2, 8)
            confusion = self.rng.randint(0, 20, size=(k, k))
            confusion[0, 0] += 1
            report = metrics_from_confusion(confusion)
            oa, aa, kappa, pa = direct_metrics(confusion.tolist())
            assert abs(report.oa - oa) < 1e-12
            assert abs(report.aa - aa) < 1e-12
            assert abs(report.kappa - kappa) < 1e-12
            npt.assert_allclose(report.pa[~np.isnan(report.pa)], pa,
                                atol=1e-12)
            assert 0 <= report.oa <= 1 and -1 <= report.kappa <= 1

    def test_permutation_invariance(self):
        """
        Relabelling classes identically in both maps keeps OA and kappa.
        """
        gt = self.rng.randint(5, size=200)
        pred = np.where(self.rng.rand(200) < 0.7, gt,
                        self.rng.randint(5, size=200))
        perm = self.rng.permutation(5)
        a = compute_metrics(pred, gt, 5)
        b = compute_metrics(perm[pred], perm[gt], 5)
        assert abs(a.oa - b.oa) < 1e-12
        assert abs(a.kappa - b.kappa) < 1e-12
        assert a.kappa <= a.oa

    def test_kappa_bounded_by_oa(self):
        """
        kappa <= OA whenever chance agreement p_e lies in (0, OA], over
        random predictions of varying skill, class count and imbalance.
        """
        checked = 0
        for _ in range(500):
            k = self.rng.randint(2, 10)
            n = self.rng.randint(5, 400)
            prior = self.rng.dirichlet(np.full(k, self.rng.uniform(0.2, 5.)))
            gt = self.rng.choice(k, size=n, p=prior)
            skill = self.rng.rand()
            pred = np.where(self.rng.rand(n) < skill, gt,
                            self.rng.randint(k, size=n))
            report = compute_metrics(pred, gt, k)
            confusion = report.confusion.astype(float)
            p_e = (confusion.sum(axis=1).dot(confusion.sum(axis=0)) /
                   confusion.sum() ** 2)
            if 0. < p_e <= report.oa:
                checked += 1
                assert report.kappa <= report.oa + 1e-12, (confusion, report)
        assert checked > 100

    def test_ignore(self):
        """
        Ignored ground truth is skipped; all-ignored maps are rejected.
        """
        gt = np.array([[0, -1], [1, -1]])
        pred = np.array([[0, 3], [1, 0]])
        report = compute_metrics(pred, gt, 2)
        assert report.confusion.sum() == 2
        with self.assertRaises(ValueError):
            compute_metrics(pred, np.full((2, 2), -1), 2)

    def test_absent_class(self):
        """
        Classes missing from the ground truth do not enter AA.
        """
        report = metrics_from_confusion([[3, 1, 0], [0, 0, 0], [0, 0, 4]])
        assert np.isnan(report.pa[1])
        npt.assert_allclose(report.aa, (0.75 + 1.) / 2)

    def test_bad_inputs(self):
        """
        Shape mismatches and out-of-range labels are rejected.
        """
        with self.assertRaises(ShapeError):
            confusion_matrix(np.zeros(3), np.zeros(4), 2)
        with self.assertRaises(ValueError):
            confusion_matrix(np.array([2]), np.array([0]), 2)

    def test_format(self):
        """
        Reports render as percentages with two decimals.
        """
        report = metrics_from_confusion([[2, 0], [1, 1]])
        text = format_report(report)
        lines = text.splitlines()
        assert lines[1:3] == ['2,0', '1,1']
        assert 'OA = 75.00' in lines
        assert 'kappa = 50.00' in lines
        assert 'PA_1 = 50.00' in lines

    def test_comparison_table(self):
        """
        Variant tables carry one row per variant.
        """
        a = metrics_from_confusion([[2, 0], [1, 1]])
        b = metrics_from_confusion([[2, 0], [0, 2]])
        df = comparison_table([('C-C-T-T', a), ('C-C-C-C', b)])
        assert list(df.index) == ['C-C-T-T', 'C-C-C-C']
        assert df.loc['C-C-T-T', 'OA'] == 75.
        assert df.loc['C-C-C-C', 'kappa'] == 100.
