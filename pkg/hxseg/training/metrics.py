"""
Classification accuracy metrics.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import numpy as np
import pandas as pd

from hxseg import ShapeError


class MetricsReport(object):
    """
    Confusion matrix and derived accuracies.

    Parameters
    ----------
    confusion : ndarray
        K x K counts; rows are ground truth, columns predictions.
    oa : float
        Overall accuracy.
    aa : float
        Average of the defined per-class accuracies.
    kappa : float
        Cohen's kappa.
    pa : ndarray
        Per-class producer accuracy; NaN for classes absent from the ground
        truth.
    """
    def __init__(self, confusion, oa, aa, kappa, pa):
        self.confusion = confusion
        self.oa = oa
        self.aa = aa
        self.kappa = kappa
        self.pa = pa

    def __repr__(self):
        return 'MetricsReport(oa={:.4f}, aa={:.4f}, kappa={:.4f})'.format(
            self.oa, self.aa, self.kappa)


def confusion_matrix(pred, gt, num_classes, ignore=-1):
    """
    Confusion counts over pixels whose ground truth is not ignored.

    Parameters
    ----------
    pred : array_like
        Predicted labels.
    gt : array_like
        Ground-truth labels.
    num_classes : int
        Number of classes K.
    ignore : int, optional (default -1)
        Ground-truth label to skip.
    """
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError('Prediction {} and ground truth {} differ in shape.'
                         .format(pred.shape, gt.shape))
    mask = gt != ignore
    pred, gt = pred[mask].astype(np.int64), gt[mask].astype(np.int64)
    for name, values in [('ground truth', gt), ('prediction', pred)]:
        if np.any((values < 0) | (values >= num_classes)):
            raise ValueError('{} labels must lie in [0, {}).'.format(
                name.capitalize(), num_classes))
    counts = np.bincount(gt * num_classes + pred,
                         minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes)


def metrics_from_confusion(confusion):
    """
    OA, AA, kappa and per-class accuracy of a confusion matrix.

    Parameters
    ----------
    confusion : array_like
        K x K counts; rows are ground truth.
    """
    confusion = np.asarray(confusion, dtype=np.int64)
    total = confusion.sum()
    if total == 0:
        raise ValueError('No labeled pixels to evaluate.')
    rows = confusion.sum(axis=1)
    cols = confusion.sum(axis=0)
    diagonal = np.diag(confusion)
    oa = diagonal.sum() / float(total)
    with np.errstate(invalid='ignore', divide='ignore'):
        pa = np.where(rows > 0, diagonal / rows.astype(float), np.nan)
    aa = float(np.nanmean(pa))
    p_e = float(np.dot(rows, cols)) / float(total) ** 2
    kappa = 1. if p_e == 1 else (oa - p_e) / (1. - p_e)
    return MetricsReport(confusion, oa, aa, kappa, pa)


def compute_metrics(pred, gt, num_classes, ignore=-1):
    """
    Evaluate a predicted label map against ground truth.

    Parameters
    ----------
    pred : array_like
        Predicted labels.
    gt : array_like
        Ground-truth labels.
    num_classes : int
        Number of classes K.
    ignore : int, optional (default -1)
        Ground-truth label to skip.
    """
    return metrics_from_confusion(
        confusion_matrix(pred, gt, num_classes, ignore))


def format_report(report):
    """
    Canonical text: the confusion matrix, then OA, AA, kappa and PA_i as
    percentages with two decimals.

    Parameters
    ----------
    report : MetricsReport
        Report.
    """
    k = len(report.confusion)
    df = pd.DataFrame(report.confusion)
    lines = ['# confusion matrix (rows = ground truth, columns = prediction)']
    lines.extend(df.to_csv(header=False, index=False).splitlines())
    lines.append('OA = {:.2f}'.format(100 * report.oa))
    lines.append('AA = {:.2f}'.format(100 * report.aa))
    lines.append('kappa = {:.2f}'.format(100 * report.kappa))
    for i in range(k):
        value = report.pa[i]
        lines.append('PA_{} = {}'.format(
            i, 'none' if np.isnan(value) else '{:.2f}'.format(100 * value)))
    return '\n'.join(lines) + '\n'


def comparison_table(rows, columns=('OA', 'AA', 'kappa')):
    """
    Side-by-side table of several reports.

    Parameters
    ----------
    rows : list
        (variant name, MetricsReport) pairs.
    columns : tuple, optional
        Report fields to show.
    """
    fields = {'OA': 'oa', 'AA': 'aa', 'kappa': 'kappa'}
    data = [[100 * getattr(report, fields[c]) for c in columns]
            for _, report in rows]
    df = pd.DataFrame(data, index=[name for name, _ in rows],
                      columns=list(columns))
    df.index.name = 'variant'
    return df.round(2)
