"""Confusion scores, dice/iou, history CSV, overlays, and report tables."""

import numpy as np
import pytest

from glioseg import metrics
from glioseg.blocks import ParamAudit
from glioseg.data import Dataset, Sample
from glioseg.netpbm import read_pnm
from glioseg.tensor import Tensor
from glioseg.train import History, HistoryRow


def counting_oracle(a, b):
    """Per-pixel loop computing (dice, iou) from raw counts."""
    inter = size_a = size_b = 0
    for x, y in zip(a.ravel(), b.ravel()):
        size_a += int(x)
        size_b += int(y)
        inter += int(x and y)
    union = size_a + size_b - inter
    if union == 0:
        return 1.0, 1.0
    return 2.0 * inter / (size_a + size_b), inter / union


def labels_for(tp, fp, fn, tn):
    """Build (predicted, true) vectors realizing the given counts."""
    predicted = [1] * tp + [1] * fp + [0] * fn + [0] * tn
    true = [1] * tp + [0] * fp + [1] * fn + [0] * tn
    return predicted, true


class TestClassificationScores:
    def test_all_correct(self):
        scores = metrics.classification_scores([1, 0, 1, 0], [1, 0, 1, 0])
        assert scores.accuracy == 1.0
        assert scores.f1 == 1.0
        assert scores.undefined == ()

    def test_counted_example(self):
        predicted, true = labels_for(tp=4, fp=1, fn=1, tn=4)
        scores = metrics.classification_scores(predicted, true)
        assert scores.counts == metrics.ConfusionCounts(4, 1, 1, 4)
        assert scores.f1 == pytest.approx(0.8, abs=1e-12)
        assert scores.accuracy == pytest.approx(0.8, abs=1e-12)
        assert scores.precision == pytest.approx(0.8, abs=1e-12)
        assert scores.recall == pytest.approx(0.8, abs=1e-12)

    def test_counts_sum_to_items(self, rng):
        predicted = rng.integers(0, 2, size=50)
        true = rng.integers(0, 2, size=50)
        scores = metrics.classification_scores(predicted, true)
        assert scores.counts.total == 50

    def test_zero_denominators_flagged(self):
        scores = metrics.classification_scores([0, 0, 0], [0, 0, 0])
        assert scores.accuracy == 1.0
        assert scores.precision == 0.0
        assert scores.recall == 0.0
        assert scores.f1 == 0.0
        assert set(scores.undefined) == {"precision", "recall", "f1"}

    def test_argument_swap_swaps_precision_recall(self):
        predicted, true = labels_for(tp=3, fp=2, fn=5, tn=1)
        fwd = metrics.classification_scores(predicted, true)
        rev = metrics.classification_scores(true, predicted)
        assert fwd.precision == rev.recall
        assert fwd.recall == rev.precision
        assert fwd.f1 == rev.f1

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            metrics.classification_scores([1, 0], [1])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no items"):
            metrics.classification_scores([], [])

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError, match="predicted"):
            metrics.classification_scores([2, 0], [1, 0])
        with pytest.raises(ValueError, match="true"):
            metrics.classification_scores([1, 0], [1, 0.5])


class TestDiceIou:
    def test_identical_masks(self, rng):
        m = rng.integers(0, 2, size=(16, 16))
        assert metrics.dice_iou(m, m) == (1.0, 1.0)

    def test_disjoint_masks(self):
        a = np.zeros((4, 4), dtype=int)
        b = np.zeros((4, 4), dtype=int)
        a[0, 0] = 1
        b[3, 3] = 1
        assert metrics.dice_iou(a, b) == (0.0, 0.0)

    def test_both_empty_convention(self):
        z = np.zeros((8, 8), dtype=int)
        assert metrics.dice_iou(z, z) == (1.0, 1.0)

    def test_half_overlap_counts(self):
        # |A| = |B| = 4 with exactly 2 shared pixels
        a = np.zeros((3, 3), dtype=int)
        b = np.zeros((3, 3), dtype=int)
        a.ravel()[[0, 1, 2, 3]] = 1
        b.ravel()[[2, 3, 4, 5]] = 1
        dice, iou = metrics.dice_iou(a, b)
        assert dice == pytest.approx(0.5, abs=1e-15)
        assert iou == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            metrics.dice_iou(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError, match="binary"):
            metrics.dice_iou(np.full((2, 2), 0.5), np.zeros((2, 2)))

    def test_matches_counting_oracle_on_random_pairs(self):
        rng = np.random.default_rng(77)
        for _ in range(1000):
            density = rng.uniform(0.0, 1.0)
            a = (rng.random((16, 16)) < density).astype(int)
            b = (rng.random((16, 16)) < rng.uniform(0.0, 1.0)).astype(int)
            dice, iou = metrics.dice_iou(a, b)
            ref_dice, ref_iou = counting_oracle(a, b)
            assert abs(dice - ref_dice) < 1e-12
            assert abs(iou - ref_iou) < 1e-12

    def test_dice_iou_identity(self, rng):
        for _ in range(200):
            a = (rng.random((12, 12)) < 0.4).astype(int)
            b = (rng.random((12, 12)) < 0.4).astype(int)
            dice, iou = metrics.dice_iou(a, b)
            assert dice == pytest.approx(2.0 * iou / (1.0 + iou), abs=1e-15)

    def test_pixelwise_f1_equals_dice(self, rng):
        for _ in range(50):
            a = (rng.random((10, 10)) < 0.3).astype(int)
            b = (rng.random((10, 10)) < 0.3).astype(int)
            if not (a | b).any():
                continue
            dice, _ = metrics.dice_iou(a, b)
            scores = metrics.classification_scores(a.ravel(), b.ravel())
            assert scores.f1 == pytest.approx(dice, abs=1e-15)

    def test_symmetry(self, rng):
        a = (rng.random((9, 9)) < 0.5).astype(int)
        b = (rng.random((9, 9)) < 0.5).astype(int)
        assert metrics.dice_iou(a, b) == metrics.dice_iou(b, a)

    def test_mean_dice_thresholds_probability_maps(self):
        mask = np.zeros((1, 4, 4))
        mask[0, 1:3, 1:3] = 1.0
        hit = np.where(mask > 0, 0.9, 0.1)
        miss = np.where(mask > 0, 0.1, 0.9)
        assert metrics.mean_dice([hit, hit], [mask, mask]) == 1.0
        assert metrics.mean_dice([hit, miss], [mask, mask]) == pytest.approx(0.5)


def history_of(n_epochs, bump=0.0):
    rows = [HistoryRow(epoch=e + 1, train_acc=0.5 + bump, val_acc=0.5,
                       train_loss=0.4, val_loss=0.5, seconds=0.0)
            for e in range(n_epochs)]
    return History(rows=rows, meta={})


class TestHistoryCsv:
    def test_fifteen_epochs_give_sixteen_lines(self, tmp_path):
        p = tmp_path / "history.csv"
        metrics.history_csv(history_of(15), p)
        lines = p.read_text().splitlines()
        assert len(lines) == 16
        assert lines[0] == "epoch,train_acc,val_acc,train_loss,val_loss,seconds"

    def test_row_formatting(self, tmp_path):
        p = tmp_path / "h.csv"
        history = History([HistoryRow(1, 0.5, 0.25, 1.0 / 3.0, 0.125, 0.0)])
        metrics.history_csv(history, p)
        assert p.read_text().splitlines()[1] == \
            "1,0.500000,0.250000,0.333333,0.125000,0.000000"

    def test_reserialization_is_byte_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        metrics.history_csv(history_of(7), a)
        metrics.history_csv(history_of(7), b)
        assert a.read_bytes() == b.read_bytes()

    def test_injective_on_distinct_histories(self, tmp_path):
        base = History([HistoryRow(1, 0.5, 0.5, 0.4, 0.3, 0.0)])
        variants = [
            History([HistoryRow(2, 0.5, 0.5, 0.4, 0.3, 0.0)]),
            History([HistoryRow(1, 0.75, 0.5, 0.4, 0.3, 0.0)]),
            History([HistoryRow(1, 0.5, 0.75, 0.4, 0.3, 0.0)]),
            History([HistoryRow(1, 0.5, 0.5, 0.75, 0.3, 0.0)]),
            History([HistoryRow(1, 0.5, 0.5, 0.4, 0.75, 0.0)]),
            History([HistoryRow(1, 0.5, 0.5, 0.4, 0.3, 0.75)]),
        ]
        ref = tmp_path / "ref.csv"
        metrics.history_csv(base, ref)
        blobs = {ref.read_bytes()}
        for i, variant in enumerate(variants):
            p = tmp_path / f"v{i}.csv"
            metrics.history_csv(variant, p)
            blobs.add(p.read_bytes())
        assert len(blobs) == len(variants) + 1

    def test_empty_history_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no rows"):
            metrics.history_csv(History([]), tmp_path / "e.csv")


class TestContour:
    def test_solid_block_leaves_border_ring(self):
        mask = np.zeros((5, 5), dtype=int)
        mask[1:4, 1:4] = 1
        ring = metrics.contour(mask)
        expected = mask.copy()
        expected[2, 2] = 0
        np.testing.assert_array_equal(ring.astype(int), expected)

    def test_single_pixel_is_its_own_contour(self):
        mask = np.zeros((4, 4), dtype=int)
        mask[2, 1] = 1
        np.testing.assert_array_equal(metrics.contour(mask).astype(int), mask)

    def test_contour_subset_of_mask(self, rng):
        mask = (rng.random((20, 20)) < 0.5).astype(int)
        ring = metrics.contour(mask)
        assert not (ring & ~mask.astype(bool)).any()


def read_panels(path, width):
    """Split the rendered strip back into its five panels."""
    strip = read_pnm(path)
    panels = []
    for k in range(5):
        start = k * (width + 1)
        panels.append(strip[:, start:start + width])
    return strip, panels


class TestOverlayRender:
    def _scene(self):
        rng = np.random.default_rng(5)
        image = rng.random((1, 12, 10))
        gt = np.zeros((12, 10), dtype=int)
        gt[3:7, 2:6] = 1
        pred = np.zeros((12, 10), dtype=int)
        pred[4:8, 3:7] = 1
        return image, gt, pred

    def test_strip_geometry(self, tmp_path):
        image, gt, pred = self._scene()
        p = tmp_path / "o.ppm"
        metrics.overlay_render(image, gt, pred, p)
        strip = read_pnm(p)
        assert strip.shape == (12, 5 * 10 + 4, 3)
        # separators sit between panels at mid-gray
        for k in range(1, 5):
            assert (strip[:, k * 11 - 1] == 128).all()

    def test_mask_panels_are_binary_white(self, tmp_path):
        image, gt, pred = self._scene()
        p = tmp_path / "o.ppm"
        metrics.overlay_render(image, gt, pred, p)
        _, panels = read_panels(p, 10)
        np.testing.assert_array_equal(panels[1][:, :, 0], gt.astype(np.uint8) * 255)
        np.testing.assert_array_equal(panels[2][:, :, 0], pred.astype(np.uint8) * 255)

    def test_empty_prediction_has_no_red(self, tmp_path):
        image, gt, _ = self._scene()
        p = tmp_path / "o.ppm"
        metrics.overlay_render(image, gt, np.zeros_like(gt), p)
        _, panels = read_panels(p, 10)
        for panel in (panels[2], panels[4]):
            red = (panel[:, :, 0] > panel[:, :, 1]) | (panel[:, :, 0] > panel[:, :, 2])
            assert not red.any()

    def test_identical_masks_share_contour_positions(self, tmp_path):
        image, gt, _ = self._scene()
        p = tmp_path / "o.ppm"
        metrics.overlay_render(image, gt, gt, p)
        _, panels = read_panels(p, 10)
        green = np.all(panels[3] == (0, 255, 0), axis=2)
        red = np.all(panels[4] == (255, 0, 0), axis=2)
        np.testing.assert_array_equal(green, red)
        np.testing.assert_array_equal(green, metrics.contour(gt))

    def test_shape_mismatch_rejected(self, tmp_path):
        image, gt, _ = self._scene()
        with pytest.raises(ValueError, match="shape"):
            metrics.overlay_render(image, gt, np.zeros((3, 3)), tmp_path / "x.ppm")


class _StubModel:
    """Fixed-function model exposing the evaluation interface."""

    def __init__(self, name, head, fn, audit):
        self.name = name
        self.head = head
        self._fn = fn
        self._audit = audit

    def eval(self):
        return self

    def param_audit(self):
        return self._audit

    def forward(self, x):
        return Tensor(self._fn(np.asarray(x)))


def _segmentation_dataset():
    """Masks recoverable from the image itself, so a thresholding stub
    is a perfect segmenter."""
    samples = []
    for i in range(5):
        mask = np.zeros((1, 8, 8))
        if i < 4:
            mask[0, i:i + 3, 2:5] = 1.0
        samples.append(Sample(case_id=f"case-{i}", image=mask.copy(),
                              mask=mask, label=int(mask.any())))
    return Dataset(samples).validate()


class TestEvaluate:
    def test_perfect_segmenter_scores_dice_one(self):
        ds = _segmentation_dataset()
        model = _StubModel("echo", "segmenter",
                           lambda x: np.clip(x, 0.02, 0.98),
                           ParamAudit(10, 8, 2))
        report = metrics.evaluate([model], ds)
        (row,) = report.rows
        assert row["mean_dice"] == 1.0
        assert row["mean_iou"] == 1.0
        assert row["f1"] == 1.0
        assert row["both_empty"] == 1
        assert row["items"] == 5

    def test_one_row_per_model_and_audit_sums(self):
        ds = _segmentation_dataset()
        stubs = [
            _StubModel("seg", "segmenter", lambda x: np.clip(x, 0.02, 0.98),
                       ParamAudit(10, 8, 2)),
            _StubModel("cls", "classifier",
                       lambda x: np.stack([1.0 - x.max(axis=(1, 2, 3)),
                                           x.max(axis=(1, 2, 3))], axis=1),
                       ParamAudit(7, 7, 0)),
        ]
        report = metrics.evaluate(stubs, ds)
        assert len(report.rows) == 2
        for row in report.rows:
            assert row["params_trainable"] + row["params_non_trainable"] \
                == row["params_total"]

    def test_correct_classifier_row(self):
        ds = _segmentation_dataset()
        model = _StubModel(
            "cls", "classifier",
            lambda x: np.stack([1.0 - np.clip(x.max(axis=(1, 2, 3)), 0.1, 0.9),
                                np.clip(x.max(axis=(1, 2, 3)), 0.1, 0.9)], axis=1),
            ParamAudit(7, 7, 0))
        (row,) = metrics.evaluate([model], ds).rows
        assert row["accuracy"] == 1.0
        assert row["f1"] == 1.0
        assert row["mean_dice"] is None
        assert row["loss"] > 0.0

    def test_report_csv_round_trip(self, tmp_path):
        ds = _segmentation_dataset()
        model = _StubModel("echo", "segmenter",
                           lambda x: np.clip(x, 0.02, 0.98),
                           ParamAudit(10, 8, 2))
        report = metrics.evaluate([model], ds)
        p = tmp_path / "report.csv"
        report.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == ",".join(metrics.EvalReport.COLUMNS)
        assert len(lines) == 2
        cells = lines[1].split(",")
        assert cells[0] == "echo"
        assert cells[3] == "1.000000"
        assert cells[9:12] == ["10", "8", "2"]
