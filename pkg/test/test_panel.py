"""
Test the observation panel.
"""

import os
import shutil
import tempfile
import unittest

import numpy as np

from jointdiffusion.exc import DataError, WindowViolation
from jointdiffusion.panel import ComplementSeries, ObservationPanel, load_panel
from test.util import tame_result


class ObservationPanelTestCase(unittest.TestCase): # pylint: disable=R0904
    """
    jointdiffusion.panel.ObservationPanel
    """

    @classmethod
    def setUpClass(cls):
        cls.panel = tame_result(T=60, J=2, seed=4).panel

    def test_save_load(self):
        """
        ObservationPanel.save() and load_panel()
        """
        directory = tempfile.mkdtemp()
        try:
            panel = ObservationPanel.from_dict(self.panel.to_dict())
            panel.y[10] = np.nan
            path = panel.save(os.path.join(directory, "panel.json"))
            again = load_panel(path)
            self.assertTrue(np.isnan(again.y[10]))
            np.testing.assert_array_equal(again.Z_raw, panel.Z_raw)
            self.assertEqual(again.ids, panel.ids)
            self.assertEqual(again.complement(1).releases, panel.complement(1).releases)
            self.assertEqual(again.dumps(), panel.dumps())
        finally:
            shutil.rmtree(directory)

    def test_schema(self):
        """
        ObservationPanel.from_dict() checks the schema tag
        """
        data = self.panel.to_dict()
        data["schema"] = "other/1"
        with self.assertRaises(DataError):
            ObservationPanel.from_dict(data)

    def test_truncate(self):
        """
        ObservationPanel.truncate() drops later days and complements
        """
        launch = self.panel.complement(1).launch
        short = self.panel.truncate(launch - 1)
        self.assertEqual(short.T, launch - 1)
        self.assertEqual(short.ids, [self.panel.ids[0]])
        first = short.complement(0)
        self.assertEqual(first.end, launch - 1)
        self.assertEqual(len(first.y), launch - first.launch)
        np.testing.assert_array_equal(short.y, self.panel.y[:launch - 1])

    def test_frames(self):
        """
        ObservationPanel.frame() and complement_frame()
        """
        frame = self.panel.frame(3)
        np.testing.assert_array_equal(frame.Z, self.panel.Z[2])
        series = self.panel.complement(0)
        cframe = self.panel.complement_frame(0, series.launch)
        self.assertEqual(cframe.PV, series.PV[0])
        raw = self.panel.complement_frame(0, series.launch, carryover=False)
        self.assertEqual(raw.PV, series.PV_raw[0])
        with self.assertRaises(WindowViolation):
            series.frame(series.launch - 1)

    def test_lookup(self):
        """
        ObservationPanel.complement() by id and position
        """
        self.assertIs(self.panel.complement("addon01"), self.panel.complement(1))
        with self.assertRaises(KeyError):
            self.panel.complement("missing")

    def test_design_matrix(self):
        """
        ObservationPanel.design_matrix() intercept first
        """
        D = self.panel.design_matrix()
        self.assertEqual(D.shape, (2, 6))
        np.testing.assert_array_equal(D[:, 0], [1.0, 1.0])

    def test_release_frame(self):
        """
        ObservationPanel.release_frame() one row per complement day
        """
        frame = self.panel.release_frame()
        self.assertEqual(list(frame.columns), ["day", "complement", "PV", "AV", "PV_raw", "AV_raw"])
        series = self.panel.complement(1)
        rows = frame[frame["complement"] == series.id]
        np.testing.assert_array_equal(rows["day"], series.days)
        np.testing.assert_array_equal(rows["PV"], series.PV)
        np.testing.assert_array_equal(rows["AV_raw"], series.AV_raw)
        self.assertEqual(len(frame), sum(len(s) for s in self.panel.complements))

    def test_with_governance(self):
        """
        ObservationPanel.with_governance() replaces Z only
        """
        Z = np.zeros_like(self.panel.Z)
        other = self.panel.with_governance(Z)
        np.testing.assert_array_equal(other.Z, Z)
        np.testing.assert_array_equal(other.Z_raw, self.panel.Z_raw)
        self.assertIsNot(other.Z, self.panel.Z)

    def test_window_violation(self):
        """
        ObservationPanel rejects complements outside the window
        """
        series = self.panel.complement(0)
        late = ComplementSeries.from_dict(
            dict(series.to_dict(), launch=series.launch + 1, end=61)
        )
        with self.assertRaises(WindowViolation):
            ObservationPanel(y=self.panel.y, X=self.panel.X, Z=self.panel.Z, A=self.panel.A,
                             complements=[late])


if __name__ == '__main__':
    unittest.main()
