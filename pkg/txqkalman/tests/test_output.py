# Copyright (C) 2024 txQKalman Developers
#
# Permission is hereby granted, free of charge, to any person obtaining
# a copy of this software and associated documentation files (the
# "Software"), to deal in the Software without restriction, including
# without limitation the rights to use, copy, modify, merge, publish,
# distribute, sublicense, and/or sell copies of the Software, and to
# permit persons to whom the Software is furnished to do so, subject to
# the following conditions:
#
# The above copyright notice and this permission notice shall be
# included in all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND,
# EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF
# MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT.
# IN NO EVENT SHALL THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY
# CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION OF CONTRACT,
# TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE
# SOFTWARE OR THE USE OR OTHER DEALINGS IN THE SOFTWARE.

import json
import os

import numpy as np

from twisted.trial.unittest import TestCase

from txqkalman import output
from txqkalman.riccati import integrate_riccati
from txqkalman.tests.helper import oscillator


def read_lines(path):
    with open(path) as stream:
        return stream.read().splitlines()


class TestNumbers(TestCase):

    def test_twelve_digits(self):
        self.assertEqual("0.333333333333", output.number(1.0 / 3.0))
        self.assertEqual("1e-20", output.number(1e-20))
        self.assertEqual("NA", output.number(float("nan")))

    def test_json_number(self):
        self.assertEqual(0.333333333333, output.json_number(1.0 / 3.0))
        self.assertIdentical(None, output.json_number(float("inf")))
        self.assertIdentical(None, output.json_number(float("nan")))

    def test_json_matrix(self):
        self.assertEqual([[[1.0, -2.0], [0.5, 0.0]]],
                         output.json_matrix([[1 - 2j, 0.5]]))

    def test_dumps_is_sorted(self):
        self.assertEqual('{\n  "a": 1,\n  "b": 2\n}\n',
                         output.dumps({"b": 2, "a": 1}))
        self.assertRaises(ValueError, output.dumps, {"a": float("nan")})


class TestArtifacts(TestCase):

    def setUp(self):
        self.directory = output.ensure_directory(self.mktemp())

    def test_ensure_directory(self):
        self.assertTrue(os.path.isdir(self.directory))
        self.assertEqual(self.directory,
                         output.ensure_directory(self.directory))

    def test_riccati_csv(self):
        sig, ch = oscillator()
        synth = integrate_riccati(sig, ch, 0.1, 0.01)
        path = output.write_riccati_csv(
            os.path.join(self.directory, "riccati.csv"), synth)
        lines = read_lines(path)
        self.assertEqual("t,P_0_0_re,P_0_0_im,trace_error,K_0_0_re,K_0_0_im",
                         lines[0])
        self.assertEqual(12, len(lines))
        first = lines[1].split(",")
        self.assertEqual(["0", "3", "0", "3"], first[:4])

    def test_mc_summary_marks_missing_values(self):
        path = output.write_mc_summary_csv(
            os.path.join(self.directory, "mc_summary.csv"),
            [(0.5, 1.25, None, 1.2, None), (1.0, 1.0, 0.1, 1.1, -1.0)])
        self.assertEqual(["t,empirical_trace,standard_error,riccati_trace,"
                          "z_score", "0.5,1.25,NA,1.2,NA",
                          "1,1,0.1,1.1,-1"], read_lines(path))

    def test_record_csv(self):
        record = np.array([[1 + 2j, 0.5], [complex(0, -1), 0]])
        path = output.write_record_csv(
            os.path.join(self.directory, "record_0.csv"), 0.01, record)
        self.assertEqual(["t,re_dy1,im_dy1,re_dy2,im_dy2",
                          "0.01,1,2,0.5,0", "0.02,0,-1,0,0"],
                         read_lines(path))

    def test_write_json(self):
        path = output.write_json(os.path.join(self.directory, "r.json"),
                                 {"pass": True})
        with open(path) as stream:
            self.assertEqual({"pass": True}, json.load(stream))
